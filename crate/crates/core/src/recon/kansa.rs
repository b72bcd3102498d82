use crate::kernels::RbfKind;
use crate::linsolve::{DenseSystem, SolveOptions};
use crate::model::{ImplicitModel, Kernel, Method};
use crate::pointcloud::{bounding_box, default_rho, interior_points, InteriorNodes, PointCloud};
use crate::{Error, Result};

pub const DEFAULT_KANSA_SHAPE: f64 = 300.0;

/// How interior collocation nodes are placed for [`default_interior`].
#[derive(Debug, Clone, Copy)]
pub struct KansaInterior {
    /// Interior count as a fraction of `N`, rounded up.
    pub fraction: f64,
    /// Inward offset in units of `ϱ = 0.01 · d_max`.
    pub offset_in_rho: f64,
}

impl Default for KansaInterior {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            offset_in_rho: 5.0,
        }
    }
}

/// `⌈fraction · N⌉` inward offsets at `δ = offset_in_rho · ϱ`.
pub fn default_interior(cloud: &PointCloud, opts: &KansaInterior) -> Result<InteriorNodes> {
    if !(opts.fraction > 0.0 && opts.fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "interior fraction must lie in (0, 1], got {}",
            opts.fraction
        )));
    }
    let count = (opts.fraction * cloud.len() as f64).ceil() as usize;
    let delta = opts.offset_in_rho * default_rho(&bounding_box(cloud)?);
    interior_points(cloud, delta, count.max(1))
}

/// Kansa collocation of `Δu − λu = 1` at `interior` and `u = 1` on the cloud.
/// NMQ centers sit on every collocation node, interior nodes first, so the
/// system is square with `|interior| + N` unknowns.
pub fn build_kansa(
    cloud: &PointCloud,
    interior: &PointCloud,
    lambda: f64,
    c: f64,
) -> Result<ImplicitModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "Kansa lambda must be positive, got {lambda}"
        )));
    }
    let kind = RbfKind::NormalizedMultiquadric { c };
    kind.validate()?;
    if interior.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let ni = interior.len();
    let nodes: Vec<_> = interior
        .points()
        .iter()
        .chain(cloud.points())
        .copied()
        .collect();
    let mut system = DenseSystem::zeros(nodes.len(), nodes.len())?;
    system.par_fill(|i, j| {
        let r = (nodes[i] - nodes[j]).norm();
        if i < ni {
            kind.laplacian_3d(r) - lambda * kind.eval(r)
        } else {
            kind.eval(r)
        }
    });
    system.rhs_mut().fill(1.0);
    let (alpha, diag) = super::solve_checked(&system, SolveOptions::default())?;
    let kernel = Kernel::Rbf(kind);
    Ok(
        ImplicitModel::new(Method::Kansa, kernel, nodes, alpha, Method::Kansa.level())?
            .with_diagnostics(diag)
            .with_domain(bounding_box(cloud)?),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{datasets, Point};

    #[test]
    fn sphere_boundary_and_pde_residuals() {
        let cloud = datasets::sphere(500, true);
        let interior = default_interior(&cloud, &KansaInterior::default()).unwrap();
        assert_eq!(interior.nodes.len(), 250);
        let lambda = 50.0;
        let m = build_kansa(&cloud, &interior.nodes, lambda, 300.0).unwrap();
        let d = m.diagnostics().unwrap();
        assert_eq!((d.rows, d.unknowns), (750, 750));
        assert!(d.rows < 3 * cloud.len());
        assert_eq!(m.level(), 1.0);

        let boundary = cloud
            .points()
            .iter()
            .map(|p| (m.evaluate(p) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(boundary <= 1e-3, "boundary residual {boundary}");
        let pde = interior
            .nodes
            .points()
            .iter()
            .map(|p| (m.laplacian(p).unwrap() - lambda * m.evaluate(p) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(pde <= 1e-2 * (1.0 + lambda), "pde residual {pde}");

        // Level-set sanity: the center and a far point straddle κ.
        let (inside, outside) = (
            m.evaluate(&Point::origin()),
            m.evaluate(&Point::new(3.0, 0.0, 0.0)),
        );
        assert!((inside - 1.0) * (outside - 1.0) < 0.0, "{inside} {outside}");
    }

    #[test]
    fn interior_rows_match_independent_operator() {
        // Rebuild each interior row entrywise from the closed-form NMQ Laplacian and
        // compare against the kernel module's operator.
        let cloud = datasets::sphere(60, true);
        let interior = default_interior(&cloud, &KansaInterior::default()).unwrap();
        let (lambda, c) = (7.0, 4.0);
        let m = build_kansa(&cloud, &interior.nodes, lambda, c).unwrap();
        assert_eq!(m.centers().len(), interior.nodes.len() + cloud.len());
        let kind = RbfKind::NormalizedMultiquadric { c };
        for x in interior.nodes.points() {
            for xi in m.centers() {
                let r = (x - xi).norm();
                let s = (1.0 + c * c * r * r).sqrt();
                let by_hand = c * c * (3.0 + 2.0 * c * c * r * r) / (s * s * s) - lambda * s;
                let via_kernel = kind.laplacian_3d(r) - lambda * kind.eval(r);
                assert!((by_hand - via_kernel).abs() <= 1e-12 * by_hand.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_zero_lambda_and_empty_interior() {
        let cloud = datasets::sphere(40, true);
        let interior = default_interior(&cloud, &KansaInterior::default()).unwrap();
        assert!(matches!(
            build_kansa(&cloud, &interior.nodes, 0.0, 300.0),
            Err(Error::InvalidParameter(_))
        ));
        let empty = PointCloud::new(Vec::<Point>::new(), None, "empty").unwrap();
        assert!(matches!(
            build_kansa(&cloud, &empty, 1.0, 300.0),
            Err(Error::EmptyInterior)
        ));
    }
}
