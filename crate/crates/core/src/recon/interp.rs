use crate::kernels::RbfKind;
use crate::linsolve::{DenseSystem, SolveOptions};
use crate::model::{ImplicitModel, Kernel, Method};
use crate::pointcloud::{bounding_box, default_rho, offset_points, PointCloud};
use crate::{Error, Point, Result};

pub const DEFAULT_MQ_SHAPE: f64 = 300.0;

#[derive(Debug, Clone, Copy)]
pub struct MqOptions {
    /// NMQ shape parameter `c`.
    pub c: f64,
    /// Off-surface offset; `0.01 · d_max` when `None`.
    pub rho: Option<f64>,
    pub ridge: f64,
}

impl Default for MqOptions {
    fn default() -> Self {
        Self {
            c: DEFAULT_MQ_SHAPE,
            rho: None,
            ridge: 0.0,
        }
    }
}

/// NMQ interpolation through the cloud (value 0) and its `±ϱ` normal offsets
/// (`+1` outside, `−1` inside). Square `3N × 3N` system, level 0.
pub fn build_mq(cloud: &PointCloud, c: f64, rho: Option<f64>) -> Result<ImplicitModel> {
    build_mq_with(cloud, &MqOptions { c, rho, ridge: 0.0 })
}

pub fn build_mq_with(cloud: &PointCloud, opts: &MqOptions) -> Result<ImplicitModel> {
    let kind = RbfKind::NormalizedMultiquadric { c: opts.c };
    kind.validate()?;
    if !cloud.has_normals() {
        return Err(Error::MissingNormals);
    }
    let rho = match opts.rho {
        Some(r) => r,
        None => default_rho(&bounding_box(cloud)?),
    };
    let (outside, inside) = offset_points(cloud, rho)?;
    let n = cloud.len();
    let nodes: Vec<Point> = cloud
        .points()
        .iter()
        .chain(outside.points())
        .chain(inside.points())
        .copied()
        .collect();
    let mut rhs = vec![0.0; 3 * n];
    rhs[n..2 * n].fill(1.0);
    rhs[2 * n..].fill(-1.0);

    let mut system = DenseSystem::zeros(3 * n, 3 * n)?;
    system.par_fill(|i, j| kind.eval((nodes[i] - nodes[j]).norm()));
    system.rhs_mut().copy_from_slice(&rhs);
    let (alpha, diag) = super::solve_checked(&system, SolveOptions { ridge: opts.ridge })?;
    Ok(ImplicitModel::new(
        Method::Mq,
        Kernel::Rbf(kind),
        nodes,
        alpha,
        Method::Mq.level(),
    )?
    .with_diagnostics(diag)
    .with_domain(bounding_box(cloud)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interpolates_surface_and_offsets() {
        let cloud = datasets::sphere(500, true);
        let m = build_mq(&cloud, 300.0, None).unwrap();
        assert_eq!(m.centers().len(), 1500);
        assert_eq!(m.level(), 0.0);
        let d = m.diagnostics().unwrap();
        assert_eq!((d.rows, d.unknowns), (1500, 1500));
        let rho = default_rho(&bounding_box(&cloud).unwrap());
        let (out, inn) = offset_points(&cloud, rho).unwrap();
        let u = |p: &Point| m.evaluate(p);
        assert!(cloud.points().iter().all(|p| u(p).abs() <= 1e-6));
        assert!(out.points().iter().all(|p| (u(p) - 1.0).abs() <= 1e-6));
        assert!(inn.points().iter().all(|p| (u(p) + 1.0).abs() <= 1e-6));
        assert!(u(&Point::origin()) < 0.0);
        assert!(u(&Point::origin()) * u(&Point::new(3.0, 0.0, 0.0)) < 0.0);
    }

    #[test]
    fn permutation_equivariant() {
        let cloud = datasets::sphere(200, true);
        let mut order: Vec<usize> = (0..200).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
        let pts = order.iter().map(|&i| cloud.points()[i]).collect();
        let nrm = order.iter().map(|&i| cloud.normals().unwrap()[i]).collect();
        let perm = PointCloud::new(pts, Some(nrm), "perm").unwrap();
        let a = build_mq(&cloud, 300.0, None).unwrap();
        let b = build_mq(&perm, 300.0, None).unwrap();
        for q in [
            Point::new(0.1, 0.2, 0.3),
            Point::new(1.5, -0.2, 0.0),
            Point::new(-0.5, 0.5, 0.6),
        ] {
            assert!((a.evaluate(&q) - b.evaluate(&q)).abs() <= 1e-9);
        }
    }

    #[test]
    fn requires_normals_and_positive_shape() {
        let cloud = datasets::sphere(50, false);
        assert!(matches!(
            build_mq(&cloud, 300.0, None),
            Err(Error::MissingNormals)
        ));
        let cloud = datasets::sphere(50, true);
        assert!(matches!(
            build_mq(&cloud, 0.0, None),
            Err(Error::InvalidParameter(_))
        ));
    }
}
