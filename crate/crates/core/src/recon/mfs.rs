use serde::{Deserialize, Serialize};

use crate::kernels::FundamentalKind;
use crate::linsolve::{DenseSystem, SolveOptions};
use crate::model::{Diagnostics, ImplicitModel, Kernel, Method};
use crate::pointcloud::{bounding_box, PointCloud};
use crate::{Error, Point, Result};

/// Which `G₂` kernel backs an MFS model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MfsModel {
    #[serde(rename = "I")]
    I,
    #[default]
    #[serde(rename = "II")]
    II,
}

impl MfsModel {
    pub fn kernel(&self, lambda: f64) -> FundamentalKind {
        match self {
            MfsModel::I => FundamentalKind::G2ModelI { lambda },
            MfsModel::II => FundamentalKind::G2ModelII { lambda },
        }
    }

    pub fn method(&self) -> Method {
        match self {
            MfsModel::I => Method::MfsI,
            MfsModel::II => Method::MfsII,
        }
    }

    pub fn from_method(m: Method) -> Option<Self> {
        match m {
            Method::MfsI => Some(MfsModel::I),
            Method::MfsII => Some(MfsModel::II),
            _ => None,
        }
    }
}

fn g2_entry(kind: &FundamentalKind, r: f64) -> f64 {
    match kind.source_limit() {
        Some(v) if r == 0.0 => v,
        _ => kind.eval(r).expect("G2 kernels are finite everywhere"),
    }
}

/// Boundary-only MFS: `[G₂(‖x_i − x_j‖)] α = 1` with sources on the collocation
/// points. `N × N`, no normals needed, level 1.
pub fn build_mfs(cloud: &PointCloud, lambda: f64, model: MfsModel) -> Result<ImplicitModel> {
    let kind = model.kernel(lambda);
    kind.validate()?;
    let pts = cloud.points();
    let n = pts.len();
    let mut system = DenseSystem::zeros(n, n)?;
    system.par_fill(|i, j| g2_entry(&kind, (pts[i] - pts[j]).norm()));
    system.rhs_mut().fill(1.0);
    let (alpha, diag) = super::solve_checked(&system, SolveOptions::default())?;
    let method = model.method();
    Ok(ImplicitModel::new(
        method,
        Kernel::Fundamental(kind),
        pts.to_vec(),
        alpha,
        method.level(),
    )?
    .with_diagnostics(diag)
    .with_domain(bounding_box(cloud)?))
}

/// Normal derivative of an MFS model's field at each cloud point, `g_i = ∂u/∂n(x_i)`,
/// with the self term taken as 0.
pub fn induced_normal_data(cloud: &PointCloud, model: &ImplicitModel) -> Result<Vec<f64>> {
    let normals = cloud.require_normals()?;
    let Kernel::Fundamental(kind) = model.kernel() else {
        return Err(Error::invalid(
            "induced normal data needs a fundamental-solution model",
        ));
    };
    cloud
        .points()
        .iter()
        .zip(normals)
        .map(|(x, n)| {
            model
                .centers()
                .iter()
                .zip(model.coefficients())
                .map(|(c, a)| Ok(a * kind.normal_derivative(&(x - c), n)?))
                .sum()
        })
        .collect()
}

/// Coefficients of the two-kernel MFS system `u = Σ α₁ G₁ + Σ α₂ G₂`.
#[derive(Debug, Clone)]
pub struct FullSystemSolution {
    pub g1: FundamentalKind,
    pub g2: FundamentalKind,
    /// `G₁` sources, pushed off the surface along the normals.
    pub g1_sources: Vec<Point>,
    pub g2_sources: Vec<Point>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl FullSystemSolution {
    pub fn evaluate(&self, x: &Point) -> Result<f64> {
        let mut u = 0.0;
        for (s, a) in self.g1_sources.iter().zip(&self.alpha1) {
            u += a * self.g1.eval((x - s).norm())?;
        }
        for (s, a) in self.g2_sources.iter().zip(&self.alpha2) {
            u += a * g2_entry(&self.g2, (x - s).norm());
        }
        Ok(u)
    }
}

/// Solves the `2N × 2N` system with Dirichlet data 1 and Neumann data `g`.
///
/// `G₁` is singular at its source, so its sources sit at `x_j + σ n_j`; the `G₂`
/// sources stay on the collocation points. Meant for validating [`build_mfs`].
pub fn mfs_full_system(
    cloud: &PointCloud,
    lambda: f64,
    model: MfsModel,
    g: &[f64],
    source_offset: f64,
) -> Result<FullSystemSolution> {
    let normals = cloud.require_normals()?;
    let g1 = FundamentalKind::G1 { lambda };
    let g2 = model.kernel(lambda);
    g2.validate()?;
    if !(source_offset > 0.0 && source_offset.is_finite()) {
        return Err(Error::invalid(format!(
            "source offset must be positive, got {source_offset}"
        )));
    }
    let pts = cloud.points();
    let n = pts.len();
    if g.len() != n {
        return Err(Error::invalid(format!(
            "{} Neumann values for {n} points",
            g.len()
        )));
    }
    let s1: Vec<Point> = pts
        .iter()
        .zip(normals)
        .map(|(p, nv)| p + nv * source_offset)
        .collect();

    let mut system = DenseSystem::zeros(2 * n, 2 * n)?;
    let mut failure = None;
    for j in 0..2 * n {
        for i in 0..2 * n {
            let (x, nx) = (pts[i % n], normals[i % n]);
            let entry = if j < n {
                let rv = x - s1[j];
                if i < n {
                    g1.eval(rv.norm())
                } else {
                    g1.normal_derivative(&rv, &nx)
                }
            } else {
                let rv = x - pts[j - n];
                if i < n {
                    Ok(g2_entry(&g2, rv.norm()))
                } else {
                    g2.normal_derivative(&rv, &nx)
                }
            };
            match entry {
                Ok(v) => system.set(i, j, v),
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    system.rhs_mut()[..n].fill(1.0);
    system.rhs_mut()[n..].copy_from_slice(g);
    let (coef, diagnostics) = super::solve_checked(&system, SolveOptions::default())?;
    Ok(FullSystemSolution {
        g1,
        g2,
        g1_sources: s1,
        g2_sources: pts.to_vec(),
        alpha1: coef[..n].to_vec(),
        alpha2: coef[n..].to_vec(),
        diagnostics,
    })
}
