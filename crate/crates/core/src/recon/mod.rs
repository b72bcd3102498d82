//! Model builders. Each assembles a dense collocation system, solves it, and
//! wraps the coefficients in an [`ImplicitModel`](crate::ImplicitModel).

mod interp;
mod kansa;
mod mfs;

pub use interp::{build_mq, build_mq_with, MqOptions, DEFAULT_MQ_SHAPE};
pub use kansa::{build_kansa, default_interior, KansaInterior, DEFAULT_KANSA_SHAPE};
pub use mfs::{build_mfs, induced_normal_data, mfs_full_system, FullSystemSolution, MfsModel};

use crate::linsolve::{self, DenseSystem, SolveOptions};
use crate::model::Diagnostics;
use crate::{Error, Result};

pub(crate) fn solve_checked(
    system: &DenseSystem,
    opts: SolveOptions,
) -> Result<(Vec<f64>, Diagnostics)> {
    let sol = linsolve::solve_with(system, opts)?;
    if !sol.residual_norm.is_finite() {
        return Err(Error::NonFinite);
    }
    let diag = Diagnostics {
        rows: system.rows(),
        unknowns: system.cols(),
        residual_norm: sol.residual_norm,
        condition_estimate: sol.condition_estimate,
    };
    Ok((sol.coefficients, diag))
}
