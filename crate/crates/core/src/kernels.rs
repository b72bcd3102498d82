//! Radial kernels: classical RBFs with their 3D Laplacians, and the
//! fundamental solutions used by the MFS builder.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fastmath;
use crate::{Error, Result, Vector};

/// Classical radial basis functions `φ(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RbfKind {
    /// `r³`
    Cubic,
    /// `√(1 + r²c²)`
    NormalizedMultiquadric { c: f64 },
    /// `r^(2n−1)`
    PolyharmonicSpline { n: u32 },
    /// `exp(−c r²)`
    Gaussian { c: f64 },
}

impl RbfKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::NormalizedMultiquadric { c } | Self::Gaussian { c }
                if !(c > 0.0 && c.is_finite()) =>
            {
                Err(Error::invalid(format!(
                    "shape parameter c must be positive, got {c}"
                )))
            }
            Self::PolyharmonicSpline { n: 0 } => {
                Err(Error::invalid("polyharmonic order n must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Self::Cubic => r * r * r,
            Self::NormalizedMultiquadric { c } => (1.0 + r * r * c * c).sqrt(),
            Self::PolyharmonicSpline { n } => r.powi(2 * n as i32 - 1),
            Self::Gaussian { c } => fastmath::exp(-c * r * r),
        }
    }

    /// `φ'(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            Self::Cubic => 3.0 * r * r,
            Self::NormalizedMultiquadric { c } => c * c * r / (1.0 + r * r * c * c).sqrt(),
            Self::PolyharmonicSpline { n } => {
                let m = 2 * n as i32 - 1;
                if m == 1 {
                    1.0
                } else {
                    m as f64 * r.powi(m - 1)
                }
            }
            Self::Gaussian { c } => -2.0 * c * r * fastmath::exp(-c * r * r),
        }
    }

    /// 3D Laplacian `φ'' + 2φ'/r`, with the `r → 0` limit at the origin.
    ///
    /// The linear spline (`n = 1`) has no finite Laplacian at `r = 0`; it returns `+∞` there.
    #[inline]
    pub fn laplacian_3d(&self, r: f64) -> f64 {
        match *self {
            Self::Cubic => 12.0 * r,
            Self::NormalizedMultiquadric { c } => {
                let c2 = c * c;
                let s2 = 1.0 + r * r * c2;
                c2 * (3.0 + 2.0 * r * r * c2) / (s2 * s2.sqrt())
            }
            Self::PolyharmonicSpline { n } => {
                let m = 2 * n as i32 - 1;
                // m(m−1) r^(m−2) + 2m r^(m−2) = m(m+1) r^(m−2)
                if m == 1 {
                    if r == 0.0 {
                        f64::INFINITY
                    } else {
                        2.0 / r
                    }
                } else {
                    (m * (m + 1)) as f64 * r.powi(m - 2)
                }
            }
            Self::Gaussian { c } => (4.0 * c * c * r * r - 6.0 * c) * fastmath::exp(-c * r * r),
        }
    }
}

/// Fundamental solutions; each carries its own `λ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FundamentalKind {
    /// `e^(−λr) / (4πr)`, singular at the source.
    #[serde(rename = "g1")]
    G1 { lambda: f64 },
    /// `e^(−λr) / (8πλ)`.
    #[serde(rename = "g2_model_i")]
    G2ModelI { lambda: f64 },
    /// `(e^(−λr) − 1) / r`, with limit `−λ` at the source.
    #[serde(rename = "g2_model_ii")]
    G2ModelII { lambda: f64 },
}

impl FundamentalKind {
    pub fn lambda(&self) -> f64 {
        match *self {
            Self::G1 { lambda } | Self::G2ModelI { lambda } | Self::G2ModelII { lambda } => lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.lambda();
        if l > 0.0 && l.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("lambda must be positive, got {l}")))
        }
    }

    /// Value at the source point, if finite.
    pub fn source_limit(&self) -> Option<f64> {
        match *self {
            Self::G1 { .. } => None,
            Self::G2ModelI { lambda } => Some(1.0 / (8.0 * PI * lambda)),
            Self::G2ModelII { lambda } => Some(-lambda),
        }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> Result<f64> {
        match *self {
            Self::G1 { lambda } => {
                if r == 0.0 {
                    Err(Error::SingularEvaluation)
                } else {
                    Ok(fastmath::exp(-lambda * r) / (4.0 * PI * r))
                }
            }
            Self::G2ModelI { lambda } => Ok(fastmath::exp(-lambda * r) / (8.0 * PI * lambda)),
            Self::G2ModelII { lambda } => Ok(if r == 0.0 {
                -lambda
            } else {
                fastmath::exp_m1(-lambda * r) / r
            }),
        }
    }

    /// `dG/dr`. At `r = 0` the G2 kernels return their one-sided limit.
    pub fn radial_derivative(&self, r: f64) -> Result<f64> {
        match *self {
            Self::G1 { lambda } => {
                if r == 0.0 {
                    Err(Error::SingularEvaluation)
                } else {
                    Ok(-fastmath::exp(-lambda * r) * (1.0 + lambda * r) / (4.0 * PI * r * r))
                }
            }
            Self::G2ModelI { lambda } => Ok(-fastmath::exp(-lambda * r) / (8.0 * PI)),
            Self::G2ModelII { lambda } => {
                let x = lambda * r;
                // 1 − (1 + x)e^(−x), by series where the closed form cancels.
                let numer_over_x2 = if x < 0.1 {
                    let mut sum = 0.0;
                    let mut term = 1.0; // x^(n−2) / n!, starting at n = 2
                    let mut fact_n = 2.0;
                    term /= fact_n;
                    for n in 2..14 {
                        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                        sum += sign * (n - 1) as f64 * term;
                        fact_n = (n + 1) as f64;
                        term *= x / fact_n;
                    }
                    sum
                } else {
                    (-fastmath::exp_m1(-x) - x * fastmath::exp(-x)) / (x * x)
                };
                Ok(numer_over_x2 * lambda * lambda)
            }
        }
    }

    /// Directional derivative `G'(r) (r̂ · n)` where `r_vec = x − ξ`.
    /// At the source the G2 kernels return 0 (symmetric value); G1 is singular.
    pub fn normal_derivative(&self, r_vec: &Vector, normal: &Vector) -> Result<f64> {
        let r = r_vec.norm();
        if r == 0.0 {
            return match self {
                Self::G1 { .. } => Err(Error::SingularEvaluation),
                _ => Ok(0.0),
            };
        }
        Ok(self.radial_derivative(r)? * r_vec.dot(normal) / r)
    }
}
