//! Implicit models `u(x) = Σ α_j k(‖x − ξ_j‖)` and their JSON document form.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fastmath;
use crate::kernels::{FundamentalKind, RbfKind};
use crate::metrics::Criterion;
use crate::pointcloud::BoundingBox;
use crate::{Error, Point, Result, Vector};

/// Version written into, and required from, model documents.
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_FORMAT_NAME: &str = "meshless-model";

const LANES: usize = 32;
const QUERY_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Kernel {
    Rbf(RbfKind),
    Fundamental(FundamentalKind),
}

impl Kernel {
    fn validate(&self) -> Result<()> {
        match self {
            Kernel::Rbf(k) => k.validate(),
            Kernel::Fundamental(FundamentalKind::G1 { .. }) => Err(Error::invalid(
                "G1 is singular at its centers and cannot back a model",
            )),
            Kernel::Fundamental(k) => k.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MQ")]
    Mq,
    #[serde(rename = "Kansa")]
    Kansa,
    #[serde(rename = "MFS-I")]
    MfsI,
    #[serde(rename = "MFS-II")]
    MfsII,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mq, Method::Kansa, Method::MfsI, Method::MfsII];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mq => "MQ",
            Method::Kansa => "Kansa",
            Method::MfsI => "MFS-I",
            Method::MfsII => "MFS-II",
        }
    }

    /// Level set `κ` that represents the surface.
    pub fn level(&self) -> f64 {
        match self {
            Method::Mq => 0.0,
            _ => 1.0,
        }
    }

    /// Whether the method has a λ parameter to tune.
    pub fn has_lambda(&self) -> bool {
        !matches!(self, Method::Mq)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mq" => Ok(Method::Mq),
            "kansa" => Ok(Method::Kansa),
            "mfs-i" | "mfs1" | "mfs-1" => Ok(Method::MfsI),
            "mfs-ii" | "mfs2" | "mfs-2" | "mfs" => Ok(Method::MfsII),
            _ => Err(Error::invalid(format!(
                "unknown method '{s}' (expected mq, kansa, mfs-i, mfs-ii)"
            ))),
        }
    }
}

// Kernel sums are recompiled for the widest vector unit available at runtime. Every
// path rounds identically: multiply-adds are fused explicitly, never by contraction.
mod simd {
    use super::ImplicitModel;
    use crate::Point;

    #[inline(always)]
    fn fill(model: &ImplicitModel, xs: &[Point], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(xs) {
            *o = model.evaluate_inline(x);
        }
    }

    pub(super) fn evaluate_into(model: &ImplicitModel, xs: &[Point], out: &mut [f64]) {
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx512f") && std::is_x86_feature_detected!("fma") {
                // SAFETY: the feature was detected on this CPU.
                return unsafe { fill_avx512(model, xs, out) };
            }
            if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
                // SAFETY: as above.
                return unsafe { fill_avx2(model, xs, out) };
            }
        }
        fill(model, xs, out)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx512f,fma")]
    unsafe fn fill_avx512(model: &ImplicitModel, xs: &[Point], out: &mut [f64]) {
        fill(model, xs, out)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn fill_avx2(model: &ImplicitModel, xs: &[Point], out: &mut [f64]) {
        fill(model, xs, out)
    }
}

/// Linear-solve diagnostics carried alongside a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rows: usize,
    pub unknowns: usize,
    pub residual_norm: f64,
    pub condition_estimate: f64,
}

// Centers in lane-padded structure-of-arrays form. Padding lanes carry α = 0.
#[derive(Debug, Clone, PartialEq)]
struct Packed {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    alpha: Vec<f64>,
}

impl Packed {
    fn new(centers: &[Point], coefficients: &[f64]) -> Self {
        let padded = centers.len().div_ceil(LANES) * LANES;
        let pad = |mut v: Vec<f64>, fill: f64| {
            v.resize(padded, fill);
            v
        };
        let first = centers.first().copied().unwrap_or_else(Point::origin);
        Self {
            x: pad(centers.iter().map(|p| p.x).collect(), first.x),
            y: pad(centers.iter().map(|p| p.y).collect(), first.y),
            z: pad(centers.iter().map(|p| p.z).collect(), first.z),
            alpha: pad(coefficients.to_vec(), 0.0),
        }
    }

    #[inline(always)]
    fn sum<F: Fn(f64) -> f64>(&self, q: &Point, k: F) -> f64 {
        let mut acc = [0.0f64; LANES];
        let chunks = self
            .x
            .chunks_exact(LANES)
            .zip(self.y.chunks_exact(LANES))
            .zip(self.z.chunks_exact(LANES))
            .zip(self.alpha.chunks_exact(LANES));
        for (((xs, ys), zs), als) in chunks {
            for l in 0..LANES {
                let dx = q.x - xs[l];
                let dy = q.y - ys[l];
                let dz = q.z - zs[l];
                let r2 = dx * dx + dy * dy + dz * dz;
                acc[l] += als[l] * k(r2);
            }
        }
        // Fixed pairwise reduction order.
        let mut width = LANES;
        while width > 1 {
            width /= 2;
            for l in 0..width {
                acc[l] += acc[l + width];
            }
        }
        acc[0]
    }
}

/// A solved reconstruction. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitModel {
    method: Method,
    kernel: Kernel,
    centers: Vec<Point>,
    coefficients: Vec<f64>,
    level: f64,
    diagnostics: Option<Diagnostics>,
    domain: Option<BoundingBox>,
    selection: Option<Selection>,
    packed: Packed,
}

impl ImplicitModel {
    pub fn new(
        method: Method,
        kernel: Kernel,
        centers: Vec<Point>,
        coefficients: Vec<f64>,
        level: f64,
    ) -> Result<Self> {
        kernel.validate()?;
        if centers.is_empty() || centers.len() != coefficients.len() {
            return Err(Error::invalid(format!(
                "model needs equal, nonzero center and coefficient counts (got {} and {})",
                centers.len(),
                coefficients.len()
            )));
        }
        if !level.is_finite()
            || coefficients.iter().any(|c| !c.is_finite())
            || centers
                .iter()
                .any(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::NonFinite);
        }
        let packed = Packed::new(&centers, &coefficients);
        Ok(Self {
            method,
            kernel,
            centers,
            coefficients,
            level,
            diagnostics: None,
            domain: None,
            selection: None,
            packed,
        })
    }

    pub(crate) fn with_diagnostics(mut self, d: Diagnostics) -> Self {
        self.diagnostics = Some(d);
        self
    }

    /// Records the bounding box of the cloud the model was fitted to.
    pub fn with_domain(mut self, bbox: BoundingBox) -> Self {
        self.domain = Some(bbox);
        self
    }

    /// Bounding box of the source cloud, when known. Volume counting runs over it.
    pub fn domain(&self) -> Option<&BoundingBox> {
        self.domain.as_ref()
    }

    /// Records that λ was chosen by minimizing `criterion`, reaching `score`.
    pub fn with_selection(mut self, selection: Selection) -> Self {
        self.selection = Some(selection);
        self
    }

    pub fn selection(&self) -> Option<&Selection> {
        self.selection.as_ref()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn diagnostics(&self) -> Option<&Diagnostics> {
        self.diagnostics.as_ref()
    }

    /// `λ` for PDE-based kernels.
    pub fn lambda(&self) -> Option<f64> {
        match self.kernel {
            Kernel::Fundamental(k) => Some(k.lambda()),
            Kernel::Rbf(_) => None,
        }
    }

    /// `u(x)`. Bit-identical to the corresponding entry of [`Self::evaluate_batch`].
    pub fn evaluate(&self, x: &Point) -> f64 {
        let mut out = [0.0];
        simd::evaluate_into(self, std::slice::from_ref(x), &mut out);
        out[0]
    }

    #[inline(always)]
    fn evaluate_inline(&self, x: &Point) -> f64 {
        let p = &self.packed;
        match self.kernel {
            Kernel::Rbf(RbfKind::NormalizedMultiquadric { c }) => {
                let c2 = c * c;
                p.sum(x, |r2| (1.0 + r2 * c2).sqrt())
            }
            Kernel::Rbf(RbfKind::Cubic) => p.sum(x, |r2| r2 * r2.sqrt()),
            Kernel::Rbf(RbfKind::PolyharmonicSpline { n }) => {
                let e = n as i32 - 1;
                p.sum(x, |r2| r2.powi(e) * r2.sqrt())
            }
            Kernel::Rbf(RbfKind::Gaussian { c }) => p.sum(x, |r2| fastmath::exp(-c * r2)),
            Kernel::Fundamental(FundamentalKind::G2ModelI { lambda }) => {
                let scale = 1.0 / (8.0 * std::f64::consts::PI * lambda);
                p.sum(x, |r2| fastmath::exp(-lambda * r2.sqrt()) * scale)
            }
            Kernel::Fundamental(FundamentalKind::G2ModelII { lambda }) => p.sum(x, |r2| {
                let r = r2.sqrt();
                let v = fastmath::exp_m1(-lambda * r) / r;
                if r2 > 0.0 {
                    v
                } else {
                    -lambda
                }
            }),
            Kernel::Fundamental(FundamentalKind::G1 { .. }) => {
                unreachable!("rejected at construction")
            }
        }
    }

    /// `u` at many points, parallel over queries.
    pub fn evaluate_batch(&self, xs: &[Point]) -> Vec<f64> {
        let mut out = vec![0.0; xs.len()];
        out.par_chunks_mut(QUERY_CHUNK)
            .zip(xs.par_chunks(QUERY_CHUNK))
            .for_each(|(o, q)| simd::evaluate_into(self, q, o));
        out
    }

    /// `Δu(x)` for RBF-backed models.
    pub fn laplacian(&self, x: &Point) -> Option<f64> {
        let Kernel::Rbf(k) = self.kernel else {
            return None;
        };
        Some(
            self.centers
                .iter()
                .zip(&self.coefficients)
                .map(|(c, a)| a * k.laplacian_3d((x - c).norm()))
                .sum(),
        )
    }

    /// `∇u(x)` by central differences with step `h`.
    pub fn gradient_fd(&self, x: &Point, h: f64) -> Vector {
        let mut g = Vector::zeros();
        for a in 0..3 {
            let mut e = Vector::zeros();
            e[a] = h;
            g[a] = (self.evaluate(&(x + e)) - self.evaluate(&(x - e))) / (2.0 * h);
        }
        g
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format: MODEL_FORMAT_NAME.to_string(),
            version: MODEL_FORMAT_VERSION,
            method: self.method,
            kernel: self.kernel,
            level: self.level,
            centers: self.centers.iter().map(|p| [p.x, p.y, p.z]).collect(),
            coefficients: self.coefficients.clone(),
            diagnostics: self.diagnostics,
            domain: self.domain.map(|b| Domain {
                min: [b.min.x, b.min.y, b.min.z],
                max: [b.max.x, b.max.y, b.max.z],
            }),
            selection: self.selection,
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT_NAME {
            return Err(Error::invalid(format!(
                "not a model document (format '{}')",
                doc.format
            )));
        }
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: doc.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let centers = doc
            .centers
            .iter()
            .map(|c| Point::new(c[0], c[1], c[2]))
            .collect();
        let mut m = Self::new(doc.method, doc.kernel, centers, doc.coefficients, doc.level)?;
        m.diagnostics = doc.diagnostics;
        m.selection = doc.selection;
        if let Some(d) = doc.domain {
            m.domain = Some(BoundingBox::new(Point::from(d.min), Point::from(d.max))?);
        }
        Ok(m)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &self.to_document())?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_reader(r)?;
        Self::from_document(doc)
    }
}

/// Serialized form of [`ImplicitModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub kernel: Kernel,
    pub level: f64,
    pub centers: Vec<[f64; 3]>,
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
}

/// How λ was chosen for a model built by a criterion sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub criterion: Criterion,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub min: [f64; 3],
    pub max: [f64; 3],
}
