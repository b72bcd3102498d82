//! Distances between a point cloud and reconstructed-surface samples: Hausdorff,
//! percentile Hausdorff, symmetric Chamfer, and absolute average distance.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::TriMesh;
use crate::spatial::NeighborIndex;
use crate::{Error, Point, Result};

/// Squared nearest-neighbor distance from each point of `a` to the set `b`.
pub fn directed_sq_distances(a: &[Point], b: &[Point]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let index = NeighborIndex::new(b);
    Ok(a.par_iter()
        .map(|p| index.nearest(p).expect("index is nonempty").dist2)
        .collect())
}

fn max_sqrt(d2: &[f64]) -> f64 {
    d2.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt()
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// Nearest-rank `k`-th percentile of unsorted values.
fn nearest_rank(values: &[f64], k_percent: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((k_percent / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn check_k(k_percent: f64) -> Result<()> {
    if k_percent > 0.0 && k_percent <= 100.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "percentile K must lie in (0, 100], got {k_percent}"
        )))
    }
}

pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    Ok(max_sqrt(&directed_sq_distances(a, b)?).max(max_sqrt(&directed_sq_distances(b, a)?)))
}

/// Max over both directions of the `k`-th percentile (nearest rank) of nearest distances.
pub fn hausdorff_k(a: &[Point], b: &[Point], k_percent: f64) -> Result<f64> {
    check_k(k_percent)?;
    let ab = directed_sq_distances(a, b)?;
    let ba = directed_sq_distances(b, a)?;
    Ok(nearest_rank(&ab, k_percent)
        .max(nearest_rank(&ba, k_percent))
        .sqrt())
}

/// Mean squared nearest distance, summed over both directions.
pub fn chamfer_sym(a: &[Point], b: &[Point]) -> Result<f64> {
    let ab = directed_sq_distances(a, b)?;
    let ba = directed_sq_distances(b, a)?;
    Ok(mean(ab.iter().copied(), ab.len()) + mean(ba.iter().copied(), ba.len()))
}

/// Mean (unsquared) nearest distance, summed over both directions.
pub fn avg_abs(a: &[Point], b: &[Point]) -> Result<f64> {
    let ab = directed_sq_distances(a, b)?;
    let ba = directed_sq_distances(b, a)?;
    Ok(mean(ab.iter().map(|v| v.sqrt()), ab.len()) + mean(ba.iter().map(|v| v.sqrt()), ba.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hd: f64,
    pub hd_k: f64,
    pub k_percent: f64,
    pub scd: f64,
    pub aad: f64,
    /// Directed Hausdorff `h(A → B)`.
    pub h_ab: f64,
    /// Directed Hausdorff `h(B → A)`.
    pub h_ba: f64,
    pub m_a: usize,
    pub n_b: usize,
}

impl MetricReport {
    /// All four metrics from one nearest-neighbor pass per direction.
    pub fn compute(a: &[Point], b: &[Point], k_percent: f64) -> Result<Self> {
        check_k(k_percent)?;
        let ab = directed_sq_distances(a, b)?;
        let ba = directed_sq_distances(b, a)?;
        let (h_ab, h_ba) = (max_sqrt(&ab), max_sqrt(&ba));
        Ok(Self {
            hd: h_ab.max(h_ba),
            hd_k: nearest_rank(&ab, k_percent)
                .max(nearest_rank(&ba, k_percent))
                .sqrt(),
            k_percent,
            scd: mean(ab.iter().copied(), ab.len()) + mean(ba.iter().copied(), ba.len()),
            aad: mean(ab.iter().map(|v| v.sqrt()), ab.len())
                + mean(ba.iter().map(|v| v.sqrt()), ba.len()),
            h_ab,
            h_ba,
            m_a: a.len(),
            n_b: b.len(),
        })
    }

    pub fn score(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Hd => self.hd,
            Criterion::Scd => self.scd,
            Criterion::Aad => self.aad,
            Criterion::HdK => self.hd_k,
        }
    }

    pub const CSV_HEADER: [&'static str; 9] = [
        "hd",
        "hd_k",
        "k_percent",
        "scd",
        "aad",
        "h_ab",
        "h_ba",
        "m_a",
        "n_b",
    ];

    pub fn csv_record(&self) -> [String; 9] {
        [
            self.hd.to_string(),
            self.hd_k.to_string(),
            self.k_percent.to_string(),
            self.scd.to_string(),
            self.aad.to_string(),
            self.h_ab.to_string(),
            self.h_ba.to_string(),
            self.m_a.to_string(),
            self.n_b.to_string(),
        ]
    }
}

/// Which metric a λ search minimizes. `HdK` uses the report's `k_percent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Hd,
    Scd,
    Aad,
    HdK,
}

impl Criterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Hd => "hd",
            Criterion::Scd => "scd",
            Criterion::Aad => "aad",
            Criterion::HdK => "hdk",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hd" => Ok(Criterion::Hd),
            "scd" => Ok(Criterion::Scd),
            "aad" => Ok(Criterion::Aad),
            "hdk" | "hd-k" => Ok(Criterion::HdK),
            _ => Err(Error::invalid(format!(
                "unknown criterion '{s}' (expected hd, scd, aad, hdk)"
            ))),
        }
    }
}

/// Mesh vertices, topped up to `count` points with area-weighted uniform samples
/// on the triangles. Deterministic for a given `seed`.
pub fn surface_samples(mesh: &TriMesh, count: usize, seed: u64) -> Vec<Point> {
    let mut out = mesh.vertices.clone();
    if count <= out.len() || mesh.triangles.is_empty() {
        return out;
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in out.len()..count {
        let target = rng.random::<f64>() * total;
        let t = cumulative
            .partition_point(|&c| c <= target)
            .min(cumulative.len() - 1);
        let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertices[i as usize]);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        out.push(Point::from(
            a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2),
        ));
    }
    out
}
