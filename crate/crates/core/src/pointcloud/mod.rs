//! Point clouds: validation, bounding boxes, dedup, and the auxiliary point sets
//! (off-surface offsets, interior nodes) the reconstruction methods collocate on.

mod io;
mod normals;

pub use io::{load_cloud, write_xyz, CloudFormat, Loaded};
pub use normals::{estimate_normals, NormalOptions, Orientation};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spatial::NeighborIndex;
use crate::{Error, Point, Result, Vector};

/// Tolerance on |n| − 1 accepted for stored normals.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

/// Two points closer than this fraction of `d_max` are duplicates.
pub const DEDUP_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Fixed seed for the interior-node subsampling shuffle.
pub const INTERIOR_SHUFFLE_SEED: u64 = 0x5EED_1A7E_0000_0001;

/// A sampled surface: positions plus optional unit normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Point>,
    normals: Option<Vec<Vector>>,
    pub source_tag: String,
}

impl PointCloud {
    /// Validates finiteness and normal lengths. Normals within
    /// [`NORMAL_TOLERANCE`] of unit length are renormalized exactly.
    pub fn new(
        points: Vec<Point>,
        normals: Option<Vec<Vector>>,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        if points
            .iter()
            .any(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        let normals = match normals {
            None => None,
            Some(ns) => {
                if ns.len() != points.len() {
                    return Err(Error::invalid(format!(
                        "{} normals for {} points",
                        ns.len(),
                        points.len()
                    )));
                }
                let mut out = Vec::with_capacity(ns.len());
                for (i, n) in ns.into_iter().enumerate() {
                    let len = n.norm();
                    if !len.is_finite() || (len - 1.0).abs() > NORMAL_TOLERANCE {
                        return Err(Error::invalid(format!(
                            "normal {i} has length {len}, expected 1"
                        )));
                    }
                    out.push(n / len);
                }
                Some(out)
            }
        };
        Ok(Self {
            points,
            normals,
            source_tag: source_tag.into(),
        })
    }

    /// Like [`PointCloud::new`] but scales every normal to unit length first.
    pub fn with_unnormalized_normals(
        points: Vec<Point>,
        normals: Option<Vec<Vector>>,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        let normals = match normals {
            Some(ns) => {
                let mut out = Vec::with_capacity(ns.len());
                for (i, n) in ns.into_iter().enumerate() {
                    let len = n.norm();
                    if !(len.is_finite() && len > 0.0) {
                        return Err(Error::invalid(format!(
                            "normal {i} has zero or non-finite length"
                        )));
                    }
                    out.push(n / len);
                }
                Some(out)
            }
            None => None,
        };
        Self::new(points, normals, source_tag)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn without_normals(&self) -> Self {
        Self {
            points: self.points.clone(),
            normals: None,
            source_tag: self.source_tag.clone(),
        }
    }

    pub(crate) fn require_normals(&self) -> Result<&[Vector]> {
        self.normals.as_deref().ok_or(Error::MissingNormals)
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len().max(1) as f64;
        let sum = self
            .points
            .iter()
            .fold(Vector::zeros(), |acc, p| acc + p.coords);
        Point::from(sum / n)
    }

    /// Removes points closer than `1e-12 · d_max` to an earlier point.
    /// Returns the deduplicated cloud and the number of points removed.
    pub fn dedup(self) -> (Self, usize) {
        if self.points.len() < 2 {
            return (self, 0);
        }
        let tol = match bounding_box(&self) {
            Ok(b) => DEDUP_RELATIVE_TOLERANCE * b.d_max,
            // All points coincide.
            Err(_) => 0.0,
        };
        let index = NeighborIndex::new(&self.points);
        let mut removed = vec![false; self.points.len()];
        for i in 0..self.points.len() {
            if removed[i] {
                continue;
            }
            for nb in index.within_radius(&self.points[i], tol) {
                if nb.index > i && (nb.dist2 < tol * tol || nb.dist2 == 0.0) {
                    removed[nb.index] = true;
                }
            }
        }
        let count = removed.iter().filter(|&&r| r).count();
        if count == 0 {
            return (self, 0);
        }
        let keep = |i: &usize| !removed[*i];
        let points = (0..self.points.len())
            .filter(keep)
            .map(|i| self.points[i])
            .collect();
        let normals = self
            .normals
            .as_ref()
            .map(|ns| (0..ns.len()).filter(keep).map(|i| ns[i]).collect());
        (
            Self {
                points,
                normals,
                source_tag: self.source_tag,
            },
            count,
        )
    }

    /// Uniformly scales positions about the origin (normals unchanged).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| Point::from(p.coords * factor))
                .collect(),
            normals: self.normals.clone(),
            source_tag: self.source_tag.clone(),
        }
    }
}

/// Axis-aligned box with cached longest edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
    pub d_max: f64,
}

impl BoundingBox {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        if (0..3).any(|a| min[a].is_nan() || max[a].is_nan() || min[a] > max[a]) {
            return Err(Error::invalid("bounding box min must not exceed max"));
        }
        let d_max = (0..3).map(|a| max[a] - min[a]).fold(0.0, f64::max);
        if d_max.is_nan() || d_max <= 0.0 {
            return Err(Error::invalid("bounding box has zero extent"));
        }
        Ok(Self { min, max, d_max })
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut min = points[0];
        let mut max = points[0];
        for p in points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        Self::new(min, max)
    }

    pub fn edges(&self) -> Vector {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.edges();
        e.x * e.y * e.z
    }

    /// Grows every side by `margin`.
    pub fn padded(&self, margin: f64) -> Self {
        let m = Vector::repeat(margin);
        Self {
            min: self.min - m,
            max: self.max + m,
            d_max: self.d_max + 2.0 * margin,
        }
    }

    /// Pads only axes with zero extent, by `1e-3 · d_max` per side.
    pub fn nondegenerate(&self) -> Self {
        let pad = 1e-3 * self.d_max;
        let mut out = *self;
        for a in 0..3 {
            if self.max[a] - self.min[a] <= 0.0 {
                out.min[a] -= pad;
                out.max[a] += pad;
            }
        }
        out
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn corners(&self) -> [Point; 8] {
        let (lo, hi) = (self.min, self.max);
        std::array::from_fn(|i| {
            Point::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
    }
}

/// Tightest axis-aligned box around the cloud.
pub fn bounding_box(cloud: &PointCloud) -> Result<BoundingBox> {
    BoundingBox::from_points(cloud.points())
}

/// Default off-surface offset `ϱ = 0.01 · d_max`.
pub fn default_rho(bbox: &BoundingBox) -> f64 {
    0.01 * bbox.d_max
}

/// Off-surface points `x ± ϱ n`: returns (outside, inside).
pub fn offset_points(cloud: &PointCloud, rho: f64) -> Result<(PointCloud, PointCloud)> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!(
            "offset rho must be positive, got {rho}"
        )));
    }
    let normals = cloud.require_normals()?;
    let shift = |sign: f64| -> Vec<Point> {
        cloud
            .points()
            .iter()
            .zip(normals)
            .map(|(p, n)| p + n * (sign * rho))
            .collect()
    };
    let outside = PointCloud {
        points: shift(1.0),
        normals: Some(normals.to_vec()),
        source_tag: format!("{}+offset", cloud.source_tag),
    };
    let inside = PointCloud {
        points: shift(-1.0),
        normals: Some(normals.to_vec()),
        source_tag: format!("{}-offset", cloud.source_tag),
    };
    Ok((outside, inside))
}

/// Interior collocation nodes and diagnostics about how they were produced.
#[derive(Debug, Clone)]
pub struct InteriorNodes {
    pub nodes: PointCloud,
    /// Candidates discarded for leaving the cloud's bounding box.
    pub dropped_outside_box: usize,
    /// Nodes whose nearest cloud point has a normal opposing the source point's
    /// normal, a sign that the inward step crossed a thin feature.
    pub crossed_feature: usize,
}

/// Inward-offset interior nodes `x_i − δ n_i` for `target_count` source points
/// picked by uniform stride over a fixed-seed shuffle of the cloud order.
pub fn interior_points(
    cloud: &PointCloud,
    delta: f64,
    target_count: usize,
) -> Result<InteriorNodes> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!(
            "interior offset delta must be positive, got {delta}"
        )));
    }
    let normals = cloud.require_normals()?;
    let n = cloud.len();
    if target_count == 0 || target_count > n {
        return Err(Error::invalid(format!(
            "interior target count {target_count} must lie in 1..={n}"
        )));
    }
    let bbox = bounding_box(cloud)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(INTERIOR_SHUFFLE_SEED));
    let picks = (0..target_count).map(|i| order[i * n / target_count]);

    let index = NeighborIndex::new(cloud.points());
    let mut points = Vec::with_capacity(target_count);
    let mut node_normals = Vec::with_capacity(target_count);
    let mut dropped = 0;
    let mut crossed = 0;
    for i in picks {
        let p = cloud.points()[i] - normals[i] * delta;
        if !bbox.contains(&p) {
            dropped += 1;
            continue;
        }
        if let Some(nb) = index.nearest(&p) {
            if normals[nb.index].dot(&normals[i]) < 0.0 {
                crossed += 1;
            }
        }
        points.push(p);
        node_normals.push(normals[i]);
    }
    Ok(InteriorNodes {
        nodes: PointCloud {
            points,
            normals: Some(node_normals),
            source_tag: format!("{}-interior", cloud.source_tag),
        },
        dropped_outside_box: dropped,
        crossed_feature: crossed,
    })
}
