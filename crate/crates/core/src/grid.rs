//! Uniform `N̂³` sampling grids over a box, x fastest, then y, then z.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::ImplicitModel;
use crate::pointcloud::BoundingBox;
use crate::{Error, Point, Result};

pub const MIN_NODES_PER_AXIS: usize = 8;

/// Margin added around the cloud box for isosurface extraction, as a fraction of `d_max`.
pub const EXTRACTION_PADDING: f64 = 0.05;

/// Where the `N̂` samples along an axis sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Registration {
    /// On the box faces and spaced `edge / (N̂ − 1)`.
    Node,
    /// At the centers of `N̂` equal cells, spaced `edge / N̂`; each node stands for
    /// `1/N̂³` of the box.
    Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    bbox: BoundingBox,
    n: usize,
    registration: Registration,
    values: Vec<f64>,
}

impl EvalGrid {
    /// Grid of `values` laid out x fastest. The box is padded on degenerate axes.
    pub fn from_values(
        bbox: BoundingBox,
        n: usize,
        registration: Registration,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_n(n)?;
        if values.len() != n * n * n {
            return Err(Error::invalid(format!(
                "{} values for a {n}^3 grid",
                values.len()
            )));
        }
        Ok(Self {
            bbox: bbox.nondegenerate(),
            n,
            registration,
            values,
        })
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn registration(&self) -> Registration {
        self.registration
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n + j) * self.n + i
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn spacing(&self) -> [f64; 3] {
        axis_spacing(&self.bbox, self.n, self.registration)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> Point {
        node_position(&self.bbox, self.n, self.registration, [i, j, k])
    }

    /// Position of the node with linear index `idx`.
    pub fn node_at(&self, idx: usize) -> Point {
        let n = self.n;
        self.node(idx % n, (idx / n) % n, idx / (n * n))
    }

    /// The 8 nodes at the corners of the index range, in [`BoundingBox::corners`] order.
    pub fn corner_indices(&self) -> [usize; 8] {
        let m = self.n - 1;
        std::array::from_fn(|c| {
            self.index(
                if c & 1 == 0 { 0 } else { m },
                if c & 2 == 0 { 0 } else { m },
                if c & 4 == 0 { 0 } else { m },
            )
        })
    }

    /// Trilinear interpolation of the node values; clamps to the node hull.
    pub fn interpolate(&self, p: &Point) -> f64 {
        let h = self.spacing();
        let first = self.node(0, 0, 0);
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let t = ((p[a] - first[a]) / h[a]).clamp(0.0, (self.n - 1) as f64);
            let i = (t.floor() as usize).min(self.n - 2);
            base[a] = i;
            frac[a] = t - i as f64;
        }
        let mut v = 0.0;
        for c in 0..8 {
            let (di, dj, dk) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let w = (if di == 1 { frac[0] } else { 1.0 - frac[0] })
                * (if dj == 1 { frac[1] } else { 1.0 - frac[1] })
                * (if dk == 1 { frac[2] } else { 1.0 - frac[2] });
            v += w * self.value(base[0] + di, base[1] + dj, base[2] + dk);
        }
        v
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < MIN_NODES_PER_AXIS {
        return Err(Error::invalid(format!(
            "grid needs at least {MIN_NODES_PER_AXIS} nodes per axis, got {n}"
        )));
    }
    Ok(())
}

fn axis_spacing(bbox: &BoundingBox, n: usize, reg: Registration) -> [f64; 3] {
    let e = bbox.edges();
    let div = match reg {
        Registration::Node => (n - 1) as f64,
        Registration::Cell => n as f64,
    };
    [e.x / div, e.y / div, e.z / div]
}

#[inline]
fn node_position(bbox: &BoundingBox, n: usize, reg: Registration, ijk: [usize; 3]) -> Point {
    let h = axis_spacing(bbox, n, reg);
    let shift = match reg {
        Registration::Node => 0.0,
        Registration::Cell => 0.5,
    };
    Point::new(
        bbox.min.x + (ijk[0] as f64 + shift) * h[0],
        bbox.min.y + (ijk[1] as f64 + shift) * h[1],
        bbox.min.z + (ijk[2] as f64 + shift) * h[2],
    )
}

/// All node positions, x fastest.
pub fn grid_nodes(bbox: &BoundingBox, n: usize, registration: Registration) -> Result<Vec<Point>> {
    check_n(n)?;
    let bbox = bbox.nondegenerate();
    let mut out = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                out.push(node_position(&bbox, n, registration, [i, j, k]));
            }
        }
    }
    Ok(out)
}

/// Sample an arbitrary field, parallel over nodes.
pub fn sample_fn(
    f: impl Fn(&Point) -> f64 + Sync,
    bbox: &BoundingBox,
    n: usize,
    registration: Registration,
) -> Result<EvalGrid> {
    let nodes = grid_nodes(bbox, n, registration)?;
    let values = nodes.par_iter().map(&f).collect();
    EvalGrid::from_values(*bbox, n, registration, values)
}

/// Sample a model on a node-registered grid over `bbox`.
pub fn sample_grid(model: &ImplicitModel, bbox: &BoundingBox, n: usize) -> Result<EvalGrid> {
    sample_model(model, bbox, n, Registration::Node)
}

pub fn sample_model(
    model: &ImplicitModel,
    bbox: &BoundingBox,
    n: usize,
    registration: Registration,
) -> Result<EvalGrid> {
    let nodes = grid_nodes(bbox, n, registration)?;
    let values = model.evaluate_batch(&nodes);
    EvalGrid::from_values(*bbox, n, registration, values)
}

/// Box used for isosurface extraction: the cloud box grown by [`EXTRACTION_PADDING`]` · d_max`.
pub fn extraction_box(cloud_box: &BoundingBox) -> BoundingBox {
    cloud_box.padded(EXTRACTION_PADDING * cloud_box.d_max)
}
