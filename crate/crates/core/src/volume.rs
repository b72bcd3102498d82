//! Volume by counting grid nodes on the interior side of the level set:
//! `V = n_interior / N̂³ · V_box`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::grid::{sample_model, EvalGrid, Registration};
use crate::metrics::Criterion;
use crate::model::{ImplicitModel, Method};
use crate::pointcloud::BoundingBox;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteriorSide {
    /// Interior nodes have `u > κ`.
    Above,
    /// Interior nodes have `u < κ`.
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub volume: f64,
    pub n_interior: usize,
    pub n_total: usize,
    pub n_per_axis: usize,
    pub box_volume: f64,
    pub level: f64,
    pub interior_side: InteriorSide,
}

/// Counts interior nodes. The side of `level` holding the majority of the 8 grid
/// corner nodes is exterior; nodes exactly at `level` are exterior.
pub fn estimate_volume(grid: &EvalGrid, level: f64) -> Result<VolumeReport> {
    let values = grid.values();
    let (mut above, mut below) = (0, 0);
    for c in grid.corner_indices() {
        let v = values[c];
        if v > level {
            above += 1;
        } else if v < level {
            below += 1;
        }
    }
    let side = match above.cmp(&below) {
        std::cmp::Ordering::Greater => InteriorSide::Below,
        std::cmp::Ordering::Less => InteriorSide::Above,
        std::cmp::Ordering::Equal => return Err(Error::AmbiguousOrientation),
    };
    let n_interior = match side {
        InteriorSide::Above => values.iter().filter(|&&v| v > level).count(),
        InteriorSide::Below => values.iter().filter(|&&v| v < level).count(),
    };
    let n_total = values.len();
    let box_volume = grid.bbox().volume();
    Ok(VolumeReport {
        volume: n_interior as f64 / n_total as f64 * box_volume,
        n_interior,
        n_total,
        n_per_axis: grid.n_per_axis(),
        box_volume,
        level,
        interior_side: side,
    })
}

/// Volume of a model's level set on an `N̂³` cell-centered grid over `bbox` (unpadded).
pub fn model_volume(model: &ImplicitModel, bbox: &BoundingBox, n: usize) -> Result<VolumeReport> {
    let grid = sample_model(model, bbox, n, Registration::Cell)?;
    estimate_volume(&grid, model.level())
}

/// [`model_volume`] for each `N̂` in ascending `n_list`.
pub fn volume_convergence(
    model: &ImplicitModel,
    bbox: &BoundingBox,
    n_list: &[usize],
) -> Result<Vec<VolumeReport>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "resolution list must be nonempty and strictly ascending",
        ));
    }
    n_list
        .iter()
        .map(|&n| model_volume(model, bbox, n))
        .collect()
}

/// One line of a volume table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeRow {
    pub method: Method,
    pub lambda: Option<f64>,
    pub criterion: Option<Criterion>,
    pub n_per_axis: usize,
    pub volume: f64,
    /// Criterion value at the chosen λ.
    pub metric: Option<f64>,
}

pub fn write_volume_csv<W: Write>(rows: &[VolumeRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "lambda", "criterion", "n_hat", "volume", "metric"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.method.as_str().to_string(),
            opt(r.lambda),
            r.criterion
                .map(|c| c.as_str().to_string())
                .unwrap_or_default(),
            r.n_per_axis.to_string(),
            r.volume.to_string(),
            opt(r.metric),
        ])?;
    }
    out.flush()?;
    Ok(())
}
