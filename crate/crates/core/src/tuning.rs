//! Choosing λ: the `R_min` heuristic interval and a criterion sweep over a
//! log-spaced grid with one local refinement pass.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::grid::{extraction_box, sample_grid};
use crate::mesh::extract_isosurface;
use crate::metrics::{surface_samples, Criterion, MetricReport};
use crate::model::{ImplicitModel, Method};
use crate::pointcloud::{bounding_box, PointCloud};
use crate::recon::{self, KansaInterior, MfsModel, DEFAULT_KANSA_SHAPE};
use crate::spatial::NeighborIndex;
use crate::{Error, Result};

/// Bounds on `λ R_min` for the MFS kernels.
pub const EXPERIENCE_LOW: f64 = 0.020;
pub const EXPERIENCE_HIGH: f64 = 0.084;

/// Mean distance from each cloud point to its nearest other cloud point.
pub fn r_min(cloud: &PointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::EmptyCloud {
            distinct: cloud.len(),
        });
    }
    let index = NeighborIndex::new(cloud.points());
    let total: f64 = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .nearest_filtered(p, |j| j != i)
                .expect("at least two points")
                .distance()
        })
        .sum();
    Ok(total / cloud.len() as f64)
}

/// `(0.020 / R_min, 0.084 / R_min)`.
pub fn experience_interval(r_min: f64) -> Result<(f64, f64)> {
    if !(r_min > 0.0 && r_min.is_finite()) {
        return Err(Error::invalid(format!(
            "R_min must be positive, got {r_min}"
        )));
    }
    Ok((EXPERIENCE_LOW / r_min, EXPERIENCE_HIGH / r_min))
}

/// `count` values spaced evenly in `log λ` from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || count < 2 {
        return Err(Error::invalid(format!(
            "log grid needs 0 < lo < hi and count >= 2, got {lo}:{hi}:{count}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| match i {
            0 => lo,
            _ if i == count - 1 => hi,
            _ => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    Log { lo: f64, hi: f64, count: usize },
    Explicit(Vec<f64>),
}

impl GridSpec {
    pub const MFS_COUNT: usize = 24;
    pub const KANSA: GridSpec = GridSpec::Log {
        lo: 1.0,
        hi: 1e4,
        count: 40,
    };

    /// `MFS_COUNT` values over `[0.25 · low, 4 · high]` of the experience interval.
    pub fn mfs_default(r_min: f64) -> Result<Self> {
        let (lo, hi) = experience_interval(r_min)?;
        Ok(GridSpec::Log {
            lo: 0.25 * lo,
            hi: 4.0 * hi,
            count: Self::MFS_COUNT,
        })
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let mut v = match self {
            GridSpec::Log { lo, hi, count } => log_space(*lo, *hi, *count)?,
            GridSpec::Explicit(v) => v.clone(),
        };
        if v.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(
                "every lambda candidate must be positive and finite",
            ));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        if v.len() < 3 {
            return Err(Error::invalid(format!(
                "lambda grid needs at least 3 distinct values, got {}",
                v.len()
            )));
        }
        Ok(v)
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    /// `lo:hi:n` (log-spaced) or a comma-separated list.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::invalid(format!(
                "bad lambda grid '{s}' (expected lo:hi:n or a comma list)"
            ))
        };
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [lo, hi, n] = parts.as_slice() else {
                return Err(bad());
            };
            let n = n.trim_end_matches("log").trim_end_matches(['(', ')']);
            Ok(GridSpec::Log {
                lo: lo.trim().parse().map_err(|_| bad())?,
                hi: hi.trim().parse().map_err(|_| bad())?,
                count: n.trim().parse().map_err(|_| bad())?,
            })
        } else {
            let v = s
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            Ok(GridSpec::Explicit(v))
        }
    }
}

/// Everything except the criterion: what to build and how to score it.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Candidate λ; the method default when `None`.
    pub grid: Option<GridSpec>,
    pub n_per_axis: usize,
    /// Percentile for Hd-K.
    pub k_percent: f64,
    /// Top up mesh vertices to this many surface samples before scoring.
    pub sample_count: Option<usize>,
    pub sample_seed: u64,
    pub refine: bool,
    pub refine_count: usize,
    /// When the default grid's minimum lies within two steps of either end, keep
    /// stepping outward at the grid's log ratio, at most this many times.
    /// Explicit grids are never extended.
    pub max_extension: usize,
    pub kansa_c: f64,
    pub kansa_interior: KansaInterior,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            grid: None,
            n_per_axis: 50,
            k_percent: 100.0,
            sample_count: None,
            sample_seed: 0,
            refine: true,
            refine_count: 10,
            max_extension: 12,
            kansa_c: DEFAULT_KANSA_SHAPE,
            kansa_interior: KansaInterior::default(),
        }
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub lambda: f64,
    pub report: Option<MetricReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearchResult {
    pub method: Method,
    pub criterion: Criterion,
    pub lambda_star: f64,
    pub score_star: f64,
    /// `(λ, score)` for every successful candidate, λ ascending.
    pub scores: Vec<(f64, f64)>,
    /// Every candidate, including failures, λ ascending.
    pub trace: Vec<TraceRow>,
    pub r_min: f64,
    pub interval_low: f64,
    pub interval_high: f64,
}

impl LambdaSearchResult {
    pub fn best_report(&self) -> Option<&MetricReport> {
        self.trace
            .iter()
            .find(|r| r.lambda == self.lambda_star)
            .and_then(|r| r.report.as_ref())
    }

    /// CSV with columns `lambda,hd,scd,aad,hd_k,status`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["lambda", "hd", "scd", "aad", "hd_k", "status"])?;
        for row in &self.trace {
            match &row.report {
                Some(r) => out.write_record([
                    row.lambda.to_string(),
                    r.hd.to_string(),
                    r.scd.to_string(),
                    r.aad.to_string(),
                    r.hd_k.to_string(),
                    "ok".to_string(),
                ])?,
                None => out.write_record([
                    row.lambda.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    row.error.clone().unwrap_or_default(),
                ])?,
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the model for `method` at `lambda` (ignored for MQ).
pub fn build_model(
    cloud: &PointCloud,
    method: Method,
    lambda: f64,
    opts: &SweepOptions,
) -> Result<ImplicitModel> {
    match method {
        Method::Kansa => {
            let interior = recon::default_interior(cloud, &opts.kansa_interior)?;
            recon::build_kansa(cloud, &interior.nodes, lambda, opts.kansa_c)
        }
        Method::MfsI | Method::MfsII => recon::build_mfs(
            cloud,
            lambda,
            MfsModel::from_method(method).expect("MFS method"),
        ),
        Method::Mq => Err(Error::invalid("MQ has no lambda to search")),
    }
}

/// Memoizing λ evaluator: every criterion search over the same cloud and method
/// reuses candidates already scored.
pub struct LambdaSweeper<'a> {
    cloud: &'a PointCloud,
    method: Method,
    opts: SweepOptions,
    r_min: f64,
    cache: HashMap<u64, TraceRow>,
    // Interior nodes are λ-independent; built once for Kansa.
    kansa_interior: Option<PointCloud>,
}

impl<'a> LambdaSweeper<'a> {
    pub fn new(cloud: &'a PointCloud, method: Method, opts: SweepOptions) -> Result<Self> {
        if !method.has_lambda() {
            return Err(Error::invalid("MQ has no lambda to search"));
        }
        if !(opts.k_percent > 0.0 && opts.k_percent <= 100.0) {
            return Err(Error::invalid(format!(
                "percentile K must lie in (0, 100], got {}",
                opts.k_percent
            )));
        }
        let r_min = r_min(cloud)?;
        let kansa_interior = match method {
            Method::Kansa => Some(recon::default_interior(cloud, &opts.kansa_interior)?.nodes),
            _ => None,
        };
        Ok(Self {
            cloud,
            method,
            opts,
            r_min,
            cache: HashMap::new(),
            kansa_interior,
        })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn options(&self) -> &SweepOptions {
        &self.opts
    }

    pub fn default_grid(&self) -> Result<GridSpec> {
        match self.method {
            Method::Kansa => Ok(GridSpec::KANSA),
            _ => GridSpec::mfs_default(self.r_min),
        }
    }

    pub fn build(&self, lambda: f64) -> Result<ImplicitModel> {
        match (&self.kansa_interior, self.method) {
            (Some(interior), Method::Kansa) => {
                recon::build_kansa(self.cloud, interior, lambda, self.opts.kansa_c)
            }
            _ => build_model(self.cloud, self.method, lambda, &self.opts),
        }
    }

    /// Build, sample, extract and score one candidate.
    pub fn score_model(&self, model: &ImplicitModel) -> Result<MetricReport> {
        let bbox = extraction_box(&bounding_box(self.cloud)?);
        let grid = sample_grid(model, &bbox, self.opts.n_per_axis)?;
        let mesh = extract_isosurface(&grid, model.level())?;
        let samples = match self.opts.sample_count {
            Some(c) => surface_samples(&mesh, c, self.opts.sample_seed),
            None => mesh.vertices,
        };
        MetricReport::compute(self.cloud.points(), &samples, self.opts.k_percent)
    }

    pub fn evaluate(&mut self, lambda: f64) -> Result<TraceRow> {
        if let Some(row) = self.cache.get(&lambda.to_bits()) {
            return Ok(row.clone());
        }
        let outcome = self.build(lambda).and_then(|m| self.score_model(&m));
        let row = match outcome {
            Ok(report) => TraceRow {
                lambda,
                report: Some(report),
                error: None,
            },
            Err(e) if e.is_numerical() => TraceRow {
                lambda,
                report: None,
                error: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        self.cache.insert(lambda.to_bits(), row.clone());
        Ok(row)
    }

    /// Argmin of `criterion` over the grid, then over a refinement between the
    /// argmin's neighbors. Ties go to the smaller λ.
    pub fn search(&mut self, criterion: Criterion) -> Result<LambdaSearchResult> {
        let (grid, extend) = match &self.opts.grid {
            Some(g) => (g.clone(), 0),
            None => (self.default_grid()?, self.opts.max_extension),
        };
        let mut coarse = grid.values()?;
        let mut rows = Vec::with_capacity(coarse.len() + self.opts.refine_count);
        for &l in &coarse {
            rows.push(self.evaluate(l)?);
        }
        let ratio = coarse[1] / coarse[0];
        for _ in 0..extend {
            let Some(best) = argmin(&rows, criterion) else {
                break;
            };
            // Scores are noisy at the scale of one step, so demand a two-step margin.
            if best + 2 >= coarse.len() {
                let l = coarse[coarse.len() - 1] * ratio;
                rows.push(self.evaluate(l)?);
                coarse.push(l);
            } else if best < 2 {
                let l = coarse[0] / ratio;
                rows.insert(0, self.evaluate(l)?);
                coarse.insert(0, l);
            } else {
                break;
            }
        }
        let Some(best) = argmin(&rows, criterion) else {
            return Err(all_failed(&rows));
        };
        if self.opts.refine && self.opts.refine_count > 0 {
            let lo = coarse[best.saturating_sub(1)];
            let hi = coarse[(best + 1).min(coarse.len() - 1)];
            if hi > lo {
                let m = self.opts.refine_count;
                let (a, b) = (lo.ln(), hi.ln());
                for t in 1..=m {
                    let l = (a + (b - a) * t as f64 / (m + 1) as f64).exp();
                    if !coarse.contains(&l) {
                        rows.push(self.evaluate(l)?);
                    }
                }
            }
        }
        rows.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
        rows.dedup_by(|x, y| x.lambda == y.lambda);
        let best = argmin(&rows, criterion).expect("coarse pass had a success");
        let scores: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| {
                r.report
                    .as_ref()
                    .map(|rep| (r.lambda, rep.score(criterion)))
            })
            .collect();
        let (interval_low, interval_high) = experience_interval(self.r_min)?;
        let star = &rows[best];
        Ok(LambdaSearchResult {
            method: self.method,
            criterion,
            lambda_star: star.lambda,
            score_star: star
                .report
                .as_ref()
                .expect("argmin is a success")
                .score(criterion),
            scores,
            trace: rows,
            r_min: self.r_min,
            interval_low,
            interval_high,
        })
    }
}

fn argmin(rows: &[TraceRow], criterion: Criterion) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        if let Some(rep) = &r.report {
            let s = rep.score(criterion);
            // Strict comparison keeps the earliest (smallest λ when sorted) on ties.
            if s.is_finite() && best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i)
}

fn all_failed(rows: &[TraceRow]) -> Error {
    Error::AllCandidatesFailed {
        last: rows
            .iter()
            .rev()
            .find_map(|r| r.error.clone())
            .unwrap_or_else(|| "no candidates".into()),
    }
}

/// One-shot search.
pub fn search_lambda(
    cloud: &PointCloud,
    method: Method,
    criterion: Criterion,
    opts: SweepOptions,
) -> Result<LambdaSearchResult> {
    LambdaSweeper::new(cloud, method, opts)?.search(criterion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{datasets, Point};
    use proptest::prelude::*;

    #[test]
    fn r_min_on_regular_grid_and_pair() {
        let h = 0.25;
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    pts.push(Point::new(i as f64 * h, j as f64 * h, k as f64 * h));
                }
            }
        }
        let cloud = PointCloud::new(pts, None, "lattice").unwrap();
        assert_eq!(r_min(&cloud).unwrap(), h);
        let pair = PointCloud::new(
            vec![Point::origin(), Point::new(0.0, 3.0, 4.0)],
            None,
            "pair",
        )
        .unwrap();
        assert_eq!(r_min(&pair).unwrap(), 5.0);
        let one = PointCloud::new(vec![Point::origin()], None, "one").unwrap();
        assert!(matches!(r_min(&one), Err(Error::EmptyCloud { .. })));
    }

    #[test]
    fn interval_examples() {
        let (lo, hi) = experience_interval(0.01).unwrap();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 8.4).abs() < 1e-12);
        let (lo, hi) = experience_interval(0.004).unwrap();
        assert!((lo - 5.0).abs() < 1e-12 && (hi - 21.0).abs() < 1e-12);
        assert!(experience_interval(0.0).is_err());
    }

    #[test]
    fn log_space_endpoints_exact() {
        let v = log_space(1.0, 1e4, 40).unwrap();
        assert_eq!(v.len(), 40);
        assert_eq!((v[0], v[39]), (1.0, 1e4));
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(log_space(0.0, 1.0, 5).is_err());
    }

    #[test]
    fn grid_spec_parsing() {
        assert_eq!(
            "1:100:5".parse::<GridSpec>().unwrap(),
            GridSpec::Log {
                lo: 1.0,
                hi: 100.0,
                count: 5
            }
        );
        assert_eq!(
            "1:100:5log".parse::<GridSpec>().unwrap(),
            GridSpec::Log {
                lo: 1.0,
                hi: 100.0,
                count: 5
            }
        );
        assert_eq!(
            "3,1,2".parse::<GridSpec>().unwrap().values().unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert!("1,1,2".parse::<GridSpec>().unwrap().values().is_err());
        assert!("a:b".parse::<GridSpec>().is_err());
    }

    #[test]
    fn sweep_trace_matches_direct_loop_and_argmin() {
        let cloud = datasets::sphere(300, false);
        let opts = SweepOptions {
            grid: Some(GridSpec::Log {
                lo: 2.0,
                hi: 20.0,
                count: 4,
            }),
            n_per_axis: 16,
            refine_count: 3,
            ..Default::default()
        };
        let res = search_lambda(&cloud, Method::MfsII, Criterion::Hd, opts.clone()).unwrap();
        assert_eq!(res.trace.len(), 7);
        assert!(res.trace.windows(2).all(|w| w[0].lambda < w[1].lambda));
        for &(l, s) in &res.scores {
            assert!(res.score_star <= s);
            let m = build_model(&cloud, Method::MfsII, l, &opts).unwrap();
            let sweeper = LambdaSweeper::new(&cloud, Method::MfsII, opts.clone()).unwrap();
            assert_eq!(sweeper.score_model(&m).unwrap().hd, s);
        }
        let mut csv = Vec::new();
        res.write_trace_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("lambda,hd,scd,aad,hd_k,status\n"));
        assert_eq!(text.lines().count(), 8);
    }

    #[test]
    fn default_grid_extends_past_an_edge_minimum() {
        let cloud = datasets::sphere(200, false);
        let opts = SweepOptions {
            n_per_axis: 12,
            refine: false,
            max_extension: 3,
            ..Default::default()
        };
        let mut s = LambdaSweeper::new(&cloud, Method::MfsII, opts).unwrap();
        let base = s.default_grid().unwrap().values().unwrap();
        let res = s.search(Criterion::Aad).unwrap();
        let added = res.trace.len() - base.len();
        assert!(added <= 3);
        let ratio = base[1] / base[0];
        for w in res.trace.windows(2) {
            assert!((w[1].lambda / w[0].lambda / ratio - 1.0).abs() < 1e-9);
        }
        let best = res
            .trace
            .iter()
            .position(|r| r.lambda == res.lambda_star)
            .unwrap();
        assert!(added == 3 || (best >= 2 && best + 2 < res.trace.len()));

        let fixed = SweepOptions {
            grid: Some(GridSpec::Explicit(base.clone())),
            n_per_axis: 12,
            refine: false,
            ..Default::default()
        };
        let res = search_lambda(&cloud, Method::MfsII, Criterion::Aad, fixed).unwrap();
        assert_eq!(res.trace.len(), base.len());
    }

    #[test]
    fn hdk_100_matches_hd() {
        let cloud = datasets::sphere(200, false);
        let opts = SweepOptions {
            grid: Some(GridSpec::Log {
                lo: 2.0,
                hi: 20.0,
                count: 4,
            }),
            n_per_axis: 12,
            refine: false,
            ..Default::default()
        };
        let mut s = LambdaSweeper::new(&cloud, Method::MfsII, opts).unwrap();
        let a = s.search(Criterion::Hd).unwrap();
        let b = s.search(Criterion::HdK).unwrap();
        assert_eq!(a.lambda_star, b.lambda_star);
    }

    #[test]
    fn all_failing_candidates_reported() {
        // At absurd λ the field vanishes away from the sources, so no grid cell reaches the level.
        let cloud = datasets::sphere(50, false);
        let opts = SweepOptions {
            grid: Some(GridSpec::Explicit(vec![1e300, 1e301, 1e302])),
            n_per_axis: 8,
            ..Default::default()
        };
        assert!(matches!(
            search_lambda(&cloud, Method::MfsI, Criterion::Hd, opts),
            Err(Error::AllCandidatesFailed { .. })
        ));
        assert!(LambdaSweeper::new(&cloud, Method::Mq, SweepOptions::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn r_min_matches_brute_force(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 2..150)) {
            let pts: Vec<Point> = v.iter().map(|&(x, y, z)| Point::new(x, y, z)).collect();
            let cloud = PointCloud::new(pts.clone(), None, "r").unwrap();
            let brute: f64 = pts.iter().enumerate().map(|(i, p)| {
                pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| (p - q).norm()).fold(f64::INFINITY, f64::min)
            }).sum::<f64>() / pts.len() as f64;
            prop_assert!((r_min(&cloud).unwrap() - brute).abs() <= 1e-12);
        }
    }
}
