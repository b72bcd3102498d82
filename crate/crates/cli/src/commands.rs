use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use meshless::grid::{extraction_box, sample_grid};
use meshless::mesh::{export_mesh, extract_isosurface, MeshFormat, TriMesh};
use meshless::metrics::{surface_samples, Criterion, MetricReport};
use meshless::model::{Diagnostics, Selection};
use meshless::pointcloud::{
    bounding_box, estimate_normals, load_cloud, write_xyz, CloudFormat, NormalOptions, Orientation,
};
use meshless::recon::{build_mq_with, MqOptions, DEFAULT_KANSA_SHAPE, DEFAULT_MQ_SHAPE};
use meshless::tuning::{build_model, GridSpec, LambdaSearchResult, LambdaSweeper, SweepOptions};
use meshless::volume::{volume_convergence, write_volume_csv, VolumeReport, VolumeRow};
use meshless::{datasets, ImplicitModel, Method, PointCloud};
use serde::Serialize;

use crate::args::{
    CloudArgs, GenArgs, OrientationArg, ReconstructArgs, ScoringArgs, ShapeArg, SweepArgs,
    VolumeArgs,
};
use crate::config::Config;
use crate::failure::{InputError, UsageError};

const DEFAULT_GRID: usize = 50;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Serialize)]
struct CloudSummary {
    path: PathBuf,
    points: usize,
    duplicates_removed: usize,
    normals_estimated: bool,
}

#[derive(Debug, Serialize)]
struct MeshSummary {
    path: Option<PathBuf>,
    vertices: usize,
    triangles: usize,
    area: f64,
    watertight: bool,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    criterion: Criterion,
    lambda_star: f64,
    score_star: f64,
    candidates: usize,
    failed: usize,
    r_min: f64,
    interval: [f64; 2],
}

impl SweepSummary {
    fn new(res: &LambdaSearchResult) -> Self {
        Self {
            criterion: res.criterion,
            lambda_star: res.lambda_star,
            score_star: res.score_star,
            candidates: res.trace.len(),
            failed: res.trace.iter().filter(|r| r.report.is_none()).count(),
            r_min: res.r_min,
            interval: [res.interval_low, res.interval_high],
        }
    }
}

#[derive(Debug, Serialize)]
struct Timing {
    total_s: f64,
}

#[derive(Debug, Serialize)]
struct ReconstructOutput {
    command: &'static str,
    version: &'static str,
    input: CloudSummary,
    method: Method,
    lambda: Option<f64>,
    c: Option<f64>,
    level: f64,
    n_per_axis: usize,
    sweep: Option<SweepSummary>,
    report: MetricReport,
    mesh: MeshSummary,
    model_path: Option<PathBuf>,
    diagnostics: Option<Diagnostics>,
    timing: Timing,
}

#[derive(Debug, Serialize)]
struct SweepOutput {
    command: &'static str,
    version: &'static str,
    input: CloudSummary,
    method: Method,
    k_percent: f64,
    n_per_axis: usize,
    sweep: SweepSummary,
    report: Option<MetricReport>,
    trace_path: Option<PathBuf>,
    timing: Timing,
}

#[derive(Debug, Serialize)]
struct VolumeOutput {
    command: &'static str,
    version: &'static str,
    model_path: PathBuf,
    method: Method,
    lambda: Option<f64>,
    selection: Option<Selection>,
    rows: Vec<VolumeReport>,
    csv_path: Option<PathBuf>,
    timing: Timing,
}

#[derive(Debug, Serialize)]
struct GenOutput {
    command: &'static str,
    version: &'static str,
    shape: &'static str,
    n: usize,
    seed: u64,
    normals: bool,
    path: PathBuf,
    radius_min: f64,
    radius_max: f64,
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Loads the cloud and estimates normals when `need_normals` and the file has none.
fn load_input(
    args: &CloudArgs,
    cfg: &Config,
    need_normals: bool,
) -> anyhow::Result<(PointCloud, CloudSummary)> {
    let format = match args.format {
        Some(f) => f,
        None => CloudFormat::from_path(&args.input).ok_or_else(|| {
            usage(format!(
                "cannot infer the format of {}; pass --format",
                args.input.display()
            ))
        })?,
    };
    let loaded = load_cloud(&args.input, format).map_err(|e| InputError(args.input.clone(), e))?;
    let mut cloud = loaded.cloud;
    let estimate = need_normals && !cloud.has_normals();
    if estimate {
        let orientation = match args
            .orientation
            .or(cfg.orientation)
            .unwrap_or(OrientationArg::Centroid)
        {
            OrientationArg::Centroid => Orientation::Centroid,
            OrientationArg::SpanningTree => Orientation::SpanningTree,
        };
        let opts = NormalOptions {
            k: args
                .normals_k
                .or(cfg.normals_k)
                .unwrap_or(NormalOptions::default().k),
            orientation,
            force: false,
        };
        cloud = estimate_normals(&cloud, &opts).context("estimating normals")?;
    }
    let summary = CloudSummary {
        path: args.input.clone(),
        points: cloud.len(),
        duplicates_removed: loaded.duplicates_removed,
        normals_estimated: estimate,
    };
    Ok((cloud, summary))
}

struct Scoring {
    grid: usize,
    k: f64,
    samples: Option<usize>,
    seed: u64,
}

impl Scoring {
    fn resolve(args: &ScoringArgs, cfg: &Config) -> anyhow::Result<Self> {
        let s = Self {
            grid: args.grid.or(cfg.grid).unwrap_or(DEFAULT_GRID),
            k: args.k.or(cfg.k).unwrap_or(100.0),
            samples: args.samples.or(cfg.samples),
            seed: args.seed.or(cfg.seed).unwrap_or(0),
        };
        if !(s.k > 0.0 && s.k <= 100.0) {
            return Err(usage(format!("--k must be in (0, 100], got {}", s.k)));
        }
        Ok(s)
    }
}

fn resolve_method(flag: Option<Method>, cfg: &Config) -> anyhow::Result<Method> {
    match flag {
        Some(m) => Ok(m),
        None => cfg
            .parsed::<Method>("method", &cfg.method)?
            .ok_or_else(|| usage("--method is required")),
    }
}

fn resolve_grid_spec(flag: Option<GridSpec>, cfg: &Config) -> anyhow::Result<Option<GridSpec>> {
    match flag {
        Some(g) => Ok(Some(g)),
        None => cfg.parsed::<GridSpec>("lambda_grid", &cfg.lambda_grid),
    }
}

fn check_shape(c: f64) -> anyhow::Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(usage(format!("--c must be positive, got {c}")));
    }
    Ok(c)
}

fn extract_and_score(
    model: &ImplicitModel,
    cloud: &PointCloud,
    s: &Scoring,
) -> anyhow::Result<(TriMesh, MetricReport)> {
    let bbox = extraction_box(&bounding_box(cloud)?);
    let grid = sample_grid(model, &bbox, s.grid)?;
    let mesh = extract_isosurface(&grid, model.level())?;
    let samples = match s.samples {
        Some(c) => surface_samples(&mesh, c, s.seed),
        None => mesh.vertices.clone(),
    };
    let report = MetricReport::compute(cloud.points(), &samples, s.k)?;
    Ok((mesh, report))
}

fn write_model(model: &ImplicitModel, path: &Path) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    model.write_json(BufWriter::new(f))?;
    Ok(())
}

pub fn reconstruct(args: &ReconstructArgs, cfg: &Config) -> anyhow::Result<()> {
    let start = Instant::now();
    let method = resolve_method(args.method, cfg)?;
    let scoring = Scoring::resolve(&args.scoring, cfg)?;
    if let Some(l) = args.lambda {
        if !method.has_lambda() {
            return Err(usage(format!("{method} takes no lambda")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(usage(format!("--lambda must be positive, got {l}")));
        }
    }
    let mesh_format = match &args.out {
        Some(p) => Some(MeshFormat::from_path(p).ok_or_else(|| {
            usage(format!(
                "{}: mesh output must end in .obj or .ply",
                p.display()
            ))
        })?),
        None => None,
    };
    let c = args.c.or(cfg.c).map(check_shape).transpose()?;
    let needs_normals = matches!(method, Method::Mq | Method::Kansa);
    let (cloud, input) = load_input(&args.cloud, cfg, needs_normals)?;

    let mut sweep = None;
    let model = match method {
        Method::Mq => build_mq_with(
            &cloud,
            &MqOptions {
                c: c.unwrap_or(DEFAULT_MQ_SHAPE),
                ..MqOptions::default()
            },
        )
        .context("building MQ model")?,
        _ => {
            let opts = SweepOptions {
                grid: resolve_grid_spec(args.lambda_grid.clone(), cfg)?,
                n_per_axis: scoring.grid,
                k_percent: scoring.k,
                sample_count: scoring.samples,
                sample_seed: scoring.seed,
                refine: cfg.refine.unwrap_or(true),
                kansa_c: c.unwrap_or(DEFAULT_KANSA_SHAPE),
                ..SweepOptions::default()
            };
            match args.lambda {
                Some(l) => build_model(&cloud, method, l, &opts).context("building model")?,
                None => {
                    let criterion = match args.auto_lambda {
                        Some(c) => c,
                        None => cfg
                            .parsed("criterion", &cfg.criterion)?
                            .unwrap_or(Criterion::Hd),
                    };
                    let mut sweeper = LambdaSweeper::new(&cloud, method, opts)?;
                    let res = sweeper.search(criterion).context("searching lambda")?;
                    let model = sweeper
                        .build(res.lambda_star)
                        .context("building model")?
                        .with_selection(Selection {
                            criterion,
                            score: res.score_star,
                        });
                    sweep = Some(SweepSummary::new(&res));
                    model
                }
            }
        }
    };

    let (mesh, report) =
        extract_and_score(&model, &cloud, &scoring).context("extracting surface")?;
    if let (Some(path), Some(fmt)) = (&args.out, mesh_format) {
        export_mesh(&mesh, path, fmt).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.model_out {
        write_model(&model, path)?;
    }
    print_json(&ReconstructOutput {
        command: "reconstruct",
        version: env!("CARGO_PKG_VERSION"),
        input,
        method,
        lambda: model.lambda(),
        c: match method {
            Method::Mq => Some(c.unwrap_or(DEFAULT_MQ_SHAPE)),
            Method::Kansa => Some(c.unwrap_or(DEFAULT_KANSA_SHAPE)),
            _ => None,
        },
        level: model.level(),
        n_per_axis: scoring.grid,
        sweep,
        report,
        mesh: MeshSummary {
            path: args.out.clone(),
            vertices: mesh.vertices.len(),
            triangles: mesh.triangles.len(),
            area: mesh.area(),
            watertight: mesh.is_watertight(),
        },
        model_path: args.model_out.clone(),
        diagnostics: model.diagnostics().copied(),
        timing: Timing {
            total_s: start.elapsed().as_secs_f64(),
        },
    })
}

pub fn sweep(args: &SweepArgs, cfg: &Config) -> anyhow::Result<()> {
    let start = Instant::now();
    let method = resolve_method(args.method, cfg)?;
    if !method.has_lambda() {
        return Err(usage(format!("{method} has no lambda to sweep")));
    }
    let criterion = match args.criterion {
        Some(c) => c,
        None => cfg
            .parsed("criterion", &cfg.criterion)?
            .ok_or_else(|| usage("--criterion is required"))?,
    };
    let scoring = Scoring::resolve(&args.scoring, cfg)?;
    let c = args.c.or(cfg.c).map(check_shape).transpose()?;
    let (cloud, input) = load_input(&args.cloud, cfg, method == Method::Kansa)?;
    let opts = SweepOptions {
        grid: resolve_grid_spec(args.lambda_grid.clone(), cfg)?,
        n_per_axis: scoring.grid,
        k_percent: scoring.k,
        sample_count: scoring.samples,
        sample_seed: scoring.seed,
        refine: !args.no_refine && cfg.refine.unwrap_or(true),
        kansa_c: c.unwrap_or(DEFAULT_KANSA_SHAPE),
        ..SweepOptions::default()
    };
    let res = LambdaSweeper::new(&cloud, method, opts)?
        .search(criterion)
        .context("searching lambda")?;
    if let Some(path) = &args.trace {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        res.write_trace_csv(BufWriter::new(f))?;
    }
    print_json(&SweepOutput {
        command: "sweep",
        version: env!("CARGO_PKG_VERSION"),
        input,
        method,
        k_percent: scoring.k,
        n_per_axis: scoring.grid,
        sweep: SweepSummary::new(&res),
        report: res.best_report().cloned(),
        trace_path: args.trace.clone(),
        timing: Timing {
            total_s: start.elapsed().as_secs_f64(),
        },
    })
}

pub fn volume(args: &VolumeArgs, cfg: &Config) -> anyhow::Result<()> {
    let start = Instant::now();
    let n_list = match (&args.grid_list, args.grid) {
        (Some(list), _) => list.clone(),
        (None, Some(n)) => vec![n],
        (None, None) => vec![cfg.grid.unwrap_or(DEFAULT_GRID)],
    };
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--grid-list must be strictly ascending"));
    }
    let file = File::open(&args.model).map_err(|e| InputError(args.model.clone(), e.into()))?;
    let model = ImplicitModel::read_json(std::io::BufReader::new(file))
        .map_err(|e| InputError(args.model.clone(), e))?;
    let bbox = match &args.cloud {
        Some(path) => {
            let format = CloudFormat::from_path(path)
                .ok_or_else(|| usage(format!("cannot infer the format of {}", path.display())))?;
            bounding_box(
                &load_cloud(path, format)
                    .map_err(|e| InputError(path.clone(), e))?
                    .cloud,
            )?
        }
        None => *model
            .domain()
            .ok_or_else(|| usage("model has no stored domain; pass --cloud"))?,
    };
    let rows = volume_convergence(&model, &bbox, &n_list).context("counting interior nodes")?;
    if let Some(path) = &args.out {
        let table: Vec<VolumeRow> = rows
            .iter()
            .map(|r| VolumeRow {
                method: model.method(),
                lambda: model.lambda(),
                criterion: model.selection().map(|s| s.criterion),
                n_per_axis: r.n_per_axis,
                volume: r.volume,
                metric: model.selection().map(|s| s.score),
            })
            .collect();
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_volume_csv(&table, BufWriter::new(f))?;
    }
    print_json(&VolumeOutput {
        command: "volume",
        version: env!("CARGO_PKG_VERSION"),
        model_path: args.model.clone(),
        method: model.method(),
        lambda: model.lambda(),
        selection: model.selection().copied(),
        rows,
        csv_path: args.out.clone(),
        timing: Timing {
            total_s: start.elapsed().as_secs_f64(),
        },
    })
}

pub fn gen(args: &GenArgs, cfg: &Config) -> anyhow::Result<()> {
    if args.n < 4 {
        return Err(usage(format!("--n must be at least 4, got {}", args.n)));
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let (shape, name) = match args.shape {
        ShapeArg::Sphere => (datasets::Shape::Sphere, "sphere"),
        ShapeArg::Bumpy => (datasets::Shape::Bumpy, "bumpy"),
    };
    let cloud = datasets::generate(shape, args.n, args.normals, seed);
    write_xyz(&cloud, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let radii = cloud.points().iter().map(|p| p.coords.norm());
    let (radius_min, radius_max) = radii.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    print_json(&GenOutput {
        command: "gen",
        version: env!("CARGO_PKG_VERSION"),
        shape: name,
        n: cloud.len(),
        seed,
        normals: args.normals,
        path: args.out.clone(),
        radius_min,
        radius_max,
    })
}
