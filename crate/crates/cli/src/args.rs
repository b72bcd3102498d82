use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meshless::metrics::Criterion;
use meshless::tuning::GridSpec;
use meshless::Method;

#[derive(Debug, Parser)]
#[command(name = "meshless", version = crate::version_line(), about = "Meshless implicit surface reconstruction and volume estimation")]
pub struct Cli {
    /// TOML file with default values for the flags below.
    #[arg(long, global = true, env = "MESHLESS_CONFIG")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MESHLESS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a cloud, extract its isosurface and score it.
    Reconstruct(ReconstructArgs),
    /// Search λ by minimizing a distance criterion and write the trace.
    Sweep(SweepArgs),
    /// Estimate the enclosed volume of a saved model.
    Volume(VolumeArgs),
    /// Generate a synthetic sphere or bumpy-sphere cloud.
    Gen(GenArgs),
}

/// Options shared by commands that read a cloud.
#[derive(Debug, Args)]
pub struct CloudArgs {
    /// Point cloud (.xyz, .ply or .obj).
    #[arg(long, short)]
    pub input: PathBuf,

    /// Override the format implied by the file extension.
    #[arg(long, value_parser = parse_cloud_format)]
    pub format: Option<meshless::pointcloud::CloudFormat>,

    /// Neighbors used when normals must be estimated.
    #[arg(long)]
    pub normals_k: Option<usize>,

    /// How estimated normals are oriented.
    #[arg(long, value_enum)]
    pub orientation: Option<OrientationArg>,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Nodes per axis of the extraction grid.
    #[arg(long)]
    pub grid: Option<usize>,

    /// Percentile for the Hd-K criterion.
    #[arg(long)]
    pub k: Option<f64>,

    /// Score against this many surface samples instead of the mesh vertices.
    #[arg(long)]
    pub samples: Option<usize>,

    /// Seed for surface sampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub cloud: CloudArgs,

    /// mq, kansa, mfs (= mfs-ii), mfs-i or mfs-ii.
    #[arg(long, short, value_parser = parse_method)]
    pub method: Option<Method>,

    /// Fixed λ for Kansa and MFS.
    #[arg(long, conflicts_with = "auto_lambda", allow_negative_numbers = true)]
    pub lambda: Option<f64>,

    /// Choose λ by minimizing this criterion (the default when --lambda is absent).
    #[arg(long, value_parser = parse_criterion)]
    pub auto_lambda: Option<Criterion>,

    /// λ candidates for --auto-lambda: `lo:hi:n` (log-spaced) or a comma list.
    #[arg(long, value_parser = parse_grid)]
    pub lambda_grid: Option<GridSpec>,

    /// NMQ shape parameter for MQ and Kansa.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,

    #[command(flatten)]
    pub scoring: ScoringArgs,

    /// Mesh output; format from the extension (.obj or .ply).
    #[arg(long, short)]
    pub out: Option<PathBuf>,

    /// Model output (JSON).
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cloud: CloudArgs,

    /// kansa, mfs (= mfs-ii), mfs-i or mfs-ii.
    #[arg(long, short, value_parser = parse_method)]
    pub method: Option<Method>,

    /// hd, scd, aad or hdk.
    #[arg(long, value_parser = parse_criterion)]
    pub criterion: Option<Criterion>,

    /// `lo:hi:n` (log-spaced) or a comma list.
    #[arg(long, value_parser = parse_grid)]
    pub lambda_grid: Option<GridSpec>,

    /// Skip the refinement pass around the coarse minimum.
    #[arg(long)]
    pub no_refine: bool,

    /// NMQ shape parameter for Kansa.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,

    #[command(flatten)]
    pub scoring: ScoringArgs,

    /// Criterion-versus-λ CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    /// Model written by `reconstruct --model-out`.
    #[arg(long)]
    pub model: PathBuf,

    /// Nodes per axis of the counting grid.
    #[arg(long, conflicts_with = "grid_list")]
    pub grid: Option<usize>,

    /// Several resolutions, comma separated and ascending.
    #[arg(long, value_delimiter = ',')]
    pub grid_list: Option<Vec<usize>>,

    /// Count over this cloud's bounding box instead of the one stored in the model.
    #[arg(long)]
    pub cloud: Option<PathBuf>,

    /// CSV report.
    #[arg(long, short)]
    pub out: Option<PathBuf>,

    /// Accepted for uniformity; volume counting is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub shape: ShapeArg,

    /// Number of points.
    #[arg(long)]
    pub n: usize,

    /// Rotates the sampling lattice about the z axis; 0 leaves it unrotated.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output .xyz file.
    #[arg(long, short)]
    pub out: PathBuf,

    /// Append analytic normals to each line.
    #[arg(long)]
    pub normals: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeArg {
    Sphere,
    Bumpy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationArg {
    Centroid,
    SpanningTree,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: meshless::Error| e.to_string())
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: meshless::Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    s.parse().map_err(|e: meshless::Error| e.to_string())
}

fn parse_cloud_format(s: &str) -> Result<meshless::pointcloud::CloudFormat, String> {
    s.parse().map_err(|e: meshless::Error| e.to_string())
}
