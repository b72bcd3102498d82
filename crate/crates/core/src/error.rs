use std::path::PathBuf;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error in {path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cloud has {distinct} distinct points, at least 4 are required")]
    EmptyCloud { distinct: usize },
    #[error("neighborhood of point {index} is degenerate (rank < 2)")]
    DegenerateNeighborhood { index: usize },
    #[error("operation requires per-point normals but the cloud has none")]
    MissingNormals,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel is singular at r = 0")]
    SingularEvaluation,
    #[error(
        "matrix is singular: pivot {pivot:e} at column {column} below threshold {threshold:e}"
    )]
    SingularMatrix {
        column: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("linear system contains non-finite values")]
    NonFinite,
    #[error("LAPACK backend failed its self-check ({0}); with OpenBLAS, set OPENBLAS_CORETYPE (e.g. Haswell)")]
    Backend(String),
    #[error("Kansa collocation requires at least one interior node")]
    EmptyInterior,
    #[error("no grid cell spans the level {level}")]
    EmptySurface { level: f64 },
    #[error("distance metrics require two nonempty point sets")]
    EmptySet,
    #[error("every lambda candidate failed; last error: {last}")]
    AllCandidatesFailed { last: String },
    #[error("box-corner vote is split 4-4; cannot decide which side of the level is interior")]
    AmbiguousOrientation,
    #[error("unsupported model document version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures originating in the numerical core rather than input handling.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::NonFinite
                | Error::SingularEvaluation
                | Error::EmptySurface { .. }
                | Error::AmbiguousOrientation
                | Error::DegenerateNeighborhood { .. }
                | Error::AllCandidatesFailed { .. }
                | Error::EmptyInterior
        )
    }
}
