//! Meshless implicit surface reconstruction and volume estimation.
//!
//! A point cloud sampled from a closed surface is turned into a scalar field
//! `u(x)` whose level set `u = κ` approximates the surface. Three builders are
//! provided:
//!
//! - [`recon::build_mq`]: multiquadric interpolation with ±ϱ off-surface points (κ = 0),
//! - [`recon::build_kansa`]: Kansa collocation of `Δu − λu = 1`, `u = 1` on the cloud (κ = 1),
//! - [`recon::build_mfs`]: method of fundamental solutions with collocated sources (κ = 1).
//!
//! The field is sampled on a uniform grid ([`grid`]), polygonized with marching
//! cubes ([`mesh`]), scored against the input cloud ([`metrics`]), and the free
//! parameter λ is chosen by a criterion sweep ([`tuning`]). Volume is estimated by
//! counting interior grid nodes ([`volume`]).

pub mod datasets;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod linsolve;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod pointcloud;
pub mod recon;
pub mod spatial;
pub mod tuning;
pub mod volume;

mod fastmath;

pub use error::{Error, Result};
pub use model::{ImplicitModel, Kernel, Method};
pub use pointcloud::{BoundingBox, PointCloud};

/// Positions in model units.
pub type Point = nalgebra::Point3<f64>;
/// Directions and normals.
pub type Vector = nalgebra::Vector3<f64>;

/// Version of the library, reported by the CLI alongside the file format versions.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
