//! Geometry processing for sharp-feature-aware 3D shape encoding.
//!
//! The crate is organised around the pipeline it implements:
//!
//! - [`mesh`]: triangle meshes, OBJ/PLY IO, edge adjacency, watertightness
//!   checks and procedural fixture shapes.
//! - [`sampler`]: uniform and blue-noise surface sampling, farthest point
//!   sampling, salient (sharp) edge detection and Sharp Edge Sampling.
//! - [`bench`]: complexity levels, benchmark manifests and aggregated reports.
//! - [`metrics`]: F-score, Chamfer distance and Sharp Normal Error, together
//!   with the software rasterizer, Canny detector and dilation they need.
//! - [`neural`]: a small dual cross-attention occupancy VAE with a
//!   reverse-mode autodiff tape, marching cubes and a toy training loop.

pub mod bench;
pub mod error;
pub mod geom;
pub mod mesh;
pub mod metrics;
pub mod neural;
pub mod sampler;
pub mod spatial;

pub use error::{Error, Result};
pub use geom::Vec3;
pub use mesh::{EdgeAdjacency, EdgeKey, TriangleMesh, WatertightReport};
pub use sampler::{PointLabel, SalientEdgeSet, SurfacePointCloud};

/// Version string embedded into JSON outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
