//! Differentiable surface reconstruction with softened triangle meshes.
//!
//! A base mesh is offset along its vertex normals into several semi-transparent
//! layers whose alphas depend on their signed distance to the base surface. The
//! layers are rendered with a tile-based splatting rasterizer and composited
//! near-to-far, and image-space losses are pushed back to the base vertices
//! through the alpha path. Topology is handled by a marching-tetrahedra warmup
//! followed by continuous isotropic remeshing.
//!
//! Module map:
//!
//! - [`geometry`]: meshes, cameras, images, file formats and the exact ray oracle
//! - [`dmtet`]: tetrahedral SDF grid, marching tetrahedra and its backward pass
//! - [`soften`]: layer sampling, stop-gradient signed distances, SDF to alpha
//! - [`splat`]: tiled renderer, reference renderer and analytic backward pass
//! - [`appearance`]: per-vertex color squashing
//! - [`remesh`]: split/collapse/flip/smooth remeshing with state remapping
//! - [`train`]: losses, Adam and the two-stage training loop
//! - [`harness`]: synthetic datasets, Chamfer evaluation and ablation drivers

pub mod appearance;
pub mod dmtet;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod remesh;
pub mod soften;
pub mod splat;
pub mod train;

pub use error::{Error, Result};
pub use geometry::{Camera, Image, Mesh, Vec3};
