//! Point-convolution occupancy networks for surface reconstruction.
//!
//! The pipeline encodes every input point into a latent vector, interpolates
//! query-relative latents with learned multi-head attention weights, decodes
//! them into occupancy probabilities and meshes the 0.5 level set with a
//! region-growing marching cubes.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the 64-bit precision used for training and verification.

pub mod error;
pub mod geometry;
pub mod io;
pub mod mesher;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod probe;
pub mod scalar;
pub mod tta;

pub use error::{Error, Result};
pub use scalar::Real;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Point3 = geometry::Point3<f64>;
pub type Aabb = geometry::Aabb<f64>;
pub type PointCloud = geometry::PointCloud<f64>;
pub type KdTree = geometry::KdTree<f64>;
pub type Mesh = geometry::Mesh<f64>;
pub type Matrix = numerics::Matrix<f64>;
pub type ParamStore = numerics::ParamStore<f64>;
pub type AdamState = numerics::AdamState<f64>;
pub type PocoModel = model::PocoModel<f64>;
pub type LatentField = model::LatentField<f64>;
pub type AnalyticField = model::AnalyticField<f64>;
pub type GridSpec = mesher::GridSpec<f64>;

/// The one generator every seeded operation draws from.
pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
