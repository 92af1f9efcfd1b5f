//! Receptive-field probe.
//!
//! The encoder is replaced by its linearized twin (mean aggregation, no
//! ReLU), a unit cotangent is placed on every latent component of one point,
//! and the input points whose gradient norm exceeds a threshold are
//! reported. Features and positions are separate encoder inputs; a point's
//! gradient is the concatenation of both. Gradients stop at the centered
//! coordinates and do not flow through the centroid.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::model::encoder::{self, EncoderInput, EncoderMode};
use crate::model::PocoModel;
use crate::numerics::Matrix;
use crate::scalar::Real;

pub const DEFAULT_PROBE_THRESHOLD: f64 = 1e-7;

/// Per-point L2 norm of the input gradient of `Σ_c z[point_index][c]` under
/// the linearized encoder.
pub fn receptive_field_gradients<T: Real>(
    model: &PocoModel<T>,
    cloud: &PointCloud<T>,
    point_index: usize,
) -> Result<Vec<T>> {
    if point_index >= cloud.len() {
        return Err(Error::InvalidConfig(format!(
            "point index {point_index} out of range for {} points",
            cloud.len()
        )));
    }
    let net = model.net(model.params());
    let input = EncoderInput::prepare(&net, cloud)?;
    let (latents, cache) = encoder::forward(&net, &input, EncoderMode::Linearized)?;
    let mut seed = Matrix::zeros(latents.rows(), latents.cols());
    for v in seed.row_mut(point_index) {
        *v = T::one();
    }
    let (_, grads) = encoder::backward(&net, &input, &cache, &seed, EncoderMode::Linearized)?;
    Ok((0..cloud.len())
        .map(|j| {
            let f: T = grads.features.row(j).iter().map(|&g| g * g).sum();
            let p: T = grads.positions.row(j).iter().map(|&g| g * g).sum();
            (f + p).sqrt()
        })
        .collect())
}

/// Ascending indices of the points that influence the latent of
/// `point_index` by more than `threshold`.
pub fn receptive_field_probe<T: Real>(
    model: &PocoModel<T>,
    cloud: &PointCloud<T>,
    point_index: usize,
    threshold: T,
) -> Result<Vec<usize>> {
    let norms = receptive_field_gradients(model, cloud, point_index)?;
    Ok(norms
        .iter()
        .enumerate()
        .filter(|&(_, &g)| g > threshold)
        .map(|(j, _)| j)
        .collect())
}
