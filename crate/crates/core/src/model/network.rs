use rand::Rng;

use super::PocoConfig;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamId, ParamStore};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EncoderLayerIds {
    /// `hidden × (d_in + 3)`: applied to `[F_j ∥ p_j − p_i]`.
    pub message_w: ParamId,
    pub message_b: ParamId,
    /// `hidden × d_in`, no bias.
    pub residual_w: ParamId,
}

/// Where each weight lives in the [`ParamStore`]. Insertion order is the
/// serialization order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub encoder: Vec<EncoderLayerIds>,
    pub encoder_out_w: ParamId,
    pub encoder_out_b: ParamId,
    pub relative: [(ParamId, ParamId); 3],
    pub attention: ParamId,
    pub decoder_w: ParamId,
    pub decoder_b: ParamId,
}

/// Expected `(name, rows, cols)` of every parameter, in storage order.
pub(crate) fn parameter_shapes(cfg: &PocoConfig) -> Vec<(String, usize, usize)> {
    let d0 = cfg.input_features();
    let (n, hid) = (cfg.latent_size, cfg.hidden);
    let mut shapes = Vec::new();
    let mut d = d0;
    for l in 0..cfg.encoder_layers {
        shapes.push((format!("encoder.{l}.message.w"), hid, d + 3));
        shapes.push((format!("encoder.{l}.message.b"), hid, 1));
        shapes.push((format!("encoder.{l}.residual.w"), hid, d));
        d = hid;
    }
    shapes.push(("encoder.out.w".into(), n, d));
    shapes.push(("encoder.out.b".into(), n, 1));
    for (i, input) in [(1, n + 3), (2, n), (3, n)] {
        shapes.push((format!("relative.{i}.w"), n, input));
        shapes.push((format!("relative.{i}.b"), n, 1));
    }
    shapes.push(("attention.w".into(), cfg.heads, n));
    shapes.push(("decoder.w".into(), 2, n));
    shapes.push(("decoder.b".into(), 2, 1));
    shapes
}

fn layout_for(cfg: &PocoConfig) -> Layout {
    let id = ParamId;
    let mut next = 0;
    let mut take = || {
        next += 1;
        id(next - 1)
    };
    let encoder = (0..cfg.encoder_layers)
        .map(|_| EncoderLayerIds {
            message_w: take(),
            message_b: take(),
            residual_w: take(),
        })
        .collect();
    Layout {
        encoder,
        encoder_out_w: take(),
        encoder_out_b: take(),
        relative: [(take(), take()), (take(), take()), (take(), take())],
        attention: take(),
        decoder_w: take(),
        decoder_b: take(),
    }
}

/// All learnable parameters of the occupancy network.
#[derive(Debug, Clone, PartialEq)]
pub struct PocoModel<T> {
    config: PocoConfig,
    params: ParamStore<T>,
    pub(crate) layout: Layout,
}

impl<T: Real> PocoModel<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn new(config: PocoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::seeded_rng(seed);
        let mut params = ParamStore::new();
        for (name, rows, cols) in parameter_shapes(&config) {
            let value = if name.ends_with(".b") {
                Matrix::zeros(rows, cols)
            } else {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                Matrix::from_fn(rows, cols, |_, _| T::lit(rng.random_range(-bound..bound)))
            };
            params.add(name, value);
        }
        Ok(Self {
            layout: layout_for(&config),
            config,
            params,
        })
    }

    /// Assembles a model from matrices given in storage order.
    pub fn from_matrices(config: PocoConfig, matrices: Vec<Matrix<T>>) -> Result<Self> {
        config.validate()?;
        let shapes = parameter_shapes(&config);
        if shapes.len() != matrices.len() {
            return Err(Error::CorruptModel(format!(
                "expected {} parameter matrices, found {}",
                shapes.len(),
                matrices.len()
            )));
        }
        let mut params = ParamStore::new();
        for ((name, rows, cols), m) in shapes.into_iter().zip(matrices) {
            if m.shape() != (rows, cols) {
                return Err(Error::CorruptModel(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    m.shape(),
                    (rows, cols)
                )));
            }
            if !m.is_finite() {
                return Err(Error::CorruptModel(format!("parameter {name} is not finite")));
            }
            params.add(name, m);
        }
        Ok(Self {
            layout: layout_for(&config),
            config,
            params,
        })
    }

    pub fn config(&self) -> &PocoConfig {
        &self.config
    }

    /// Toggles centroid subtraction before encoding.
    pub fn set_centered(&mut self, centered: bool) {
        self.config.centered = centered;
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> PocoModel<U> {
        let matrices = self.params.iter().map(|p| p.value.cast()).collect();
        PocoModel::from_matrices(self.config, matrices).expect("same layout")
    }

    pub(crate) fn net<'a>(&'a self, params: &'a ParamStore<T>) -> Net<'a, T> {
        Net {
            cfg: &self.config,
            layout: &self.layout,
            params,
        }
    }
}

/// Read-only view pairing a layout with a parameter set, so losses can be
/// evaluated against perturbed copies of the weights.
#[derive(Clone, Copy)]
pub(crate) struct Net<'a, T> {
    pub cfg: &'a PocoConfig,
    pub layout: &'a Layout,
    pub params: &'a ParamStore<T>,
}

impl<'a, T: Real> Net<'a, T> {
    #[inline]
    pub fn p(&self, id: ParamId) -> &'a Matrix<T> {
        self.params.value(id)
    }
}

/// Parameter gradients produced by a backward pass.
pub(crate) type Grads<T> = Vec<(ParamId, Matrix<T>)>;
