use rand::Rng;

use super::decoder::{query_backward, query_forward};
use super::encoder::{self, EncoderInput, EncoderMode};
use super::network::Grads;
use super::{AnalyticField, PocoModel};
use crate::error::{Error, Result};
use crate::geometry::{add_gaussian_noise, KdTree, Point3, PointCloud};
use crate::numerics::{adam_step, cross_entropy, AdamState, ParamStore};
use crate::scalar::Real;

/// Input cloud, query points and their ground-truth labels (1 = inside).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch<T> {
    pub cloud: PointCloud<T>,
    pub queries: Vec<Point3<T>>,
    pub labels: Vec<u8>,
}

/// Samples `n_points` noisy surface points and `n_queries` uniform queries
/// in the field's bounding box grown by 10% (5% per side).
pub fn make_training_batch<T: Real>(
    field: &AnalyticField<T>,
    n_points: usize,
    n_queries: usize,
    sigma_noise: T,
    seed: u64,
) -> Result<TrainingBatch<T>> {
    let mut rng = crate::seeded_rng(seed);
    let surface_seed: u64 = rng.random();
    let noise_seed: u64 = rng.random();
    let clean = field.sample_surface(n_points, surface_seed)?;
    let cloud = add_gaussian_noise(&clean, sigma_noise, noise_seed);
    let bounds = field.bounds().inflated(T::lit(0.05));
    let (lo, ext) = (bounds.min.cast::<f64>(), bounds.extent().cast::<f64>());
    let queries: Vec<Point3<T>> = (0..n_queries)
        .map(|_| {
            Point3::new(
                lo.x + ext.x * rng.random::<f64>(),
                lo.y + ext.y * rng.random::<f64>(),
                lo.z + ext.z * rng.random::<f64>(),
            )
            .cast()
        })
        .collect();
    let labels = queries.iter().map(|&q| field.contains(q) as u8).collect();
    Ok(TrainingBatch {
        cloud,
        queries,
        labels,
    })
}

impl<T: Real> PocoModel<T> {
    fn forward_backward(
        &self,
        params: &ParamStore<T>,
        batch: &TrainingBatch<T>,
        with_grad: bool,
    ) -> Result<(T, Grads<T>)> {
        let net = self.net(params);
        let input = EncoderInput::prepare(&net, &batch.cloud)?;
        let (latents, enc_cache) = encoder::forward(&net, &input, EncoderMode::Standard)?;
        let tree = KdTree::build(&batch.cloud)?;
        let (logits, q_cache) = query_forward(&net, &latents, &tree, &batch.queries)?;
        let (loss, dlogits) = cross_entropy(&logits, &batch.labels)?;
        if !with_grad {
            return Ok((loss, Vec::new()));
        }
        let (dlatents, mut grads) = query_backward(&net, &q_cache, &dlogits, batch.cloud.len())?;
        let (enc_grads, _) =
            encoder::backward(&net, &input, &enc_cache, &dlatents, EncoderMode::Standard)?;
        grads.extend(enc_grads);
        Ok((loss, grads))
    }

    /// Mean cross-entropy of the batch under `params` (which must share this
    /// model's layout).
    pub fn batch_loss(&self, params: &ParamStore<T>, batch: &TrainingBatch<T>) -> Result<T> {
        Ok(self.forward_backward(params, batch, false)?.0)
    }

    /// Loss of the batch; adds its gradient into the model's gradient buffers.
    pub fn loss_and_grad(&mut self, batch: &TrainingBatch<T>) -> Result<T> {
        let (loss, grads) = self.forward_backward(self.params(), batch, true)?;
        for (id, g) in grads {
            self.params_mut().accumulate(id, &g)?;
        }
        Ok(loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub steps: usize,
    pub batch_points: usize,
    pub batch_queries: usize,
    pub lr: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_points: 512,
            batch_queries: 200,
            lr: 1e-3,
            noise_sigma: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub losses: Vec<f64>,
}

/// Adam training on fresh batches drawn from `field` at every step.
pub fn train<T: Real>(
    model: &mut PocoModel<T>,
    field: &AnalyticField<T>,
    opts: &TrainOptions,
) -> Result<TrainLog> {
    train_with_progress(model, field, opts, |_, _| {})
}

/// [`train`] with a callback receiving `(step, loss)` after every update.
pub fn train_with_progress<T: Real>(
    model: &mut PocoModel<T>,
    field: &AnalyticField<T>,
    opts: &TrainOptions,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainLog> {
    if opts.steps == 0 {
        return Err(Error::InvalidConfig("steps must be at least 1".into()));
    }
    let mut adam = AdamState::new(model.params(), T::lit(opts.lr));
    let mut rng = crate::seeded_rng(opts.seed);
    let mut log = TrainLog {
        losses: Vec::with_capacity(opts.steps),
    };
    for step in 0..opts.steps {
        let batch = make_training_batch(
            field,
            opts.batch_points,
            opts.batch_queries,
            T::lit(opts.noise_sigma),
            rng.random(),
        )?;
        model.params_mut().zero_grad();
        let loss = model.loss_and_grad(&batch)?.as_f64();
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(step));
        }
        adam_step(model.params_mut(), &mut adam)?;
        log.losses.push(loss);
        progress(step, loss);
    }
    Ok(log)
}
