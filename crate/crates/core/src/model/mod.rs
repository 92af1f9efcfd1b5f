//! The occupancy network: absolute encoder, relative encoder, multi-head
//! attention weights, interpolation, decoder, loss and training.

mod analytic;
mod config;
mod decoder;
pub(crate) mod encoder;
mod network;
mod train;

pub use analytic::AnalyticField;
pub use config::PocoConfig;
pub use network::PocoModel;
pub use train::{make_training_batch, train, train_with_progress, TrainLog, TrainOptions, TrainingBatch};

pub(crate) use network::parameter_shapes;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{KdTree, Point3, PointCloud};
use crate::numerics::{linear, softmax_into, Matrix};
use crate::scalar::Real;
use encoder::{EncoderInput, EncoderMode};

/// Anything that maps a point to an occupancy probability in `[0, 1]`.
pub trait OccupancyField<T: Real>: Sync {
    fn occupancy(&self, q: Point3<T>) -> T;

    /// Order-preserving batch evaluation.
    fn occupancy_batch(&self, queries: &[Point3<T>]) -> Vec<T> {
        queries.iter().map(|&q| self.occupancy(q)).collect()
    }
}

impl<T: Real, F: OccupancyField<T> + ?Sized> OccupancyField<T> for &F {
    fn occupancy(&self, q: Point3<T>) -> T {
        (**self).occupancy(q)
    }
    fn occupancy_batch(&self, queries: &[Point3<T>]) -> Vec<T> {
        (**self).occupancy_batch(queries)
    }
}

/// One latent vector per input point, plus the index used to find the
/// neighbors of a query.
#[derive(Debug, Clone)]
pub struct LatentField<T> {
    cloud: PointCloud<T>,
    tree: KdTree<T>,
    latents: Matrix<T>,
}

impl<T: Real> LatentField<T> {
    pub fn new(cloud: PointCloud<T>, latents: Matrix<T>) -> Result<Self> {
        if latents.rows() != cloud.len() {
            return Err(Error::ShapeMismatch {
                op: "latent field",
                lhs: latents.shape(),
                rhs: (cloud.len(), latents.cols()),
            });
        }
        if !latents.is_finite() {
            return Err(Error::InvalidCloud("non-finite latent vector".into()));
        }
        let tree = KdTree::build(&cloud)?;
        Ok(Self {
            cloud,
            tree,
            latents,
        })
    }

    pub fn cloud(&self) -> &PointCloud<T> {
        &self.cloud
    }

    pub fn tree(&self) -> &KdTree<T> {
        &self.tree
    }

    pub fn latents(&self) -> &Matrix<T> {
        &self.latents
    }
}

/// Output of the decoder for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoded<T> {
    /// `[empty, full]`.
    pub logits: [T; 2],
    pub prob_empty: T,
    pub prob_full: T,
}

/// Weighted sum of relative latents: `Σ_p s_p · zrel_p`.
pub fn interpolate<T: Real>(zrel: &Matrix<T>, weights: &[T]) -> Vec<T> {
    assert_eq!(zrel.rows(), weights.len(), "one weight per relative latent");
    let mut out = vec![T::zero(); zrel.cols()];
    for (r, &w) in weights.iter().enumerate() {
        crate::numerics::axpy(w, zrel.row(r), &mut out);
    }
    out
}

const QUERY_CHUNK: usize = 256;

impl<T: Real> PocoModel<T> {
    /// Encodes every point of `cloud` into a latent vector.
    pub fn encode(&self, cloud: &PointCloud<T>) -> Result<LatentField<T>> {
        let latents = self.encode_latents(cloud)?;
        LatentField::new(cloud.clone(), latents)
    }

    /// The `N × n` latent matrix of [`PocoModel::encode`].
    pub fn encode_latents(&self, cloud: &PointCloud<T>) -> Result<Matrix<T>> {
        let net = self.net(self.params());
        let input = EncoderInput::prepare(&net, cloud)?;
        Ok(encoder::forward(&net, &input, EncoderMode::Standard)?.0)
    }

    /// `R(z_p ∥ delta)`.
    pub fn relative_encode(&self, z_p: &[T], delta: Point3<T>) -> Result<Vec<T>> {
        let n = self.config().latent_size;
        if z_p.len() != n {
            return Err(Error::ShapeMismatch {
                op: "relative_encode",
                lhs: (1, z_p.len()),
                rhs: (1, n),
            });
        }
        let mut row = z_p.to_vec();
        row.extend(delta.to_array());
        let x0 = Matrix::from_vec(1, n + 3, row)?;
        let net = self.net(self.params());
        Ok(decoder::relative_forward(&net, &x0)?.zr.into_vec())
    }

    /// Interpolation weights over the rows of `zrel` (`k × n`): per-head
    /// softmax of `w_i · z_pq`, averaged over heads.
    pub fn attention_weights(&self, zrel: &Matrix<T>) -> Result<Vec<T>> {
        let logits = linear(zrel, self.params().value(self.layout.attention), None)?;
        Ok(decoder::attention_from_logits(&logits, zrel.rows()).1)
    }

    pub fn decode(&self, z_q: &[T]) -> Result<Decoded<T>> {
        let x = Matrix::from_vec(1, z_q.len(), z_q.to_vec())?;
        let lay = &self.layout;
        let l = linear(
            &x,
            self.params().value(lay.decoder_w),
            Some(self.params().value(lay.decoder_b)),
        )?;
        let logits = [l.get(0, 0), l.get(0, 1)];
        let mut p = [T::zero(); 2];
        softmax_into(&logits, &mut p);
        Ok(Decoded {
            logits,
            prob_empty: p[0],
            prob_full: p[1],
        })
    }

    fn check_field(&self, field: &LatentField<T>) -> Result<()> {
        if field.latents.cols() != self.config().latent_size {
            return Err(Error::ShapeMismatch {
                op: "occupancy",
                lhs: field.latents.shape(),
                rhs: (field.cloud.len(), self.config().latent_size),
            });
        }
        Ok(())
    }

    /// Occupancy probability of one query.
    pub fn occupancy(&self, field: &LatentField<T>, q: Point3<T>) -> Result<T> {
        Ok(self.occupancy_batch(field, &[q])?[0])
    }

    /// Occupancy of many queries; each result depends only on its own query,
    /// so chunks are evaluated in parallel without changing any value.
    pub fn occupancy_batch(&self, field: &LatentField<T>, queries: &[Point3<T>]) -> Result<Vec<T>> {
        self.check_field(field)?;
        let net = self.net(self.params());
        let chunks: Vec<Result<Vec<T>>> = queries
            .par_chunks(QUERY_CHUNK)
            .map(|chunk| {
                let (logits, _) =
                    decoder::query_forward(&net, &field.latents, &field.tree, chunk)?;
                let mut p = [T::zero(); 2];
                Ok((0..logits.rows())
                    .map(|r| {
                        softmax_into(logits.row(r), &mut p);
                        p[1]
                    })
                    .collect())
            })
            .collect();
        let mut out = Vec::with_capacity(queries.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }

    /// Binds the model to a latent field as an [`OccupancyField`].
    pub fn field<'a>(&'a self, latents: &'a LatentField<T>) -> Result<ModelField<'a, T>> {
        self.check_field(latents)?;
        Ok(ModelField {
            model: self,
            latents,
        })
    }
}

/// A trained model evaluated over one latent field.
#[derive(Clone, Copy)]
pub struct ModelField<'a, T> {
    model: &'a PocoModel<T>,
    latents: &'a LatentField<T>,
}

impl<T: Real> OccupancyField<T> for ModelField<'_, T> {
    fn occupancy(&self, q: Point3<T>) -> T {
        self.model
            .occupancy(self.latents, q)
            .expect("field validated at binding")
    }

    fn occupancy_batch(&self, queries: &[Point3<T>]) -> Vec<T> {
        self.model
            .occupancy_batch(self.latents, queries)
            .expect("field validated at binding")
    }
}
