//! Reference point-convolution backbone.
//!
//! Each layer gathers the `k_enc` nearest neighbors `j` of every point `i`,
//! applies a linear message to `[F_j ∥ p_j − p_i]`, aggregates over `j`, adds a
//! linear projection of `F_i` and applies a ReLU. Since the message is linear,
//! `W·[F_j ∥ p_j − p_i] = U_j − V_i` with `U = [F ∥ P]·Wᵀ` and `V = P·W_pᵀ`, which
//! lets the aggregation run on per-point rows.

use super::network::{Grads, Net};
use crate::error::{Error, Result};
use crate::geometry::{KdTree, PointCloud};
use crate::numerics::{linear, linear_backward, relu, relu_backward, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EncoderMode {
    /// Max aggregation and ReLU.
    Standard,
    /// Mean aggregation, no activation: the linearized twin used to probe
    /// receptive fields.
    Linearized,
}

pub(crate) struct EncoderInput<T> {
    pub positions: Matrix<T>,
    pub features: Matrix<T>,
    /// Row-major `N × kk` neighbor indices, nearest first (self included).
    pub neighbors: Vec<usize>,
    pub kk: usize,
}

impl<T: Real> EncoderInput<T> {
    pub fn prepare(net: &Net<'_, T>, cloud: &PointCloud<T>) -> Result<Self> {
        let cfg = net.cfg;
        let n = cloud.len();
        if n < cfg.encoder_neighbors {
            return Err(Error::TooFewPoints {
                needed: cfg.encoder_neighbors,
                got: n,
            });
        }
        let normals = match (cfg.use_normals, cloud.normals()) {
            (true, None) => {
                return Err(Error::InvalidCloud(
                    "model expects normals but the cloud has none".into(),
                ))
            }
            (true, Some(nr)) => Some(nr),
            (false, _) => None,
        };
        let center = if cfg.centered {
            cloud.centroid()
        } else {
            crate::geometry::Point3::zero()
        };
        let local: Vec<_> = cloud.points().iter().map(|&p| p - center).collect();
        let positions = Matrix::from_fn(n, 3, |r, c| local[r][c]);
        let d0 = cfg.input_features();
        let features = Matrix::from_fn(n, d0, |r, c| match (c, normals) {
            (0..=2, _) => local[r][c],
            (_, Some(nr)) => nr[r][c - 3],
            _ => unreachable!(),
        });
        let kk = cfg.encoder_neighbors;
        let mut neighbors = Vec::with_capacity(n * kk);
        if cfg.encoder_layers > 0 {
            let tree = KdTree::from_points(local.clone())?;
            let mut buf = Vec::with_capacity(kk);
            for &p in &local {
                tree.knn_into(p, kk, &mut buf);
                neighbors.extend(buf.iter().map(|nb| nb.index));
            }
        }
        Ok(Self {
            positions,
            features,
            neighbors,
            kk,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.rows()
    }

    #[inline]
    pub fn neighbors_of(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.kk..(i + 1) * self.kk]
    }
}

struct LayerCache<T> {
    input: Matrix<T>,
    stacked: Matrix<T>,
    argmax: Vec<usize>,
    pre: Matrix<T>,
}

pub(crate) struct EncoderCache<T> {
    layers: Vec<LayerCache<T>>,
    last: Matrix<T>,
}

/// Input-side gradients of the encoder.
pub(crate) struct InputGrads<T> {
    pub features: Matrix<T>,
    pub positions: Matrix<T>,
}

fn split_position_columns<T: Real>(w: &Matrix<T>, d: usize) -> Matrix<T> {
    Matrix::from_fn(w.rows(), 3, |r, c| w.get(r, d + c))
}

fn hstack<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (ca, cb) = (a.cols(), b.cols());
    Matrix::from_fn(a.rows(), ca + cb, |r, c| {
        if c < ca {
            a.get(r, c)
        } else {
            b.get(r, c - ca)
        }
    })
}

pub(crate) fn forward<T: Real>(
    net: &Net<'_, T>,
    input: &EncoderInput<T>,
    mode: EncoderMode,
) -> Result<(Matrix<T>, EncoderCache<T>)> {
    let n = input.len();
    let mut layers = Vec::with_capacity(net.layout.encoder.len());
    let mut f = input.features.clone();
    for ids in &net.layout.encoder {
        let w = net.p(ids.message_w);
        let d = f.cols();
        let stacked = hstack(&f, &input.positions);
        let u = linear(&stacked, w, None)?;
        let v = linear(&input.positions, &split_position_columns(w, d), None)?;
        let mut pre = linear(&f, net.p(ids.residual_w), None)?;
        let bias = net.p(ids.message_b).data();
        let hid = u.cols();
        let mut argmax = Vec::new();
        match mode {
            EncoderMode::Standard => {
                argmax.reserve(n * hid);
                for i in 0..n {
                    let nbrs = input.neighbors_of(i);
                    let row = pre.row_mut(i);
                    for c in 0..hid {
                        let mut best = nbrs[0];
                        let mut val = u.get(best, c);
                        for &j in &nbrs[1..] {
                            let x = u.get(j, c);
                            if x > val {
                                val = x;
                                best = j;
                            }
                        }
                        argmax.push(best);
                        row[c] += val - v.get(i, c) + bias[c];
                    }
                }
            }
            EncoderMode::Linearized => {
                let inv = T::one() / T::from_usize_lossy(input.kk);
                for i in 0..n {
                    let nbrs = input.neighbors_of(i);
                    let row = pre.row_mut(i);
                    for c in 0..hid {
                        let mean = nbrs.iter().map(|&j| u.get(j, c)).sum::<T>() * inv;
                        row[c] += mean - v.get(i, c) + bias[c];
                    }
                }
            }
        }
        let out = match mode {
            EncoderMode::Standard => relu(&pre),
            EncoderMode::Linearized => pre.clone(),
        };
        layers.push(LayerCache {
            input: f,
            stacked,
            argmax,
            pre,
        });
        f = out;
    }
    let latents = linear(
        &f,
        net.p(net.layout.encoder_out_w),
        Some(net.p(net.layout.encoder_out_b)),
    )?;
    Ok((latents, EncoderCache { layers, last: f }))
}

pub(crate) fn backward<T: Real>(
    net: &Net<'_, T>,
    input: &EncoderInput<T>,
    cache: &EncoderCache<T>,
    dlatents: &Matrix<T>,
    mode: EncoderMode,
) -> Result<(Grads<T>, InputGrads<T>)> {
    let n = input.len();
    let mut grads = Vec::new();
    let out = linear_backward(&cache.last, net.p(net.layout.encoder_out_w), dlatents)?;
    grads.push((net.layout.encoder_out_w, out.dw));
    grads.push((net.layout.encoder_out_b, out.db));
    let mut df = out.dx;
    let mut dpos = Matrix::zeros(n, 3);

    for (ids, layer) in net.layout.encoder.iter().zip(&cache.layers).rev() {
        let w = net.p(ids.message_w);
        let d = layer.input.cols();
        let dpre = match mode {
            EncoderMode::Standard => relu_backward(&layer.pre, &df),
            EncoderMode::Linearized => df,
        };
        let hid = dpre.cols();

        let mut db = Matrix::zeros(hid, 1);
        for i in 0..n {
            for (acc, &g) in db.data_mut().iter_mut().zip(dpre.row(i)) {
                *acc += g;
            }
        }
        grads.push((ids.message_b, db));

        let res = linear_backward(&layer.input, net.p(ids.residual_w), &dpre)?;
        grads.push((ids.residual_w, res.dw));
        let mut dinput = res.dx;

        // V_i = W_p·p_i enters with a minus sign.
        let wp = split_position_columns(w, d);
        let neg = dpre.map(|g| -g);
        let vgrad = linear_backward(&input.positions, &wp, &neg)?;
        dpos.add_assign(&vgrad.dx)?;

        let mut du = Matrix::zeros(n, hid);
        match mode {
            EncoderMode::Standard => {
                for i in 0..n {
                    let row = dpre.row(i);
                    for c in 0..hid {
                        let j = layer.argmax[i * hid + c];
                        let cur = du.get(j, c);
                        du.set(j, c, cur + row[c]);
                    }
                }
            }
            EncoderMode::Linearized => {
                let inv = T::one() / T::from_usize_lossy(input.kk);
                for i in 0..n {
                    for &j in input.neighbors_of(i) {
                        let (src, dst) = (dpre.row(i), du.row_mut(j));
                        for (a, &g) in dst.iter_mut().zip(src) {
                            *a += g * inv;
                        }
                    }
                }
            }
        }
        let msg = linear_backward(&layer.stacked, w, &du)?;
        let mut dw = msg.dw;
        for r in 0..hid {
            for c in 0..3 {
                let cur = dw.get(r, d + c);
                dw.set(r, d + c, cur + vgrad.dw.get(r, c));
            }
        }
        grads.push((ids.message_w, dw));
        for i in 0..n {
            let src = msg.dx.row(i);
            for (a, &g) in dinput.row_mut(i).iter_mut().zip(&src[..d]) {
                *a += g;
            }
            for (a, &g) in dpos.row_mut(i).iter_mut().zip(&src[d..]) {
                *a += g;
            }
        }
        df = dinput;
    }
    Ok((
        grads,
        InputGrads {
            features: df,
            positions: dpos,
        },
    ))
}
