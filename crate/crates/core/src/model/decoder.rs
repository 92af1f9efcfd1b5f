//! Query side: relative encoding, attention weighting, interpolation and
//! decoding, batched over `Q` queries × `k` neighbors.

use super::network::{Grads, Net};
use crate::error::Result;
use crate::geometry::{KdTree, Point3};
use crate::numerics::{
    axpy, dot, linear, linear_backward, relu, relu_backward, softmax_backward_into, softmax_into,
    Matrix,
};
use crate::scalar::Real;

/// Activations kept for the backward pass.
pub(crate) struct QueryCache<T> {
    kq: usize,
    neighbors: Vec<usize>,
    x0: Matrix<T>,
    pre1: Matrix<T>,
    h1: Matrix<T>,
    pre2: Matrix<T>,
    h2: Matrix<T>,
    zr: Matrix<T>,
    heads: Matrix<T>,
    s: Vec<T>,
    zq: Matrix<T>,
}

/// Relative encoder `R` on stacked `[z_p ∥ q − p]` rows.
pub(crate) struct RelativeActivations<T> {
    pub pre1: Matrix<T>,
    pub h1: Matrix<T>,
    pub pre2: Matrix<T>,
    pub h2: Matrix<T>,
    pub zr: Matrix<T>,
}

pub(crate) fn relative_forward<T: Real>(
    net: &Net<'_, T>,
    x0: &Matrix<T>,
) -> Result<RelativeActivations<T>> {
    let [(w1, b1), (w2, b2), (w3, b3)] = net.layout.relative;
    let pre1 = linear(x0, net.p(w1), Some(net.p(b1)))?;
    let h1 = relu(&pre1);
    let pre2 = linear(&h1, net.p(w2), Some(net.p(b2)))?;
    let h2 = relu(&pre2);
    let zr = linear(&h2, net.p(w3), Some(net.p(b3)))?;
    Ok(RelativeActivations {
        pre1,
        h1,
        pre2,
        h2,
        zr,
    })
}

/// Per-head softmax over each block of `kq` rows, then the head average.
pub(crate) fn attention_from_logits<T: Real>(logits: &Matrix<T>, kq: usize) -> (Matrix<T>, Vec<T>) {
    let rows = logits.rows();
    let h = logits.cols();
    let mut heads = Matrix::zeros(rows, h);
    let mut col = vec![T::zero(); kq];
    let mut soft = vec![T::zero(); kq];
    for start in (0..rows).step_by(kq) {
        for c in 0..h {
            for (r, v) in col.iter_mut().enumerate() {
                *v = logits.get(start + r, c);
            }
            softmax_into(&col, &mut soft);
            for (r, &v) in soft.iter().enumerate() {
                heads.set(start + r, c, v);
            }
        }
    }
    let inv_h = T::one() / T::from_usize_lossy(h);
    let s = (0..rows)
        .map(|r| heads.row(r).iter().copied().sum::<T>() * inv_h)
        .collect();
    (heads, s)
}

pub(crate) fn stack_relative_inputs<T: Real>(
    latents: &Matrix<T>,
    positions: &[Point3<T>],
    queries: &[Point3<T>],
    neighbors: &[usize],
    kq: usize,
) -> Matrix<T> {
    let n = latents.cols();
    let mut x0 = Matrix::zeros(neighbors.len(), n + 3);
    for (row, &j) in neighbors.iter().enumerate() {
        let q = queries[row / kq];
        let delta = q - positions[j];
        let dst = x0.row_mut(row);
        dst[..n].copy_from_slice(latents.row(j));
        dst[n] = delta.x;
        dst[n + 1] = delta.y;
        dst[n + 2] = delta.z;
    }
    x0
}

pub(crate) fn query_forward<T: Real>(
    net: &Net<'_, T>,
    latents: &Matrix<T>,
    tree: &KdTree<T>,
    queries: &[Point3<T>],
) -> Result<(Matrix<T>, QueryCache<T>)> {
    let kq = net.cfg.neighbors.min(tree.len());
    let mut neighbors = Vec::with_capacity(queries.len() * kq);
    let mut buf = Vec::with_capacity(kq);
    for &q in queries {
        tree.knn_into(q, kq, &mut buf);
        neighbors.extend(buf.iter().map(|nb| nb.index));
    }
    let x0 = stack_relative_inputs(latents, tree.points(), queries, &neighbors, kq);
    let rel = relative_forward(net, &x0)?;
    let lg = linear(&rel.zr, net.p(net.layout.attention), None)?;
    let (heads, s) = attention_from_logits(&lg, kq);

    let n = rel.zr.cols();
    let mut zq = Matrix::zeros(queries.len(), n);
    for (row, &w) in s.iter().enumerate() {
        axpy(w, rel.zr.row(row), zq.row_mut(row / kq));
    }
    let logits = linear(
        &zq,
        net.p(net.layout.decoder_w),
        Some(net.p(net.layout.decoder_b)),
    )?;
    Ok((
        logits,
        QueryCache {
            kq,
            neighbors,
            x0,
            pre1: rel.pre1,
            h1: rel.h1,
            pre2: rel.pre2,
            h2: rel.h2,
            zr: rel.zr,
            heads,
            s,
            zq,
        },
    ))
}

/// Backpropagates logit gradients to the latents (`N × n`) and parameters.
pub(crate) fn query_backward<T: Real>(
    net: &Net<'_, T>,
    cache: &QueryCache<T>,
    dlogits: &Matrix<T>,
    num_points: usize,
) -> Result<(Matrix<T>, Grads<T>)> {
    let lay = net.layout;
    let mut grads = Vec::new();
    let dec = linear_backward(&cache.zq, net.p(lay.decoder_w), dlogits)?;
    grads.push((lay.decoder_w, dec.dw));
    grads.push((lay.decoder_b, dec.db));
    let dzq = dec.dx;

    let kq = cache.kq;
    let rows = cache.zr.rows();
    let n = cache.zr.cols();
    let h = cache.heads.cols();
    let mut dzr = Matrix::zeros(rows, n);
    let mut ds = vec![T::zero(); rows];
    for row in 0..rows {
        let g = dzq.row(row / kq);
        ds[row] = dot(g, cache.zr.row(row));
        axpy(cache.s[row], g, dzr.row_mut(row));
    }

    // s = mean of the per-head softmaxes.
    let inv_h = T::one() / T::from_usize_lossy(h);
    let mut dlg = Matrix::zeros(rows, h);
    let mut y = vec![T::zero(); kq];
    let mut dy = vec![T::zero(); kq];
    let mut dx = vec![T::zero(); kq];
    for start in (0..rows).step_by(kq) {
        for r in 0..kq {
            dy[r] = ds[start + r] * inv_h;
        }
        for c in 0..h {
            for r in 0..kq {
                y[r] = cache.heads.get(start + r, c);
            }
            softmax_backward_into(&y, &dy, &mut dx);
            for r in 0..kq {
                dlg.set(start + r, c, dx[r]);
            }
        }
    }
    let att = linear_backward(&cache.zr, net.p(lay.attention), &dlg)?;
    grads.push((lay.attention, att.dw));
    dzr.add_assign(&att.dx)?;

    let [(w1, b1), (w2, b2), (w3, b3)] = lay.relative;
    let g3 = linear_backward(&cache.h2, net.p(w3), &dzr)?;
    grads.push((w3, g3.dw));
    grads.push((b3, g3.db));
    let dpre2 = relu_backward(&cache.pre2, &g3.dx);
    let g2 = linear_backward(&cache.h1, net.p(w2), &dpre2)?;
    grads.push((w2, g2.dw));
    grads.push((b2, g2.db));
    let dpre1 = relu_backward(&cache.pre1, &g2.dx);
    let g1 = linear_backward(&cache.x0, net.p(w1), &dpre1)?;
    grads.push((w1, g1.dw));
    grads.push((b1, g1.db));

    let mut dlatents = Matrix::zeros(num_points, n);
    for (row, &j) in cache.neighbors.iter().enumerate() {
        let src = &g1.dx.row(row)[..n];
        for (a, &g) in dlatents.row_mut(j).iter_mut().zip(src) {
            *a += g;
        }
    }
    Ok((dlatents, grads))
}
