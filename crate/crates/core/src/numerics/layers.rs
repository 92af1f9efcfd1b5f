//! Forward and hand-derived backward rules for the fixed layer set.

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gradients of [`linear`] with respect to its three inputs.
#[derive(Debug, Clone)]
pub struct LinearGrads<T> {
    pub dx: Matrix<T>,
    pub dw: Matrix<T>,
    pub db: Matrix<T>,
}

fn check_bias<T: Real>(w: &Matrix<T>, b: &Matrix<T>) -> Result<()> {
    if b.shape() != (w.rows(), 1) {
        return Err(Error::ShapeMismatch {
            op: "linear bias",
            lhs: w.shape(),
            rhs: b.shape(),
        });
    }
    Ok(())
}

/// `y = x·Wᵀ (+ b)` for `x: B×I`, `W: O×I`, `b: O×1`.
pub fn linear<T: Real>(x: &Matrix<T>, w: &Matrix<T>, b: Option<&Matrix<T>>) -> Result<Matrix<T>> {
    let mut y = x.matmul_nt(w).map_err(|_| Error::ShapeMismatch {
        op: "linear",
        lhs: x.shape(),
        rhs: w.shape(),
    })?;
    if let Some(b) = b {
        check_bias(w, b)?;
        let bias = b.data();
        for r in 0..y.rows() {
            for (v, &bb) in y.row_mut(r).iter_mut().zip(bias) {
                *v += bb;
            }
        }
    }
    Ok(y)
}

pub fn linear_backward<T: Real>(x: &Matrix<T>, w: &Matrix<T>, dy: &Matrix<T>) -> Result<LinearGrads<T>> {
    if dy.shape() != (x.rows(), w.rows()) || x.cols() != w.cols() {
        return Err(Error::ShapeMismatch {
            op: "linear_backward",
            lhs: x.shape(),
            rhs: w.shape(),
        });
    }
    let dx = dy.matmul(w)?;
    let dw = dy.matmul_tn(x)?;
    let mut db = Matrix::zeros(w.rows(), 1);
    for r in 0..dy.rows() {
        for (acc, &g) in db.data_mut().iter_mut().zip(dy.row(r)) {
            *acc += g;
        }
    }
    Ok(LinearGrads { dx, dw, db })
}

pub fn relu<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| v.max(T::zero()))
}

/// Subgradient 0 at 0.
pub fn relu_backward<T: Real>(x: &Matrix<T>, dy: &Matrix<T>) -> Matrix<T> {
    let mut dx = dy.clone();
    for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= T::zero() {
            *g = T::zero();
        }
    }
    dx
}

/// Softmax of a slice written into `out`, shifted by the max for stability.
#[inline]
pub(crate) fn softmax_into<T: Real>(x: &[T], out: &mut [T]) {
    let m = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - m).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `dx = y ⊙ (dy − ⟨y, dy⟩)` for one softmax row.
#[inline]
pub(crate) fn softmax_backward_into<T: Real>(y: &[T], dy: &[T], dx: &mut [T]) {
    let inner: T = y.iter().zip(dy).map(|(&a, &b)| a * b).sum();
    for ((d, &a), &g) in dx.iter_mut().zip(y).zip(dy) {
        *d = a * (g - inner);
    }
}

pub fn softmax_rows<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    let mut y = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        softmax_into(x.row(r), y.row_mut(r));
    }
    y
}

/// Backward of [`softmax_rows`] given its output `y`.
pub fn softmax_rows_backward<T: Real>(y: &Matrix<T>, dy: &Matrix<T>) -> Matrix<T> {
    let mut dx = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        softmax_backward_into(y.row(r), dy.row(r), dx.row_mut(r));
    }
    dx
}

/// Mean cross-entropy of two-class logits against 0/1 labels, returning
/// the loss and its gradient with respect to the logits.
pub fn cross_entropy<T: Real>(logits: &Matrix<T>, labels: &[u8]) -> Result<(T, Matrix<T>)> {
    if labels.len() != logits.rows() {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            lhs: logits.shape(),
            rhs: (labels.len(), 1),
        });
    }
    if let Some((row, &label)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l as usize >= logits.cols() || l > 1)
    {
        return Err(Error::InvalidLabel { row, label });
    }
    let b = T::from_usize_lossy(logits.rows().max(1));
    let mut loss = T::zero();
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&v| (v - m).exp()).sum();
        loss += sum.ln() - (row[label as usize] - m);
        let g = grad.row_mut(r);
        for (c, gv) in g.iter_mut().enumerate() {
            *gv = (row[c] - m).exp() / sum;
        }
        g[label as usize] -= T::one();
        for gv in g.iter_mut() {
            *gv /= b;
        }
    }
    Ok((loss / b, grad))
}

/// Column-wise max over the rows of `x`; returns the maxima and the row
/// each came from (first row on ties).
pub fn max_over_group<T: Real>(x: &Matrix<T>) -> (Matrix<T>, Vec<usize>) {
    assert!(x.rows() >= 1, "max_over_group needs at least one row");
    let mut y = Matrix::from_vec(1, x.cols(), x.row(0).to_vec()).expect("row shape");
    let mut arg = vec![0; x.cols()];
    for r in 1..x.rows() {
        for (c, &v) in x.row(r).iter().enumerate() {
            if v > y.get(0, c) {
                y.set(0, c, v);
                arg[c] = r;
            }
        }
    }
    (y, arg)
}

/// Routes `dy` (1×F) back to the argmax rows of a `groups`×F input.
pub fn max_over_group_backward<T: Real>(argmax: &[usize], dy: &Matrix<T>, groups: usize) -> Matrix<T> {
    let mut dx = Matrix::zeros(groups, argmax.len());
    for (c, &r) in argmax.iter().enumerate() {
        dx.set(r, c, dy.get(0, c));
    }
    dx
}
