//! Central finite differences as a gradient oracle.

use super::{Matrix, ParamStore};
use crate::scalar::Real;

/// `(f(x+eps) − f(x−eps)) / 2eps`.
pub fn central_difference<T: Real>(f: impl Fn(T) -> T, x: T, eps: T) -> T {
    (f(x + eps) - f(x - eps)) / (eps + eps)
}

/// Worst disagreement between stored gradients and finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck<T> {
    pub max_rel_error: T,
    /// Parameter name and flat offset of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares the gradients currently stored in `params` against central
/// differences of `loss_fn`, perturbing every scalar in turn. Relative error
/// uses the denominator `max(|a|, |b|, 1e-8)`.
///
/// Nondifferentiable points (ReLU at 0, tied maxima) are not detected; move
/// inputs off them first, e.g. with [`nudge_off_zero`].
pub fn finite_diff_check<T: Real>(
    params: &mut ParamStore<T>,
    mut loss_fn: impl FnMut(&ParamStore<T>) -> T,
    eps: T,
) -> GradCheck<T> {
    let floor = T::lit(1e-8);
    let mut report = GradCheck {
        max_rel_error: T::zero(),
        worst: None,
        checked: 0,
    };
    for p in 0..params.len() {
        for i in 0..params.get_param(p).value.data().len() {
            let original = params.get_param(p).value.data()[i];
            params.get_param_mut(p).value.data_mut()[i] = original + eps;
            let up = loss_fn(params);
            params.get_param_mut(p).value.data_mut()[i] = original - eps;
            let down = loss_fn(params);
            params.get_param_mut(p).value.data_mut()[i] = original;

            let numeric = (up - down) / (eps + eps);
            let analytic = params.get_param(p).grad.data()[i];
            let denom = analytic.abs().max(numeric.abs()).max(floor);
            let rel = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel;
                report.worst = Some((params.get_param(p).name.clone(), i));
            }
        }
    }
    report
}

/// Pushes entries with `|x| < margin` out to `±margin`.
pub fn nudge_off_zero<T: Real>(m: &mut Matrix<T>, margin: T) {
    for v in m.data_mut() {
        if v.abs() < margin {
            *v = if *v < T::zero() { -margin } else { margin };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_loss_is_exact() {
        let mut s = ParamStore::new();
        let id = s.add("w", Matrix::<f64>::from_rows(&[[0.3, -1.2, 2.0]]));
        let coef = [1.5, -0.5, 4.0];
        s.accumulate(id, &Matrix::from_rows(&[coef])).unwrap();
        let report = finite_diff_check(
            &mut s,
            |p| {
                p.value(id)
                    .data()
                    .iter()
                    .zip(coef)
                    .map(|(w, c)| w * c)
                    .sum()
            },
            1e-5,
        );
        assert!(report.max_rel_error < 1e-9);
        assert_eq!(report.checked, 3);
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut s = ParamStore::new();
        let id = s.add("w", Matrix::<f64>::from_rows(&[[2.0]]));
        s.accumulate(id, &Matrix::from_rows(&[[1.0]])).unwrap();
        let report = finite_diff_check(&mut s, |p| p.value(id).get(0, 0).powi(2), 1e-5);
        assert!(report.max_rel_error > 0.5);
        assert_eq!(report.worst, Some(("w".to_string(), 0)));
    }

    #[test]
    fn nudge() {
        let mut m = Matrix::from_rows(&[[0.0, -1e-9, 0.5]]);
        nudge_off_zero(&mut m, 1e-3);
        assert_eq!(m, Matrix::from_rows(&[[1e-3, -1e-3, 0.5]]));
    }
}
