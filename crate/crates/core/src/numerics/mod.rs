//! Dense matrices, layer gradients, parameter storage and Adam.

mod gradcheck;
mod layers;
mod matrix;
mod optim;

pub use gradcheck::{central_difference, finite_diff_check, nudge_off_zero, GradCheck};
pub use layers::{
    cross_entropy, linear, linear_backward, max_over_group, max_over_group_backward, relu,
    relu_backward, softmax_rows, softmax_rows_backward, LinearGrads,
};
pub(crate) use layers::{softmax_backward_into, softmax_into};
pub use matrix::Matrix;
pub(crate) use matrix::{axpy, dot};
pub use optim::{adam_step, AdamState, Param, ParamId, ParamStore};
