//! Reverse-mode automatic differentiation over dense 2-D `f64` arrays.

mod gradcheck;
mod matrix;
mod params;
mod tape;

pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport, ParamCheck};
pub use matrix::{Matrix, SparseMatrix};
pub use params::{ParamStore, ParamVars};
pub use tape::{sigmoid, Activation, Gradients, OpKind, Tape, Var, LEAKY_RELU_SLOPE};

pub(crate) use tape::bce;
