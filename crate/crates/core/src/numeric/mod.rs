//! Numeric oracle: a dense complex evaluator, symmetric random inputs and
//! finite-difference gradient checks. Generic over the real scalar type.

mod check;
mod env;
mod eval;
mod fd;
mod random;
mod tensor;
mod value;

pub use check::{
    check_equal, check_gradient, check_pullback, objective_shape, random_like, strip_markers,
    CheckConfig, CheckReport, ObjectiveShape, TrialResult,
};
pub use env::{NumericEnv, DEFAULT_EXTENTS};
pub use eval::{apply_value, evaluate, materialize, Evaluator};
pub use fd::{fd_pullback, realified, realify, unrealify, wirtinger_fd_grad, DEFAULT_STEP};
pub use random::{
    project, random_scalar, random_symmetric, random_symmetric_with, random_tensor, random_value,
    rng_for, OracleRng,
};
pub use tensor::{Axis, Tensor};
pub use value::{add, conj, mul, Builtin, Closure, Pointwise, Value};
