//! Symbolic variational differentiation of functionals written as lambda
//! terms, via B/C combinator pullbacks and rule-based simplification.

pub mod blaserize;
pub mod combinator;
pub mod error;
pub mod frontend;
pub mod ir;
pub mod num;
pub mod numeric;
pub mod pullback;
pub mod render;
pub mod simplify;

pub use error::{Error, Result};
pub use ir::{Expr, ExprKind, TypeExpr};

/// Double-precision oracle types.
pub type Tensor64 = numeric::Tensor<f64>;
pub type Value64 = numeric::Value<f64>;
pub type NumericEnv64 = numeric::NumericEnv<f64>;
/// Single-precision oracle types.
pub type Tensor32 = numeric::Tensor<f32>;
pub type Value32 = numeric::Value<f32>;
pub type NumericEnv32 = numeric::NumericEnv<f32>;
