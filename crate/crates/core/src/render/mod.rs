//! Deterministic printers: input-grammar text, S-expressions and LaTeX.

mod latex;
mod text;

pub use crate::ir::to_sexpr;
pub use latex::{latex_name, to_latex};
pub use text::{binder_text, to_text, type_text};
