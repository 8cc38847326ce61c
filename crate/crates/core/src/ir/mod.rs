//! The term language shared by every stage.

mod alpha;
mod context;
mod expr;
pub mod infer;
mod reduce;
mod sexpr;
mod subst;
mod types;

pub use alpha::{alpha_equiv, alpha_hash, canonical};
pub use context::{Context, Entry};
pub use expr::{name, Binder, Comb, Expr, ExprKind, IndexTerm, Name, Primitive};
pub use reduce::{
    beta_reduce, beta_reduce_with_budget, eval_all, inline_lets, Reducer, DEFAULT_STEP_BUDGET,
};
pub use sexpr::to_sexpr;
pub use subst::{freshen_binders, substitute, substitute_checked, substitute_many, Fresh};
pub use types::{
    symmetry_group, validate_symmetries, Domain, GroupElement, ScalarKind, Space, SymAction,
    Symmetry, TypeExpr,
};
