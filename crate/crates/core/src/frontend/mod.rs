//! Surface language: lexer, parser and typechecker.

pub mod ast;
mod lexer;
mod parser;
mod typecheck;

pub use ast::SourceProgram;
pub use lexer::{tokenize, Tok, Token};
pub use parser::{parse, parse_expr};
pub use typecheck::{check_expr, resolve_type, typecheck};

use crate::error::Result;
use crate::ir::{Context, Expr};

/// Parse and typecheck a source file against the built-in context.
pub fn load(src: &str) -> Result<(Expr, Context)> {
    typecheck(&parse(src)?, &Context::builtin())
}

/// Parse and typecheck an expression in an existing context.
pub fn load_expr(src: &str, ctx: &Context) -> Result<Expr> {
    Ok(check_expr(&parse_expr(src)?, ctx)?.0)
}
