//! Type inference for (already typechecked) terms.

use super::expr::{Expr, ExprKind, Primitive};
use super::types::TypeExpr;
use crate::error::{Error, Result};
use crate::ir::Context;

/// Infer the type of `e` with free variables resolved in `ctx`.
pub fn type_of(e: &Expr, ctx: &Context) -> Result<TypeExpr> {
    let mut ctx = ctx.clone();
    infer(e, &mut ctx)
}

pub(crate) fn infer(e: &Expr, ctx: &mut Context) -> Result<TypeExpr> {
    Ok(match e.kind() {
        ExprKind::Var(n) => ctx
            .var_type(n)
            .ok_or_else(|| Error::Unknown(n.to_string()))?,
        ExprKind::Const(_) => TypeExpr::Real,
        ExprKind::Lambda(ps, body) => {
            let len = ctx.len();
            for p in ps {
                ctx.push_var(&p.name, p.ty.clone());
            }
            let r = infer(body, ctx);
            ctx.truncate(len);
            TypeExpr::Func(ps.iter().map(|p| p.ty.clone()).collect(), Box::new(r?))
        }
        ExprKind::Apply(f, args) => {
            if let ExprKind::PullbackOf(inner) = f.kind() {
                // 𝒫(h)(point, cotangent) has the type of the point
                if let Some(p) = args.first() {
                    let _ = inner;
                    return infer(p, ctx);
                }
            }
            let tf = infer(f, ctx)?;
            if tf == TypeExpr::Unknown {
                return Ok(TypeExpr::Unknown);
            }
            tf.apply_n(args.len()).ok_or_else(|| {
                Error::Arity(format!("cannot apply {f} of type {tf} to {} argument(s)", args.len()))
            })?
        }
        ExprKind::Sum(b, body) => {
            ctx.push_var(&b.name, b.ty.clone());
            let r = infer(body, ctx);
            ctx.pop();
            r?
        }
        ExprKind::Delta(_, _, k) => infer(k, ctx)?,
        ExprKind::Conj(x) => infer(x, ctx)?,
        ExprKind::Add(es) | ExprKind::Mul(es) => {
            let mut acc: Option<TypeExpr> = None;
            for x in es {
                let t = infer(x, ctx)?;
                acc = Some(match acc {
                    None => t,
                    Some(a) => join(&a, &t),
                });
            }
            acc.unwrap_or(TypeExpr::Real)
        }
        ExprKind::Primitive(Primitive::Contract(_)) | ExprKind::Primitive(_) | ExprKind::Comb(_) => {
            TypeExpr::Unknown
        }
        ExprKind::PullbackOf(h) => {
            let th = infer(h, ctx)?;
            match th.signature() {
                Some((args, ret)) if args.len() == 1 => {
                    TypeExpr::Func(vec![args[0].clone(), ret], Box::new(args[0].clone()))
                }
                _ => TypeExpr::Unknown,
            }
        }
        ExprKind::Tuple(es) => TypeExpr::Product(es.iter().map(|x| infer(x, ctx)).collect::<Result<_>>()?),
        ExprKind::Let(bs, body) => {
            let len = ctx.len();
            for (n, v) in bs {
                let t = infer(v, ctx)?;
                ctx.push_var(n, t);
            }
            let r = infer(body, ctx);
            ctx.truncate(len);
            r?
        }
        ExprKind::IndexArith(ts) => {
            let mut first = None;
            for t in ts {
                let ty = infer(&t.atom, ctx)?;
                if let TypeExpr::Domain(d) = &ty {
                    if d.periodic {
                        return Ok(ty);
                    }
                }
                first.get_or_insert(ty);
            }
            first.unwrap_or(TypeExpr::Unknown)
        }
        ExprKind::Transpose(x) | ExprKind::Adjoint(x) => {
            let t = infer(x, ctx)?;
            match t.signature() {
                Some((mut args, ret)) if args.len() == 2 => {
                    args.reverse();
                    TypeExpr::Func(args, Box::new(ret))
                }
                _ => t,
            }
        }
        ExprKind::MatMul(es) => {
            let mut dims: Option<(Vec<TypeExpr>, TypeExpr)> = None;
            for x in es {
                let t = infer(x, ctx)?;
                let (args, ret) = t.signature().unwrap_or((vec![], t.clone()));
                dims = Some(match dims {
                    None => (args, ret),
                    Some((mut acc, r)) => {
                        acc.pop();
                        acc.extend(args.into_iter().skip(1));
                        (acc, join(&r, &ret))
                    }
                });
            }
            match dims {
                Some((args, ret)) if args.is_empty() => ret,
                Some((args, ret)) => TypeExpr::Func(args, Box::new(ret)),
                None => TypeExpr::Real,
            }
        }
    })
}

/// Result type of combining two operands pointwise.
pub fn join(a: &TypeExpr, b: &TypeExpr) -> TypeExpr {
    match (a, b) {
        (TypeExpr::Unknown, t) | (t, TypeExpr::Unknown) => t.clone(),
        (x, y) if x.is_scalar() && y.is_scalar() => TypeExpr::join_scalar(x, y),
        (TypeExpr::Domain(_), t) | (t, TypeExpr::Domain(_)) => t.clone(),
        (x, y) if x.is_scalar() => y.clone(),
        (x, y) if y.is_scalar() => x.clone(),
        (x, y) => {
            // pointwise combination of two functions: keep the wider element kind
            match (x.signature(), y.signature()) {
                (Some((args, r1)), Some((_, r2))) => TypeExpr::Func(args, Box::new(join(&r1, &r2))),
                _ => x.clone(),
            }
        }
    }
}

/// Whether a value of type `got` may stand where `expected` is declared.
pub fn compatible(expected: &TypeExpr, got: &TypeExpr) -> bool {
    match (expected, got) {
        (TypeExpr::Unknown, _) | (_, TypeExpr::Unknown) => true,
        (TypeExpr::Complex, TypeExpr::Real) => true,
        (TypeExpr::Domain(_), TypeExpr::Domain(_)) => true,
        (a, b) if a == b => true,
        (a, b) => match (a.signature(), b.signature()) {
            (Some((xa, ra)), Some((xb, rb))) => {
                xa.len() == xb.len()
                    && xa.iter().zip(&xb).all(|(p, q)| compatible(p, q))
                    && compatible(&ra, &rb)
            }
            _ => false,
        },
    }
}

/// Whether the term is real-valued by its type.
pub fn is_real_typed(e: &Expr, ctx: &mut Context) -> bool {
    match e.kind() {
        ExprKind::Const(_) => true,
        _ => infer(e, ctx).map(|t| t != TypeExpr::Unknown && t.is_real()).unwrap_or(false),
    }
}
