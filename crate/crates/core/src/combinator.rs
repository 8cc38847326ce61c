//! Abstraction elimination into `B`, `C`, `I` and the univariate primitives.
//!
//! [`eliminate`] turns `x ↦ body` into a function term built from:
//!
//! - `I`, the primitives `conj`, `mulby(v)`, `addby(v)`, `contract(T)`;
//! - `B(f)(g)` and `C(λb. G)`;
//! - `λx. e` with `x` not free in `e` (a constant function);
//! - `λx. B(f)(g)(x)` where `f` captures `x`;
//! - `λx. B(x)(I)(args)`, the access of a function-valued argument.
//!
//! Opaque functions (free variables of function type) stay as they are.

use crate::error::{Error, Result};
use crate::ir::infer::type_of;
use crate::ir::{eval_all, Binder, Comb, Context, Expr, ExprKind, Fresh, Primitive, TypeExpr};

/// Flatten an application spine: `f(a)(b, c)` gives `(f, [a, b, c])`.
pub fn spine(e: &Expr) -> (Expr, Vec<Expr>) {
    let mut args = Vec::new();
    let mut cur = e.clone();
    while let ExprKind::Apply(f, a) = cur.kind() {
        let mut group = a.clone();
        group.extend(args);
        args = group;
        let next = f.clone();
        cur = next;
    }
    (cur, args)
}

/// `B(f)(g)` as `(f, g)`.
pub fn as_b(e: &Expr) -> Option<(Expr, Expr)> {
    match spine(e) {
        (h, args) if matches!(h.kind(), ExprKind::Comb(Comb::B)) && args.len() == 2 => {
            Some((args[0].clone(), args[1].clone()))
        }
        _ => None,
    }
}

/// `C(g)` as `g`.
pub fn as_c(e: &Expr) -> Option<Expr> {
    match spine(e) {
        (h, args) if matches!(h.kind(), ExprKind::Comb(Comb::C)) && args.len() == 1 => Some(args[0].clone()),
        _ => None,
    }
}

/// A capture form `λx. B(f)(g)(x)` as `(x, f, g)`.
pub fn as_capture(e: &Expr) -> Option<(Binder, Expr, Expr)> {
    let ExprKind::Lambda(ps, body) = e.kind() else { return None };
    if ps.len() != 1 {
        return None;
    }
    let (h, args) = spine(body);
    match args.as_slice() {
        [f, g, x] if matches!(h.kind(), ExprKind::Comb(Comb::B)) && x.is_var(&ps[0].name) => {
            Some((ps[0].clone(), f.clone(), g.clone()))
        }
        _ => None,
    }
}

/// An access form `λx. B(x)(I)(args)` as `(x, args)`.
pub fn as_access(e: &Expr) -> Option<(Binder, Vec<Expr>)> {
    let ExprKind::Lambda(ps, body) = e.kind() else { return None };
    if ps.len() != 1 {
        return None;
    }
    let (h, args) = spine(body);
    if !matches!(h.kind(), ExprKind::Comb(Comb::B)) || args.len() < 3 {
        return None;
    }
    let x = &ps[0].name;
    let is_access = args[0].is_var(x)
        && matches!(args[1].kind(), ExprKind::Comb(Comb::I))
        && args[2..].iter().all(|a| !a.has_free(x));
    is_access.then(|| (ps[0].clone(), args[2..].to_vec()))
}

fn unsupported(what: &str, e: &Expr) -> Error {
    Error::Unsupported(format!("cannot decompose {what} `{e}`"))
}

/// The combinator form of `x ↦ body`.
pub fn eliminate(x: &Binder, body: &Expr) -> Result<Expr> {
    let n = &x.name;
    if !body.has_free(n) {
        return Ok(Expr::lambda(vec![x.clone()], body.clone()));
    }
    match body.kind() {
        ExprKind::Var(_) => Ok(Expr::comb(Comb::I)),
        ExprKind::Conj(a) => Ok(Expr::b_comb(Expr::prim(Primitive::Conj), eliminate(x, a)?)),
        ExprKind::Mul(fs) => binary(x, fs, |c| Primitive::MulBy(Expr::mul(c))),
        ExprKind::Add(ts) => binary(x, ts, |c| Primitive::AddBy(Expr::add(c))),
        ExprKind::Sum(b, s) => Ok(Expr::b_comb(
            Expr::prim(Primitive::Contract(b.ty.clone())),
            eliminate(x, &Expr::lambda(vec![b.clone()], s.clone()))?,
        )),
        // x ↦ (b ↦ e) is C(b ↦ x ↦ e)
        ExprKind::Lambda(ps, e) => Ok(Expr::c_comb(Expr::lambda(ps.clone(), eliminate(x, e)?))),
        ExprKind::Delta(a, b, p) => {
            if a.has_free(n) || b.has_free(n) {
                return Err(Error::NotDifferentiable(format!(
                    "delta guard `{body}` depends on `{n}`"
                )));
            }
            let guard = Expr::delta(a.clone(), b.clone(), Expr::one());
            Ok(Expr::b_comb(Expr::prim(Primitive::MulBy(guard)), eliminate(x, p)?))
        }
        ExprKind::Apply(..) => eliminate_apply(x, body),
        ExprKind::Let(..) => eliminate(x, &eval_all(body)?),
        ExprKind::IndexArith(_) => Err(Error::NotDifferentiable(format!(
            "index expression `{body}` depends on `{n}`"
        ))),
        _ => Err(unsupported("term", body)),
    }
}

/// Products and sums: one dependent operand becomes `B(prim)(D)`, several
/// become the capture form `λx. B(prim(rest))(D(last))(x)`.
fn binary(x: &Binder, ops: &[Expr], prim: impl Fn(Vec<Expr>) -> Primitive) -> Result<Expr> {
    let (mut dep, constant): (Vec<Expr>, Vec<Expr>) = ops.iter().cloned().partition(|o| o.has_free(&x.name));
    let last = dep.pop().expect("a dependent operand");
    let g = eliminate(x, &last)?;
    if dep.is_empty() {
        return Ok(if constant.is_empty() { g } else { Expr::b_comb(Expr::prim(prim(constant)), g) });
    }
    let mut rest = constant;
    rest.extend(dep);
    let f = Expr::prim(prim(rest));
    Ok(Expr::lambda(vec![x.clone()], Expr::apply1(Expr::b_comb(f, g), x.var())))
}

fn eliminate_apply(x: &Binder, body: &Expr) -> Result<Expr> {
    let n = &x.name;
    let (head, args) = spine(body);
    if head.is_var(n) {
        if args.iter().any(|a| a.has_free(n)) {
            return Err(unsupported("self-application", body));
        }
        // f ↦ f(i) is f ↦ B(f)(I)(i)
        let access = Expr::apply(Expr::b_comb(x.var(), Expr::comb(Comb::I)), args);
        return Ok(Expr::lambda(vec![x.clone()], access));
    }
    if head.has_free(n) {
        return Err(unsupported("application of a dependent function", body));
    }
    let dependent: Vec<usize> = (0..args.len()).filter(|&i| args[i].has_free(n)).collect();
    match dependent.as_slice() {
        [i] if args.len() == 1 => Ok(Expr::b_comb(head, eliminate(x, &args[*i])?)),
        [i] => {
            // fix the other arguments: v ↦ h(.., v, ..) stays opaque
            let mut fresh = Fresh::avoiding(body);
            let v = Binder::new(fresh.fresh("v"), TypeExpr::Unknown);
            let mut inner = args.clone();
            inner[*i] = v.var();
            let h = Expr::lambda(vec![v], Expr::apply(head, inner));
            Ok(Expr::b_comb(h, eliminate(x, &args[*i])?))
        }
        _ => Err(Error::Unsupported(format!(
            "`{body}` passes `{n}` to several arguments of an opaque function"
        ))),
    }
}

/// Eliminate the differentiated lambda of a program, keeping outer
/// parameters, `let` blocks and marker-free structure around it.
pub fn decompose(e: &Expr) -> Result<Expr> {
    match e.kind() {
        ExprKind::PullbackOf(inner) if matches!(inner.kind(), ExprKind::Lambda(..)) => decompose_target(inner),
        ExprKind::Lambda(ps, body) if is_target(ps, body) => decompose_target(e),
        ExprKind::Lambda(ps, body) => Ok(Expr::lambda(ps.clone(), decompose(body)?)),
        ExprKind::Let(bs, body) => Ok(Expr::let_in(bs.clone(), decompose(body)?)),
        _ => Err(Error::NotDifferentiable(format!("`{e}` is not a function"))),
    }
}

/// The innermost lambda with non-index parameters is the target when no
/// `pullback(..)` marker is present.
fn is_target(ps: &[Binder], body: &Expr) -> bool {
    if ps.iter().all(|b| b.ty.is_index()) {
        return false;
    }
    fn has_inner(e: &Expr) -> bool {
        match e.kind() {
            ExprKind::PullbackOf(_) => true,
            ExprKind::Lambda(ps, body) => !ps.iter().all(|b| b.ty.is_index()) || has_inner(body),
            ExprKind::Let(_, body) => has_inner(body),
            _ => false,
        }
    }
    !has_inner(body)
}

fn decompose_target(f: &Expr) -> Result<Expr> {
    match f.kind() {
        ExprKind::Lambda(ps, body) if ps.len() == 1 => eliminate(&ps[0], &eval_all(body)?),
        ExprKind::Lambda(..) => Err(Error::Unsupported(
            "decompose needs a single differentiated parameter".into(),
        )),
        _ => Err(Error::NotDifferentiable(format!("`{f}` is not a function"))),
    }
}

/// Rewrite products and sums with several operands depending on a
/// parameter into the unary capture form `x ↦ (v ↦ f(x)·v)(g(x))`.
pub fn binarize(e: &Expr, ctx: &Context) -> Result<Expr> {
    let mut ctx = ctx.clone();
    binarize_in(e, &mut ctx, &[])
}

fn binarize_in(e: &Expr, ctx: &mut Context, params: &[Binder]) -> Result<Expr> {
    match e.kind() {
        ExprKind::Lambda(ps, body) => {
            let len = ctx.len();
            for p in ps {
                ctx.push_var(&p.name, p.ty.clone());
            }
            let mut scope = params.to_vec();
            scope.extend(ps.iter().filter(|p| !p.ty.is_index()).cloned());
            let r = binarize_in(body, ctx, &scope);
            ctx.truncate(len);
            Ok(Expr::lambda(ps.clone(), r?))
        }
        ExprKind::Sum(b, body) => {
            ctx.push_var(&b.name, b.ty.clone());
            let r = binarize_in(body, ctx, params);
            ctx.pop();
            Ok(Expr::sum(b.clone(), r?))
        }
        ExprKind::Mul(ops) | ExprKind::Add(ops) => {
            let ops = ops
                .iter()
                .map(|o| binarize_in(o, ctx, params))
                .collect::<Result<Vec<_>>>()?;
            let is_mul = matches!(e.kind(), ExprKind::Mul(_));
            let rebuild = |v: Vec<Expr>| if is_mul { Expr::mul(v) } else { Expr::add(v) };
            let Some(x) = params.last() else { return Ok(rebuild(ops)) };
            let deps = ops.iter().filter(|o| o.has_free(&x.name)).count();
            if deps < 2 {
                return Ok(rebuild(ops));
            }
            let last_pos = ops.iter().rposition(|o| o.has_free(&x.name)).unwrap();
            let last = ops[last_pos].clone();
            let mut fresh = Fresh::avoiding(e);
            let v = Binder::new(fresh.fresh("v"), type_of(&last, ctx).unwrap_or(TypeExpr::Unknown));
            let mut rest = ops;
            rest[last_pos] = v.var();
            ctx.push_var(&v.name, v.ty.clone());
            let inner = binarize_in(&rebuild(rest), ctx, params);
            ctx.pop();
            Ok(Expr::apply1(Expr::lambda(vec![v], inner?), last))
        }
        _ => {
            let kids = e
                .children()
                .into_iter()
                .map(|c| binarize_in(c, ctx, params))
                .collect::<Result<Vec<_>>>()?;
            Ok(if kids.is_empty() { e.clone() } else { e.with_children(kids) })
        }
    }
}
