//! Pullbacks of combinator terms.
//!
//! `𝒫(F)(y, k)` is computed by recursion over the combinator form of `F`:
//! primitives use their table entries, `B(f)(g)` the chain rule (with a
//! second term when `f` captures the point) and `C(g)` a contraction
//! `Σ_b 𝒫(g(b))(y, k(b))`. Opaque functions give `𝒫(h)` nodes.

use crate::combinator::{as_access, as_b, as_c, as_capture, eliminate, spine};
use crate::error::{Error, Result};
use crate::ir::infer::type_of;
use crate::ir::{
    beta_reduce, freshen_binders, substitute, Binder, Comb, Context, Expr, ExprKind, Fresh, Primitive,
    TypeExpr,
};

/// A pullback `(point, cotangent) ↦ …` with the rules used to build it.
#[derive(Clone, Debug)]
pub struct PullbackResult {
    /// The whole program with the differentiated lambda replaced by its
    /// pullback.
    pub expr: Expr,
    pub point: Vec<Binder>,
    pub cotangent: Binder,
    pub provenance: Vec<String>,
}

/// A gradient together with diagnostics raised while deriving it.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub expr: Expr,
    pub warnings: Vec<String>,
}

/// The closed pullback lambda `(x, k) ↦ …` of a primitive.
pub fn primitive_pullback(p: &Primitive) -> Expr {
    // operands are closed over, so pick parameter names away from them
    let mut fresh = Fresh::new();
    if let Primitive::MulBy(v) | Primitive::AddBy(v) = p {
        fresh.reserve_expr(v);
    }
    let x = Binder::new(fresh.fresh("x"), TypeExpr::Unknown);
    let k = Binder::new(fresh.fresh("k"), TypeExpr::Unknown);
    let body = match p {
        Primitive::Conj => Expr::conj(k.var()),
        Primitive::MulBy(v) => Expr::mul(vec![Expr::conj(v.clone()), k.var()]),
        Primitive::AddBy(_) | Primitive::Identity => k.var(),
        Primitive::Contract(t) => Expr::lambda(vec![Binder::new(fresh.fresh("i"), t.clone())], k.var()),
    };
    Expr::lambda(vec![x, k], body)
}

/// `Σ_b 𝒫(g(b))(x, k(b))` for `g = b ↦ G`, where `pull_g` maps the bound
/// argument to `𝒫(G)(x, ·)` applied to the given cotangent.
pub fn apply_c_rule(
    b: &[Binder],
    k: &Expr,
    mut pull_g: impl FnMut(&Expr) -> Result<Expr>,
) -> Result<Expr> {
    if b.is_empty() {
        return Err(Error::NotDifferentiable("C rule needs a bound argument".into()));
    }
    let kb = beta_reduce(&Expr::apply(k.clone(), b.iter().map(Binder::var).collect()))?;
    let inner = pull_g(&kb)?;
    Ok(Expr::sums(b.to_vec(), inner))
}

/// The two-term B rule: `𝒫(g)(x, 𝒫(f)(g(x), k)) + 𝒫(x ↦ f)(x, i ↦ δ(g(x), i, k))`.
/// Without a capture of the point only the chain-rule term remains.
pub fn apply_b_rule(chain: Expr, capture: Option<Expr>) -> Expr {
    match capture {
        Some(c) => Expr::add(vec![chain, c]),
        None => chain,
    }
}

/// Recursive pullback construction with fresh names and provenance.
pub struct Engine {
    ctx: Context,
    fresh: Fresh,
    pub provenance: Vec<String>,
}

impl Engine {
    pub fn new(ctx: &Context, avoid: &Expr) -> Self {
        Engine {
            ctx: ctx.clone(),
            fresh: Fresh::avoiding(avoid),
            provenance: Vec::new(),
        }
    }

    fn note(&mut self, rule: &str, f: &Expr) {
        self.provenance.push(format!("{rule}: {f}"));
    }

    fn fresh_binder(&mut self, base: &str, ty: TypeExpr) -> Binder {
        Binder {
            name: self.fresh.fresh(base),
            ty,
        }
    }

    fn type_in(&self, e: &Expr) -> TypeExpr {
        type_of(e, &self.ctx).unwrap_or(TypeExpr::Unknown)
    }

    fn with_bound<R>(&mut self, bs: &[Binder], f: impl FnOnce(&mut Self) -> R) -> R {
        let len = self.ctx.len();
        for b in bs {
            self.ctx.push_var(&b.name, b.ty.clone());
            self.fresh.reserve(&b.name);
        }
        let r = f(self);
        self.ctx.truncate(len);
        r
    }

    /// `𝒫(f)(y, k)` for a combinator term `f`.
    pub fn pull(&mut self, f: &Expr, y: &Expr, k: &Expr) -> Result<Expr> {
        if let Some((x, args)) = as_access(f) {
            self.note("access", f);
            return self.access(&x, &args, k);
        }
        if let Some((x, fx, g)) = as_capture(f) {
            self.note("B (capture)", f);
            return self.capture(&x, &fx, &g, y, k);
        }
        if let Some((outer, g)) = as_b(f) {
            self.note("B", f);
            let gy = beta_reduce(&Expr::apply1(g.clone(), y.clone()))?;
            let inner = self.pull(&outer, &gy, k)?;
            return Ok(apply_b_rule(self.pull(&g, y, &inner)?, None));
        }
        if let Some(g) = as_c(f) {
            self.note("C", f);
            return self.c_rule(&g, y, k);
        }
        match f.kind() {
            ExprKind::Comb(Comb::I) => Ok(k.clone()),
            ExprKind::Primitive(p) => {
                self.note("primitive", f);
                beta_reduce(&Expr::apply(primitive_pullback(p), vec![y.clone(), k.clone()]))
            }
            ExprKind::Lambda(ps, body) if ps.len() == 1 && !body.has_free(&ps[0].name) => Ok(Expr::zero()),
            ExprKind::Lambda(ps, body) if ps.len() == 1 && !is_opaque_slice(&ps[0], body) => {
                let d = eliminate(&ps[0], body)?;
                if matches!(d.kind(), ExprKind::Lambda(..)) && as_capture(&d).is_none() && as_access(&d).is_none() {
                    return Err(Error::Unsupported(format!("no pullback rule for `{f}`")));
                }
                self.pull(&d, y, k)
            }
            _ => {
                self.note("opaque", f);
                Ok(Expr::apply(Expr::pullback_of(f.clone()), vec![y.clone(), k.clone()]))
            }
        }
    }

    /// `𝒫(x ↦ x(a))(y, k) = i ↦ δ(a, i, k)`
    fn access(&mut self, x: &Binder, args: &[Expr], k: &Expr) -> Result<Expr> {
        let arg_types = match x.ty.signature() {
            Some((ts, _)) if ts.len() >= args.len() => ts[..args.len()].to_vec(),
            _ => vec![TypeExpr::Unknown; args.len()],
        };
        let ds: Vec<Binder> = arg_types.into_iter().map(|t| self.fresh_binder("d", t)).collect();
        let body = ds
            .iter()
            .zip(args)
            .rev()
            .fold(k.clone(), |acc, (d, a)| Expr::delta(a.clone(), d.var(), acc));
        Ok(Expr::lambda(ds, body))
    }

    fn capture(&mut self, x: &Binder, fx: &Expr, g: &Expr, y: &Expr, k: &Expr) -> Result<Expr> {
        let gy = beta_reduce(&Expr::apply1(g.clone(), y.clone()))?;
        let f_at_y = substitute(fx, &x.name, y);
        let v_ty = self.with_bound(std::slice::from_ref(x), |e| {
            e.type_in(&beta_reduce(&Expr::apply1(g.clone(), x.var())).unwrap_or(Expr::zero()))
        });
        let v = self.fresh_binder("v", v_ty.clone());
        let f_lambda = to_lambda(fx, &v)?;
        let i = self.fresh_binder("i", v_ty);
        let k2 = Expr::lambda(vec![i.clone()], Expr::delta(gy.clone(), i.var(), k.clone()));
        let inner = self.pull(&f_at_y, &gy, k)?;
        let chain = self.pull(g, y, &inner)?;
        let captured = self.pull(&Expr::lambda(vec![x.clone()], f_lambda), y, &k2)?;
        Ok(apply_b_rule(chain, Some(captured)))
    }

    fn c_rule(&mut self, g: &Expr, y: &Expr, k: &Expr) -> Result<Expr> {
        match g.kind() {
            ExprKind::Lambda(ps, inner) => {
                let (bs, inner) = freshen_binders(ps, inner, &mut self.fresh);
                self.with_bound(&bs.clone(), |e| apply_c_rule(&bs, k, |kb| e.pull(&inner, y, kb)))
            }
            _ => {
                let ty = match self.type_in(g).signature() {
                    Some((args, _)) if !args.is_empty() => args[0].clone(),
                    _ => TypeExpr::Unknown,
                };
                let b = self.fresh_binder("b", ty);
                apply_c_rule(std::slice::from_ref(&b), k, |kb| {
                    Ok(Expr::apply(
                        Expr::pullback_of(Expr::apply1(g.clone(), b.var())),
                        vec![y.clone(), kb.clone()],
                    ))
                })
            }
        }
    }
}

/// `v ↦ h(.., v, ..)` with `h` free: a slice of an opaque function.
fn is_opaque_slice(v: &Binder, body: &Expr) -> bool {
    let (head, args) = spine(body);
    head.as_var().is_some()
        && !head.has_free(&v.name)
        && args.len() > 1
        && args.iter().filter(|a| a.is_var(&v.name)).count() == 1
        && args.iter().all(|a| a.is_var(&v.name) || !a.has_free(&v.name))
}

/// The function a captured primitive stands for, as a lambda over `v`.
fn to_lambda(f: &Expr, v: &Binder) -> Result<Expr> {
    let body = match f.kind() {
        ExprKind::Primitive(Primitive::MulBy(c)) => Expr::mul(vec![c.clone(), v.var()]),
        ExprKind::Primitive(Primitive::AddBy(c)) => Expr::add(vec![c.clone(), v.var()]),
        _ => beta_reduce(&Expr::apply1(f.clone(), v.var()))?,
    };
    Ok(Expr::lambda(vec![v.clone()], body))
}

/// Location of the differentiated lambda inside a program.
struct Target {
    /// Rebuilds the program around a replacement for the target.
    wrap: Box<dyn Fn(Expr) -> Expr>,
    params: Vec<Binder>,
    body: Expr,
    /// Variables bound outside the target.
    scope: Vec<Binder>,
}

fn find_target(e: &Expr, ctx: &Context) -> Result<Target> {
    fn go(e: &Expr, ctx: &mut Context, scope: &mut Vec<Binder>) -> Result<Target> {
        let leaf = |ps: &[Binder], body: &Expr, scope: &[Binder]| Target {
            wrap: Box::new(|x| x),
            params: ps.to_vec(),
            body: body.clone(),
            scope: scope.to_vec(),
        };
        match e.kind() {
            ExprKind::PullbackOf(inner) => match inner.kind() {
                ExprKind::Lambda(ps, body) => Ok(leaf(ps, body, scope)),
                _ => Err(Error::NotDifferentiable(format!("`{e}` marks a non-function"))),
            },
            ExprKind::Lambda(ps, body) if is_innermost(ps, body) => Ok(leaf(ps, body, scope)),
            ExprKind::Lambda(ps, body) => {
                scope.extend(ps.iter().cloned());
                let t = go(body, ctx, scope)?;
                let ps = ps.clone();
                let wrap = t.wrap;
                Ok(Target {
                    wrap: Box::new(move |x| Expr::lambda(ps.clone(), wrap(x))),
                    ..t
                })
            }
            ExprKind::Let(bs, body) => {
                for (n, v) in bs {
                    let ty = {
                        let mut c = ctx.clone();
                        for b in scope.iter() {
                            c.push_var(&b.name, b.ty.clone());
                        }
                        type_of(v, &c).unwrap_or(TypeExpr::Unknown)
                    };
                    scope.push(Binder { name: n.clone(), ty });
                }
                let t = go(body, ctx, scope)?;
                let bs = bs.clone();
                let wrap = t.wrap;
                Ok(Target {
                    wrap: Box::new(move |x| Expr::let_in(bs.clone(), wrap(x))),
                    ..t
                })
            }
            _ => Err(Error::NotDifferentiable(format!("`{e}` is not a function"))),
        }
    }
    go(e, &mut ctx.clone(), &mut Vec::new())
}

fn is_innermost(ps: &[Binder], body: &Expr) -> bool {
    fn deeper(e: &Expr) -> bool {
        match e.kind() {
            ExprKind::PullbackOf(_) => true,
            ExprKind::Lambda(ps, body) => !ps.iter().all(|b| b.ty.is_index()) || deeper(body),
            ExprKind::Let(_, body) => deeper(body),
            _ => false,
        }
    }
    !ps.iter().all(|b| b.ty.is_index()) && !deeper(body)
}

fn engine_for(f: &Expr, ctx: &Context, t: &Target) -> Engine {
    let mut eng = Engine::new(ctx, f);
    for b in t.scope.iter().chain(&t.params) {
        eng.ctx.push_var(&b.name, b.ty.clone());
        eng.fresh.reserve(&b.name);
    }
    eng
}

/// Pullback of the differentiated lambda of `f`, one term per parameter.
fn pull_params(eng: &mut Engine, t: &Target, k: &Expr) -> Result<Vec<Expr>> {
    t.params
        .iter()
        .map(|p| {
            let d = eliminate(p, &t.body)?;
            let r = eng.pull(&d, &p.var(), k)?;
            beta_reduce(&r)
        })
        .collect()
}

fn pack(mut parts: Vec<Expr>) -> Expr {
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Expr::tuple(parts)
    }
}

/// The pullback `(x, k) ↦ 𝒫(f)(x, k)` of the differentiated lambda of `f`.
pub fn pp(f: &Expr, ctx: &Context) -> Result<PullbackResult> {
    let t = find_target(f, ctx)?;
    let mut eng = engine_for(f, ctx, &t);
    let codomain = eng.type_in(&t.body);
    if codomain.is_index() {
        return Err(Error::NotDifferentiable("integer-valued output".into()));
    }
    let k = eng.fresh_binder("k", codomain);
    let parts = pull_params(&mut eng, &t, &k.var())?;
    let mut params = t.params.clone();
    params.push(k.clone());
    Ok(PullbackResult {
        expr: (t.wrap)(Expr::lambda(params, pack(parts))),
        point: t.params.clone(),
        cotangent: k,
        provenance: eng.provenance,
    })
}

/// Gradient `𝒫(f)(x, 1)` of a scalar objective; outer parameters and
/// `let` blocks pass through.
pub fn vdiff(f: &Expr, ctx: &Context) -> Result<Gradient> {
    let t = find_target(f, ctx)?;
    let mut eng = engine_for(f, ctx, &t);
    let mut warnings = Vec::new();
    match eng.type_in(&t.body) {
        TypeExpr::Real => {}
        TypeExpr::Complex => {
            if !crate::simplify::provably_real(&t.body, &eng.ctx) {
                warnings.push(format!(
                    "objective `{}` is complex-valued and not provably real; the gradient is formal",
                    t.body
                ));
            }
        }
        TypeExpr::Unknown => warnings.push("objective type could not be inferred".into()),
        other => {
            return Err(Error::NotDifferentiable(format!(
                "vdiff needs a scalar real codomain, found `{other}`; use the pullback instead"
            )))
        }
    }
    let parts = pull_params(&mut eng, &t, &Expr::one())?;
    Ok(Gradient {
        expr: (t.wrap)(Expr::lambda(t.params.clone(), pack(parts))),
        warnings,
    })
}
