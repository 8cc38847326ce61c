use std::sync::Arc;

use super::ast::*;
use crate::error::{Error, Result};
use crate::ir::{
    infer, validate_symmetries, Binder, Context, Domain, Entry, Expr, ExprKind, IndexTerm, Name,
    Primitive, ScalarKind, Space, SymAction, Symmetry, TypeExpr,
};
use crate::num::Num;

/// Declare the program's domains and spaces on top of `base`, then type
/// the main expression.
pub fn typecheck(p: &SourceProgram, base: &Context) -> Result<(Expr, Context)> {
    let mut ctx = base.clone();
    for d in &p.decls {
        declare(d, &mut ctx)?;
    }
    let (e, _) = check_expr(&p.body, &ctx)?;
    Ok((e, ctx))
}

/// Type a single expression in `ctx`, returning the annotated term and its type.
pub fn check_expr(node: &Node, ctx: &Context) -> Result<(Expr, TypeExpr)> {
    Checker {
        ctx,
        scope: Vec::new(),
    }
    .check(node)
}

fn declare(d: &Decl, ctx: &mut Context) -> Result<()> {
    match d {
        Decl::Domain { name, fields, span } => {
            let mut dom = Domain::new(name.clone());
            for (key, value, ks) in fields {
                match (key.as_str(), value) {
                    ("periodic", DomainValue::Bool(b)) => dom.periodic = *b,
                    ("symmetric", DomainValue::Bool(b)) => dom.symmetric = *b,
                    ("contractable", DomainValue::Bool(b)) => dom.contractable = *b,
                    // the underlying integer set; extents come from the numeric environment
                    ("base", DomainValue::Int(_) | DomainValue::Name(_)) => {}
                    (k, v) => {
                        return Err(Error::Type(format!(
                            "invalid domain field `{k} = {v:?}`"
                        ))
                        .at(*ks))
                    }
                }
            }
            ctx.declare(name, Entry::Domain(Arc::new(dom))).map_err(|e| e.at(*span))
        }
        Decl::Space {
            name,
            ty,
            symmetries,
            span,
        } => {
            let t = resolve_type(ty, ctx)?;
            let (args, ret) = match &t {
                TypeExpr::Func(args, ret) => (args.clone(), (**ret).clone()),
                _ => {
                    return Err(Error::Type(format!(
                        "space `{name}` must have a type `(D1, ..) -> R|C`"
                    ))
                    .at(*span))
                }
            };
            let indices = args
                .iter()
                .map(|a| {
                    a.as_domain().cloned().ok_or_else(|| {
                        Error::Type(format!("space `{name}`: `{a}` is not an index domain")).at(*span)
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let elem = match ret {
                TypeExpr::Real => ScalarKind::Real,
                TypeExpr::Complex => ScalarKind::Complex,
                other => {
                    return Err(Error::Type(format!(
                        "space `{name}`: element type `{other}` is not R or C"
                    ))
                    .at(*span))
                }
            };
            let syms = symmetries
                .iter()
                .map(|s| {
                    let action = match s.action.as_str() {
                        "id" => SymAction::Id,
                        "conj" => SymAction::Conj,
                        "ineg" => SymAction::Ineg,
                        other => {
                            return Err(Error::Symmetry(format!(
                                "unknown action `{other}`, expected id, conj or ineg"
                            ))
                            .at(s.span))
                        }
                    };
                    Ok(Symmetry {
                        perm: s.perm.clone(),
                        action,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            validate_symmetries(&indices, &syms).map_err(|e| e.at(*span))?;
            let space = Space {
                name: name.clone(),
                indices,
                elem,
                symmetries: syms,
            };
            ctx.declare(name, Entry::Space(Arc::new(space))).map_err(|e| e.at(*span))
        }
    }
}

pub fn resolve_type(t: &TypeAst, ctx: &Context) -> Result<TypeExpr> {
    match t {
        TypeAst::Name(n, sp) => ctx
            .resolve_type(n)
            .ok_or_else(|| Error::Unknown(format!("type {n}")).at(*sp)),
        TypeAst::Func(args, ret) => Ok(TypeExpr::Func(
            args.iter().map(|a| resolve_type(a, ctx)).collect::<Result<_>>()?,
            Box::new(resolve_type(ret, ctx)?),
        )),
        TypeAst::Tuple(ts) => Ok(TypeExpr::Product(
            ts.iter().map(|a| resolve_type(a, ctx)).collect::<Result<_>>()?,
        )),
    }
}

fn is_tensor(t: &TypeExpr) -> bool {
    match t.signature() {
        Some((args, ret)) => !args.is_empty() && args.iter().all(TypeExpr::is_index) && ret.is_scalar(),
        None => false,
    }
}

fn is_int_const(e: &Expr) -> bool {
    e.as_const().is_some_and(|c| c.is_integer())
}

struct Checker<'a> {
    ctx: &'a Context,
    scope: Vec<(Name, TypeExpr)>,
}

impl Checker<'_> {
    fn lookup(&self, n: &str) -> Option<TypeExpr> {
        self.scope
            .iter()
            .rev()
            .find(|(k, _)| &**k == n)
            .map(|(_, t)| t.clone())
            .or_else(|| self.ctx.var_type(n))
    }

    /// Record an index type for a still-untyped bound variable.
    fn refine(&mut self, e: &Expr, t: &TypeExpr) {
        if let Some(n) = e.as_var() {
            if let Some(slot) = self.scope.iter_mut().rev().find(|(k, _)| k == n) {
                if slot.1 == TypeExpr::Unknown {
                    slot.1 = t.clone();
                }
            }
        }
    }

    fn param_type(&self, p: &Param) -> Result<TypeExpr> {
        match &p.ty {
            Some(t) => resolve_type(t, self.ctx),
            None => Ok(TypeExpr::Unknown),
        }
    }

    /// Check `body` with `params` in scope; returns the binders with
    /// inferred types filled in.
    fn with_params(&mut self, params: &[Param], body: &Node) -> Result<(Vec<Binder>, Expr, TypeExpr)> {
        let len = self.scope.len();
        for p in params {
            let t = self.param_type(p)?;
            self.scope.push((Name::from(p.name.as_str()), t));
        }
        let r = self.check(body);
        let binders: Vec<Binder> = self.scope[len..]
            .iter()
            .map(|(n, t)| Binder {
                name: n.clone(),
                ty: t.clone(),
            })
            .collect();
        self.scope.truncate(len);
        let (e, t) = r?;
        Ok((binders, e, t))
    }

    fn check(&mut self, node: &Node) -> Result<(Expr, TypeExpr)> {
        self.check_inner(node).map_err(|e| e.at(node.span))
    }

    fn check_inner(&mut self, node: &Node) -> Result<(Expr, TypeExpr)> {
        match &node.ast {
            Ast::Var(n) => {
                let t = self.lookup(n).ok_or_else(|| Error::Unknown(n.clone()))?;
                Ok((Expr::var(n), t))
            }
            Ast::Num(c) => Ok((Expr::num(*c), TypeExpr::Real)),
            Ast::Lambda(params, body) => {
                let (bs, b, t) = self.with_params(params, body)?;
                for (p, b) in params.iter().zip(&bs) {
                    if b.ty == TypeExpr::Unknown {
                        return Err(Error::Type(format!(
                            "cannot infer the type of parameter `{}`; annotate it",
                            b.name
                        ))
                        .at(p.span));
                    }
                }
                let ty = TypeExpr::Func(bs.iter().map(|b| b.ty.clone()).collect(), Box::new(t));
                Ok((Expr::lambda(bs, b), ty))
            }
            Ast::Sum(params, body) => {
                let (bs, b, t) = self.with_params(params, body)?;
                for (p, b) in params.iter().zip(&bs) {
                    if !b.ty.is_index() {
                        let msg = if b.ty == TypeExpr::Unknown {
                            format!("cannot infer the domain of summation index `{}`; annotate it", b.name)
                        } else {
                            format!("summation index `{}` has non-index type `{}`", b.name, b.ty)
                        };
                        return Err(Error::Type(msg).at(p.span));
                    }
                }
                Ok((Expr::sums(bs, b), t))
            }
            Ast::Apply(head, args) => self.apply(head, args),
            Ast::Delta(a, b, k) => {
                let (a, ta) = self.check(a)?;
                let (b, tb) = self.check(b)?;
                if ta.is_index() {
                    self.refine(&b, &ta);
                } else if tb.is_index() {
                    self.refine(&a, &tb);
                }
                let (k, tk) = self.check(k)?;
                Ok((Expr::delta(a, b, k), tk))
            }
            Ast::Conj(x) => {
                let (x, t) = self.check(x)?;
                Ok((Expr::conj(x), t))
            }
            Ast::Add(..) | Ast::Sub(..) => self.additive(node),
            Ast::Neg(x) => {
                let (x, t) = self.check(x)?;
                if t.is_index() {
                    return self.index_arith(vec![(true, x, t)]);
                }
                Ok((Expr::mul(vec![Expr::num(-Num::float(1)), x]), t))
            }
            Ast::Mul(..) => self.multiplicative(node),
            Ast::Tuple(items) => {
                let mut es = Vec::new();
                let mut ts = Vec::new();
                for it in items {
                    let (e, t) = self.check(it)?;
                    es.push(e);
                    ts.push(t);
                }
                Ok((Expr::tuple(es), TypeExpr::Product(ts)))
            }
            Ast::Let(binds, body) => {
                let len = self.scope.len();
                let mut out = Vec::new();
                for (n, v) in binds {
                    let r = self.check(v);
                    let (v, t) = match r {
                        Ok(x) => x,
                        Err(e) => {
                            self.scope.truncate(len);
                            return Err(e);
                        }
                    };
                    let n = Name::from(n.as_str());
                    self.scope.push((n.clone(), t));
                    out.push((n, v));
                }
                let r = self.check(body);
                self.scope.truncate(len);
                let (b, t) = r?;
                Ok((Expr::let_in(out, b), t))
            }
            Ast::Pullback(x) => {
                let (x, t) = self.check(x)?;
                let ty = match t.signature() {
                    Some((args, ret)) if args.len() == 1 => {
                        TypeExpr::Func(vec![args[0].clone(), ret], Box::new(args[0].clone()))
                    }
                    _ => TypeExpr::Unknown,
                };
                Ok((Expr::pullback_of(x), ty))
            }
            Ast::Transpose(x) | Ast::Adjoint(x) => {
                let (x, _) = self.check(x)?;
                let e = match &node.ast {
                    Ast::Transpose(_) => Expr::new(ExprKind::Transpose(x)),
                    _ => Expr::new(ExprKind::Adjoint(x)),
                };
                let t = infer::type_of(&e, &self.local_context())?;
                Ok((e, t))
            }
            Ast::Comb(c) => Ok((Expr::comb(*c), TypeExpr::Unknown)),
            Ast::Prim(p) => {
                let prim = match p {
                    PrimAst::Conj => Primitive::Conj,
                    PrimAst::Identity => Primitive::Identity,
                    PrimAst::Mul(v) => Primitive::MulBy(self.check(v)?.0),
                    PrimAst::Add(v) => Primitive::AddBy(self.check(v)?.0),
                    PrimAst::Sum(t) => Primitive::Contract(resolve_type(t, self.ctx)?),
                };
                Ok((Expr::prim(prim), TypeExpr::Unknown))
            }
        }
    }

    fn local_context(&self) -> Context {
        let mut c = self.ctx.clone();
        for (n, t) in &self.scope {
            c.push_var(n, t.clone());
        }
        c
    }

    fn apply(&mut self, head: &Node, args: &[Node]) -> Result<(Expr, TypeExpr)> {
        let (f, mut tf) = self.check(head)?;
        let mut out = Vec::new();
        let mut i = 0;
        while i < args.len() {
            if tf == TypeExpr::Unknown {
                for a in &args[i..] {
                    out.push(self.check(a)?.0);
                }
                return Ok((Expr::apply(f, out), TypeExpr::Unknown));
            }
            let (params, ret) = tf.signature().ok_or_else(|| {
                Error::Type(format!("`{}` of type `{tf}` cannot be applied", Expr::apply(f.clone(), out.clone())))
            })?;
            let rest = args.len() - i;
            if rest < params.len() {
                return Err(Error::Arity(format!(
                    "`{f}` expects {} argument(s) of types ({}), found {rest}",
                    params.len(),
                    params.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
                )));
            }
            for p in &params {
                let a = &args[i];
                let (e, ta) = self.check(a)?;
                if p.is_index() {
                    if ta == TypeExpr::Unknown {
                        self.refine(&e, p);
                    } else if !(ta.is_index() || is_int_const(&e)) {
                        return Err(Error::Type(format!(
                            "index argument `{e}` of `{f}` has type `{ta}`, expected `{p}`"
                        ))
                        .at(a.span));
                    }
                } else if !infer::compatible(p, &ta) {
                    return Err(Error::Type(format!(
                        "argument `{e}` of `{f}` has type `{ta}`, expected `{p}`"
                    ))
                    .at(a.span));
                }
                out.push(e);
                i += 1;
            }
            tf = ret;
        }
        Ok((Expr::apply(f, out), tf))
    }

    fn flatten_add<'n>(&self, node: &'n Node, neg: bool, out: &mut Vec<(bool, &'n Node)>) {
        match &node.ast {
            Ast::Add(a, b) => {
                self.flatten_add(a, neg, out);
                self.flatten_add(b, neg, out);
            }
            Ast::Sub(a, b) => {
                self.flatten_add(a, neg, out);
                self.flatten_add(b, !neg, out);
            }
            _ => out.push((neg, node)),
        }
    }

    fn additive(&mut self, node: &Node) -> Result<(Expr, TypeExpr)> {
        let mut flat = Vec::new();
        self.flatten_add(node, false, &mut flat);
        let mut terms = Vec::new();
        for (neg, n) in flat {
            let (e, t) = self.check(n)?;
            terms.push((neg, e, t));
        }
        if terms.iter().any(|(_, _, t)| t.is_index()) {
            return self.index_arith(terms);
        }
        let mut ty: Option<TypeExpr> = None;
        let mut out = Vec::new();
        for (neg, e, t) in terms {
            ty = Some(match ty {
                None => t,
                Some(a) => infer::join(&a, &t),
            });
            out.push(if neg { negate(e) } else { e });
        }
        Ok((Expr::add(out), ty.unwrap_or(TypeExpr::Real)))
    }

    fn index_arith(&mut self, terms: Vec<(bool, Expr, TypeExpr)>) -> Result<(Expr, TypeExpr)> {
        let mut periodic = None;
        let mut first = None;
        let mut out = Vec::new();
        for (neg, e, t) in terms {
            match &t {
                TypeExpr::Domain(d) => {
                    if d.periodic && periodic.is_none() {
                        periodic = Some(t.clone());
                    }
                    first.get_or_insert(t.clone());
                }
                _ if is_int_const(&e) => {}
                TypeExpr::Unknown if e.as_var().is_some() => {}
                _ => {
                    return Err(Error::Type(format!(
                        "`{e}` of type `{t}` cannot appear in index arithmetic"
                    )))
                }
            }
            // nested index sums flatten
            if let ExprKind::IndexArith(inner) = e.kind() {
                for it in inner {
                    out.push(IndexTerm {
                        negated: it.negated ^ neg,
                        atom: it.atom.clone(),
                    });
                }
            } else {
                out.push(IndexTerm { negated: neg, atom: e });
            }
        }
        match periodic {
            Some(t) => {
                for it in &out {
                    self.refine(&it.atom, &t);
                }
                Ok((Expr::index_arith(out), t))
            }
            // reflection `-b` on a symmetric domain
            None if matches!(&first, Some(TypeExpr::Domain(d)) if d.symmetric)
                && matches!(out.as_slice(), [it] if it.negated) =>
            {
                Ok((Expr::index_arith(out), first.unwrap()))
            }
            None => Err(Error::Type(format!(
                "index arithmetic on non-periodic domain `{}`",
                first.map(|t| t.to_string()).unwrap_or_else(|| "?".into())
            ))),
        }
    }

    fn flatten_mul<'n>(node: &'n Node, out: &mut Vec<&'n Node>) {
        match &node.ast {
            Ast::Mul(a, b) => {
                Self::flatten_mul(a, out);
                Self::flatten_mul(b, out);
            }
            _ => out.push(node),
        }
    }

    fn multiplicative(&mut self, node: &Node) -> Result<(Expr, TypeExpr)> {
        let mut flat = Vec::new();
        Self::flatten_mul(node, &mut flat);
        let mut scalars = Vec::new();
        let mut tensors = Vec::new();
        let mut sty = TypeExpr::Real;
        let mut tty: Vec<TypeExpr> = Vec::new();
        for n in flat {
            let (e, t) = self.check(n)?;
            if is_tensor(&t) {
                tensors.push(e);
                tty.push(t);
            } else if t.is_scalar() || t == TypeExpr::Unknown {
                sty = infer::join(&sty, &t);
                scalars.push(e);
            } else {
                return Err(Error::Type(format!("`{e}` of type `{t}` cannot be multiplied")));
            }
        }
        match tensors.len() {
            0 => Ok((Expr::mul(scalars), sty)),
            1 => {
                let t = infer::join(&tty[0], &sty);
                scalars.push(tensors.pop().unwrap());
                Ok((Expr::mul(scalars), t))
            }
            _ => {
                let mm = Expr::new(ExprKind::MatMul(tensors));
                let t = infer::type_of(&mm, &self.local_context())?;
                let t = infer::join(&t, &sty);
                scalars.push(mm);
                Ok((Expr::mul(scalars), t))
            }
        }
    }
}

fn negate(e: Expr) -> Expr {
    match e.as_const() {
        Some(c) => Expr::num(-c),
        None => {
            // products stay flat, as the parser builds them
            let mut fs = vec![Expr::num(-Num::float(1))];
            match e.kind() {
                ExprKind::Mul(xs) => fs.extend(xs.iter().cloned()),
                _ => fs.push(e),
            }
            Expr::mul(fs)
        }
    }
}
