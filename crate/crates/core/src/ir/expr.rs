//! Immutable, shareable terms.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::types::TypeExpr;
use crate::num::Num;

pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Binder {
    pub name: Name,
    pub ty: TypeExpr,
}

impl Binder {
    pub fn new(name: impl AsRef<str>, ty: TypeExpr) -> Self {
        Binder {
            name: Arc::from(name.as_ref()),
            ty,
        }
    }

    pub fn var(&self) -> Expr {
        Expr::var(&self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comb {
    B,
    C,
    I,
}

/// Univariate primitive functions with their captured operand.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    /// `x ↦ x*`
    Conj,
    /// `x ↦ v·x`
    MulBy(Expr),
    /// `x ↦ v + x`
    AddBy(Expr),
    /// `f ↦ Σ_i f(i)` over the given index type.
    Contract(TypeExpr),
    /// `x ↦ x`
    Identity,
}

/// Signed atom of an index sum such as `k + b - c`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexTerm {
    pub negated: bool,
    pub atom: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Var(Name),
    Const(Num),
    Lambda(Vec<Binder>, Expr),
    Apply(Expr, Vec<Expr>),
    /// Polymorphic contraction `Σ_b body`.
    Sum(Binder, Expr),
    /// `δ(lhs, rhs, payload)`: the payload when `lhs = rhs`, zero otherwise.
    Delta(Expr, Expr, Expr),
    Conj(Expr),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Primitive(Primitive),
    Comb(Comb),
    /// Unexpanded pullback. Applied to `(point, cotangent)` when the inner
    /// function is opaque.
    PullbackOf(Expr),
    Tuple(Vec<Expr>),
    Let(Vec<(Name, Expr)>, Expr),
    IndexArith(Vec<IndexTerm>),
    /// Matrix-algebra nodes produced by `blaserize`.
    Transpose(Expr),
    Adjoint(Expr),
    MatMul(Vec<Expr>),
}

/// Reference-counted term; cloning is cheap and terms are never mutated.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<ExprKind>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::render::to_text(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::render::to_text(self))
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr(Arc::new(kind))
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn var(n: &str) -> Self {
        Expr::new(ExprKind::Var(Arc::from(n)))
    }

    pub fn var_name(n: &Name) -> Self {
        Expr::new(ExprKind::Var(n.clone()))
    }

    pub fn num(n: Num) -> Self {
        Expr::new(ExprKind::Const(n))
    }

    pub fn int(v: i64) -> Self {
        Expr::num(Num::int(v))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn lambda(params: Vec<Binder>, body: Expr) -> Self {
        if params.is_empty() {
            return body;
        }
        Expr::new(ExprKind::Lambda(params, body))
    }

    pub fn apply(f: Expr, args: Vec<Expr>) -> Self {
        if args.is_empty() {
            return f;
        }
        Expr::new(ExprKind::Apply(f, args))
    }

    pub fn apply1(f: Expr, arg: Expr) -> Self {
        Expr::apply(f, vec![arg])
    }

    pub fn sum(b: Binder, body: Expr) -> Self {
        Expr::new(ExprKind::Sum(b, body))
    }

    pub fn sums(bs: Vec<Binder>, body: Expr) -> Self {
        bs.into_iter().rev().fold(body, |acc, b| Expr::sum(b, acc))
    }

    pub fn delta(a: Expr, b: Expr, k: Expr) -> Self {
        Expr::new(ExprKind::Delta(a, b, k))
    }

    pub fn conj(e: Expr) -> Self {
        Expr::new(ExprKind::Conj(e))
    }

    pub fn add(terms: Vec<Expr>) -> Self {
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.into_iter().next().unwrap(),
            _ => Expr::new(ExprKind::Add(terms)),
        }
    }

    pub fn mul(factors: Vec<Expr>) -> Self {
        match factors.len() {
            0 => Expr::one(),
            1 => factors.into_iter().next().unwrap(),
            _ => Expr::new(ExprKind::Mul(factors)),
        }
    }

    pub fn prim(p: Primitive) -> Self {
        Expr::new(ExprKind::Primitive(p))
    }

    pub fn comb(c: Comb) -> Self {
        Expr::new(ExprKind::Comb(c))
    }

    /// `B(f)(g)`
    pub fn b_comb(f: Expr, g: Expr) -> Self {
        Expr::apply1(Expr::apply1(Expr::comb(Comb::B), f), g)
    }

    /// `C(g)`
    pub fn c_comb(g: Expr) -> Self {
        Expr::apply1(Expr::comb(Comb::C), g)
    }

    pub fn pullback_of(e: Expr) -> Self {
        Expr::new(ExprKind::PullbackOf(e))
    }

    pub fn tuple(es: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Tuple(es))
    }

    pub fn let_in(bindings: Vec<(Name, Expr)>, body: Expr) -> Self {
        if bindings.is_empty() {
            return body;
        }
        Expr::new(ExprKind::Let(bindings, body))
    }

    pub fn index_arith(terms: Vec<IndexTerm>) -> Self {
        Expr::new(ExprKind::IndexArith(terms))
    }

    pub fn as_var(&self) -> Option<&Name> {
        match self.kind() {
            ExprKind::Var(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_const(&self) -> Option<Num> {
        match self.kind() {
            ExprKind::Const(n) => Some(*n),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|n| n.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(|n| n.is_one())
    }

    pub fn is_var(&self, n: &str) -> bool {
        self.as_var().is_some_and(|v| &**v == n)
    }

    /// Direct children in a deterministic order.
    pub fn children(&self) -> Vec<&Expr> {
        match self.kind() {
            ExprKind::Var(_) | ExprKind::Const(_) | ExprKind::Comb(_) => vec![],
            ExprKind::Lambda(_, b) | ExprKind::Sum(_, b) => vec![b],
            ExprKind::Apply(f, args) => std::iter::once(f).chain(args).collect(),
            ExprKind::Delta(a, b, k) => vec![a, b, k],
            ExprKind::Conj(e)
            | ExprKind::PullbackOf(e)
            | ExprKind::Transpose(e)
            | ExprKind::Adjoint(e) => vec![e],
            ExprKind::Add(es) | ExprKind::Mul(es) | ExprKind::Tuple(es) | ExprKind::MatMul(es) => {
                es.iter().collect()
            }
            ExprKind::Primitive(p) => match p {
                Primitive::MulBy(v) | Primitive::AddBy(v) => vec![v],
                _ => vec![],
            },
            ExprKind::Let(bs, body) => bs.iter().map(|(_, e)| e).chain([body]).collect(),
            ExprKind::IndexArith(ts) => ts.iter().map(|t| &t.atom).collect(),
        }
    }

    /// Rebuild this node with new children (same order as [`Expr::children`]).
    /// Binders are kept as they are.
    pub fn with_children(&self, mut new: Vec<Expr>) -> Expr {
        let mut it = new.drain(..);
        let mut next = || it.next().expect("child count mismatch");
        let kind = match self.kind() {
            ExprKind::Var(_) | ExprKind::Const(_) | ExprKind::Comb(_) => return self.clone(),
            ExprKind::Lambda(ps, _) => ExprKind::Lambda(ps.clone(), next()),
            ExprKind::Sum(b, _) => ExprKind::Sum(b.clone(), next()),
            ExprKind::Apply(_, args) => {
                let f = next();
                ExprKind::Apply(f, args.iter().map(|_| next()).collect())
            }
            ExprKind::Delta(..) => {
                let a = next();
                let b = next();
                ExprKind::Delta(a, b, next())
            }
            ExprKind::Conj(_) => ExprKind::Conj(next()),
            ExprKind::PullbackOf(_) => ExprKind::PullbackOf(next()),
            ExprKind::Transpose(_) => ExprKind::Transpose(next()),
            ExprKind::Adjoint(_) => ExprKind::Adjoint(next()),
            ExprKind::Add(es) => ExprKind::Add(es.iter().map(|_| next()).collect()),
            ExprKind::Mul(es) => ExprKind::Mul(es.iter().map(|_| next()).collect()),
            ExprKind::Tuple(es) => ExprKind::Tuple(es.iter().map(|_| next()).collect()),
            ExprKind::MatMul(es) => ExprKind::MatMul(es.iter().map(|_| next()).collect()),
            ExprKind::Primitive(p) => ExprKind::Primitive(match p {
                Primitive::MulBy(_) => Primitive::MulBy(next()),
                Primitive::AddBy(_) => Primitive::AddBy(next()),
                other => other.clone(),
            }),
            ExprKind::Let(bs, _) => {
                let bs = bs.iter().map(|(n, _)| (n.clone(), next())).collect();
                ExprKind::Let(bs, next())
            }
            ExprKind::IndexArith(ts) => ExprKind::IndexArith(
                ts.iter()
                    .map(|t| IndexTerm {
                        negated: t.negated,
                        atom: next(),
                    })
                    .collect(),
            ),
        };
        Expr::new(kind)
    }

    /// Bottom-up rebuild with `f` applied to every node after its children.
    /// Binders are not renamed; use only with functions that respect scoping.
    pub fn map_bottom_up(&self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let kids: Vec<Expr> = self.children().into_iter().map(|c| c.map_bottom_up(f)).collect();
        let rebuilt = if kids.is_empty() {
            self.clone()
        } else {
            self.with_children(kids)
        };
        f(rebuilt)
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }

    /// Free variable names.
    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        free_vars_into(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn has_free(&self, n: &str) -> bool {
        has_free(self, n)
    }

    /// Every name occurring in the term, bound or free.
    pub fn all_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        all_names_into(self, &mut out);
        out
    }

    /// Binders introduced directly by this node.
    pub fn binders(&self) -> Vec<&Name> {
        match self.kind() {
            ExprKind::Lambda(ps, _) => ps.iter().map(|b| &b.name).collect(),
            ExprKind::Sum(b, _) => vec![&b.name],
            _ => vec![],
        }
    }
}

fn free_vars_into(e: &Expr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match e.kind() {
        ExprKind::Var(n) => {
            if !bound.contains(n) {
                out.insert(n.clone());
            }
        }
        ExprKind::Lambda(ps, body) => {
            let len = bound.len();
            bound.extend(ps.iter().map(|b| b.name.clone()));
            free_vars_into(body, bound, out);
            bound.truncate(len);
        }
        ExprKind::Sum(b, body) => {
            bound.push(b.name.clone());
            free_vars_into(body, bound, out);
            bound.pop();
        }
        ExprKind::Let(bs, body) => {
            let len = bound.len();
            for (n, v) in bs {
                free_vars_into(v, bound, out);
                bound.push(n.clone());
            }
            free_vars_into(body, bound, out);
            bound.truncate(len);
        }
        _ => {
            for c in e.children() {
                free_vars_into(c, bound, out);
            }
        }
    }
}

fn has_free(e: &Expr, n: &str) -> bool {
    match e.kind() {
        ExprKind::Var(v) => &**v == n,
        ExprKind::Const(_) | ExprKind::Comb(_) => false,
        ExprKind::Lambda(ps, body) => !ps.iter().any(|b| &*b.name == n) && has_free(body, n),
        ExprKind::Sum(b, body) => &*b.name != n && has_free(body, n),
        ExprKind::Let(bs, body) => {
            for (bn, v) in bs {
                if has_free(v, n) {
                    return true;
                }
                if &**bn == n {
                    return false;
                }
            }
            has_free(body, n)
        }
        _ => e.children().into_iter().any(|c| has_free(c, n)),
    }
}

fn all_names_into(e: &Expr, out: &mut BTreeSet<Name>) {
    match e.kind() {
        ExprKind::Var(n) => {
            out.insert(n.clone());
        }
        ExprKind::Lambda(ps, _) => out.extend(ps.iter().map(|b| b.name.clone())),
        ExprKind::Sum(b, _) => {
            out.insert(b.name.clone());
        }
        ExprKind::Let(bs, _) => out.extend(bs.iter().map(|(n, _)| n.clone())),
        _ => {}
    }
    for c in e.children() {
        all_names_into(c, out);
    }
}
