//! One bottom-up sweep of normalizing constructors.

use std::collections::HashMap;

use super::canon::{merge_key, symmetric_access};
use super::{Rule, RuleSet};
use crate::combinator::spine;
use crate::error::Result;
use crate::ir::infer::type_of;
use crate::ir::{
    beta_reduce, freshen_binders, substitute, Binder, Comb, Context, Expr, ExprKind, Fresh, IndexTerm, Name, TypeExpr,
};
use crate::num::Num;

pub(crate) struct Rewriter<'a> {
    pub ctx: Context,
    pub rules: &'a RuleSet,
    /// Names bound by enclosing lambdas and sums, innermost last.
    pub bound: Vec<Name>,
    fresh: Fresh,
    keys: HashMap<Expr, String>,
}

impl<'a> Rewriter<'a> {
    pub fn new(ctx: &Context, rules: &'a RuleSet, avoid: &Expr) -> Self {
        Rewriter {
            ctx: ctx.clone(),
            rules,
            bound: Vec::new(),
            fresh: Fresh::avoiding(avoid),
            keys: HashMap::new(),
        }
    }

    fn scoped<R>(&mut self, bs: &[Binder], f: impl FnOnce(&mut Self) -> R) -> R {
        let len = self.ctx.len();
        let blen = self.bound.len();
        for b in bs {
            self.ctx.push_var(&b.name, b.ty.clone());
            self.bound.push(b.name.clone());
            self.fresh.reserve(&b.name);
        }
        let r = f(self);
        self.ctx.truncate(len);
        self.bound.truncate(blen);
        r
    }

    fn on(&self, r: Rule) -> bool {
        self.rules.enabled(r)
    }

    pub fn type_of(&self, e: &Expr) -> TypeExpr {
        type_of(e, &self.ctx).unwrap_or(TypeExpr::Unknown)
    }

    fn is_real(&self, e: &Expr) -> bool {
        match e.kind() {
            ExprKind::Const(_) | ExprKind::IndexArith(_) => true,
            _ => {
                let t = self.type_of(e);
                t != TypeExpr::Unknown && t.is_real()
            }
        }
    }

    /// Whether a value of this term can be applied to arguments.
    fn is_function(&self, e: &Expr) -> bool {
        matches!(e.kind(), ExprKind::Lambda(..)) || self.type_of(e).signature().is_some()
    }

    /// Rename `bs` away from the free variables of `others`.
    fn rename_away(&mut self, bs: &[Binder], body: &Expr, others: &[&Expr]) -> (Vec<Binder>, Expr) {
        let clash = bs
            .iter()
            .any(|b| others.iter().any(|o| o.has_free(&b.name)) || self.ctx.var_type(&b.name).is_some());
        if !clash {
            for b in bs {
                self.fresh.reserve(&b.name);
            }
            return (bs.to_vec(), body.clone());
        }
        for o in others {
            self.fresh.reserve_expr(o);
        }
        freshen_binders(bs, body, &mut self.fresh)
    }

    /// Rebuild `e` bottom-up through the normalizing constructors.
    pub fn sweep(&mut self, e: &Expr) -> Result<Expr> {
        Ok(match e.kind() {
            ExprKind::Var(_) | ExprKind::Const(_) | ExprKind::Comb(_) | ExprKind::Primitive(_) => e.clone(),
            ExprKind::Lambda(ps, body) => {
                let body = self.scoped(ps, |r| r.sweep(body))?;
                self.lambda(ps.clone(), body)
            }
            ExprKind::Sum(b, body) => {
                let body = self.scoped(std::slice::from_ref(b), |r| r.sweep(body))?;
                self.sum(b.clone(), body)?
            }
            ExprKind::Apply(f, args) => {
                let f = self.sweep(f)?;
                let args = args.iter().map(|a| self.sweep(a)).collect::<Result<Vec<_>>>()?;
                self.apply(f, args)?
            }
            ExprKind::Delta(a, b, p) => {
                let (a, b, p) = (self.sweep(a)?, self.sweep(b)?, self.sweep(p)?);
                self.delta(a, b, p)
            }
            ExprKind::Conj(x) => {
                let x = self.sweep(x)?;
                self.conj(x)
            }
            ExprKind::Add(ts) => {
                let ts = ts.iter().map(|t| self.sweep(t)).collect::<Result<Vec<_>>>()?;
                self.add(ts)?
            }
            ExprKind::Mul(fs) => {
                let fs = fs.iter().map(|f| self.sweep(f)).collect::<Result<Vec<_>>>()?;
                self.mul(fs)?
            }
            ExprKind::IndexArith(ts) => {
                let ts = ts
                    .iter()
                    .map(|t| {
                        Ok(IndexTerm {
                            negated: t.negated,
                            atom: self.sweep(&t.atom)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if self.on(Rule::IndexArith) {
                    index_arith(ts)
                } else {
                    Expr::index_arith(ts)
                }
            }
            ExprKind::Let(bs, body) => {
                let mut out = Vec::new();
                let len = self.ctx.len();
                for (n, v) in bs {
                    let v = self.sweep(v)?;
                    let t = self.type_of(&v);
                    self.ctx.push_var(n, t);
                    out.push((n.clone(), v));
                }
                let body = self.sweep(body);
                self.ctx.truncate(len);
                Expr::let_in(out, body?)
            }
            _ => {
                let kids = e.children().into_iter().map(|c| self.sweep(c)).collect::<Result<Vec<_>>>()?;
                e.with_children(kids)
            }
        })
    }

    pub fn conj(&mut self, x: Expr) -> Expr {
        if let ExprKind::Conj(y) = x.kind() {
            return y.clone();
        }
        if !self.on(Rule::ConjPush) {
            if self.rules.use_symmetries && matches!(x.kind(), ExprKind::Apply(..)) {
                if let Some(e) = self.canonical_access(&x, true) {
                    return e;
                }
            }
            return Expr::conj(x);
        }
        match x.kind() {
            ExprKind::Conj(y) => y.clone(),
            ExprKind::Const(_) | ExprKind::IndexArith(_) => x,
            ExprKind::Mul(fs) => {
                let fs = fs.iter().map(|f| self.conj(f.clone())).collect();
                self.mul(fs).unwrap_or_else(|_| Expr::conj(x.clone()))
            }
            ExprKind::Add(ts) => {
                let ts = ts.iter().map(|t| self.conj(t.clone())).collect();
                self.add(ts).unwrap_or_else(|_| Expr::conj(x.clone()))
            }
            ExprKind::Sum(b, body) => {
                let inner = self.scoped(std::slice::from_ref(b), |r| r.conj(body.clone()));
                Expr::sum(b.clone(), inner)
            }
            ExprKind::Lambda(ps, body) => {
                let inner = self.scoped(ps, |r| r.conj(body.clone()));
                Expr::lambda(ps.clone(), inner)
            }
            ExprKind::Delta(a, b, p) => {
                let p = self.conj(p.clone());
                self.delta(a.clone(), b.clone(), p)
            }
            ExprKind::Tuple(es) => Expr::tuple(es.iter().map(|e| self.conj(e.clone())).collect()),
            _ if self.is_real(&x) => x,
            ExprKind::Apply(..) if self.rules.use_symmetries => match self.canonical_access(&x, true) {
                Some(e) => e,
                None => Expr::conj(x),
            },
            _ => Expr::conj(x),
        }
    }

    /// Orbit-minimal form of a symmetric tensor access, optionally conjugated.
    fn canonical_access(&self, access: &Expr, conj: bool) -> Option<Expr> {
        let (head, args) = spine(access);
        let space = match self.type_of(&head) {
            TypeExpr::Space(s) if !s.symmetries.is_empty() && s.indices.len() == args.len() => s,
            _ => return None,
        };
        symmetric_access(&head, &space, &args, conj, &self.bound)
    }

    pub fn mul(&mut self, fs: Vec<Expr>) -> Result<Expr> {
        let mut coef = Num::one();
        let mut rest = Vec::new();
        let mut stack: Vec<Expr> = fs.into_iter().rev().collect();
        while let Some(f) = stack.pop() {
            match f.kind() {
                ExprKind::Mul(inner) => stack.extend(inner.iter().rev().cloned()),
                ExprKind::Const(c) if self.on(Rule::Constants) => coef = coef * *c,
                _ => rest.push(f),
            }
        }
        if coef.is_zero() {
            return Ok(Expr::num(Num { float: coef.float, ..Num::zero() }));
        }
        let with_coef = |rest: Vec<Expr>| {
            let mut v = Vec::with_capacity(rest.len() + 1);
            if !coef.is_one() {
                v.push(Expr::num(coef));
            }
            v.extend(rest);
            v
        };
        let mut lifts: Vec<Rule> = [Rule::DeltaLift, Rule::LambdaHoist, Rule::Prenex]
            .into_iter()
            .filter(|r| self.on(*r))
            .collect();
        lifts.sort_by_key(|r| self.rules.priority(*r));
        for lift in lifts {
            if let Some(e) = self.lift(lift, &rest, &with_coef)? {
                return Ok(e);
            }
        }
        if self.on(Rule::Constants) {
            rest.sort_by_cached_key(|f| f.to_string());
        }
        Ok(Expr::mul(with_coef(rest)))
    }

    /// Move a delta, lambda or contraction factor outward.
    fn lift(&mut self, lift: Rule, rest: &[Expr], with_coef: &dyn Fn(Vec<Expr>) -> Vec<Expr>) -> Result<Option<Expr>> {
        let find = |pred: fn(&ExprKind) -> bool| rest.iter().position(|f| pred(f.kind()));
        let others = |pos: usize| -> Vec<&Expr> { rest.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, f)| f).collect() };
        match lift {
            // δ(a, b, p)·r = δ(a, b, p·r)
            Rule::DeltaLift => {
                let Some(pos) = find(|k| matches!(k, ExprKind::Delta(..))) else { return Ok(None) };
                let ExprKind::Delta(a, b, p) = rest[pos].kind() else { unreachable!() };
                let mut factors = rest.to_vec();
                factors[pos] = p.clone();
                let payload = self.mul(with_coef(factors))?;
                Ok(Some(self.delta(a.clone(), b.clone(), payload)))
            }
            // c·(i ↦ f(i)) = i ↦ c·f(i)
            Rule::LambdaHoist => {
                let Some(pos) = find(|k| matches!(k, ExprKind::Lambda(..))) else { return Ok(None) };
                let ExprKind::Lambda(ps, body) = rest[pos].kind() else { unreachable!() };
                let (ps, body) = self.rename_away(ps, body, &others(pos));
                let vars: Vec<Expr> = ps.iter().map(Binder::var).collect();
                let mut factors = Vec::new();
                for (i, f) in rest.iter().enumerate() {
                    if i == pos {
                        factors.push(body.clone());
                    } else if self.is_function(f) {
                        factors.push(self.apply(f.clone(), vars.clone())?);
                    } else {
                        factors.push(f.clone());
                    }
                }
                let inner = self.scoped(&ps, |r| r.mul(with_coef(factors)))?;
                Ok(Some(self.lambda(ps, inner)))
            }
            // a·Σ_i f(i) = Σ_i a·f(i)
            Rule::Prenex => {
                let Some(pos) = find(|k| matches!(k, ExprKind::Sum(..))) else { return Ok(None) };
                let ExprKind::Sum(b, body) = rest[pos].kind() else { unreachable!() };
                let (bs, body) = self.rename_away(std::slice::from_ref(b), body, &others(pos));
                let mut factors = rest.to_vec();
                factors[pos] = body;
                let b = bs.into_iter().next().unwrap();
                let inner = self.scoped(std::slice::from_ref(&b), |r| r.mul(with_coef(factors)))?;
                self.sum(b, inner).map(Some)
            }
            _ => Ok(None),
        }
    }

    pub fn add(&mut self, ts: Vec<Expr>) -> Result<Expr> {
        let mut constant = Num::zero();
        let mut saw_const = false;
        let mut rest = Vec::new();
        let mut stack: Vec<Expr> = ts.into_iter().rev().collect();
        while let Some(t) = stack.pop() {
            match t.kind() {
                ExprKind::Add(inner) => stack.extend(inner.iter().rev().cloned()),
                ExprKind::Const(c) if self.on(Rule::Constants) => {
                    constant = constant + *c;
                    saw_const = true;
                }
                _ => rest.push(t),
            }
        }
        if saw_const && !constant.is_zero() {
            rest.push(Expr::num(constant));
        }
        if rest.is_empty() {
            return Ok(Expr::num(constant));
        }
        // (i ↦ f(i)) + g = i ↦ f(i) + g(i)
        if let Some(pos) = rest.iter().position(|t| matches!(t.kind(), ExprKind::Lambda(..))) {
            if rest.len() > 1 && self.on(Rule::LambdaHoist) {
                let ExprKind::Lambda(ps, body) = rest[pos].kind() else { unreachable!() };
                let others: Vec<&Expr> = rest.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, t)| t).collect();
                let (ps, body) = self.rename_away(ps, body, &others);
                let vars: Vec<Expr> = ps.iter().map(Binder::var).collect();
                let mut terms = Vec::new();
                for (i, t) in rest.iter().enumerate() {
                    terms.push(if i == pos { body.clone() } else { self.apply(t.clone(), vars.clone())? });
                }
                let inner = self.scoped(&ps, |r| r.add(terms))?;
                return Ok(self.lambda(ps, inner));
            }
        }
        if self.on(Rule::MergeTerms) {
            rest = self.merge_deltas(rest)?;
        }
        if self.on(Rule::Linearity) {
            rest = self.merge_pullbacks(rest)?;
        }
        if self.on(Rule::MergeTerms) {
            rest = self.merge_like(rest)?;
        }
        if rest.len() <= 1 {
            return Ok(rest.pop().unwrap_or_else(Expr::zero));
        }
        if self.on(Rule::Constants) {
            rest.sort_by_cached_key(|t| t.to_string());
        }
        if self.on(Rule::FactorCommon) {
            return Ok(factor_common(rest));
        }
        Ok(Expr::add(rest))
    }

    /// `δ(a, b, p) + δ(a, b, q) = δ(a, b, p + q)`
    fn merge_deltas(&mut self, ts: Vec<Expr>) -> Result<Vec<Expr>> {
        let mut out: Vec<Expr> = Vec::new();
        for t in ts {
            if let ExprKind::Delta(a, b, p) = t.kind() {
                let hit = out.iter().position(|o| matches!(o.kind(), ExprKind::Delta(c, d, _) if c == a && d == b));
                if let Some(i) = hit {
                    let ExprKind::Delta(_, _, q) = out[i].kind() else { unreachable!() };
                    let payload = self.add(vec![q.clone(), p.clone()])?;
                    out[i] = self.delta(a.clone(), b.clone(), payload);
                    continue;
                }
            }
            out.push(t);
        }
        Ok(out)
    }

    /// `𝒫(h)(y, k₁) + 𝒫(h)(y, k₂) = 𝒫(h)(y, k₁ + k₂)`
    fn merge_pullbacks(&mut self, ts: Vec<Expr>) -> Result<Vec<Expr>> {
        let mut out: Vec<Expr> = Vec::new();
        for t in ts {
            if let Some((h, y, k, rest)) = pullback_parts(&t) {
                let hit = out.iter().position(|o| {
                    pullback_parts(o).is_some_and(|(h2, y2, _, r2)| h2 == h && y2 == y && r2 == rest)
                });
                if let Some(i) = hit {
                    let (_, _, k2, _) = pullback_parts(&out[i]).unwrap();
                    let sum = self.add(vec![k2, k])?;
                    let mut args = vec![y, sum];
                    args.extend(rest);
                    out[i] = Expr::apply(Expr::pullback_of(h), args);
                    continue;
                }
            }
            out.push(t);
        }
        Ok(out)
    }

    fn key(&mut self, e: &Expr) -> String {
        if let Some(k) = self.keys.get(e) {
            return k.clone();
        }
        let k = merge_key(e, &self.ctx, self.rules.use_symmetries);
        self.keys.insert(e.clone(), k.clone());
        k
    }

    /// Combine terms equal up to renaming (and declared symmetries).
    fn merge_like(&mut self, ts: Vec<Expr>) -> Result<Vec<Expr>> {
        let mut groups: Vec<(String, Num, usize, Expr)> = Vec::new();
        for t in ts {
            let (c, body) = split_coef(&t);
            let k = self.key(&body);
            match groups.iter_mut().find(|g| g.0 == k) {
                Some(g) => {
                    g.1 = g.1 + c;
                    g.2 += 1;
                }
                None => groups.push((k, c, 1, body)),
            }
        }
        let mut out = Vec::new();
        for (_, c, n, body) in groups {
            if c.is_zero() {
                continue;
            }
            let c = if n > 1 { Num { float: true, ..c } } else { c };
            out.push(if c.is_one() && !c.float { body } else { self.mul(vec![Expr::num(c), body])? });
        }
        Ok(out)
    }

    pub fn sum(&mut self, b: Binder, body: Expr) -> Result<Expr> {
        if body.is_zero() {
            return Ok(body);
        }
        if !body.has_free(&b.name) {
            return Ok(Expr::sum(b, body));
        }
        match body.kind() {
            ExprKind::Add(ts) if self.on(Rule::Linearity) => {
                let ts = ts
                    .iter()
                    .map(|t| self.sum(b.clone(), t.clone()))
                    .collect::<Result<Vec<_>>>()?;
                self.add(ts)
            }
            ExprKind::Delta(l, r, p) if self.on(Rule::DeltaFusion) => {
                if let Some(v) = solve(l, r, &b.name) {
                    let fused = substitute(p, &b.name, &v);
                    return self.sweep(&fused);
                }
                if !l.has_free(&b.name) && !r.has_free(&b.name) {
                    let inner = self.scoped(std::slice::from_ref(&b), |s| s.sum(b.clone(), p.clone()))?;
                    return Ok(self.delta(l.clone(), r.clone(), inner));
                }
                Ok(Expr::sum(b, body))
            }
            // Σ_b Σ_j X = Σ_j Σ_b X, taken when Σ_b then disappears
            ExprKind::Sum(j, inner) if self.on(Rule::DeltaFusion) && j.name != b.name && !b.ty.is_index() => {
                let pushed = self.scoped(std::slice::from_ref(j), |s| s.sum(b.clone(), inner.clone()))?;
                if matches!(pushed.kind(), ExprKind::Sum(x, _) if x.name == b.name) {
                    return Ok(Expr::sum(b, body));
                }
                self.sum(j.clone(), pushed)
            }
            ExprKind::Lambda(ps, q) if self.on(Rule::LambdaHoist) => {
                let bvar = b.var();
                let (ps, q) = self.rename_away(ps, q, &[&bvar]);
                let inner = self.scoped(&ps, |s| s.sum(b.clone(), q))?;
                Ok(self.lambda(ps, inner))
            }
            // Σ_b c·(x + y) = Σ_b c·x + Σ_b c·y, so the summands can merge
            ExprKind::Mul(fs)
                if self.on(Rule::Linearity)
                    && fs.len() == 2
                    && fs[0].as_const().is_some()
                    && matches!(fs[1].kind(), ExprKind::Add(_)) =>
            {
                let ExprKind::Add(ts) = fs[1].kind() else { unreachable!() };
                let mut out = Vec::new();
                for t in ts {
                    let scaled = self.scoped(std::slice::from_ref(&b), |r| r.mul(vec![fs[0].clone(), t.clone()]))?;
                    out.push(self.sum(b.clone(), scaled)?);
                }
                self.add(out)
            }
            _ => {
                if let Some(shifted) = self.reindex(&b, &body) {
                    return Ok(Expr::sum(b, shifted));
                }
                if let Some((h, y, k, rest)) = pullback_parts(&body).filter(|_| self.on(Rule::Linearity)) {
                    if !y.has_free(&b.name) && rest.iter().all(|a| !a.has_free(&b.name)) {
                        let inner = self.sum(b, k)?;
                        let mut args = vec![y, inner];
                        args.extend(rest);
                        return Ok(Expr::apply(Expr::pullback_of(h), args));
                    }
                }
                Ok(Expr::sum(b, body))
            }
        }
    }

    /// `Σ_k f(k + t) = Σ_k f(k)` on a periodic domain, when the shift removes index arithmetic.
    fn reindex(&self, b: &Binder, body: &Expr) -> Option<Expr> {
        if !self.on(Rule::IndexArith) || !b.ty.as_domain().is_some_and(|d| d.periodic) {
            return None;
        }
        let atoms = arith_atoms(body);
        let v = b.var();
        for t in shift_partners(body, &b.name) {
            for neg in [false, true] {
                let shift = index_arith(vec![
                    IndexTerm {
                        negated: false,
                        atom: v.clone(),
                    },
                    IndexTerm {
                        negated: neg,
                        atom: t.clone(),
                    },
                ]);
                let moved = normalize_arith(&substitute(body, &b.name, &shift));
                if arith_atoms(&moved) < atoms {
                    return Some(moved);
                }
            }
        }
        None
    }

    pub fn delta(&mut self, a: Expr, b: Expr, p: Expr) -> Expr {
        if !self.on(Rule::DeltaFusion) {
            return Expr::delta(a, b, p);
        }
        if p.is_zero() {
            return p;
        }
        if a == b {
            return p;
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if x != y {
                return Expr::zero();
            }
        }
        if let ExprKind::Delta(c, d, q) = p.kind() {
            if (c == &a && d == &b) || (c == &b && d == &a) {
                return self.delta(a, b, q.clone());
            }
        }
        let (a, b) = if a.to_string() <= b.to_string() { (a, b) } else { (b, a) };
        Expr::delta(a, b, p)
    }

    pub fn apply(&mut self, f: Expr, args: Vec<Expr>) -> Result<Expr> {
        if args.is_empty() {
            return Ok(f);
        }
        let beta = self.on(Rule::Beta);
        let linear = self.on(Rule::Linearity);
        match f.kind() {
            ExprKind::Lambda(..) | ExprKind::Comb(_) | ExprKind::Primitive(_) if beta => {
                let r = beta_reduce(&Expr::apply(f.clone(), args.clone()))?;
                if r == Expr::apply(f.clone(), args.clone()) {
                    if let ExprKind::Comb(c) = f.kind() {
                        if let Some((ps, body)) = self.saturate(*c, &args) {
                            let inner = self.scoped(&ps, |s| s.sweep(&body))?;
                            return Ok(self.lambda(ps, inner));
                        }
                    }
                    return Ok(r);
                }
                self.sweep(&r)
            }
            ExprKind::Apply(g, first) if beta && !matches!(g.kind(), ExprKind::PullbackOf(_)) => {
                let mut all = first.clone();
                all.extend(args);
                self.apply(g.clone(), all)
            }
            ExprKind::Delta(a, b, p) if linear => {
                let inner = self.apply(p.clone(), args)?;
                Ok(self.delta(a.clone(), b.clone(), inner))
            }
            ExprKind::Add(ts) if linear => {
                let ts = ts
                    .iter()
                    .map(|t| self.apply(t.clone(), args.clone()))
                    .collect::<Result<Vec<_>>>()?;
                self.add(ts)
            }
            ExprKind::Mul(fs) if linear => {
                let mut out = Vec::new();
                for g in fs {
                    out.push(if self.is_function(g) { self.apply(g.clone(), args.clone())? } else { g.clone() });
                }
                self.mul(out)
            }
            ExprKind::Sum(b, body) if linear => {
                let refs: Vec<&Expr> = args.iter().collect();
                let (bs, body) = self.rename_away(std::slice::from_ref(b), body, &refs);
                let b = bs.into_iter().next().unwrap();
                let inner = self.scoped(std::slice::from_ref(&b), |r| r.apply(body, args))?;
                self.sum(b, inner)
            }
            ExprKind::Conj(g) if self.on(Rule::ConjPush) => {
                let inner = self.apply(g.clone(), args)?;
                Ok(self.conj(inner))
            }
            _ => {
                let e = Expr::apply(f, args);
                if self.rules.use_symmetries {
                    if let Some(c) = self.canonical_access(&e, false) {
                        return Ok(c);
                    }
                }
                Ok(e)
            }
        }
    }

    /// Eta-expand a combinator missing its last arguments:
    /// `C(g)(x) = b ↦ g(b)(x)` and `B(f)(g) = v ↦ f(g(v))`.
    fn saturate(&mut self, c: Comb, args: &[Expr]) -> Option<(Vec<Binder>, Expr)> {
        match (c, args) {
            (Comb::C, [g, x]) => {
                let ExprKind::Lambda(ps, _) = g.kind() else { return None };
                let bs: Vec<Binder> = ps.iter().map(|p| Binder::new(self.fresh.fresh(&p.name), p.ty.clone())).collect();
                let gb = Expr::apply(g.clone(), bs.iter().map(Binder::var).collect());
                Some((bs, Expr::apply1(gb, x.clone())))
            }
            (Comb::B, [f, g]) => {
                let ty = match self.type_of(g).signature() {
                    Some((ts, _)) if ts.len() == 1 => ts[0].clone(),
                    _ => TypeExpr::Unknown,
                };
                let v = Binder::new(self.fresh.fresh("v"), ty);
                let body = Expr::apply1(f.clone(), Expr::apply1(g.clone(), v.var()));
                Some((vec![v], body))
            }
            _ => None,
        }
    }

    pub fn lambda(&mut self, ps: Vec<Binder>, body: Expr) -> Expr {
        // eta: (i ↦ f(i)) = f
        if let (true, ExprKind::Apply(f, args)) = (self.on(Rule::Eta), body.kind()) {
            let exact = args.len() == ps.len() && args.iter().zip(&ps).all(|(a, p)| a.is_var(&p.name));
            if exact && ps.iter().all(|p| !f.has_free(&p.name)) && !matches!(f.kind(), ExprKind::PullbackOf(_)) {
                return f.clone();
            }
        }
        Expr::lambda(ps, body)
    }
}

/// `𝒫(h)(y, k, rest..)` as its parts.
fn pullback_parts(e: &Expr) -> Option<(Expr, Expr, Expr, Vec<Expr>)> {
    let ExprKind::Apply(f, args) = e.kind() else { return None };
    let ExprKind::PullbackOf(h) = f.kind() else { return None };
    if args.len() < 2 {
        return None;
    }
    Some((h.clone(), args[0].clone(), args[1].clone(), args[2..].to_vec()))
}

/// Numeric coefficient and remaining factor of a term, looking through
/// leading contractions.
pub(crate) fn split_coef(t: &Expr) -> (Num, Expr) {
    match t.kind() {
        ExprKind::Sum(b, body) => {
            let (c, rest) = split_coef(body);
            (c, Expr::sum(b.clone(), rest))
        }
        ExprKind::Mul(fs) => match fs.first().and_then(Expr::as_const) {
            Some(c) => (c, Expr::mul(fs[1..].to_vec())),
            None => (Num::one(), t.clone()),
        },
        _ => (Num::one(), t.clone()),
    }
}

/// `c·a + c·b = c·(a + b)` when every term shares the coefficient `c ≠ ±1`.
fn factor_common(ts: Vec<Expr>) -> Expr {
    let parts: Vec<(Num, Expr)> = ts.iter().map(split_coef).collect();
    let c = parts[0].0;
    let shared = !c.is_one() && !(-c).is_one() && parts.iter().all(|(d, _)| d.value == c.value);
    if !shared {
        return Expr::add(ts);
    }
    let inner = Expr::add(parts.into_iter().map(|(_, t)| t).collect());
    Expr::mul(vec![Expr::num(c), inner])
}

/// Solve `l = r` for the bound index `v`.
fn solve(l: &Expr, r: &Expr, v: &Name) -> Option<Expr> {
    let one_side = |lhs: &Expr, rhs: &Expr| -> Option<Expr> {
        if rhs.has_free(v) {
            return None;
        }
        if lhs.is_var(v) {
            return Some(rhs.clone());
        }
        let ExprKind::IndexArith(ts) = lhs.kind() else { return None };
        let hits: Vec<&IndexTerm> = ts.iter().filter(|t| t.atom.is_var(v)).collect();
        if hits.len() != 1 || ts.iter().any(|t| !t.atom.is_var(v) && t.atom.has_free(v)) {
            return None;
        }
        // ±v + rest = rhs  ⇒  v = ±(rhs − rest)
        let sign = hits[0].negated;
        let mut out = vec![IndexTerm {
            negated: sign,
            atom: rhs.clone(),
        }];
        for t in ts.iter().filter(|t| !t.atom.is_var(v)) {
            out.push(IndexTerm {
                negated: t.negated != !sign,
                atom: t.atom.clone(),
            });
        }
        Some(index_arith(out))
    };
    one_side(l, r).or_else(|| one_side(r, l))
}

/// Flatten, cancel and order a signed index sum.
pub(crate) fn index_arith(ts: Vec<IndexTerm>) -> Expr {
    let mut flat: Vec<IndexTerm> = Vec::new();
    let mut stack: Vec<IndexTerm> = ts.into_iter().rev().collect();
    let mut constant = 0i64;
    while let Some(t) = stack.pop() {
        match t.atom.kind() {
            ExprKind::IndexArith(inner) => stack.extend(inner.iter().rev().map(|u| IndexTerm {
                negated: u.negated != t.negated,
                atom: u.atom.clone(),
            })),
            ExprKind::Const(c) if c.as_i64().is_some() => {
                let v = c.as_i64().unwrap();
                constant += if t.negated { -v } else { v };
            }
            _ => flat.push(t),
        }
    }
    // cancel +a and −a
    let mut out: Vec<IndexTerm> = Vec::new();
    for t in flat {
        match out.iter().position(|o| o.atom == t.atom && o.negated != t.negated) {
            Some(i) => {
                out.remove(i);
            }
            None => out.push(t),
        }
    }
    if constant != 0 {
        out.push(IndexTerm {
            negated: constant < 0,
            atom: Expr::int(constant.abs()),
        });
    }
    out.sort_by_cached_key(|t| (t.negated, t.atom.to_string()));
    match out.as_slice() {
        [] => Expr::zero(),
        [t] if !t.negated => t.atom.clone(),
        _ => Expr::index_arith(out),
    }
}

fn arith_atoms(e: &Expr) -> usize {
    match e.kind() {
        ExprKind::IndexArith(ts) => ts.len(),
        _ => e.children().into_iter().map(arith_atoms).sum(),
    }
}

fn normalize_arith(e: &Expr) -> Expr {
    e.map_bottom_up(&mut |x| match x.kind() {
        ExprKind::IndexArith(ts) => index_arith(ts.clone()),
        _ => x,
    })
}

/// Atoms added to `v` in some index sum of `e`.
fn shift_partners(e: &Expr, v: &Name) -> Vec<Expr> {
    fn go(e: &Expr, v: &Name, out: &mut Vec<Expr>) {
        if let ExprKind::IndexArith(ts) = e.kind() {
            if ts.iter().any(|t| t.atom.is_var(v)) {
                for t in ts.iter().filter(|t| !t.atom.has_free(v)) {
                    if !out.contains(&t.atom) {
                        out.push(t.atom.clone());
                    }
                }
            }
        }
        for c in e.children() {
            go(c, v, out);
        }
    }
    let mut out = Vec::new();
    go(e, v, &mut out);
    out
}
