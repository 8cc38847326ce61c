//! Fresh names and capture-avoiding substitution.

use std::collections::{BTreeMap, BTreeSet};

use super::expr::{Binder, Expr, ExprKind, Name};
use crate::error::{Error, Result};
use crate::ir::Context;

/// Generates names that do not clash with a growing set of used names.
///
/// `fresh("d")` yields `d`, then `d1`, `d2`, ... as names get taken.
#[derive(Clone, Debug, Default)]
pub struct Fresh {
    used: BTreeSet<Name>,
}

impl Fresh {
    pub fn new() -> Self {
        Fresh::default()
    }

    pub fn avoiding(e: &Expr) -> Self {
        let mut f = Fresh::new();
        f.reserve_expr(e);
        f
    }

    pub fn reserve(&mut self, n: &Name) {
        self.used.insert(n.clone());
    }

    pub fn reserve_expr(&mut self, e: &Expr) {
        self.used.extend(e.all_names());
    }

    pub fn is_used(&self, n: &str) -> bool {
        self.used.contains(n)
    }

    pub fn fresh(&mut self, base: &str) -> Name {
        let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
        let stem = if stem.is_empty() { "v" } else { stem };
        let candidate: Name = Name::from(stem);
        if !self.used.contains(&candidate) {
            self.used.insert(candidate.clone());
            return candidate;
        }
        for i in 1.. {
            let c: Name = Name::from(format!("{stem}{i}").as_str());
            if !self.used.contains(&c) {
                self.used.insert(c.clone());
                return c;
            }
        }
        unreachable!()
    }
}

/// Replace free occurrences of `v` by `val`, renaming binders as needed.
pub fn substitute(e: &Expr, v: &Name, val: &Expr) -> Expr {
    let mut map = BTreeMap::new();
    map.insert(v.clone(), val.clone());
    substitute_many(e, &map)
}

/// Checked substitution: the value's type must match the declared type of `v`.
pub fn substitute_checked(e: &Expr, v: &Name, val: &Expr, ctx: &Context) -> Result<Expr> {
    if let Some(expected) = ctx.var_type(v) {
        let got = crate::ir::infer::type_of(val, ctx)?;
        if !crate::ir::infer::compatible(&expected, &got) {
            return Err(Error::Type(format!(
                "cannot substitute a value of type {got} for `{v}` of type {expected}"
            )));
        }
    }
    Ok(substitute(e, v, val))
}

/// Simultaneous capture-avoiding substitution.
pub fn substitute_many(e: &Expr, map: &BTreeMap<Name, Expr>) -> Expr {
    if map.is_empty() {
        return e.clone();
    }
    let mut danger: BTreeSet<Name> = BTreeSet::new();
    for val in map.values() {
        danger.extend(val.free_vars());
    }
    subst_rec(e, map, &danger)
}

fn subst_rec(e: &Expr, map: &BTreeMap<Name, Expr>, danger: &BTreeSet<Name>) -> Expr {
    if map.is_empty() {
        return e.clone();
    }
    match e.kind() {
        ExprKind::Var(n) => map.get(n).cloned().unwrap_or_else(|| e.clone()),
        ExprKind::Const(_) | ExprKind::Comb(_) => e.clone(),
        ExprKind::Lambda(ps, body) => {
            let (ps, body, map) = enter_binders(ps, body, map, danger);
            Expr::new(ExprKind::Lambda(ps, subst_rec(&body, &map, danger)))
        }
        ExprKind::Sum(b, body) => {
            let (ps, body, map) = enter_binders(std::slice::from_ref(b), body, map, danger);
            let b = ps.into_iter().next().unwrap();
            Expr::new(ExprKind::Sum(b, subst_rec(&body, &map, danger)))
        }
        ExprKind::Let(bs, body) => {
            // sequential scoping: desugar-free handling, rename binding names that capture
            let mut map = map.clone();
            let mut out = Vec::new();
            let mut body = body.clone();
            let mut rest: Vec<(Name, Expr)> = bs.clone();
            let mut i = 0;
            while i < rest.len() {
                let (n, v) = rest[i].clone();
                let v = subst_rec(&v, &map, danger);
                map.remove(&n);
                let mut n2 = n.clone();
                if danger.contains(&n) && !map.is_empty() {
                    let mut fresh = Fresh::new();
                    fresh.used.extend(danger.iter().cloned());
                    fresh.reserve_expr(&body);
                    for (m, w) in &rest {
                        fresh.reserve(m);
                        fresh.reserve_expr(w);
                    }
                    n2 = fresh.fresh(&n);
                    let r = Expr::var_name(&n2);
                    body = substitute(&body, &n, &r);
                    for item in rest.iter_mut().skip(i + 1) {
                        item.1 = substitute(&item.1, &n, &r);
                    }
                }
                out.push((n2, v));
                i += 1;
            }
            Expr::new(ExprKind::Let(out, subst_rec(&body, &map, danger)))
        }
        _ => {
            let kids = e
                .children()
                .into_iter()
                .map(|c| subst_rec(c, map, danger))
                .collect();
            e.with_children(kids)
        }
    }
}

fn enter_binders(
    ps: &[Binder],
    body: &Expr,
    map: &BTreeMap<Name, Expr>,
    danger: &BTreeSet<Name>,
) -> (Vec<Binder>, Expr, BTreeMap<Name, Expr>) {
    let mut map = map.clone();
    for p in ps {
        map.remove(&p.name);
    }
    if map.is_empty() || !ps.iter().any(|p| danger.contains(&p.name)) {
        return (ps.to_vec(), body.clone(), map);
    }
    let mut fresh = Fresh::new();
    fresh.used.extend(danger.iter().cloned());
    fresh.reserve_expr(body);
    for v in map.values() {
        fresh.reserve_expr(v);
    }
    for p in ps {
        fresh.reserve(&p.name);
    }
    let mut renames = BTreeMap::new();
    let mut new_ps = Vec::with_capacity(ps.len());
    for p in ps {
        if danger.contains(&p.name) {
            let n = fresh.fresh(&p.name);
            renames.insert(p.name.clone(), Expr::var_name(&n));
            new_ps.push(Binder {
                name: n,
                ty: p.ty.clone(),
            });
        } else {
            new_ps.push(p.clone());
        }
    }
    let body = substitute_many(body, &renames);
    (new_ps, body, map)
}

/// Rename a binder list to fresh names drawn from `fresh`, returning the new
/// binders and the body with references updated.
pub fn freshen_binders(ps: &[Binder], body: &Expr, fresh: &mut Fresh) -> (Vec<Binder>, Expr) {
    let mut map = BTreeMap::new();
    let mut out = Vec::new();
    for p in ps {
        let n = fresh.fresh(&p.name);
        if n != p.name {
            map.insert(p.name.clone(), Expr::var_name(&n));
        }
        out.push(Binder {
            name: n,
            ty: p.ty.clone(),
        });
    }
    (out, substitute_many(body, &map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::TypeExpr;

    #[test]
    fn direct_replacement() {
        let e = Expr::mul(vec![Expr::var("x"), Expr::var("y")]);
        let r = substitute(&e, &Name::from("y"), &Expr::int(2));
        assert_eq!(r, Expr::mul(vec![Expr::var("x"), Expr::int(2)]));
    }

    #[test]
    fn capture_forces_rename() {
        // λy. x + y  with x := y  →  λy1. y + y1
        let e = Expr::lambda(
            vec![Binder::new("y", TypeExpr::Real)],
            Expr::add(vec![Expr::var("x"), Expr::var("y")]),
        );
        let r = substitute(&e, &Name::from("x"), &Expr::var("y"));
        match r.kind() {
            ExprKind::Lambda(ps, body) => {
                assert_ne!(&*ps[0].name, "y");
                assert_eq!(
                    body,
                    &Expr::add(vec![Expr::var("y"), Expr::var_name(&ps[0].name)])
                );
            }
            _ => panic!("expected lambda"),
        }
    }

    #[test]
    fn fresh_names_follow_d_scheme() {
        let mut f = Fresh::new();
        assert_eq!(&*f.fresh("d"), "d");
        assert_eq!(&*f.fresh("d"), "d1");
        assert_eq!(&*f.fresh("d1"), "d2");
    }
}
