//! Alpha-equivalence through canonical (de Bruijn level) renaming.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::expr::{Binder, Expr, ExprKind, Name};

/// Rename every bound variable to `%n`, where `n` is its binding depth.
/// Free variables keep their names.
pub fn canonical(e: &Expr) -> Expr {
    canon(e, &mut Vec::new())
}

fn level_name(level: usize) -> Name {
    Name::from(format!("%{level}").as_str())
}

fn lookup(scope: &[(Name, Name)], n: &Name) -> Option<Name> {
    scope.iter().rev().find(|(k, _)| k == n).map(|(_, v)| v.clone())
}

fn canon(e: &Expr, scope: &mut Vec<(Name, Name)>) -> Expr {
    match e.kind() {
        ExprKind::Var(n) => match lookup(scope, n) {
            Some(m) => Expr::var_name(&m),
            None => e.clone(),
        },
        ExprKind::Lambda(ps, body) => {
            let len = scope.len();
            let mut nps = Vec::with_capacity(ps.len());
            for p in ps {
                let m = level_name(scope.len());
                scope.push((p.name.clone(), m.clone()));
                nps.push(Binder {
                    name: m,
                    ty: p.ty.clone(),
                });
            }
            let b = canon(body, scope);
            scope.truncate(len);
            Expr::new(ExprKind::Lambda(nps, b))
        }
        ExprKind::Sum(p, body) => {
            let m = level_name(scope.len());
            scope.push((p.name.clone(), m.clone()));
            let b = canon(body, scope);
            scope.pop();
            Expr::new(ExprKind::Sum(
                Binder {
                    name: m,
                    ty: p.ty.clone(),
                },
                b,
            ))
        }
        ExprKind::Let(bs, body) => {
            let len = scope.len();
            let mut nbs = Vec::with_capacity(bs.len());
            for (n, v) in bs {
                let v = canon(v, scope);
                let m = level_name(scope.len());
                scope.push((n.clone(), m.clone()));
                nbs.push((m, v));
            }
            let b = canon(body, scope);
            scope.truncate(len);
            Expr::new(ExprKind::Let(nbs, b))
        }
        _ => {
            let kids: Vec<Expr> = e.children().into_iter().map(|c| canon(c, scope)).collect();
            if kids.is_empty() {
                e.clone()
            } else {
                e.with_children(kids)
            }
        }
    }
}

/// True iff `a` and `b` differ only in the names of bound variables.
pub fn alpha_equiv(a: &Expr, b: &Expr) -> bool {
    a == b || canonical(a) == canonical(b)
}

/// Hash that agrees for alpha-equivalent terms.
pub fn alpha_hash(e: &Expr) -> u64 {
    let mut h = DefaultHasher::new();
    canonical(e).hash(&mut h);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::TypeExpr;

    fn id(n: &str) -> Expr {
        Expr::lambda(vec![Binder::new(n, TypeExpr::Real)], Expr::var(n))
    }

    #[test]
    fn identity_lambdas_are_equivalent() {
        assert!(alpha_equiv(&id("x"), &id("y")));
        assert_eq!(alpha_hash(&id("x")), alpha_hash(&id("y")));
    }

    #[test]
    fn conjugate_body_differs() {
        let conj = Expr::lambda(
            vec![Binder::new("x", TypeExpr::Real)],
            Expr::conj(Expr::var("x")),
        );
        assert!(!alpha_equiv(&id("x"), &conj));
    }

    #[test]
    fn free_variables_must_match() {
        assert!(!alpha_equiv(&Expr::var("x"), &Expr::var("y")));
    }
}
