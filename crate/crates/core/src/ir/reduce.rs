//! Beta reduction, combinator unfolding and let inlining.

use std::collections::BTreeMap;

use super::expr::{Binder, Comb, Expr, ExprKind, Primitive};
use super::subst::{substitute_many, Fresh};
use crate::error::{Error, Result};

pub const DEFAULT_STEP_BUDGET: usize = 1_000_000;

/// Nested contractions allowed before giving up; guards the native stack.
const MAX_NESTING: usize = 256;

/// Normalizer with a reduction budget.
#[derive(Debug)]
pub struct Reducer {
    budget: usize,
    steps: usize,
    nesting: usize,
}

impl Default for Reducer {
    fn default() -> Self {
        Reducer::new(DEFAULT_STEP_BUDGET)
    }
}

impl Reducer {
    pub fn new(budget: usize) -> Self {
        Reducer {
            budget,
            steps: 0,
            nesting: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn tick(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(Error::StepBudget(self.budget))
        } else {
            Ok(())
        }
    }

    /// Contract every redex, unfolding `B`, `C`, `I` and primitives when
    /// they are applied to enough arguments.
    pub fn normalize(&mut self, e: &Expr) -> Result<Expr> {
        match e.kind() {
            ExprKind::Apply(f, args) => {
                let f = self.normalize(f)?;
                let args = args
                    .iter()
                    .map(|a| self.normalize(a))
                    .collect::<Result<Vec<_>>>()?;
                self.contract(f, args)
            }
            ExprKind::Let(bs, body) => {
                let bs = bs
                    .iter()
                    .map(|(n, v)| Ok((n.clone(), self.normalize(v)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Expr::let_in(bs, self.normalize(body)?))
            }
            _ => {
                let kids = e
                    .children()
                    .into_iter()
                    .map(|c| self.normalize(c))
                    .collect::<Result<Vec<_>>>()?;
                Ok(if kids.is_empty() { e.clone() } else { e.with_children(kids) })
            }
        }
    }

    /// Apply a normalized head to normalized arguments.
    fn contract(&mut self, f: Expr, args: Vec<Expr>) -> Result<Expr> {
        if args.is_empty() {
            return Ok(f);
        }
        match f.kind() {
            ExprKind::Apply(g, first) => {
                let mut all = first.clone();
                all.extend(args);
                self.contract_flat(g.clone(), all)
            }
            _ => self.contract_flat(f, args),
        }
    }

    fn contract_flat(&mut self, f: Expr, args: Vec<Expr>) -> Result<Expr> {
        if self.nesting >= MAX_NESTING {
            return Err(Error::StepBudget(self.budget));
        }
        self.nesting += 1;
        let r = self.contract_step(f, args);
        self.nesting -= 1;
        r
    }

    fn contract_step(&mut self, f: Expr, args: Vec<Expr>) -> Result<Expr> {
        match f.kind() {
            ExprKind::Lambda(ps, body) => {
                self.tick()?;
                let n = ps.len().min(args.len());
                let map: BTreeMap<_, _> = ps[..n]
                    .iter()
                    .map(|p| p.name.clone())
                    .zip(args[..n].iter().cloned())
                    .collect();
                let rest_params = ps[n..].to_vec();
                let body = if rest_params.is_empty() {
                    substitute_many(body, &map)
                } else {
                    substitute_many(&Expr::lambda(rest_params, body.clone()), &map)
                };
                let body = self.normalize(&body)?;
                self.contract(body, args[n..].to_vec())
            }
            ExprKind::Comb(c) => {
                // C consumes one argument group for its function's parameters.
                let need = match (c, args[0].kind()) {
                    (Comb::C, ExprKind::Lambda(ps, _)) => 2 + ps.len(),
                    (Comb::B | Comb::C, _) => 3,
                    (Comb::I, _) => 1,
                };
                if args.len() < need {
                    return Ok(Expr::new(ExprKind::Apply(f, args)));
                }
                self.tick()?;
                let rest = args[need..].to_vec();
                let unfolded = match c {
                    // B(f)(g)(x) = f(g(x))
                    Comb::B => Expr::apply1(
                        args[0].clone(),
                        Expr::apply1(args[1].clone(), args[2].clone()),
                    ),
                    // C(g)(x)(b) = g(b)(x)
                    Comb::C => Expr::apply1(
                        Expr::apply(args[0].clone(), args[2..need].to_vec()),
                        args[1].clone(),
                    ),
                    Comb::I => args[0].clone(),
                };
                let unfolded = self.normalize(&unfolded)?;
                self.contract(unfolded, rest)
            }
            ExprKind::Primitive(p) => {
                self.tick()?;
                let x = args[0].clone();
                let rest = args[1..].to_vec();
                let out = match p {
                    Primitive::Conj => Expr::conj(x),
                    Primitive::MulBy(v) => Expr::mul(vec![v.clone(), x]),
                    Primitive::AddBy(v) => Expr::add(vec![v.clone(), x]),
                    Primitive::Identity => x,
                    Primitive::Contract(ty) => {
                        let mut fresh = Fresh::avoiding(&x);
                        let b = Binder {
                            name: fresh.fresh("i"),
                            ty: ty.clone(),
                        };
                        let body = self.contract(x, vec![b.var()])?;
                        Expr::sum(b, body)
                    }
                };
                self.contract(out, rest)
            }
            _ => Ok(Expr::new(ExprKind::Apply(f, args))),
        }
    }
}

/// Contract all beta redexes with the default budget.
pub fn beta_reduce(e: &Expr) -> Result<Expr> {
    Reducer::default().normalize(e)
}

pub fn beta_reduce_with_budget(e: &Expr, budget: usize) -> Result<Expr> {
    Reducer::new(budget).normalize(e)
}

/// Inline every `let` binding, then beta-reduce.
pub fn eval_all(e: &Expr) -> Result<Expr> {
    beta_reduce(&inline_lets(e))
}

pub fn inline_lets(e: &Expr) -> Expr {
    match e.kind() {
        ExprKind::Let(bs, body) => {
            let mut body = inline_lets(body);
            for (n, v) in bs.iter().rev() {
                let v = inline_lets(v);
                let mut map = BTreeMap::new();
                map.insert(n.clone(), v);
                body = substitute_many(&body, &map);
            }
            body
        }
        _ => {
            let kids: Vec<Expr> = e.children().into_iter().map(inline_lets).collect();
            if kids.is_empty() {
                e.clone()
            } else {
                e.with_children(kids)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{alpha_equiv, TypeExpr};

    fn lam(n: &str, body: Expr) -> Expr {
        Expr::lambda(vec![Binder::new(n, TypeExpr::Real)], body)
    }

    #[test]
    fn b_unfolds_to_composition() {
        let e = Expr::apply1(Expr::b_comb(Expr::var("f"), Expr::var("g")), Expr::var("x"));
        let r = beta_reduce(&e).unwrap();
        assert_eq!(
            r,
            Expr::apply1(Expr::var("f"), Expr::apply1(Expr::var("g"), Expr::var("x")))
        );
    }

    #[test]
    fn c_swaps_arguments() {
        let e = Expr::apply1(
            Expr::apply1(Expr::c_comb(Expr::var("g")), Expr::var("x")),
            Expr::var("b"),
        );
        let r = beta_reduce(&e).unwrap();
        assert_eq!(r, Expr::apply(Expr::var("g"), vec![Expr::var("b"), Expr::var("x")]));
    }

    #[test]
    fn lambda_application_substitutes() {
        let e = Expr::apply1(
            lam("x", Expr::add(vec![Expr::var("x"), Expr::int(1)])),
            Expr::int(2),
        );
        let r = beta_reduce(&e).unwrap();
        assert_eq!(r, Expr::add(vec![Expr::int(2), Expr::int(1)]));
    }

    #[test]
    fn idempotent_on_output() {
        let e = Expr::apply1(lam("x", lam("y", Expr::var("x"))), Expr::var("y"));
        let once = beta_reduce(&e).unwrap();
        let twice = beta_reduce(&once).unwrap();
        assert!(alpha_equiv(&once, &twice));
    }

    #[test]
    fn divergent_term_hits_budget() {
        // ω = (λx. x(x))(λx. x(x))
        let w = Expr::lambda(
            vec![Binder::new("x", TypeExpr::Unknown)],
            Expr::apply1(Expr::var("x"), Expr::var("x")),
        );
        let omega = Expr::apply1(w.clone(), w);
        assert!(matches!(
            beta_reduce_with_budget(&omega, 100),
            Err(Error::StepBudget(100))
        ));
    }
}
