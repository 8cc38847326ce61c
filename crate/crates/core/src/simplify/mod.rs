//! The `redux` pass: rewriting to a fixpoint.
//!
//! Each pass rebuilds the term bottom-up through normalizing constructors
//! (see [`rewrite`]). Which rewrites fire is controlled by the [`Rule`]s of a
//! [`RuleSet`]; the order of the list sets the priority when several lifts
//! apply to one product. A pass is kept when it does not grow the term
//! (see [`cost`]), or
//! when it grows it while removing redexes (contractions, deltas, pending
//! applications, unpushed conjugations).

mod canon;
mod rewrite;

use crate::error::{Error, Result};
use crate::ir::infer::type_of;
use crate::ir::{Context, Expr, ExprKind};

use rewrite::Rewriter;

/// One family of rewrites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Reduce applications of lambdas, combinators and primitives.
    Beta,
    /// Push conjugation to the leaves and drop it on real terms.
    ConjPush,
    /// Fold numeric constants, drop units, annihilate by zero.
    Constants,
    /// `Σ_b δ(b, t, p) = p[b := t]`, and trivial deltas.
    DeltaFusion,
    /// `δ(a, b, p)·q = δ(a, b, p·q)`.
    DeltaLift,
    /// `a·Σ_i f(i) = Σ_i a·f(i)`.
    Prenex,
    /// Lift lambdas out of products, sums and contractions.
    LambdaHoist,
    /// Distribute contractions and applications over sums; collect pullback cotangents.
    Linearity,
    /// Merge terms equal up to renaming (and symmetries, when enabled).
    MergeTerms,
    /// `c·a + c·b = c·(a + b)`.
    FactorCommon,
    /// Flatten and cancel index sums; reindex periodic contractions.
    IndexArith,
    /// `(i ↦ f(i)) = f`.
    Eta,
}

impl Rule {
    pub const ALL: [Rule; 12] = [
        Rule::Beta,
        Rule::ConjPush,
        Rule::Constants,
        Rule::DeltaFusion,
        Rule::DeltaLift,
        Rule::Prenex,
        Rule::LambdaHoist,
        Rule::Linearity,
        Rule::MergeTerms,
        Rule::FactorCommon,
        Rule::IndexArith,
        Rule::Eta,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub use_symmetries: bool,
    pub max_passes: usize,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            rules: Rule::ALL.to_vec(),
            use_symmetries: false,
            max_passes: 50,
        }
    }
}

impl RuleSet {
    /// All rules, merging terms under declared tensor symmetries.
    pub fn symmetric() -> Self {
        RuleSet {
            use_symmetries: true,
            ..Self::default()
        }
    }

    pub fn only(rules: &[Rule]) -> Self {
        RuleSet {
            rules: rules.to_vec(),
            ..Self::default()
        }
    }

    pub fn enabled(&self, r: Rule) -> bool {
        self.rules.contains(&r)
    }

    /// Position of `r` in the priority order, if enabled.
    pub fn priority(&self, r: Rule) -> Option<usize> {
        self.rules.iter().position(|x| *x == r)
    }
}

/// Result of [`redux_report`].
#[derive(Clone, Debug)]
pub struct Redux {
    pub expr: Expr,
    pub passes: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Node count of pending redexes; decreases on passes that grow the term.
pub fn redex_count(e: &Expr) -> usize {
    let own = match e.kind() {
        ExprKind::Sum(..) | ExprKind::Delta(..) | ExprKind::Let(..) => 1,
        ExprKind::Conj(x) => usize::from(!matches!(x.kind(), ExprKind::Var(_) | ExprKind::Apply(..))),
        ExprKind::Apply(f, _) => usize::from(!matches!(f.kind(), ExprKind::Var(_) | ExprKind::PullbackOf(_))),
        _ => 0,
    };
    own + e.children().into_iter().map(redex_count).sum::<usize>()
}

/// Node count, not counting conjugation marks on leaves.
pub fn cost(e: &Expr) -> usize {
    fn marks(e: &Expr) -> usize {
        let own = match e.kind() {
            ExprKind::Conj(x) => usize::from(matches!(x.kind(), ExprKind::Var(_) | ExprKind::Apply(..))),
            _ => 0,
        };
        own + e.children().into_iter().map(marks).sum::<usize>()
    }
    e.size() - marks(e)
}

/// Rewrite to a fixpoint, returning the best term and diagnostics.
pub fn redux_report(e: &Expr, rules: &RuleSet, ctx: &Context) -> Result<Redux> {
    let mut rw = Rewriter::new(ctx, rules, e);
    let mut cur = e.clone();
    let mut warnings = Vec::new();
    for pass in 0..rules.max_passes {
        let next = rw.sweep(&cur)?;
        if next == cur {
            return Ok(Redux {
                expr: cur,
                passes: pass,
                converged: true,
                warnings,
            });
        }
        let grows = cost(&next) > cost(&cur);
        if grows && redex_count(&next) >= redex_count(&cur) {
            warnings.push(format!("pass {} rejected: the term grew without removing redexes", pass + 1));
            return Ok(Redux {
                expr: cur,
                passes: pass,
                converged: false,
                warnings,
            });
        }
        cur = next;
    }
    warnings.push(format!("no fixpoint after {} passes", rules.max_passes));
    Ok(Redux {
        expr: cur,
        passes: rules.max_passes,
        converged: false,
        warnings,
    })
}

/// Rewrite to a fixpoint (or the pass budget).
pub fn redux(e: &Expr, rules: &RuleSet, ctx: &Context) -> Result<Expr> {
    Ok(redux_report(e, rules, ctx)?.expr)
}

/// Eliminate contractions against deltas by substitution.
pub fn fuse_delta(e: &Expr, ctx: &Context) -> Result<Expr> {
    redux(
        e,
        &RuleSet::only(&[Rule::DeltaLift, Rule::DeltaFusion, Rule::Constants]),
        ctx,
    )
}

/// Rewrite accesses of symmetric tensors to their orbit-minimal form.
pub fn canonicalize_access(e: &Expr, ctx: &Context) -> Result<Expr> {
    redux(
        e,
        &RuleSet {
            rules: vec![],
            use_symmetries: true,
            max_passes: 4,
        },
        ctx,
    )
}

/// Flatten, cancel and order index sums; reindex periodic contractions.
pub fn normalize_index_arith(e: &Expr, ctx: &Context) -> Result<Expr> {
    redux(e, &RuleSet::only(&[Rule::IndexArith]), ctx)
}

/// Whether `e` is real-valued, by its type or because it equals its own
/// conjugate under the declared symmetries.
pub fn provably_real(e: &Expr, ctx: &Context) -> bool {
    if type_of(e, ctx).is_ok_and(|t| t.is_real()) {
        return true;
    }
    let Ok(e) = crate::ir::eval_all(e) else { return false };
    let diff = Expr::add(vec![e.clone(), Expr::mul(vec![Expr::int(-1), Expr::conj(e)])]);
    redux(&diff, &RuleSet::symmetric(), ctx).is_ok_and(|d| d.is_zero())
}

fn non_contractable_sums(e: &Expr) -> usize {
    let own = match e.kind() {
        ExprKind::Sum(b, _) => usize::from(b.ty.as_domain().is_some_and(|d| !d.contractable)),
        _ => 0,
    };
    own + e.children().into_iter().map(non_contractable_sums).sum::<usize>()
}

/// Fails when the simplified `output` sums over non-contractable domains
/// more often than `input` does. The engine may introduce such sums while
/// differentiating, as long as they fuse away again.
pub fn check_contractions(input: &Expr, output: &Expr) -> Result<()> {
    let input = crate::ir::eval_all(input).unwrap_or_else(|_| input.clone());
    let (had, has) = (non_contractable_sums(&input), non_contractable_sums(output));
    if has > had {
        return Err(Error::Unsupported(format!(
            "result sums over a non-contractable domain {has} times, the input only {had}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load;

    fn run(src: &str, f: impl Fn(&Expr, &Context) -> Result<Expr>) -> String {
        let (e, ctx) = load(src).unwrap();
        f(&e, &ctx).unwrap().to_string()
    }

    fn sym(src: &str) -> String {
        run(src, |e, c| redux(e, &RuleSet::symmetric(), c))
    }

    const DECL: &str = "domain X { symmetric = true }\n\
                        domain BZ { periodic = true }\n\
                        space W { type = (X) -> R; symmetries = [((1), ineg)] }\n\
                        space G { type = (N, N, BZ) -> C }\n\
                        space T { type = (N, N, N, N) -> C; symmetries = [((2,1,4,3), conj), ((3,4,1,2), id)] }\n";

    #[test]
    fn contraction_against_delta_substitutes() {
        // Σ over a scalar space is not surface syntax; it arises from the C rule
        let (g, ctx) = load("(g::(R)->C, x::R, k::C) -> g(x)").unwrap();
        let ExprKind::Lambda(ps, gx) = g.kind() else { panic!() };
        let v = crate::ir::Binder::new("v", crate::ir::TypeExpr::Complex);
        let body = Expr::sum(
            v.clone(),
            Expr::mul(vec![Expr::conj(v.var()), Expr::delta(v.var(), gx.clone(), Expr::var("k"))]),
        );
        let out = redux(&Expr::lambda(ps.clone(), body), &RuleSet::symmetric(), &ctx).unwrap();
        assert_eq!(out.to_string(), "(g::(R)->C, x::R, k::C) -> g(x)' * k");
    }

    #[test]
    fn sifting() {
        let out = run("(f::(N)->C, c::N, k::C) -> sum((b::N), f(b) * delta(b, c, k))", fuse_delta);
        assert_eq!(out, "(f::(N)->C, c::N, k::C) -> f(c) * k");
    }

    #[test]
    fn nested_deltas() {
        let out = run(
            "(g::(N)->C, c::N, k::C) -> sum((i::N, j::N), delta(i, j, k) * delta(j, c, 1) * g(i))",
            fuse_delta,
        );
        assert_eq!(out, "(g::(N)->C, c::N, k::C) -> g(c) * k");
    }

    #[test]
    fn hermitian_access_is_canonical() {
        let out = run("(A::Her, i::N, j::N) -> A(j, i)", canonicalize_access);
        assert_eq!(out, "(A::Her, i::N, j::N) -> A(i, j)'");
    }

    #[test]
    fn two_electron_access_is_canonical() {
        let src = format!("{DECL}(J::T, p::N, q::N, r::N, s::N) -> J(q, p, s, r)'");
        assert_eq!(run(&src, canonicalize_access), "(J::T, p::N, q::N, r::N, s::N) -> J(p, q, r, s)");
    }

    #[test]
    fn even_weight_drops_negation() {
        let src = format!("{DECL}(w::W, b::X) -> w(-b)");
        assert_eq!(run(&src, canonicalize_access), "(w::W, b::X) -> w(b)");
    }

    #[test]
    fn offsets_cancel() {
        let src = format!("{DECL}(U::G, q::N, n::N, k::BZ, b::BZ) -> U(q, n, k + b - b)");
        assert_eq!(run(&src, normalize_index_arith), "(U::G, q::N, n::N, k::BZ, b::BZ) -> U(q, n, k)");
    }

    #[test]
    fn periodic_contraction_is_reindexed() {
        let src = format!("{DECL}(U::G, q::N, n::N, b::BZ) -> sum((k::BZ), U(q, n, k + b))");
        assert_eq!(
            run(&src, normalize_index_arith),
            "(U::G, q::N, n::N, b::BZ) -> sum((k::BZ), U(q, n, k))"
        );
    }

    #[test]
    fn conjugation_reaches_the_leaves() {
        let out = sym("(x::CV, y::R) -> (sum((i::N), x(i) * y))'");
        assert_eq!(out, "(x::CV, y::R) -> sum((i::N), x(i)' * y)");
    }

    #[test]
    fn two_electron_energy_is_real_by_symmetry() {
        let src = format!(
            "{DECL}(J::T, C::CM) -> sum((i::N, j::N, p::N, q::N, r::N, s::N), \
             C(p, i)' * C(q, i) * C(r, j)' * C(s, j) * J(p, q, r, s))"
        );
        let (e, ctx) = load(&src).unwrap();
        let ExprKind::Lambda(ps, body) = e.kind() else { panic!() };
        let mut inner = ctx.clone();
        for p in ps {
            inner.push_var(&p.name, p.ty.clone());
        }
        assert!(provably_real(body, &inner));
        let half = format!("{DECL}(J::T, C::CM) -> sum((p::N, q::N), C(p, q) * J(p, q, p, q))");
        let (e, ctx) = load(&half).unwrap();
        let ExprKind::Lambda(ps, body) = e.kind() else { panic!() };
        let mut inner = ctx.clone();
        for p in ps {
            inner.push_var(&p.name, p.ty.clone());
        }
        assert!(!provably_real(body, &inner));
    }

    #[test]
    fn pass_budget_is_reported() {
        let (e, ctx) = load("(z::C) -> (z' * z)'").unwrap();
        let r = redux_report(
            &e,
            &RuleSet {
                max_passes: 1,
                ..RuleSet::default()
            },
            &ctx,
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.warnings.len(), 1);
        let full = redux_report(&e, &RuleSet::default(), &ctx).unwrap();
        assert!(full.converged);
    }

    #[test]
    fn engine_sums_over_non_contractable_domains_are_rejected() {
        use crate::pullback::pp;
        let decl = "domain T { contractable = false }\n";
        // pulling a scalar back through t -> y v(t) leaves Σ_t k(t) v(t)
        let (f, ctx) = load(&format!("{decl}(v::(T) -> R) -> pullback((y::R) -> (t::T) -> y * v(t))")).unwrap();
        let pb = redux(&pp(&f, &ctx).unwrap().expr, &RuleSet::default(), &ctx).unwrap();
        assert!(matches!(check_contractions(&f, &pb), Err(Error::Unsupported(_))), "{pb}");
        // a sum that fuses with a delta is fine
        let (f, ctx) = load(&format!("{decl}pullback((x::(T) -> R) -> (t::T) -> x(t) * x(t))")).unwrap();
        let pb = redux(&pp(&f, &ctx).unwrap().expr, &RuleSet::default(), &ctx).unwrap();
        assert!(check_contractions(&f, &pb).is_ok(), "{pb}");
    }
}
