//! End-to-end results on the example programs, checked against finite
//! differences and against hand-derived reference forms.

mod common;

use std::time::{Duration, Instant};

use combdiff::blaserize::blaserize;
use combdiff::combinator::decompose;
use combdiff::frontend::load;
use combdiff::ir::{alpha_equiv, eval_all, Binder, Context, Expr, ExprKind};
use combdiff::numeric::{check_equal, check_gradient, check_pullback, realify, strip_markers, CheckConfig};
use combdiff::pullback::{pp, vdiff};
use combdiff::render::{to_latex, to_text};
use combdiff::simplify::{check_contractions, redux, redux_report, Rule, RuleSet};
use combdiff::NumericEnv64;
use common::*;

fn fd(trials: usize) -> CheckConfig {
    CheckConfig {
        trials,
        ..CheckConfig::default()
    }
}

// quadratic form

#[test]
fn quadratic_gradient_is_two_a_x() {
    let start = Instant::now();
    let (f, ctx) = fixture("quad.pct");
    let g = blaserize(&gradient(&f, &ctx, true));
    let elapsed = start.elapsed();
    let (want, _) = load("(A::Her) -> (x::CV) -> 2.0 * A * x").unwrap();
    assert!(alpha_equiv(&g, &want), "{g}");
    assert_eq!(to_text(&g), "(A::Her) -> (x::CV) -> 2.0 * A * x");
    assert_eq!(to_latex(&g), r"A \mapsto x \mapsto 2.0 \cdot A\cdot x");
    assert!(elapsed < Duration::from_secs(1), "{elapsed:?}");
    let report = check_gradient::<f64>(&f, &g, &ctx, &fd(20).with_extent("N", 4)).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn quadratic_without_symmetries_is_still_correct() {
    let (f, ctx) = fixture("quad.pct");
    let g = gradient(&f, &ctx, false);
    let report = check_gradient::<f64>(&f, &g, &ctx, &fd(5)).unwrap();
    assert!(report.passed(), "{report}");
}

// product rule

#[test]
fn product_rule_of_real_functions() {
    let (f, ctx) = fixture("product.pct");
    let pb = redux(&pp(&f, &ctx).unwrap().expr, &RuleSet::default(), &ctx).unwrap();
    assert_eq!(
        pb.to_string(),
        "(f::(R)->R, g::(R)->R) -> (x::R, k::R) -> pullback(f)(x, g(x) * k) + pullback(g)(x, f(x) * k)"
    );
}

#[test]
fn product_rule_conjugates_the_other_factor() {
    let src = "(f::(C) -> C, g::(C) -> C) -> pullback((x::C) -> f(x) * g(x))";
    let (f, ctx) = load(src).unwrap();
    let pb = redux(&pp(&f, &ctx).unwrap().expr, &RuleSet::default(), &ctx).unwrap();
    let golden = "(f::(C) -> C, g::(C) -> C) -> (x::C, k::C) -> pullback(g)(x, f(x)' * k) + pullback(f)(x, g(x)' * k)";
    let (want, _) = load(golden).unwrap();
    let want = redux(&want, &RuleSet::default(), &ctx).unwrap();
    assert!(alpha_equiv(&pb, &want), "{pb}\n  vs {want}");
}

// conjugate gradient step

const CG_OPAQUE: &str = "(A::Sym, r::RV, p::RV, b::RV, x::RV) ->
  let R = (x::RV) -> sum((i::N), -1.0 * x(i) * b(i)) + sum((i::N, j::N), 0.5 * x(i) * A(i, j) * x(j)) in
  (alpha::R, beta::R) -> (
    sum((i::N), pullback(R)((j::N) -> alpha * (beta * p(j) + r(j)) + x(j), 1, i) * (beta * p(i) + r(i))),
    sum((i::N), pullback(R)((j::N) -> alpha * (beta * p(j) + r(j)) + x(j), 1, i) * p(i) * alpha))";

const CG_INLINED: &str = "(A::Sym, r::RV, p::RV, b::RV, x::RV) -> (alpha::R, beta::R) -> (
    transpose(beta * p + r) * A * (alpha * (beta * p + r) + x) - 1.0 * transpose(beta * p + r) * b,
    alpha * (transpose(p) * A * (alpha * (beta * p + r) + x) - 1.0 * transpose(b) * p))";

#[test]
fn cg_keeps_the_unknown_residual_symbolic() {
    let (f, ctx) = fixture("cg.pct");
    let g = gradient(&f, &ctx, false);
    let (want, _) = load(CG_OPAQUE).unwrap();
    let want = redux(&want, &RuleSet::default(), &ctx).unwrap();
    assert!(alpha_equiv(&g, &want), "{g}\n  vs {want}");
    let text = blaserize(&g).to_string();
    assert_eq!(text.matches("pullback(R)(alpha * (beta * p + r) + x, 1)").count(), 2, "{text}");
}

#[test]
fn cg_with_residual_inlined_matches_reference() {
    let (f, ctx) = fixture("cg.pct");
    let f = eval_all(&f).unwrap();
    let g = blaserize(&gradient(&f, &ctx, true));
    let (want, _) = load(CG_INLINED).unwrap();
    let cfg = CheckConfig {
        trials: 10,
        tol: 1e-9,
        ..CheckConfig::default()
    }
    .with_extent("N", 4);
    let report = check_equal::<f64>(&g, &want, &ctx, &cfg).unwrap();
    assert!(report.passed(), "{g}\n{report}");
    let report = check_gradient::<f64>(&f, &g, &ctx, &cfg.clone()).unwrap();
    assert!(report.passed(), "{report}");
}

// Hartree-Fock

fn hf_gradient() -> (Expr, Expr, Context, Duration) {
    let start = Instant::now();
    let (f, ctx) = fixture("hf.pct");
    let g = gradient(&f, &ctx, true);
    (f, g, ctx, start.elapsed())
}

#[test]
fn hf_gradient_is_one_term_with_factor_four() {
    let (f, g, ctx, elapsed) = hf_gradient();
    assert!(elapsed < Duration::from_secs(10), "{elapsed:?}");
    let body = innermost_body(&g);
    assert!(!matches!(body.kind(), ExprKind::Add(_)), "{g}");
    // the reference access J(r, s, p, d)' and its images under J's symmetries
    let orbit = ["J(r, s, p, d)'", "J(s, r, d, p)", "J(p, d, r, s)'", "J(d, p, s, r)"];
    let matched = orbit.iter().any(|j| {
        let src = format!("(J::T) -> (C::Orb) -> (d::N, d1::E) -> sum((j::E, p::N, r::N, s::N), 4.0 * {j} * C(s, j)' * C(p, d1) * C(r, j))");
        let (reference, _) = load(&format!("domain E {{}}\nspace T {{ type = (N, N, N, N) -> C }}\nspace Orb {{ type = (N, E) -> C }}\n{src}")).unwrap();
        same_monomial(&body, &innermost_body(&reference))
    });
    assert!(matched, "{g}");
    let report = check_gradient::<f64>(&f, &g, &ctx, &hf_config()).unwrap();
    assert!(report.passed(), "{report}");
}

/// The gradient body `C -> (d, d1) -> ..` with `J` moved into the context.
fn hf_gradient_map() -> (Expr, Context, Binder) {
    let (_, g, mut ctx, _) = hf_gradient();
    let ExprKind::Lambda(outer, body) = g.kind() else { panic!("{g}") };
    let j = outer[0].clone();
    ctx.push_var(&j.name, j.ty.clone());
    (body.clone(), ctx, j)
}

#[test]
fn hf_hessian_vector_product() {
    let (map, ctx, j) = hf_gradient_map();
    let hvp = redux(&pp(&Expr::pullback_of(map.clone()), &ctx).unwrap().expr, &RuleSet::symmetric(), &ctx).unwrap();
    let body = innermost_body(&hvp);
    let ExprKind::Mul(fs) = body.kind() else { panic!("{hvp}") };
    assert_eq!(fs.len(), 2, "{hvp}");
    assert_eq!(fs[0].as_const().map(|c| c.to_f64()), Some(4.0), "{hvp}");
    let ExprKind::Add(ts) = fs[1].kind() else { panic!("{hvp}") };
    assert_eq!(ts.len(), 3, "{hvp}");

    let cfg = CheckConfig { tol: 1e-5, ..hf_config() };
    let report = check_pullback::<f64>(&map, &hvp, &[j], &ctx, &cfg).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn hf_hessian_is_symmetric() {
    let (map, ctx, _) = hf_gradient_map();
    let hvp = redux(&pp(&Expr::pullback_of(map.clone()), &ctx).unwrap().expr, &RuleSet::symmetric(), &ctx).unwrap();
    for seed in 0..5 {
        let mut env = NumericEnv64::new(seed);
        env.extents.insert("N".into(), 3);
        env.extents.insert("E".into(), 2);
        let mut at = PullbackAt::in_env(&hvp, &ctx, env);
        let (u, v) = (at.random_cotangent(), at.random_cotangent());
        let (hu, hv) = (at.at(&u), at.at(&v));
        // real inner product Re Σ conj(a) b on the realified vectors
        let dot = |a, b| -> f64 {
            let (x, y) = (realify(a).unwrap(), realify(b).unwrap());
            x.iter().zip(&y).map(|(p, q)| p * q).sum()
        };
        let (l, r) = (dot(&u, &hv), dot(&hu, &v));
        assert!((l - r).abs() <= 1e-6 * l.abs().max(r.abs()).max(1.0), "{l} vs {r}");
    }
}

// Wannier localization

const WANNIER_REFERENCE: &str = "(S::Mmn, w::SV) -> (U::Gauge) ->
  let rho = (n::N, b::X) -> sum((k::BZ, p, q), U(p, n, k)' * S(p, q, k, k + b) * U(q, n, k + b)) in
  (d::N, d1::N, k::BZ) -> 4.0 * sum((b::X, p::N), w(b) * rho(d1, b)' * U(p, d1, k + b) * S(d, p, k, k + b))";

fn wannier_decls() -> String {
    let src = fixture_source("wannier.pct");
    src[..src.find("(S::Mmn").unwrap()].to_string()
}

#[test]
fn wannier_gradient_merges_to_factor_four() {
    for inline in [true, false] {
        let (f, ctx) = fixture("wannier.pct");
        let f = if inline { eval_all(&f).unwrap() } else { f };
        let g = gradient(&f, &ctx, true);
        check_contractions(&f, &g).unwrap();
        let body = innermost_body(&g);
        assert!(!matches!(body.kind(), ExprKind::Add(_)), "{g}");
        assert!(g.to_string().contains("4.0 * "), "{g}");
        assert!(g.to_string().contains(" + k") || g.to_string().contains(" - b"), "{g}");
        let report = check_gradient::<f64>(&f, &g, &ctx, &wannier_config()).unwrap();
        assert!(report.passed(), "{report}");

        let (reference, _) = load(&format!("{}{WANNIER_REFERENCE}", wannier_decls())).unwrap();
        let report = check_equal::<f64>(&g, &reference, &ctx, &wannier_config()).unwrap();
        assert!(report.passed(), "{report}");
    }
}

// rewriting engine behaviour on all fixtures

fn all_fixtures() -> Vec<(&'static str, Expr, Context)> {
    ["quad.pct", "cg.pct", "hf.pct", "wannier.pct"]
        .into_iter()
        .map(|n| {
            let (f, ctx) = fixture(n);
            (n, f, ctx)
        })
        .collect()
}

#[test]
fn redux_reaches_a_fixpoint_within_fifty_passes() {
    for (n, f, ctx) in all_fixtures() {
        let raw = vdiff(&f, &ctx).unwrap().expr;
        let r = redux_report(&raw, &RuleSet::symmetric(), &ctx).unwrap();
        assert!(r.converged && r.passes <= 50, "{n}: {} passes", r.passes);
        assert!(r.warnings.is_empty(), "{n}: {:?}", r.warnings);
    }
}

#[test]
fn rule_order_does_not_change_results() {
    let orders: Vec<Vec<Rule>> = {
        let all = Rule::ALL.to_vec();
        let mut rev = all.clone();
        rev.reverse();
        let mut rot = all.clone();
        rot.rotate_left(4);
        let mut swapped = all.clone();
        swapped.swap(3, 5);
        vec![rev, rot, swapped]
    };
    for (n, f, ctx) in all_fixtures() {
        let raw = vdiff(&f, &ctx).unwrap().expr;
        let base = redux(&raw, &RuleSet::symmetric(), &ctx).unwrap();
        for order in &orders {
            let rules = RuleSet {
                rules: order.clone(),
                ..RuleSet::symmetric()
            };
            let other = redux(&raw, &rules, &ctx).unwrap();
            assert!(alpha_equiv(&base, &other), "{n} under {order:?}:\n{base}\n  vs {other}");
        }
    }
}

#[test]
fn decompose_preserves_fixture_values() {
    // the CG step differentiates a parameter pair, which pp splits first
    for (n, f, ctx) in all_fixtures().into_iter().filter(|(n, ..)| *n != "cg.pct") {
        let f = strip_markers(&eval_all(&f).unwrap());
        let d = decompose(&f).unwrap();
        assert!(d.size() <= 4 * f.size(), "{n}: {} > 4 × {}", d.size(), f.size());
        let cfg = match n {
            "hf.pct" => hf_config(),
            "wannier.pct" => wannier_config(),
            _ => CheckConfig::default(),
        };
        let cfg = CheckConfig { tol: 1e-12, ..cfg };
        let report = check_equal::<f64>(&f, &d, &ctx, &cfg).unwrap();
        assert!(report.passed(), "{n}\n{report}");
    }
}

#[test]
fn outputs_are_deterministic() {
    for (n, f, ctx) in all_fixtures() {
        let a = to_latex(&gradient(&f, &ctx, true));
        let b = to_latex(&gradient(&f, &ctx, true));
        assert_eq!(a, b, "{n}");
    }
}
