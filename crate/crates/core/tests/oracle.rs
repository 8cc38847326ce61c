//! The numeric oracle itself: realification, complex pullbacks and its
//! ability to reject wrong gradients.

mod common;

use combdiff::frontend::load;
use combdiff::ir::{alpha_equiv, ExprKind};
use combdiff::numeric::{
    apply_value, check_gradient, evaluate, materialize, random_value, realified, realify, rng_for, unrealify,
    wirtinger_fd_grad, CheckConfig, DEFAULT_STEP,
};
use combdiff::pullback::{pp, vdiff};
use combdiff::simplify::{redux, RuleSet};
use combdiff::{NumericEnv64, TypeExpr, Value64};
use common::*;

fn types() -> Vec<TypeExpr> {
    let (e, _) = load("(a::R, c::C, x::CV, A::CM, H::Her) -> a").unwrap();
    let ExprKind::Lambda(ps, _) = e.kind() else { panic!() };
    ps.iter().map(|p| p.ty.clone()).collect()
}

#[test]
fn realification_round_trips_exactly() {
    let env = NumericEnv64::new(3);
    let mut rng = rng_for(3);
    for ty in types() {
        let v = materialize(&random_value(&ty, &env, &mut rng).unwrap(), &env).unwrap();
        let r = realify(&v).unwrap();
        let back = unrealify(&v, &r).unwrap();
        assert_eq!(realify(&back).unwrap(), r, "{ty:?}");
        assert_eq!(format!("{back:?}"), format!("{v:?}"));
    }
    let pair = Value64::Tuple(vec![Value64::real(1.5), Value64::real(-2.0)]);
    assert_eq!(realify(&pair).unwrap(), vec![1.5, 0.0, -2.0, 0.0]);
}

#[test]
fn realified_map_commutes_with_realification() {
    for seed in 0..40 {
        let src = TermGen::new(seed).vector_map();
        let (e, _) = load(&src).unwrap();
        let env = NumericEnv64::new(seed);
        let x = types()[2].clone();
        let z = materialize(&random_value(&x, &env, &mut rng_for(seed)).unwrap(), &env).unwrap();
        let mut f = |v: &Value64| materialize(&apply_value(&closure_of(&e, &env, seed), vec![v.clone()], &env)?, &env);
        let lhs = realify(&f(&z).unwrap()).unwrap();
        let rhs = realified(&mut f, &z, &realify(&z).unwrap()).unwrap();
        assert_eq!(lhs.len(), rhs.len());
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{src}");
        }
    }
}

/// The map `x -> ..` of a generated term with its outer parameters drawn.
fn closure_of(e: &combdiff::Expr, env: &NumericEnv64, seed: u64) -> Value64 {
    let ExprKind::Lambda(ps, _) = e.kind() else { panic!() };
    let mut rng = rng_for(seed ^ 0x5eed);
    let args = ps.iter().map(|p| random_value(&p.ty, env, &mut rng).unwrap()).collect();
    apply_value(&evaluate(e, env).unwrap(), args, env).unwrap()
}

#[test]
fn squared_modulus_has_gradient_two_z() {
    let z = Value64::Scalar(num_complex::Complex::new(0.3, -1.2));
    let mut f = |v: &Value64| -> combdiff::Result<Value64> {
        let w = v.as_scalar().unwrap();
        Ok(Value64::real(w.norm_sqr()))
    };
    let g = wirtinger_fd_grad(&mut f, &z, DEFAULT_STEP, None).unwrap();
    let g = g.as_scalar().unwrap();
    assert!((g.re - 0.6).abs() < 1e-8 && (g.im + 2.4).abs() < 1e-8, "{g}");
}

#[test]
fn conjugation_pulls_back_to_the_conjugate_cotangent() {
    let (f, ctx) = load("pullback((z::C) -> z')").unwrap();
    let pb = redux(&pp(&f, &ctx).unwrap().expr, &RuleSet::default(), &ctx).unwrap();
    let (want, _) = load("(z::C, k::C) -> k'").unwrap();
    assert!(alpha_equiv(&pb, &want), "{pb}");
}

#[test]
fn gradient_of_real_part_of_c_times_conj_z() {
    // Re(c z*) = (c z* + c* z) / 2, whose gradient is c
    let (f, ctx) = load("(c::C) -> pullback((z::C) -> 0.5 * (c * z' + c' * z))").unwrap();
    let g = redux(&vdiff(&f, &ctx).unwrap().expr, &RuleSet::default(), &ctx).unwrap();
    let (want, _) = load("(c::C) -> (z::C) -> c").unwrap();
    assert!(alpha_equiv(&g, &want), "{g}");
    let cfg = CheckConfig {
        trials: 20,
        ..CheckConfig::default()
    };
    let report = check_gradient::<f64>(&f, &g, &ctx, &cfg).unwrap();
    assert!(report.passed(), "{report}");
}

// negative controls: the oracle must reject plausible wrong answers

fn rejects(fixture_name: &str, wrong: &str, cfg: &CheckConfig) {
    let (f, ctx) = fixture(fixture_name);
    let decls = fixture_source(fixture_name)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .take_while(|l| !l.starts_with('('))
        .collect::<Vec<_>>()
        .join("\n");
    let (g, _) = load(&format!("{decls}\n{wrong}")).unwrap();
    let report = check_gradient::<f64>(&f, &g, &ctx, cfg).unwrap();
    assert!(!report.passed(), "accepted {wrong}\n{report}");
}

#[test]
fn quadratic_gradient_missing_its_factor_two_is_rejected() {
    rejects("quad.pct", "(A::Her) -> (x::CV) -> A * x", &CheckConfig::default());
}

#[test]
fn hf_gradient_missing_an_orbital_is_rejected() {
    rejects(
        "hf.pct",
        "(J::T) -> (C::Orb) -> (d::N, d1::E) -> sum((j::E, p::N, r::N, s::N), 4.0 * J(r, s, p, d)' * C(s, j)' * C(p, d1))",
        &hf_config(),
    );
}

#[test]
fn hf_gradient_with_half_the_coefficient_is_rejected() {
    rejects(
        "hf.pct",
        "(J::T) -> (C::Orb) -> (d::N, d1::E) -> sum((j::E, p::N, r::N, s::N), 2.0 * J(r, s, p, d)' * C(s, j)' * C(p, d1) * C(r, j))",
        &hf_config(),
    );
}
