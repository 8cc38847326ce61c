//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use combdiff::blaserize::blaserize;
use combdiff::combinator::decompose;
use combdiff::frontend::load;
use combdiff::ir::{alpha_equiv, eval_all, Context, Expr, ExprKind};
use combdiff::numeric::{
    add, check_equal, check_gradient, check_pullback, materialize, mul, random_value, realified, realify, rng_for,
    strip_markers, unrealify, CheckConfig,
};
use combdiff::pullback::{pp, vdiff};
use combdiff::simplify::{check_contractions, redux, redux_report, Rule, RuleSet};
use combdiff::{NumericEnv64, Value64};
use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn load_with(decls_from: &str, src: &str) -> Expr {
    let s = fixture_source(decls_from);
    let decls = &s[..s.find("\n(").map(|i| i + 1).unwrap_or(0)];
    load(&format!("{decls}{src}")).unwrap().0
}

fn quad() -> Outcome {
    let start = Instant::now();
    let (f, ctx) = fixture("quad.pct");
    let g = blaserize(&gradient(&f, &ctx, true));
    let t = start.elapsed();
    let (want, _) = ok(load("(A::Her) -> (x::CV) -> 2.0 * A * x"))?;
    ensure!(alpha_equiv(&g, &want), "got {g}");
    let cfg = CheckConfig { trials: 20, ..CheckConfig::default() }.with_extent("N", 4);
    let r = ok(check_gradient::<f64>(&f, &g, &ctx, &cfg))?;
    ensure!(r.passed(), "{r}");
    ensure!(t < Duration::from_secs(1), "took {t:?}");
    Ok(format!("{g}; FD max rel err {:.1e}; {t:.2?}", r.max_rel_err()))
}

fn product_rule() -> Outcome {
    let (f, ctx) = ok(load("(f::(C) -> C, g::(C) -> C) -> pullback((x::C) -> f(x) * g(x))"))?;
    let pb = ok(redux(&ok(pp(&f, &ctx))?.expr, &RuleSet::default(), &ctx))?;
    let (want, _) = ok(load(
        "(f::(C) -> C, g::(C) -> C) -> (x::C, k::C) -> pullback(g)(x, f(x)' * k) + pullback(f)(x, g(x)' * k)",
    ))?;
    let want = ok(redux(&want, &RuleSet::default(), &ctx))?;
    ensure!(alpha_equiv(&pb, &want), "got {pb}");
    Ok(pb.to_string())
}

fn cg() -> Outcome {
    let (f, ctx) = fixture("cg.pct");
    let g = gradient(&f, &ctx, false);
    let opaque = load_with(
        "cg.pct",
        "(A::Sym, r::RV, p::RV, b::RV, x::RV) ->
  let R = (x::RV) -> sum((i::N), -1.0 * x(i) * b(i)) + sum((i::N, j::N), 0.5 * x(i) * A(i, j) * x(j)) in
  (alpha::R, beta::R) -> (
    sum((i::N), pullback(R)((j::N) -> alpha * (beta * p(j) + r(j)) + x(j), 1, i) * (beta * p(i) + r(i))),
    sum((i::N), pullback(R)((j::N) -> alpha * (beta * p(j) + r(j)) + x(j), 1, i) * p(i) * alpha))",
    );
    let opaque = ok(redux(&opaque, &RuleSet::default(), &ctx))?;
    ensure!(alpha_equiv(&g, &opaque), "residual form {g}");

    let fi = ok(eval_all(&f))?;
    let gi = blaserize(&gradient(&fi, &ctx, true));
    let inlined = load_with(
        "cg.pct",
        "(A::Sym, r::RV, p::RV, b::RV, x::RV) -> (alpha::R, beta::R) -> (
    transpose(beta * p + r) * A * (alpha * (beta * p + r) + x) - 1.0 * transpose(beta * p + r) * b,
    alpha * (transpose(p) * A * (alpha * (beta * p + r) + x) - 1.0 * transpose(b) * p))",
    );
    let cfg = CheckConfig { trials: 10, tol: 1e-9, ..CheckConfig::default() }.with_extent("N", 4);
    let r = ok(check_equal::<f64>(&gi, &inlined, &ctx, &cfg))?;
    ensure!(r.passed(), "inlined form {gi}\n{r}");
    Ok(format!("{}; inlined form agrees to {:.1e}", blaserize(&g), r.max_rel_err()))
}

fn hf_gradient() -> (Expr, Expr, Context, Duration) {
    let start = Instant::now();
    let (f, ctx) = fixture("hf.pct");
    let g = gradient(&f, &ctx, true);
    (f, g, ctx, start.elapsed())
}

fn hf() -> Outcome {
    let (f, g, ctx, t) = hf_gradient();
    let body = innermost_body(&g);
    let in_orbit = ["J(r, s, p, d)'", "J(s, r, d, p)", "J(p, d, r, s)'", "J(d, p, s, r)"].iter().any(|j| {
        let reference = load_with(
            "hf.pct",
            &format!(
                "(J::T) -> (C::Orb) -> (d::N, d1::E) -> sum((j::E, p::N, r::N, s::N), 4.0 * {j} * C(s, j)' * C(p, d1) * C(r, j))"
            ),
        );
        same_monomial(&body, &innermost_body(&reference))
    });
    ensure!(in_orbit, "not a single 4.0 term in the reference orbit: {g}");
    let cfg = CheckConfig { trials: 20, ..hf_config() };
    let r = ok(check_gradient::<f64>(&f, &g, &ctx, &cfg))?;
    ensure!(r.passed(), "{r}");
    ensure!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("{g}; FD {:.1e}; {t:.2?}", r.max_rel_err()))
}

fn hvp() -> Outcome {
    let (_, g, mut ctx, _) = hf_gradient();
    let ExprKind::Lambda(outer, map) = g.kind() else { return Err(format!("{g}")) };
    let j = outer[0].clone();
    ctx.push_var(&j.name, j.ty.clone());
    let h = ok(redux(&ok(pp(&Expr::pullback_of(map.clone()), &ctx))?.expr, &RuleSet::symmetric(), &ctx))?;
    let body = innermost_body(&h);
    let ExprKind::Mul(fs) = body.kind() else { return Err(format!("not a scaled sum: {h}")) };
    ensure!(fs.len() == 2 && fs[0].as_const().map(|c| c.to_f64()) == Some(4.0), "coefficient: {h}");
    ensure!(matches!(fs[1].kind(), ExprKind::Add(ts) if ts.len() == 3), "summands: {h}");
    let cfg = CheckConfig { tol: 1e-5, ..hf_config() };
    let r = ok(check_pullback::<f64>(map, &h, &[j], &ctx, &cfg))?;
    ensure!(r.passed(), "{r}");

    let mut worst = 0.0f64;
    for seed in 0..5 {
        let mut env = NumericEnv64::new(seed);
        env.extents.insert("N".into(), 3);
        env.extents.insert("E".into(), 2);
        let mut at = PullbackAt::in_env(&h, &ctx, env);
        let (u, v) = (at.random_cotangent(), at.random_cotangent());
        let dot = |a: &Value64, b: &Value64| -> f64 {
            let (x, y) = (realify(a).unwrap(), realify(b).unwrap());
            x.iter().zip(&y).map(|(p, q)| p * q).sum()
        };
        let (l, r) = (dot(&u, &at.at(&v)), dot(&at.at(&u), &v));
        worst = worst.max((l - r).abs() / l.abs().max(r.abs()).max(1.0));
    }
    ensure!(worst <= 1e-6, "Hessian asymmetry {worst:.1e}");
    Ok(format!("4.0 · (3 terms); FD {:.1e}; symmetry {worst:.1e}", r.max_rel_err()))
}

fn wannier() -> Outcome {
    let (f, ctx) = fixture("wannier.pct");
    let g = gradient(&f, &ctx, true);
    ensure!(!matches!(innermost_body(&g).kind(), ExprKind::Add(_)), "not merged: {g}");
    ok(check_contractions(&f, &g))?;
    ensure!(g.to_string().contains("4.0 * "), "coefficient: {g}");
    let r = ok(check_gradient::<f64>(&f, &g, &ctx, &wannier_config()))?;
    ensure!(r.passed(), "{r}");
    let reference = load_with(
        "wannier.pct",
        "(S::Mmn, w::SV) -> (U::Gauge) ->
  let rho = (n::N, b::X) -> sum((k::BZ, p, q), U(p, n, k)' * S(p, q, k, k + b) * U(q, n, k + b)) in
  (d::N, d1::N, k::BZ) -> 4.0 * sum((b::X, p::N), w(b) * rho(d1, b)' * U(p, d1, k + b) * S(d, p, k, k + b))",
    );
    let e = ok(check_equal::<f64>(&g, &reference, &ctx, &wannier_config()))?;
    ensure!(e.passed(), "{e}");
    Ok(format!("{g}; FD {:.1e}; reference {:.1e}", r.max_rel_err(), e.max_rel_err()))
}

fn generated(seed: u64) -> (String, Expr, Context) {
    let mut g = TermGen::new(seed);
    let src = if seed.is_multiple_of(2) { g.objective() } else { g.vector_map() };
    let (e, ctx) = load(&src).unwrap();
    (src, e, ctx)
}

fn has_formal_sum(e: &Expr) -> bool {
    match e.kind() {
        ExprKind::Sum(b, _) if !b.ty.is_index() => true,
        _ => e.children().into_iter().any(has_formal_sum),
    }
}

fn properties() -> Outcome {
    const CASES: u64 = 200;
    let exact = CheckConfig { trials: 2, tol: 1e-12, abs_floor: 1e-12, ..CheckConfig::default() };
    let same = |a: &Expr, b: &Expr, ctx: &Context, what: &str| -> Result<(), String> {
        let r = ok(check_equal::<f64>(a, b, ctx, &exact))?;
        ensure!(r.passed(), "{what}: {a} vs {b}\n{r}");
        Ok(())
    };
    let reparse = |e: &Expr| -> Result<(), String> {
        let (back, _) = ok(load(&e.to_string()))?;
        ensure!(alpha_equiv(&back, e), "{e} re-parsed as {back}");
        Ok(())
    };
    for seed in 0..CASES {
        let (src, e, ctx) = generated(seed);
        // (a) semantics preservation
        same(&e, &ok(decompose(&e))?, &ctx, "decompose")?;
        let s = ok(redux(&e, &RuleSet::symmetric(), &ctx))?;
        same(&e, &s, &ctx, "redux")?;
        same(&s, &blaserize(&s), &ctx, "blaserize")?;
        // (e) round trip of emitted text
        reparse(&e)?;
        reparse(&s)?;
        reparse(&blaserize(&s))?;
        // (b) linearity in the cotangent
        let raw = ok(pp(&e, &ctx))?.expr;
        let pb = ok(redux(&raw, &RuleSet::symmetric(), &ctx))?;
        reparse(&ok(redux(&raw, &RuleSet::default(), &ctx))?)?;
        ensure!(!has_formal_sum(&pb), "{src}: {pb}");
        let mut at = PullbackAt::new(&pb, &ctx, seed);
        let (k1, k2) = (at.random_cotangent(), at.random_cotangent());
        let lhs = at.at(&ok(add(k1.clone(), k2.clone()))?);
        let rhs = ok(add(at.at(&k1), at.at(&k2)))?;
        ensure!(rel_diff(&lhs, &rhs) < 1e-12, "additivity: {src}");
        let c = Value64::real(-1.7);
        let lhs = at.at(&ok(mul(c.clone(), k1.clone()))?);
        let rhs = ok(mul(c, at.at(&k1)))?;
        ensure!(rel_diff(&lhs, &rhs) < 1e-12, "homogeneity: {src}");
    }
    // (c) realification
    let (e, _) = ok(load("(a::R, c::C, x::CV, A::CM, H::Her) -> a"))?;
    let ExprKind::Lambda(ps, _) = e.kind() else { unreachable!() };
    let env = NumericEnv64::new(0);
    let mut rng = rng_for(0);
    for p in ps {
        let v = ok(materialize(&ok(random_value(&p.ty, &env, &mut rng))?, &env))?;
        let r = ok(realify(&v))?;
        ensure!(ok(realify(&ok(unrealify(&v, &r))?))? == r, "round trip of {:?}", p.ty);
        let mut double = |z: &Value64| add(z.clone(), z.clone());
        let lhs = ok(realify(&ok(double(&v))?))?;
        ensure!(ok(realified(&mut double, &v, &r))? == lhs, "realified map");
    }
    // (d) conjugate pullback
    let (f, ctx) = ok(load("(c::C) -> pullback((z::C) -> 0.5 * (c * z' + c' * z))"))?;
    let g = ok(redux(&ok(vdiff(&f, &ctx))?.expr, &RuleSet::default(), &ctx))?;
    let r = ok(check_gradient::<f64>(&f, &g, &ctx, &CheckConfig { trials: 20, ..CheckConfig::default() }))?;
    ensure!(r.passed(), "Re(c z*): {g}\n{r}");
    Ok(format!("{CASES} generated terms; Re(c z*) gradient {g}"))
}

fn negative_control() -> Outcome {
    let (f, ctx) = fixture("hf.pct");
    let wrong = load_with(
        "hf.pct",
        "(J::T) -> (C::Orb) -> (d::N, d1::E) -> sum((j::E, p::N, r::N, s::N), 4.0 * J(r, s, p, d)' * C(s, j)' * C(p, d1))",
    );
    let r = ok(check_gradient::<f64>(&f, &wrong, &ctx, &hf_config()))?;
    ensure!(!r.passed(), "a gradient with a dropped factor was accepted");
    Ok(format!("dropped factor rejected, rel err {:.1e}", r.max_rel_err()))
}

fn fixpoint_and_confluence() -> Outcome {
    let mut most = 0;
    for n in ["quad.pct", "cg.pct", "hf.pct", "wannier.pct"] {
        let (f, ctx) = fixture(n);
        let raw = ok(vdiff(&f, &ctx))?.expr;
        let base = ok(redux_report(&raw, &RuleSet::symmetric(), &ctx))?;
        ensure!(base.converged && base.passes <= 50, "{n}: {} passes", base.passes);
        most = most.max(base.passes);
        let mut rev = Rule::ALL.to_vec();
        rev.reverse();
        let mut rot = Rule::ALL.to_vec();
        rot.rotate_left(4);
        for order in [rev, rot] {
            let other = ok(redux(&raw, &RuleSet { rules: order, ..RuleSet::symmetric() }, &ctx))?;
            ensure!(alpha_equiv(&base.expr, &other), "{n} depends on rule order");
        }
    }
    Ok(format!("fixpoint after {most} pass(es); rule order immaterial"))
}

fn decompose_size() -> Outcome {
    let mut worst = 0.0f64;
    for n in ["quad.pct", "hf.pct", "wannier.pct"] {
        let (f, _) = fixture(n);
        let f = strip_markers(&ok(eval_all(&f))?);
        let d = ok(decompose(&f))?;
        let ratio = d.size() as f64 / f.size() as f64;
        ensure!(ratio <= 4.0, "{n}: {ratio:.2}×");
        worst = worst.max(ratio);
    }
    Ok(format!("largest growth {worst:.2}×"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 quadratic form", quad),
        ("2 product rule", product_rule),
        ("3 conjugate gradient step", cg),
        ("4 Hartree-Fock gradient", hf),
        ("5 Hartree-Fock Hessian-vector product", hvp),
        ("6 Wannier localization", wannier),
        ("7 property suites", properties),
        ("8 negative control", negative_control),
        ("  redux fixpoint and confluence", fixpoint_and_confluence),
        ("  decompose size bound", decompose_size),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
