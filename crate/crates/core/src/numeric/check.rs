use std::collections::BTreeMap;
use std::fmt;

use super::env::NumericEnv;
use super::eval::{apply_value, evaluate, materialize};
use super::fd::{fd_pullback, realify, wirtinger_fd_grad, DEFAULT_STEP};
use super::random::{random_value, rng_for, OracleRng};
use super::value::Value;
use crate::error::{Error, Result};
use crate::ir::{eval_all, Binder, Context, Entry, Expr, ExprKind, TypeExpr};
use crate::num::Scalar;

/// Parameters of a seeded numeric check.
#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub trials: usize,
    pub tol: f64,
    pub step: f64,
    /// Denominator floor for relative errors.
    pub abs_floor: f64,
    pub seed: u64,
    pub extents: BTreeMap<String, usize>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            trials: 3,
            tol: 1e-6,
            step: DEFAULT_STEP,
            abs_floor: 1e-8,
            seed: 0,
            extents: BTreeMap::new(),
        }
    }
}

impl CheckConfig {
    pub fn env<T: Scalar>(&self, trial: usize) -> NumericEnv<T> {
        let mut env = NumericEnv::new(self.seed + trial as u64);
        for (k, v) in &self.extents {
            env.extents.insert(k.clone(), *v);
        }
        env
    }

    pub fn with_extent(mut self, domain: &str, k: usize) -> Self {
        self.extents.insert(domain.to_string(), k);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub max_abs_err: f64,
    pub rel_err: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub tol: f64,
    pub trials: Vec<TrialResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        !self.trials.is_empty() && self.trials.iter().all(|t| t.passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.trials.iter().map(|t| t.rel_err).fold(0.0, f64::max)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>5}  {:>10}  {:>12}  {:>12}  result", "trial", "seed", "max_abs_err", "rel_err")?;
        for t in &self.trials {
            writeln!(
                f,
                "{:>5}  {:>10}  {:>12.3e}  {:>12.3e}  {}",
                t.trial,
                t.seed,
                t.max_abs_err,
                t.rel_err,
                if t.passed { "pass" } else { "FAIL" }
            )?;
        }
        write!(
            f,
            "max rel_err {:.3e} vs tol {:.1e}: {}",
            self.max_rel_err(),
            self.tol,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// A differentiable objective split into its parameter groups.
#[derive(Clone, Debug)]
pub struct ObjectiveShape {
    /// Leading parameter groups held fixed (e.g. `J` in `J ↦ C ↦ E(C)`).
    pub outer: Vec<Vec<Binder>>,
    /// The parameters differentiated with respect to.
    pub target: Vec<Binder>,
}

/// Locate the differentiation target: the lambda under a `pullback(..)`
/// marker, otherwise the innermost lambda whose parameters are not indices.
pub fn objective_shape(f: &Expr) -> Result<ObjectiveShape> {
    let mut groups: Vec<Vec<Binder>> = Vec::new();
    let mut marked: Option<usize> = None;
    let mut cur = f.clone();
    loop {
        match cur.kind() {
            ExprKind::Lambda(ps, body) => {
                groups.push(ps.clone());
                cur = body.clone();
            }
            ExprKind::PullbackOf(inner) if marked.is_none() => {
                marked = Some(groups.len());
                cur = inner.clone();
            }
            ExprKind::Let(_, body) => cur = body.clone(),
            _ => break,
        }
    }
    let target = match marked {
        Some(i) if i < groups.len() => i,
        Some(_) => return Err(Error::NotDifferentiable("pullback marker is not on a lambda".into())),
        None => groups
            .iter()
            .rposition(|g| !g.iter().all(|b| b.ty.is_index()))
            .ok_or_else(|| Error::NotDifferentiable("no non-index parameters to differentiate".into()))?,
    };
    Ok(ObjectiveShape {
        outer: groups[..target].to_vec(),
        target: groups[target].clone(),
    })
}

/// Remove `pullback(..)` markers so the objective itself can be evaluated.
pub fn strip_markers(e: &Expr) -> Expr {
    e.map_bottom_up(&mut |x| match x.kind() {
        ExprKind::PullbackOf(inner) if matches!(inner.kind(), ExprKind::Lambda(..)) => inner.clone(),
        _ => x,
    })
}

fn active_mask<T: Scalar>(ty: &TypeExpr, v: &Value<T>, out: &mut Vec<bool>) {
    let real = ty.is_real();
    match (ty, v) {
        (TypeExpr::Product(ts), Value::Tuple(vs)) => {
            for (t, x) in ts.iter().zip(vs) {
                active_mask(t, x, out);
            }
        }
        (_, Value::Tensor(t)) => {
            for _ in 0..t.data.len() {
                out.push(true);
                out.push(!real);
            }
        }
        _ => {
            out.push(true);
            out.push(!real);
        }
    }
}

/// Bind random values for the free variables of `e` declared in `ctx`.
fn bind_free<T: Scalar>(e: &Expr, ctx: &Context, env: &mut NumericEnv<T>, rng: &mut OracleRng) -> Result<()> {
    for n in e.free_vars() {
        if env.bindings.contains_key(&n) {
            continue;
        }
        match ctx.get(&n) {
            Some(Entry::Var(t)) => {
                let v = random_value(t, env, rng)?;
                env.bindings.insert(n.clone(), v);
            }
            _ => return Err(Error::Eval(format!("free variable `{n}` has no declared type"))),
        }
    }
    Ok(())
}

fn draw_group<T: Scalar>(g: &[Binder], env: &NumericEnv<T>, rng: &mut OracleRng) -> Result<Vec<Value<T>>> {
    g.iter().map(|b| random_value(&b.ty, env, rng)).collect()
}

fn pack<T: Scalar>(vs: &[Value<T>]) -> Value<T> {
    if vs.len() == 1 {
        vs[0].clone()
    } else {
        Value::Tuple(vs.to_vec())
    }
}

fn unpack<T: Scalar>(v: &Value<T>, n: usize) -> Vec<Value<T>> {
    match v {
        Value::Tuple(vs) if n > 1 => vs.clone(),
        _ => vec![v.clone()],
    }
}

fn compare<T: Scalar>(got: &Value<T>, want: &Value<T>, cfg: &CheckConfig, trial: usize) -> Result<TrialResult> {
    let a = realify(got)?;
    let b = realify(want)?;
    if a.len() != b.len() {
        return Err(Error::Eval(format!(
            "trial {trial}: result has {} real entries, reference has {}",
            a.len(),
            b.len()
        )));
    }
    let to = |x: T| x.to_f64().unwrap_or(f64::NAN);
    let diff = a.iter().zip(&b).map(|(x, y)| to((*x - *y).abs())).fold(0.0, f64::max);
    let scale = b.iter().map(|y| to(y.abs())).fold(0.0, f64::max);
    let rel = diff / scale.max(cfg.abs_floor);
    Ok(TrialResult {
        trial,
        seed: cfg.seed + trial as u64,
        max_abs_err: diff,
        rel_err: rel,
        passed: rel <= cfg.tol,
    })
}

/// Compare a symbolic gradient `g` of the objective `f` against Wirtinger
/// finite differences on seeded random inputs.
pub fn check_gradient<T: Scalar>(f: &Expr, g: &Expr, ctx: &Context, cfg: &CheckConfig) -> Result<CheckReport> {
    let f = strip_markers(&eval_all(f)?);
    let shape = objective_shape(&f)?;
    let mut trials = Vec::new();
    for t in 0..cfg.trials {
        let r = gradient_trial::<T>(&f, g, &shape, ctx, cfg, t).map_err(|e| match e {
            Error::Eval(m) => Error::Eval(format!("trial {t}: {m}")),
            other => other,
        })?;
        trials.push(r);
    }
    Ok(CheckReport { tol: cfg.tol, trials })
}

fn gradient_trial<T: Scalar>(
    f: &Expr,
    g: &Expr,
    shape: &ObjectiveShape,
    ctx: &Context,
    cfg: &CheckConfig,
    trial: usize,
) -> Result<TrialResult> {
    let mut env = cfg.env::<T>(trial);
    let mut rng = rng_for(env.seed);
    bind_free(f, ctx, &mut env, &mut rng)?;
    bind_free(g, ctx, &mut env, &mut rng)?;
    let mut outer = Vec::new();
    for grp in &shape.outer {
        outer.extend(draw_group(grp, &env, &mut rng)?);
    }
    let point = draw_group(&shape.target, &env, &mut rng)?;
    let n = point.len();
    let x = pack(&point);

    let fv = evaluate(f, &env)?;
    let obj = apply_value(&fv, outer.clone(), &env)?;
    let mut objective = |x: &Value<T>| {
        let y = apply_value(&obj, unpack(x, n), &env)?;
        materialize(&y, &env)
    };
    let mut mask = Vec::new();
    let ty = TypeExpr::Product(shape.target.iter().map(|b| b.ty.clone()).collect());
    if n == 1 {
        active_mask(&shape.target[0].ty, &x, &mut mask);
    } else {
        active_mask(&ty, &x, &mut mask);
    }
    let step = T::from_f64(cfg.step).unwrap();
    let fd = wirtinger_fd_grad(&mut objective, &x, step, Some(&mask))?;

    let gv = evaluate(g, &env)?;
    let mut args = outer;
    args.extend(point);
    let got = materialize(&apply_value(&gv, args, &env)?, &env)?;
    compare(&got, &fd, cfg, trial)
}

/// Compare a symbolic pullback `pb = (x.., k) ↦ ..` of the map `f = x.. ↦ y`
/// against finite-difference vector-Jacobian products with random cotangents.
/// Variables free in both are drawn from `free` or `ctx`.
pub fn check_pullback<T: Scalar>(
    f: &Expr,
    pb: &Expr,
    free: &[Binder],
    ctx: &Context,
    cfg: &CheckConfig,
) -> Result<CheckReport> {
    let ExprKind::Lambda(params, _) = f.kind() else {
        return Err(Error::NotDifferentiable(format!("`{f}` is not a lambda")));
    };
    let mut ctx = ctx.clone();
    for b in free {
        ctx.push_var(&b.name, b.ty.clone());
    }
    let mut trials = Vec::new();
    for t in 0..cfg.trials {
        let mut env = cfg.env::<T>(t);
        let mut rng = rng_for(env.seed);
        bind_free(f, &ctx, &mut env, &mut rng)?;
        bind_free(pb, &ctx, &mut env, &mut rng)?;
        let point = draw_group(params, &env, &mut rng)?;
        let n = point.len();
        let x = pack(&point);
        let fv = evaluate(f, &env)?;
        let mut map = |x: &Value<T>| materialize(&apply_value(&fv, unpack(x, n), &env)?, &env);
        let y = map(&x)?;
        let k = random_like(&y, &mut rng);
        let mut mask = Vec::new();
        if n == 1 {
            active_mask(&params[0].ty, &x, &mut mask);
        } else {
            let ty = TypeExpr::Product(params.iter().map(|b| b.ty.clone()).collect());
            active_mask(&ty, &x, &mut mask);
        }
        let step = T::from_f64(cfg.step).unwrap();
        let fd = fd_pullback(&mut map, &x, &k, step, Some(&mask))?;
        let pv = evaluate(pb, &env)?;
        let mut args = point.clone();
        args.push(k);
        let got = materialize(&apply_value(&pv, args, &env)?, &env)?;
        trials.push(compare(&got, &fd, cfg, t)?);
    }
    Ok(CheckReport { tol: cfg.tol, trials })
}

/// A random complex value with the same shape as `v`.
pub fn random_like<T: Scalar>(v: &Value<T>, rng: &mut OracleRng) -> Value<T> {
    use super::random::random_scalar;
    use crate::ir::ScalarKind;
    match v {
        Value::Tensor(t) => {
            let mut u = (**t).clone();
            for z in u.data.iter_mut() {
                *z = random_scalar(ScalarKind::Complex, rng);
            }
            Value::Tensor(std::sync::Arc::new(u))
        }
        Value::Tuple(vs) => Value::Tuple(vs.iter().map(|x| random_like(x, rng)).collect()),
        _ => Value::Scalar(random_scalar(ScalarKind::Complex, rng)),
    }
}

/// Evaluate two closed terms on the same seeded random inputs and compare.
pub fn check_equal<T: Scalar>(a: &Expr, b: &Expr, ctx: &Context, cfg: &CheckConfig) -> Result<CheckReport> {
    let a = eval_all(a)?;
    let b = eval_all(b)?;
    let mut trials = Vec::new();
    for t in 0..cfg.trials {
        let mut env = cfg.env::<T>(t);
        let mut rng = rng_for(env.seed);
        bind_free(&a, ctx, &mut env, &mut rng)?;
        bind_free(&b, ctx, &mut env, &mut rng)?;
        let (va, vb) = (evaluate(&a, &env)?, evaluate(&b, &env)?);
        // combinator forms have no visible lambdas; feed both the groups of
        // whichever side shows more
        let (ga, gb) = (lambda_chain(&a), lambda_chain(&b));
        let groups = if ga.len() >= gb.len() { ga } else { gb };
        let (mut va, mut vb) = (va, vb);
        for g in &groups {
            let args = draw_group(g, &env, &mut rng)?;
            va = apply_value(&va, args.clone(), &env)?;
            vb = apply_value(&vb, args, &env)?;
        }
        let va = materialize(&va, &env)?;
        let vb = materialize(&vb, &env)?;
        trials.push(compare(&va, &vb, cfg, t)?);
    }
    Ok(CheckReport { tol: cfg.tol, trials })
}

/// Leading non-index parameter groups of a term.
fn lambda_chain(e: &Expr) -> Vec<Vec<Binder>> {
    let mut out = Vec::new();
    let mut cur = e;
    while let ExprKind::Lambda(ps, body) = cur.kind() {
        if ps.iter().all(|b| b.ty.is_index()) {
            break;
        }
        out.push(ps.clone());
        cur = body;
    }
    out
}
