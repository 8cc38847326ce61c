#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use combdiff::frontend::load;
use combdiff::ir::{name, substitute_many, Context, Expr, ExprKind, Name, TypeExpr};
use combdiff::numeric::{
    apply_value, evaluate, materialize, random_value, realify, rng_for, CheckConfig, OracleRng,
};
use combdiff::{NumericEnv64, Value64};
use combdiff::pullback::vdiff;
use combdiff::simplify::{redux, RuleSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_source(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn fixture(name: &str) -> (Expr, Context) {
    load(&fixture_source(name)).unwrap()
}

/// `vdiff` followed by `redux` under the chosen settings.
pub fn gradient(f: &Expr, ctx: &Context, symmetric: bool) -> Expr {
    let g = vdiff(f, ctx).unwrap();
    let rules = if symmetric { RuleSet::symmetric() } else { RuleSet::default() };
    redux(&g.expr, &rules, ctx).unwrap()
}

/// Extents for the Hartree-Fock checks: three orbitals, two electrons.
pub fn hf_config() -> CheckConfig {
    CheckConfig::default().with_extent("N", 3).with_extent("E", 2)
}

/// Extents for the Wannier checks: two bands, four k-points, b in {-1, 0, 1}.
pub fn wannier_config() -> CheckConfig {
    CheckConfig {
        tol: 1e-5,
        ..CheckConfig::default()
    }
    .with_extent("N", 2)
    .with_extent("BZ", 4)
    .with_extent("X", 1)
}

/// Parameters shared by generated terms.
pub const HEADER: &str = "(A::CM, H::Her, c::C, a::R) -> (x::CV) -> ";

/// Random well-typed scalar bodies over `x`, `A`, `H`, `c`, `a`.
pub struct TermGen {
    rng: ChaCha8Rng,
    next: usize,
}

impl TermGen {
    pub fn new(seed: u64) -> Self {
        TermGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: 0,
        }
    }

    fn pick<'a>(&mut self, xs: &'a [String]) -> &'a str {
        &xs[self.rng.gen_range(0..xs.len())]
    }

    fn leaf(&mut self, scope: &[String]) -> String {
        let n = if scope.is_empty() { 5 } else { 10 };
        match self.rng.gen_range(0..n) {
            0 => format!("{}", self.rng.gen_range(1..4)),
            1 => "0.5".into(),
            2 => "a".into(),
            3 => "c".into(),
            4 => "c'".into(),
            5 => format!("x({})", self.pick(scope)),
            6 => format!("x({})'", self.pick(scope)),
            7 => {
                let i = self.pick(scope).to_string();
                format!("A({i}, {})", self.pick(scope))
            }
            8 => format!("A({}, {})'", self.pick(scope), self.pick(scope)),
            _ => format!("H({}, {})", self.pick(scope), self.pick(scope)),
        }
    }

    /// A scalar body with the index variables `scope` available.
    pub fn scalar(&mut self, depth: usize, scope: &[String]) -> String {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.leaf(scope);
        }
        match self.rng.gen_range(0..6) {
            0 => format!("({} + {})", self.scalar(depth - 1, scope), self.scalar(depth - 1, scope)),
            1 => format!("({} - {})", self.scalar(depth - 1, scope), self.scalar(depth - 1, scope)),
            2 | 3 => format!("{} * {}", self.factor(depth - 1, scope), self.factor(depth - 1, scope)),
            4 => format!("({})'", self.scalar(depth - 1, scope)),
            _ => {
                let j = format!("j{}", self.next);
                self.next += 1;
                let mut inner = scope.to_vec();
                inner.push(j.clone());
                format!("sum(({j}::N), {})", self.scalar(depth - 1, &inner))
            }
        }
    }

    fn factor(&mut self, depth: usize, scope: &[String]) -> String {
        let s = self.scalar(depth, scope);
        if s.starts_with("sum(") {
            format!("({s})")
        } else {
            s
        }
    }

    /// A closed scalar objective in `x`.
    pub fn objective(&mut self) -> String {
        format!("{HEADER}{}", self.scalar(3, &[]))
    }

    /// A vector-valued map `x -> (d -> ..)`.
    pub fn vector_map(&mut self) -> String {
        format!("{HEADER}(d::N) -> {}", self.scalar(3, &["d".to_string()]))
    }
}

/// Largest entry-wise difference of two values, relative to the larger.
pub fn rel_diff(a: &Value64, b: &Value64) -> f64 {
    let (x, y) = (realify(a).unwrap(), realify(b).unwrap());
    assert_eq!(x.len(), y.len());
    let diff = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let scale = x.iter().chain(&y).map(|p| p.abs()).fold(0.0, f64::max);
    diff / scale.max(1e-12)
}

/// A pullback `outer.. -> (x.., k) -> ..` evaluated at fixed random outer
/// arguments and a fixed point, as a function of the cotangent.
pub struct PullbackAt {
    pub env: NumericEnv64,
    pub rng: OracleRng,
    f: Value64,
    point: Vec<Value64>,
    pub cotangent: TypeExpr,
}

impl PullbackAt {
    /// Free variables of `pb` are drawn from their types in `ctx`.
    pub fn new(pb: &Expr, ctx: &Context, seed: u64) -> Self {
        Self::in_env(pb, ctx, NumericEnv64::new(seed))
    }

    pub fn in_env(pb: &Expr, ctx: &Context, mut env: NumericEnv64) -> Self {
        let mut rng = rng_for(env.seed);
        for n in pb.free_vars() {
            let ty = ctx.var_type(&n).unwrap_or_else(|| panic!("free `{n}` has no type"));
            let v = random_value(&ty, &env, &mut rng).unwrap();
            env.bindings.insert(n, v);
        }
        let mut f = evaluate(pb, &env).unwrap();
        let mut cur = pb.clone();
        loop {
            let ExprKind::Lambda(ps, body) = cur.kind() else { panic!("`{pb}` is not a pullback lambda") };
            match body.kind() {
                ExprKind::Lambda(..) if !ps.iter().all(|p| p.ty.is_index()) && !is_index_lambda(body) => {
                    let args = ps.iter().map(|p| random_value(&p.ty, &env, &mut rng).unwrap()).collect();
                    f = apply_value(&f, args, &env).unwrap();
                    cur = body.clone();
                }
                _ => {
                    let (k, xs) = ps.split_last().unwrap();
                    let point = xs.iter().map(|p| random_value(&p.ty, &env, &mut rng).unwrap()).collect();
                    return PullbackAt {
                        env,
                        rng,
                        f,
                        point,
                        cotangent: k.ty.clone(),
                    };
                }
            }
        }
    }

    pub fn random_cotangent(&mut self) -> Value64 {
        let v = random_value(&self.cotangent, &self.env, &mut self.rng).unwrap();
        materialize(&v, &self.env).unwrap()
    }

    pub fn at(&self, k: &Value64) -> Value64 {
        let mut args = self.point.clone();
        args.push(k.clone());
        materialize(&apply_value(&self.f, args, &self.env).unwrap(), &self.env).unwrap()
    }
}

fn is_index_lambda(e: &Expr) -> bool {
    matches!(e.kind(), ExprKind::Lambda(ps, _) if ps.iter().all(|p| p.ty.is_index()))
}

/// Strip leading lambdas.
pub fn innermost_body(e: &Expr) -> Expr {
    let mut cur = e.clone();
    while let ExprKind::Lambda(_, body) = cur.kind() {
        cur = body.clone();
    }
    cur
}

/// Coefficient, contracted names and non-constant factors of `c · Σ_bs Π fs`.
fn monomial(e: &Expr) -> (f64, Vec<String>, Vec<Expr>) {
    let mut coef = 1.0;
    let mut outer = Vec::new();
    let mut cur = e.clone();
    if let ExprKind::Mul(fs) = cur.kind() {
        let mut rest = Vec::new();
        for f in fs {
            match f.as_const() {
                Some(c) => coef *= c.to_f64(),
                None => rest.push(f.clone()),
            }
        }
        cur = if rest.len() == 1 { rest.pop().unwrap() } else { Expr::mul(rest) };
    }
    let mut bound = Vec::new();
    while let ExprKind::Sum(b, body) = cur.kind() {
        bound.push(b.name.to_string());
        cur = body.clone();
    }
    let fs = match cur.kind() {
        ExprKind::Mul(fs) => fs.clone(),
        _ => vec![cur.clone()],
    };
    for f in fs {
        match f.as_const() {
            Some(c) => coef *= c.to_f64(),
            None => outer.push(f),
        }
    }
    (coef, bound, outer)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Equal coefficients and equal factor multisets under some bijection of
/// the contracted names.
pub fn same_monomial(a: &Expr, b: &Expr) -> bool {
    let (ca, ba, fa) = monomial(a);
    let (cb, bb, fb) = monomial(b);
    if (ca - cb).abs() > 1e-12 || ba.len() != bb.len() || fa.len() != fb.len() {
        return false;
    }
    let holes = |names: &[String], order: &[usize]| -> BTreeMap<Name, Expr> {
        names
            .iter()
            .zip(order)
            .map(|(n, &i)| (name(n), Expr::var(&format!("_{i}"))))
            .collect()
    };
    let key = |fs: &[Expr], m: &BTreeMap<Name, Expr>| {
        let mut v: Vec<String> = fs.iter().map(|f| substitute_many(f, m).to_string()).collect();
        v.sort();
        v
    };
    let target = key(&fb, &holes(&bb, &(0..bb.len()).collect::<Vec<_>>()));
    permutations(ba.len()).iter().any(|p| key(&fa, &holes(&ba, p)) == target)
}
