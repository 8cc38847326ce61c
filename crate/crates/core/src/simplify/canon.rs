//! Canonical keys of monomials, up to renaming of contracted indices and,
//! optionally, declared tensor symmetries and index reparametrizations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::rewrite::index_arith;
use crate::combinator::spine;
use crate::ir::infer::type_of;
use crate::ir::{
    canonical, substitute_many, symmetry_group, Binder, Context, Expr, ExprKind, IndexTerm, Name, Space,
    TypeExpr,
};

const MAX_ORDERINGS: usize = 720;
const MAX_STATES: usize = 4096;

/// Orbit-minimal representative of `conj^c(head(args))` under the space's
/// symmetry group. Index tuples compare first, with free indices before
/// bound ones and bound before compound ones; unconjugated forms win ties.
pub(crate) fn symmetric_access(head: &Expr, space: &Space, args: &[Expr], conj: bool, bound: &[Name]) -> Option<Expr> {
    let group = symmetry_group(args.len(), &space.symmetries).ok()?;
    let real = space.elem == crate::ir::ScalarKind::Real;
    let arg_key = |a: &Expr| -> (u8, String) {
        let class = match a.kind() {
            ExprKind::Var(n) if bound.contains(n) => 1,
            ExprKind::Var(_) => 0,
            ExprKind::Const(_) => 3,
            _ => 2,
        };
        (class, a.to_string())
    };
    group
        .iter()
        .map(|g| {
            let new_args: Vec<Expr> = g
                .slots
                .iter()
                .map(|&(src, neg)| if neg { negate(&args[src]) } else { args[src].clone() })
                .collect();
            let c = !real && (conj ^ g.conj);
            let key: (Vec<(u8, String)>, bool) = (new_args.iter().map(arg_key).collect(), c);
            (key, c, new_args)
        })
        .min_by(|a, b| a.0.cmp(&b.0))
        .map(|(_, c, new_args)| {
            let e = Expr::apply(head.clone(), new_args);
            if c {
                Expr::conj(e)
            } else {
                e
            }
        })
}

fn negate(e: &Expr) -> Expr {
    index_arith(vec![IndexTerm {
        negated: true,
        atom: e.clone(),
    }])
}

/// Leading contractions and the flattened factor list of a term.
fn monomial(e: &Expr) -> (Vec<Binder>, Vec<Expr>) {
    let mut bs = Vec::new();
    let mut cur = e.clone();
    while let ExprKind::Sum(b, body) = cur.kind() {
        bs.push(b.clone());
        cur = body.clone();
    }
    let factors = match cur.kind() {
        ExprKind::Mul(fs) => fs.clone(),
        _ => vec![cur],
    };
    (bs, factors)
}

/// Merge key of a term: equal keys mean equal values.
pub(crate) fn merge_key(e: &Expr, ctx: &Context, symmetries: bool) -> String {
    let (bs, factors) = monomial(e);
    if !symmetries || bs.is_empty() && !factors.iter().any(|f| access_space(f, ctx, &bs).is_some()) {
        return renaming_key(&bs, &factors);
    }
    let mut inner = ctx.clone();
    for b in &bs {
        inner.push_var(&b.name, b.ty.clone());
    }
    orbit(&bs, factors, &inner)
        .iter()
        .map(|fs| renaming_key(&bs, fs))
        .min()
        .unwrap_or_default()
}

/// Key invariant under renaming of the contracted indices `bs`.
fn renaming_key(bs: &[Binder], factors: &[Expr]) -> String {
    let bound: BTreeSet<Name> = bs.iter().map(|b| b.name.clone()).collect();
    let hole: BTreeMap<Name, Expr> = bound.iter().map(|n| (n.clone(), Expr::var("_"))).collect();
    let factors: Vec<Expr> = factors.iter().map(canonical).collect();
    let mut tagged: Vec<(String, usize)> = factors
        .iter()
        .enumerate()
        .map(|(i, f)| (substitute_many(f, &hole).to_string(), i))
        .collect();
    tagged.sort();

    // runs of factors that look alike once bound names are hidden
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for (i, (s, idx)) in tagged.iter().enumerate() {
        if i > 0 && tagged[i - 1].0 == *s {
            runs.last_mut().unwrap().push(*idx);
        } else {
            runs.push(vec![*idx]);
        }
    }
    let orderings: usize = runs.iter().map(|r| (1..=r.len()).product::<usize>()).fold(1, usize::saturating_mul);
    let mut best: Option<String> = None;
    let mut consider = |order: Vec<usize>| {
        let s = key_for_order(bs, &bound, &factors, &order);
        if best.as_ref().is_none_or(|b| s < *b) {
            best = Some(s);
        }
    };
    if orderings > MAX_ORDERINGS {
        consider(runs.concat());
    } else {
        for_each_ordering(&runs, 0, &mut Vec::new(), &mut consider);
    }
    best.unwrap_or_default()
}

fn for_each_ordering(runs: &[Vec<usize>], at: usize, acc: &mut Vec<usize>, f: &mut impl FnMut(Vec<usize>)) {
    if at == runs.len() {
        f(acc.clone());
        return;
    }
    for perm in permutations(&runs[at]) {
        let len = acc.len();
        acc.extend(perm);
        for_each_ordering(runs, at + 1, acc, f);
        acc.truncate(len);
    }
}

fn permutations(xs: &[usize]) -> Vec<Vec<usize>> {
    if xs.len() <= 1 {
        return vec![xs.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

fn key_for_order(bs: &[Binder], bound: &BTreeSet<Name>, factors: &[Expr], order: &[usize]) -> String {
    let mut seen: Vec<Name> = Vec::new();
    for &i in order {
        collect_vars(&factors[i], bound, &mut seen);
    }
    for b in bs {
        if !seen.contains(&b.name) {
            seen.push(b.name.clone());
        }
    }
    let rename: BTreeMap<Name, Expr> = seen
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), Expr::var(&format!("#{i}"))))
        .collect();
    let types: Vec<String> = seen
        .iter()
        .map(|n| bs.iter().find(|b| &b.name == n).map(|b| b.ty.to_string()).unwrap_or_default())
        .collect();
    let body: Vec<String> = order.iter().map(|&i| substitute_many(&factors[i], &rename).to_string()).collect();
    format!("[{}] {}", types.join(","), body.join(" * "))
}

fn collect_vars(e: &Expr, bound: &BTreeSet<Name>, out: &mut Vec<Name>) {
    if let ExprKind::Var(n) = e.kind() {
        if bound.contains(n) && !out.contains(n) {
            out.push(n.clone());
        }
        return;
    }
    for c in e.children() {
        collect_vars(c, bound, out);
    }
}

/// The space of a (possibly conjugated) symmetric tensor access.
fn access_space(f: &Expr, ctx: &Context, bs: &[Binder]) -> Option<(Expr, Vec<Expr>, bool, std::sync::Arc<Space>)> {
    let (inner, conj) = match f.kind() {
        ExprKind::Conj(x) => (x.clone(), true),
        _ => (f.clone(), false),
    };
    let (head, args) = spine(&inner);
    if args.is_empty() {
        return None;
    }
    let mut ctx = ctx.clone();
    for b in bs {
        ctx.push_var(&b.name, b.ty.clone());
    }
    match type_of(&head, &ctx).ok()? {
        TypeExpr::Space(s) if !s.symmetries.is_empty() && s.indices.len() == args.len() => Some((head, args, conj, s)),
        _ => None,
    }
}

/// Number of additions in index sums; a reflection `-b` costs nothing.
fn arith_atoms(fs: &[Expr]) -> usize {
    fn go(e: &Expr) -> usize {
        match e.kind() {
            ExprKind::IndexArith(ts) => ts.len() - 1,
            _ => e.children().into_iter().map(go).sum(),
        }
    }
    fs.iter().map(go).sum()
}

fn tidy(e: &Expr) -> Expr {
    e.map_bottom_up(&mut |x| match x.kind() {
        ExprKind::IndexArith(ts) => index_arith(ts.clone()),
        ExprKind::Conj(y) => match y.kind() {
            ExprKind::Conj(z) => z.clone(),
            _ => x.clone(),
        },
        _ => x,
    })
}

/// Factor lists reachable by symmetry moves, reflections of symmetric
/// contracted indices and shifts of periodic ones.
fn orbit(bs: &[Binder], start: Vec<Expr>, ctx: &Context) -> Vec<Vec<Expr>> {
    let budget = arith_atoms(&start);
    let sig = |fs: &[Expr]| {
        let mut v: Vec<String> = fs.iter().map(|f| f.to_string()).collect();
        v.sort();
        v.join(" * ")
    };
    let mut seen = BTreeSet::new();
    seen.insert(sig(&start));
    let mut states = vec![start.clone()];
    let mut queue = VecDeque::from([start]);
    while let Some(fs) = queue.pop_front() {
        for next in moves(bs, &fs, ctx) {
            if states.len() >= MAX_STATES {
                return states;
            }
            let next: Vec<Expr> = next.iter().map(tidy).collect();
            if arith_atoms(&next) > budget || !seen.insert(sig(&next)) {
                continue;
            }
            states.push(next.clone());
            queue.push_back(next);
        }
    }
    states
}

fn moves(bs: &[Binder], fs: &[Expr], ctx: &Context) -> Vec<Vec<Expr>> {
    let mut out = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        let Some((head, args, conj, space)) = access_space(f, ctx, &[]) else { continue };
        let Ok(group) = symmetry_group(args.len(), &space.symmetries) else { continue };
        let real = space.elem == crate::ir::ScalarKind::Real;
        for g in group.iter().filter(|g| !g.is_identity()) {
            let new_args = g
                .slots
                .iter()
                .map(|&(src, neg)| if neg { negate(&args[src]) } else { args[src].clone() })
                .collect();
            let e = Expr::apply(head.clone(), new_args);
            let mut next = fs.to_vec();
            next[i] = if !real && (conj ^ g.conj) { Expr::conj(e) } else { e };
            out.push(next);
        }
    }
    for b in bs {
        let Some(dom) = b.ty.as_domain() else { continue };
        let v = b.var();
        if dom.symmetric {
            out.push(subst_all(fs, &b.name, &negate(&v)));
        }
        if dom.periodic {
            for t in partners(fs, &b.name) {
                for neg in [false, true] {
                    let shifted = index_arith(vec![
                        IndexTerm {
                            negated: false,
                            atom: v.clone(),
                        },
                        IndexTerm {
                            negated: neg,
                            atom: t.clone(),
                        },
                    ]);
                    out.push(subst_all(fs, &b.name, &shifted));
                }
            }
        }
    }
    out
}

fn subst_all(fs: &[Expr], v: &Name, val: &Expr) -> Vec<Expr> {
    let map = BTreeMap::from([(v.clone(), val.clone())]);
    fs.iter().map(|f| substitute_many(f, &map)).collect()
}

/// Atoms that share an index sum with `v`.
fn partners(fs: &[Expr], v: &Name) -> Vec<Expr> {
    fn go(e: &Expr, v: &Name, out: &mut Vec<Expr>) {
        if let ExprKind::IndexArith(ts) = e.kind() {
            if ts.iter().any(|t| t.atom.is_var(v)) {
                for t in ts.iter().filter(|t| !t.atom.is_var(v)) {
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
    for f in fs {
        go(f, v, &mut out);
    }
    out
}
