//! Recover matrix and vector algebra from index form.
//!
//! A fragment is rewritten when every factor is an access `x(i)` or
//! `A(i, j)` by plain index variables, each contracted index joins exactly
//! two factors, and every intermediate has rank at most two. Anything else
//! (index arithmetic, traces, outer products, higher-rank contractions)
//! stays as it is.

use crate::combinator::spine;
use crate::ir::{Binder, Expr, ExprKind, Name, TypeExpr};

/// `coef · m(idx..)` equals the source fragment, with `m` a tensor
/// expression and `coef` scalar factors kept out of matrix products.
#[derive(Clone, Debug)]
struct Piece {
    coef: Vec<Expr>,
    m: Expr,
    idx: Vec<Name>,
}

impl Piece {
    fn scalar(m: Expr) -> Self {
        Piece {
            coef: Vec::new(),
            m,
            idx: Vec::new(),
        }
    }

    fn tensor(m: Expr, idx: Vec<Name>) -> Self {
        Piece { coef: Vec::new(), m, idx }
    }

    /// The coefficient folded back into the expression.
    fn finish(self) -> Expr {
        if self.coef.is_empty() {
            return self.m;
        }
        let mut fs = self.coef;
        fs.push(self.m);
        Expr::mul(fs)
    }

    fn has(&self, n: &Name) -> bool {
        self.idx.contains(n)
    }
}

pub fn blaserize(e: &Expr) -> Expr {
    Blas::default().walk(e)
}

#[derive(Default)]
struct Blas {
    /// Index variables bound by enclosing lambdas and contractions.
    scope: Vec<Name>,
}

fn transpose(m: Expr) -> Expr {
    match m.kind() {
        ExprKind::Transpose(a) => a.clone(),
        ExprKind::Adjoint(a) => Expr::conj(a.clone()),
        ExprKind::Conj(a) => Expr::new(ExprKind::Adjoint(a.clone())),
        _ => Expr::new(ExprKind::Transpose(m)),
    }
}

fn conj(m: Expr) -> Expr {
    match m.kind() {
        ExprKind::Const(_) => m.clone(),
        ExprKind::Conj(a) => a.clone(),
        ExprKind::Transpose(a) => Expr::new(ExprKind::Adjoint(a.clone())),
        ExprKind::Adjoint(a) => transpose(a.clone()),
        _ => Expr::conj(m),
    }
}

fn matmul(a: Expr, b: Expr) -> Expr {
    let mut parts = Vec::new();
    for x in [a, b] {
        match x.kind() {
            ExprKind::MatMul(xs) => parts.extend(xs.iter().cloned()),
            _ => parts.push(x),
        }
    }
    Expr::new(ExprKind::MatMul(parts))
}

fn is_index(b: &Binder) -> bool {
    matches!(b.ty, TypeExpr::Domain(_))
}

/// Reorder a piece of rank ≤ 2 to the index order `want`.
fn orient(mut p: Piece, want: &[Name]) -> Option<Expr> {
    if p.idx == want {
        return Some(p.finish());
    }
    if p.idx.len() == 2 && want.len() == 2 && p.idx[0] == want[1] && p.idx[1] == want[0] {
        p.m = transpose(p.m);
        return Some(p.finish());
    }
    None
}

impl Blas {
    fn walk(&mut self, e: &Expr) -> Expr {
        match e.kind() {
            ExprKind::Lambda(ps, body) if !ps.is_empty() && ps.len() <= 2 && ps.iter().all(is_index) => {
                let names: Vec<Name> = ps.iter().map(|p| p.name.clone()).collect();
                let len = self.scope.len();
                self.scope.extend(names.iter().cloned());
                let piece = self.piece(body);
                let out = piece.and_then(|p| orient(p, &names));
                let out = match out {
                    Some(m) => m,
                    None => Expr::lambda(ps.clone(), self.walk(body)),
                };
                self.scope.truncate(len);
                out
            }
            ExprKind::Lambda(ps, body) => {
                let len = self.scope.len();
                self.scope.extend(ps.iter().filter(|p| is_index(p)).map(|p| p.name.clone()));
                let out = Expr::lambda(ps.clone(), self.walk(body));
                self.scope.truncate(len);
                out
            }
            ExprKind::Sum(..) | ExprKind::Add(_) | ExprKind::Mul(_) if !self.touches_scope(e) => {
                match self.shape(e) {
                    Some(p) if p.idx.is_empty() && p.clone().finish() != *e => p.finish(),
                    _ => self.walk_children(e),
                }
            }
            _ => self.walk_children(e),
        }
    }

    fn walk_children(&mut self, e: &Expr) -> Expr {
        let kids: Vec<Expr> = e.children().into_iter().map(|c| self.walk(c)).collect();
        if kids.is_empty() {
            e.clone()
        } else {
            e.with_children(kids)
        }
    }

    fn touches_scope(&self, e: &Expr) -> bool {
        self.scope.iter().any(|n| e.has_free(n))
    }

    fn scope_index(&self, e: &Expr) -> Option<Name> {
        e.as_var().filter(|n| self.scope.contains(n)).cloned()
    }

    /// Matrix form of `e` over the index variables in scope.
    fn piece(&mut self, e: &Expr) -> Option<Piece> {
        if !self.touches_scope(e) {
            return Some(Piece::scalar(self.walk(e)));
        }
        self.shape(e)
    }

    fn shape(&mut self, e: &Expr) -> Option<Piece> {
        match e.kind() {
            ExprKind::Var(_) => None,
            ExprKind::Apply(..) if !self.touches_scope(e) => Some(Piece::scalar(self.walk_children(e))),
            ExprKind::Apply(..) => self.access(e),
            ExprKind::Conj(x) => {
                let p = self.piece(x)?;
                Some(Piece {
                    coef: p.coef.into_iter().map(conj).collect(),
                    m: conj(p.m),
                    idx: p.idx,
                })
            }
            ExprKind::Add(ts) => {
                let mut parts = Vec::new();
                let mut idx: Option<Vec<Name>> = None;
                for t in ts {
                    let p = self.piece(t)?;
                    let want = idx.get_or_insert_with(|| p.idx.clone()).clone();
                    parts.push(orient(p, &want)?);
                }
                Some(Piece::tensor(Expr::add(parts), idx.unwrap_or_default()))
            }
            ExprKind::Mul(fs) => {
                let pieces = fs.iter().map(|f| self.piece(f)).collect::<Option<Vec<_>>>()?;
                combine(pieces)
            }
            ExprKind::Sum(..) => {
                let mut bs = Vec::new();
                let mut cur = e.clone();
                while let ExprKind::Sum(b, body) = cur.kind() {
                    if !is_index(b) {
                        return None;
                    }
                    bs.push(b.name.clone());
                    cur = body.clone();
                }
                let len = self.scope.len();
                self.scope.extend(bs.iter().cloned());
                let factors = match cur.kind() {
                    ExprKind::Mul(fs) => fs.clone(),
                    _ => vec![cur.clone()],
                };
                let pieces = factors.iter().map(|f| self.piece(f)).collect::<Option<Vec<_>>>();
                self.scope.truncate(len);
                let mut pieces = pieces?;
                for b in &bs {
                    pieces = contract(pieces, b)?;
                }
                combine(pieces)
            }
            _ => None,
        }
    }

    /// `x(i)`, `A(i, j)` or `𝒫(h)(y, k, i)` by distinct index variables.
    fn access(&mut self, e: &Expr) -> Option<Piece> {
        let (head, args) = spine(e);
        let (head, idx_args) = match head.kind() {
            ExprKind::PullbackOf(_) if args.len() > 2 => {
                let y = self.walk(&args[0]);
                let k = self.walk(&args[1]);
                (Expr::apply(head.clone(), vec![y, k]), &args[2..])
            }
            _ => (head.clone(), &args[..]),
        };
        if self.touches_scope(&head) || idx_args.is_empty() || idx_args.len() > 2 {
            return None;
        }
        let idx = idx_args.iter().map(|a| self.scope_index(a)).collect::<Option<Vec<_>>>()?;
        if idx.len() == 2 && idx[0] == idx[1] {
            return None;
        }
        Some(Piece::tensor(head, idx))
    }
}

/// Contract the two pieces that carry the summed index `b`.
fn contract(pieces: Vec<Piece>, b: &Name) -> Option<Vec<Piece>> {
    let hits: Vec<usize> = (0..pieces.len()).filter(|&i| pieces[i].has(b)).collect();
    let [l, r] = hits[..] else { return None };
    let (mut left, mut right) = (pieces[l].clone(), pieces[r].clone());
    // x(i) A(i, j) reads better as xᵀ A than as Aᵀ x
    if left.idx.len() == 2 && left.idx[0] == *b && right.idx.first() == Some(b) {
        std::mem::swap(&mut left, &mut right);
    }
    // bring b last on the left and first on the right
    let (lm, lrest) = match left.idx.as_slice() {
        [x] if x == b => (left.m, vec![]),
        [a, x] if x == b => (left.m, vec![a.clone()]),
        [x, a] if x == b => (transpose(left.m), vec![a.clone()]),
        _ => return None,
    };
    let (rm, rrest) = match right.idx.as_slice() {
        [x] if x == b => (right.m, vec![]),
        [x, a] if x == b => (right.m, vec![a.clone()]),
        [a, x] if x == b => (transpose(right.m), vec![a.clone()]),
        _ => return None,
    };
    // a vector on the left reads as a row; products already do
    let row = lrest.is_empty() && !matches!(lm.kind(), ExprKind::MatMul(_));
    let lm = if row { transpose(lm) } else { lm };
    let mut idx = lrest;
    idx.extend(rrest);
    let mut out: Vec<Piece> = pieces
        .into_iter()
        .enumerate()
        .filter(|(i, _)| *i != l && *i != r)
        .map(|(_, p)| p)
        .collect();
    let mut coef = left.coef;
    coef.extend(right.coef);
    out.insert(
        l.min(out.len()),
        Piece {
            coef,
            m: matmul(lm, rm),
            idx,
        },
    );
    Some(out)
}

/// Scalars times at most one indexed piece.
fn combine(pieces: Vec<Piece>) -> Option<Piece> {
    let mut scalars = Vec::new();
    let mut products = Vec::new();
    let mut tensor: Option<Piece> = None;
    for p in pieces {
        if p.idx.is_empty() {
            scalars.extend(p.coef);
            match p.m.kind() {
                ExprKind::MatMul(_) => products.push(p.m),
                _ => scalars.push(p.m),
            }
        } else if tensor.is_some() {
            return None;
        } else {
            scalars.extend(p.coef.iter().cloned());
            tensor = Some(p);
        }
    }
    scalars.extend(products);
    Some(match tensor {
        Some(t) => Piece {
            coef: scalars,
            m: t.m,
            idx: t.idx,
        },
        None if scalars.len() == 1 => Piece::scalar(scalars.pop().unwrap()),
        None => Piece::scalar(Expr::mul(scalars)),
    })
}
