use crate::ir::{Binder, Comb, Expr, ExprKind, Primitive, TypeExpr};

const GREEK: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu", "nu", "xi", "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi",
    "omega", "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi", "Sigma", "Phi", "Psi", "Omega",
];

/// Render an identifier: greek names become macros, trailing digits a subscript.
pub fn latex_name(n: &str) -> String {
    let stem = n.trim_end_matches(|c: char| c.is_ascii_digit());
    let digits = &n[stem.len()..];
    let stem_tex = if GREEK.contains(&stem) {
        format!("\\{stem}")
    } else if stem.chars().count() > 1 {
        format!("\\mathrm{{{stem}}}")
    } else {
        stem.to_string()
    };
    if digits.is_empty() || stem.is_empty() {
        if stem.is_empty() {
            return n.to_string();
        }
        stem_tex
    } else {
        format!("{stem_tex}_{{{digits}}}")
    }
}

pub fn to_latex(e: &Expr) -> String {
    let mut r = Latex { indices: Vec::new() };
    r.expr(e)
}

struct Latex {
    /// Names in scope that are bound to index domains.
    indices: Vec<String>,
}

#[derive(PartialEq, PartialOrd)]
enum Level {
    Lambda,
    Add,
    Mul,
    Atom,
}

fn level(e: &Expr) -> Level {
    match e.kind() {
        ExprKind::Lambda(..) | ExprKind::Let(..) => Level::Lambda,
        ExprKind::Add(_) => Level::Add,
        ExprKind::IndexArith(ts) if ts.len() > 1 => Level::Add,
        ExprKind::Const(c) if c.is_negative() => Level::Add,
        ExprKind::Mul(_) | ExprKind::MatMul(_) | ExprKind::Sum(..) => Level::Mul,
        ExprKind::Conj(x) | ExprKind::Transpose(x) | ExprKind::Adjoint(x) => match level(x) {
            Level::Atom => Level::Atom,
            _ => Level::Mul,
        },
        _ => Level::Atom,
    }
}

impl Latex {
    fn with_binders<R>(&mut self, bs: &[Binder], f: impl FnOnce(&mut Self) -> R) -> R {
        let len = self.indices.len();
        for b in bs {
            if matches!(b.ty, TypeExpr::Domain(_)) {
                self.indices.push(b.name.to_string());
            } else {
                // shadowing a name as non-index hides an outer index of the same name
                self.indices.push(format!("\u{0}{}", b.name));
            }
        }
        let r = f(self);
        self.indices.truncate(len);
        r
    }

    fn is_index(&self, e: &Expr) -> bool {
        match e.kind() {
            ExprKind::Var(n) => {
                for s in self.indices.iter().rev() {
                    if s == &**n {
                        return true;
                    }
                    if s.strip_prefix('\u{0}') == Some(&**n) {
                        return false;
                    }
                }
                false
            }
            ExprKind::IndexArith(_) => true,
            ExprKind::Const(c) => c.is_integer() && !c.float,
            _ => false,
        }
    }

    fn is_access(&self, e: &Expr) -> bool {
        match e.kind() {
            ExprKind::Apply(f, args) => f.as_var().is_some() && args.iter().all(|a| self.is_index(a)),
            ExprKind::Conj(x) => self.is_access(x),
            _ => false,
        }
    }

    fn at(&mut self, e: &Expr, min: Level) -> String {
        let s = self.expr(e);
        if level(e) < min {
            format!("\\left({s}\\right)")
        } else {
            s
        }
    }

    fn list(&mut self, es: &[Expr]) -> String {
        es.iter().map(|a| self.expr(a)).collect::<Vec<_>>().join(", ")
    }

    fn params(bs: &[Binder]) -> String {
        if bs.len() == 1 {
            latex_name(&bs[0].name)
        } else {
            let ps: Vec<String> = bs.iter().map(|b| latex_name(&b.name)).collect();
            format!("\\left({}\\right)", ps.join(", "))
        }
    }

    fn expr(&mut self, e: &Expr) -> String {
        match e.kind() {
            ExprKind::Var(n) => latex_name(n),
            ExprKind::Const(c) => c.to_string(),
            ExprKind::Lambda(ps, body) => {
                let head = Self::params(ps);
                let b = self.with_binders(ps, |r| r.expr(body));
                format!("{head} \\mapsto {b}")
            }
            ExprKind::Apply(f, args) => {
                if let ExprKind::PullbackOf(h) = f.kind() {
                    if args.len() == 2 && args[1].is_one() {
                        let h = self.expr(h);
                        let p = self.expr(&args[0]);
                        return format!("\\nabla ({h})({p})");
                    }
                }
                if self.is_access(e) {
                    let head = self.expr(f);
                    return format!("{head}_{{{}}}", self.list(args));
                }
                let head = self.at(f, Level::Atom);
                if matches!(f.kind(), ExprKind::Comb(_)) {
                    let parts: Vec<String> =
                        args.iter().map(|a| format!("({})", self.expr(a))).collect();
                    format!("{head}{}", parts.concat())
                } else {
                    format!("{head}({})", self.list(args))
                }
            }
            ExprKind::Sum(..) => {
                let mut bs = Vec::new();
                let mut cur = e;
                while let ExprKind::Sum(b, body) = cur.kind() {
                    bs.push(b.clone());
                    cur = body;
                }
                let names: Vec<String> = bs.iter().map(|b| latex_name(&b.name)).collect();
                let body = cur.clone();
                let b = self.with_binders(&bs, |r| r.at(&body, Level::Mul));
                format!("\\Sigma_{{{}}}{b}", names.join(", "))
            }
            ExprKind::Delta(a, b, k) => {
                let (a, b, k) = (self.expr(a), self.expr(b), self.expr(k));
                format!("\\delta({a}, {b}, {k})")
            }
            ExprKind::Conj(x) => format!("{}^{{*}}", self.at(x, Level::Atom)),
            ExprKind::Transpose(x) => format!("{}^{{T}}", self.at(x, Level::Atom)),
            ExprKind::Adjoint(x) => format!("{}^{{H}}", self.at(x, Level::Atom)),
            ExprKind::Add(es) => {
                let mut out = String::new();
                for (i, t) in es.iter().enumerate() {
                    let s = self.at(t, Level::Mul);
                    if i > 0 && !s.starts_with('-') {
                        out.push('+');
                    }
                    out.push_str(&s);
                }
                out
            }
            ExprKind::Mul(es) => {
                let mut out = String::new();
                for (i, t) in es.iter().enumerate() {
                    if i > 0 {
                        let both = self.is_access(&es[i - 1]) && self.is_access(t);
                        out.push_str(if both { " " } else { " \\cdot " });
                    }
                    // a sum body extends to the right, so only a trailing sum stays bare
                    let trailing = i + 1 == es.len();
                    let min = if matches!(t.kind(), ExprKind::Sum(..)) && !trailing {
                        Level::Atom
                    } else if i == 0 && matches!(t.kind(), ExprKind::Const(_)) {
                        Level::Lambda
                    } else {
                        Level::Mul
                    };
                    out.push_str(&self.at(t, min));
                }
                out
            }
            ExprKind::MatMul(es) => {
                let parts: Vec<String> = es.iter().map(|t| self.at(t, Level::Atom)).collect();
                parts.join("\\cdot ")
            }
            ExprKind::Primitive(p) => match p {
                Primitive::Conj => "\\mathrm{conj}".into(),
                Primitive::Identity => "\\mathrm{id}".into(),
                Primitive::MulBy(v) => format!("\\mathrm{{mul}}({})", self.expr(v)),
                Primitive::AddBy(v) => format!("\\mathrm{{add}}({})", self.expr(v)),
                Primitive::Contract(_) => "\\Sigma".into(),
            },
            ExprKind::Comb(c) => match c {
                Comb::B => "\\mathbf{B}",
                Comb::C => "\\mathbf{C}",
                Comb::I => "\\mathbf{I}",
            }
            .into(),
            ExprKind::PullbackOf(x) => format!("\\mathcal{{P}}({})", self.expr(x)),
            ExprKind::Tuple(es) => format!("\\left({}\\right)", self.list(es)),
            ExprKind::Let(bs, body) => {
                let mut out = String::from("\\mathrm{let}\\;");
                for (i, (n, v)) in bs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(";\\;");
                    }
                    out.push_str(&format!("{} = {}", latex_name(n), self.expr(v)));
                }
                out.push_str(&format!("\\;\\mathrm{{in}}\\; {}\\;\\mathrm{{end}}", self.expr(body)));
                out
            }
            ExprKind::IndexArith(ts) => {
                let mut out = String::new();
                for (i, t) in ts.iter().enumerate() {
                    if t.negated {
                        out.push('-');
                    } else if i > 0 {
                        out.push('+');
                    }
                    out.push_str(&self.at(&t.atom, Level::Atom));
                }
                out
            }
        }
    }
}
