//! Canonical S-expression dump, one node per parenthesized form.

use super::expr::{Comb, Expr, ExprKind, Primitive};

pub fn to_sexpr(e: &Expr) -> String {
    let mut out = String::new();
    write(e, &mut out);
    out
}

fn list(out: &mut String, head: &str, items: &[Expr]) {
    out.push('(');
    out.push_str(head);
    for it in items {
        out.push(' ');
        write(it, out);
    }
    out.push(')');
}

fn write(e: &Expr, out: &mut String) {
    match e.kind() {
        ExprKind::Var(n) => {
            out.push_str("(var ");
            out.push_str(n);
            out.push(')');
        }
        ExprKind::Const(c) => out.push_str(&format!("(const {c})")),
        ExprKind::Lambda(ps, body) => {
            out.push_str("(lambda (");
            for (i, p) in ps.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("({} {})", p.name, p.ty));
            }
            out.push_str(") ");
            write(body, out);
            out.push(')');
        }
        ExprKind::Apply(f, args) => {
            out.push_str("(apply ");
            write(f, out);
            for a in args {
                out.push(' ');
                write(a, out);
            }
            out.push(')');
        }
        ExprKind::Sum(b, body) => {
            out.push_str(&format!("(sum ({} {}) ", b.name, b.ty));
            write(body, out);
            out.push(')');
        }
        ExprKind::Delta(a, b, k) => list(out, "delta", &[a.clone(), b.clone(), k.clone()]),
        ExprKind::Conj(x) => list(out, "conj", std::slice::from_ref(x)),
        ExprKind::Add(es) => list(out, "add", es),
        ExprKind::Mul(es) => list(out, "mul", es),
        ExprKind::Primitive(p) => match p {
            Primitive::Conj => out.push_str("(prim conj)"),
            Primitive::Identity => out.push_str("(prim identity)"),
            Primitive::MulBy(v) => list(out, "prim mulby", std::slice::from_ref(v)),
            Primitive::AddBy(v) => list(out, "prim addby", std::slice::from_ref(v)),
            Primitive::Contract(t) => out.push_str(&format!("(prim contract {t})")),
        },
        ExprKind::Comb(c) => out.push_str(match c {
            Comb::B => "(comb B)",
            Comb::C => "(comb C)",
            Comb::I => "(comb I)",
        }),
        ExprKind::PullbackOf(x) => list(out, "pullback", std::slice::from_ref(x)),
        ExprKind::Tuple(es) => list(out, "tuple", es),
        ExprKind::Let(bs, body) => {
            out.push_str("(let (");
            for (i, (n, v)) in bs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push('(');
                out.push_str(n);
                out.push(' ');
                write(v, out);
                out.push(')');
            }
            out.push_str(") ");
            write(body, out);
            out.push(')');
        }
        ExprKind::IndexArith(ts) => {
            out.push_str("(iarith");
            for t in ts {
                out.push_str(if t.negated { " (- " } else { " (+ " });
                write(&t.atom, out);
                out.push(')');
            }
            out.push(')');
        }
        ExprKind::Transpose(x) => list(out, "transpose", std::slice::from_ref(x)),
        ExprKind::Adjoint(x) => list(out, "adjoint", std::slice::from_ref(x)),
        ExprKind::MatMul(es) => list(out, "matmul", es),
    }
}
