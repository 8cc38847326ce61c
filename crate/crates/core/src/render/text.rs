//! Plain-text rendering in the input grammar, so output re-parses.

use crate::ir::{Binder, Comb, Expr, ExprKind, Primitive, TypeExpr};

const P_LAMBDA: u8 = 0;
const P_ADD: u8 = 1;
const P_MUL: u8 = 2;
const P_UNARY: u8 = 3;
const P_POSTFIX: u8 = 4;
const P_ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e.kind() {
        ExprKind::Lambda(..) | ExprKind::Let(..) => P_LAMBDA,
        ExprKind::Add(_) => P_ADD,
        ExprKind::IndexArith(ts) => {
            if ts.len() == 1 && !ts[0].negated {
                prec(&ts[0].atom)
            } else if ts.len() == 1 {
                P_UNARY
            } else {
                P_ADD
            }
        }
        ExprKind::Mul(_) | ExprKind::MatMul(_) => P_MUL,
        ExprKind::Const(c) if c.is_negative() => P_UNARY,
        ExprKind::Const(c) if !c.is_integer() && !c.float => P_MUL,
        ExprKind::Const(c) if c.float && c.to_string().contains('/') => P_MUL,
        ExprKind::Apply(..) | ExprKind::Conj(_) => P_POSTFIX,
        _ => P_ATOM,
    }
}

pub fn binder_text(b: &Binder) -> String {
    match &b.ty {
        TypeExpr::Unknown => b.name.to_string(),
        t => format!("{}::{}", b.name, type_text(t)),
    }
}

pub fn type_text(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Func(args, ret) => {
            let a: Vec<String> = args.iter().map(type_text).collect();
            format!("({})->{}", a.join(", "), type_text(ret))
        }
        other => other.to_string(),
    }
}

pub fn to_text(e: &Expr) -> String {
    let mut s = String::new();
    write(e, &mut s);
    s
}

fn write_at(e: &Expr, min: u8, out: &mut String) {
    if prec(e) < min {
        out.push('(');
        write(e, out);
        out.push(')');
    } else {
        write(e, out);
    }
}

fn comma_list(es: &[Expr], out: &mut String) {
    for (i, a) in es.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write(a, out);
    }
}

fn write(e: &Expr, out: &mut String) {
    match e.kind() {
        ExprKind::Var(n) => out.push_str(n),
        ExprKind::Const(c) => out.push_str(&c.to_string()),
        ExprKind::Lambda(ps, body) => {
            out.push('(');
            let ps: Vec<String> = ps.iter().map(binder_text).collect();
            out.push_str(&ps.join(", "));
            out.push_str(") -> ");
            write(body, out);
        }
        ExprKind::Apply(f, args) => {
            let head_is_comb = matches!(f.kind(), ExprKind::Comb(_));
            write_at(f, P_POSTFIX, out);
            if head_is_comb {
                // combinator applications print curried, B(f)(g)(x)
                for a in args {
                    out.push('(');
                    write(a, out);
                    out.push(')');
                }
            } else {
                out.push('(');
                comma_list(args, out);
                out.push(')');
            }
        }
        ExprKind::Sum(..) => {
            let mut bs = Vec::new();
            let mut cur = e;
            while let ExprKind::Sum(b, body) = cur.kind() {
                bs.push(binder_text(b));
                cur = body;
            }
            out.push_str("sum((");
            out.push_str(&bs.join(", "));
            out.push_str("), ");
            write(cur, out);
            out.push(')');
        }
        ExprKind::Delta(a, b, k) => {
            out.push_str("delta(");
            comma_list(&[a.clone(), b.clone(), k.clone()], out);
            out.push(')');
        }
        ExprKind::Conj(x) => {
            write_at(x, P_POSTFIX, out);
            out.push('\'');
        }
        ExprKind::Add(es) => {
            for (i, t) in es.iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                write_at(t, P_MUL, out);
            }
        }
        ExprKind::Mul(es) | ExprKind::MatMul(es) => {
            for (i, t) in es.iter().enumerate() {
                if i > 0 {
                    out.push_str(" * ");
                }
                // nested matrix products print flat; the typechecker rebuilds them
                if matches!(t.kind(), ExprKind::MatMul(_)) {
                    write(t, out);
                } else {
                    write_at(t, P_UNARY, out);
                }
            }
        }
        ExprKind::Primitive(p) => match p {
            Primitive::Conj => out.push_str("@conj"),
            Primitive::Identity => out.push_str("@id"),
            Primitive::MulBy(v) => {
                out.push_str("@mul(");
                write(v, out);
                out.push(')');
            }
            Primitive::AddBy(v) => {
                out.push_str("@add(");
                write(v, out);
                out.push(')');
            }
            Primitive::Contract(t) => {
                out.push_str("@sum(");
                out.push_str(&type_text(t));
                out.push(')');
            }
        },
        ExprKind::Comb(c) => out.push_str(match c {
            Comb::B => "@B",
            Comb::C => "@C",
            Comb::I => "@I",
        }),
        ExprKind::PullbackOf(x) => {
            out.push_str("pullback(");
            write(x, out);
            out.push(')');
        }
        ExprKind::Tuple(es) => {
            out.push('(');
            comma_list(es, out);
            if es.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        ExprKind::Let(bs, body) => {
            out.push_str("let ");
            for (i, (n, v)) in bs.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                out.push_str(n);
                out.push_str(" = ");
                write(v, out);
            }
            out.push_str(" in ");
            write(body, out);
        }
        ExprKind::IndexArith(ts) => {
            for (i, t) in ts.iter().enumerate() {
                if i == 0 {
                    if t.negated {
                        out.push('-');
                    }
                } else {
                    out.push_str(if t.negated { " - " } else { " + " });
                }
                write_at(&t.atom, P_POSTFIX, out);
            }
        }
        ExprKind::Transpose(x) => {
            out.push_str("transpose(");
            write(x, out);
            out.push(')');
        }
        ExprKind::Adjoint(x) => {
            out.push_str("adjoint(");
            write(x, out);
            out.push(')');
        }
    }
}
