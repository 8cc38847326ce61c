use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::error::{Error, Result, Span};
use crate::ir::Comb;
use crate::num::Num;

pub fn parse(src: &str) -> Result<SourceProgram> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let mut decls = Vec::new();
    while p.peek_ident("domain") || p.peek_ident("space") {
        decls.push(p.decl()?);
    }
    let start = p.pos;
    let body = p.expr()?;
    p.expect_eof()?;
    let text = slice_text(src, p.toks[start].span, p.toks[p.pos].span);
    Ok(SourceProgram { decls, body, text })
}

/// Parse a single expression with no declarations.
pub fn parse_expr(src: &str) -> Result<Node> {
    let prog = parse(src)?;
    if !prog.decls.is_empty() {
        return Err(Error::Syntax {
            span: Span { line: 1, col: 1 },
            message: "declarations are not allowed here".into(),
        });
    }
    Ok(prog.body)
}

fn slice_text(src: &str, from: Span, to: Span) -> String {
    let offset = |s: Span| {
        let mut line = 1;
        let mut col = 1;
        for (i, c) in src.char_indices() {
            if line == s.line && col == s.col {
                return i;
            }
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        src.len()
    };
    src[offset(from)..offset(to)].trim().to_string()
}

const KEYWORDS: &[&str] = &["let", "in", "domain", "space"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn peek_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn peek_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(q) if q == s)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.peek_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T> {
        let list: Vec<String> = expected.iter().map(|e| format!("`{e}`")).collect();
        let what = if list.len() == 1 {
            format!("expected {}", list[0])
        } else {
            format!("expected one of {}", list.join(", "))
        };
        Err(Error::Syntax {
            span: self.span(),
            message: format!("{what}, found {}", self.peek()),
        })
    }

    fn expect(&mut self, p: &str) -> Result<Span> {
        if self.peek_punct(p) {
            Ok(self.bump().span)
        } else {
            self.error(&[p])
        }
    }

    fn expect_eof(&self) -> Result<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => self.error(&["end of input", "+", "*", "("]),
        }
    }

    fn ident(&mut self) -> Result<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn keyword(&mut self, k: &str) -> Result<()> {
        if self.peek_ident(k) {
            self.bump();
            Ok(())
        } else {
            self.error(&[k])
        }
    }

    // declarations

    fn separator(&mut self) {
        while self.eat(";") || self.eat(",") {}
    }

    fn decl(&mut self) -> Result<Decl> {
        let span = self.span();
        if self.peek_ident("domain") {
            self.bump();
            let (name, _) = self.ident()?;
            self.expect("{")?;
            let mut fields = Vec::new();
            self.separator();
            while !self.peek_punct("}") {
                let (key, ks) = self.ident()?;
                self.expect("=")?;
                let value = match self.peek().clone() {
                    Tok::Ident(s) if s == "true" || s == "false" => {
                        self.bump();
                        DomainValue::Bool(s == "true")
                    }
                    Tok::Ident(s) => {
                        self.bump();
                        DomainValue::Name(s)
                    }
                    Tok::Number(n) => {
                        self.bump();
                        DomainValue::Int(n.parse().map_err(|_| Error::Syntax {
                            span: ks,
                            message: format!("`{n}` is not an integer"),
                        })?)
                    }
                    _ => return self.error(&["true", "false", "integer", "identifier"]),
                };
                fields.push((key, value, ks));
                self.separator();
            }
            self.expect("}")?;
            Ok(Decl::Domain { name, fields, span })
        } else {
            self.keyword("space")?;
            let (name, _) = self.ident()?;
            self.expect("{")?;
            let mut ty = None;
            let mut symmetries = Vec::new();
            self.separator();
            while !self.peek_punct("}") {
                let (key, ks) = self.ident()?;
                self.expect("=")?;
                match key.as_str() {
                    "type" => ty = Some(self.type_expr()?),
                    "symmetries" => symmetries = self.symmetry_list()?,
                    _ => {
                        return Err(Error::Syntax {
                            span: ks,
                            message: format!("unknown space field `{key}`, expected `type` or `symmetries`"),
                        })
                    }
                }
                self.separator();
            }
            self.expect("}")?;
            let ty = ty.ok_or_else(|| Error::Syntax {
                span,
                message: format!("space `{name}` has no `type`"),
            })?;
            Ok(Decl::Space {
                name,
                ty,
                symmetries,
                span,
            })
        }
    }

    fn symmetry_list(&mut self) -> Result<Vec<SymmetryAst>> {
        let close = if self.eat("[") {
            "]"
        } else {
            self.expect("(")?;
            ")"
        };
        let mut out = Vec::new();
        while !self.peek_punct(close) {
            let span = self.expect("(")?;
            self.expect("(")?;
            let mut perm = Vec::new();
            while !self.peek_punct(")") {
                match self.peek().clone() {
                    Tok::Number(n) => {
                        self.bump();
                        perm.push(n.parse().map_err(|_| Error::Syntax {
                            span,
                            message: format!("`{n}` is not a position"),
                        })?);
                    }
                    _ => return self.error(&["integer", ")"]),
                }
                if !self.eat(",") {
                    break;
                }
            }
            self.expect(")")?;
            if !self.eat(";") {
                self.expect(",")?;
            }
            self.eat(":");
            let (action, _) = self.ident()?;
            self.expect(")")?;
            out.push(SymmetryAst { perm, action, span });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(close)?;
        Ok(out)
    }

    // types

    fn type_expr(&mut self) -> Result<TypeAst> {
        let atom = if self.eat("(") {
            let mut items = vec![self.type_expr()?];
            while self.eat(",") {
                items.push(self.type_expr()?);
            }
            self.expect(")")?;
            if self.eat("->") {
                let ret = self.type_expr()?;
                return Ok(TypeAst::Func(items, Box::new(ret)));
            }
            if items.len() == 1 {
                items.pop().unwrap()
            } else {
                TypeAst::Tuple(items)
            }
        } else {
            let (n, sp) = self.ident()?;
            TypeAst::Name(n, sp)
        };
        if self.eat("->") {
            let ret = self.type_expr()?;
            Ok(TypeAst::Func(vec![atom], Box::new(ret)))
        } else {
            Ok(atom)
        }
    }

    // expressions

    fn expr(&mut self) -> Result<Node> {
        if self.peek_ident("let") {
            return self.let_expr();
        }
        if let Some(node) = self.try_lambda()? {
            return Ok(node);
        }
        self.additive()
    }

    fn let_expr(&mut self) -> Result<Node> {
        let span = self.span();
        self.keyword("let")?;
        let mut binds = Vec::new();
        loop {
            let (name, _) = self.ident()?;
            self.expect("=")?;
            let v = self.expr()?;
            binds.push((name, v));
            if self.eat(";") {
                if self.peek_ident("in") {
                    break;
                }
                continue;
            }
            break;
        }
        self.keyword("in")?;
        let body = self.expr()?;
        Ok(Node::new(Ast::Let(binds, Box::new(body)), span))
    }

    /// Parse a parameter list `(x::T, y)` or a bare `x` when followed by `->`.
    fn try_lambda(&mut self) -> Result<Option<Node>> {
        let span = self.span();
        let save = self.pos;
        let params = match self.peek() {
            Tok::Ident(_) if matches!(self.peek_at(1), Tok::Punct("->")) => {
                let (name, sp) = self.ident()?;
                vec![Param {
                    name,
                    ty: None,
                    span: sp,
                }]
            }
            Tok::Punct("(") => match self.param_list() {
                Ok(ps) if self.peek_punct("->") => ps,
                _ => {
                    self.pos = save;
                    return Ok(None);
                }
            },
            _ => return Ok(None),
        };
        self.expect("->")?;
        let body = self.expr()?;
        Ok(Some(Node::new(Ast::Lambda(params, Box::new(body)), span)))
    }

    fn param(&mut self) -> Result<Param> {
        let (name, span) = self.ident()?;
        let ty = if self.eat("::") {
            Some(self.type_expr()?)
        } else {
            None
        };
        Ok(Param { name, ty, span })
    }

    fn param_list(&mut self) -> Result<Vec<Param>> {
        self.expect("(")?;
        let mut ps = Vec::new();
        if !self.peek_punct(")") {
            ps.push(self.param()?);
            while self.eat(",") {
                ps.push(self.param()?);
            }
        }
        self.expect(")")?;
        Ok(ps)
    }

    fn additive(&mut self) -> Result<Node> {
        let mut lhs = self.multiplicative()?;
        loop {
            let span = self.span();
            if self.eat("+") {
                let rhs = self.multiplicative()?;
                lhs = Node::new(Ast::Add(Box::new(lhs), Box::new(rhs)), span);
            } else if self.eat("-") {
                let rhs = self.multiplicative()?;
                lhs = Node::new(Ast::Sub(Box::new(lhs), Box::new(rhs)), span);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn multiplicative(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let span = self.span();
            if self.eat("*") {
                let rhs = self.unary()?;
                lhs = Node::new(Ast::Mul(Box::new(lhs), Box::new(rhs)), span);
            } else if self.eat("/") {
                let rhs = self.unary()?;
                match (&lhs.ast, &rhs.ast) {
                    (Ast::Num(a), Ast::Num(b)) if !b.is_zero() => {
                        let q = a.value / b.value;
                        lhs = Node::new(
                            Ast::Num(Num {
                                value: q,
                                float: a.float || b.float,
                            }),
                            lhs.span,
                        );
                    }
                    _ => {
                        return Err(Error::Syntax {
                            span,
                            message: "`/` is only allowed between nonzero numeric literals".into(),
                        })
                    }
                }
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        let span = self.span();
        if self.eat("-") {
            let x = self.unary()?;
            return Ok(match x.ast {
                Ast::Num(n) => Node::new(Ast::Num(-n), span),
                _ => Node::new(Ast::Neg(Box::new(x)), span),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Node> {
        let mut e = self.primary()?;
        loop {
            let span = self.span();
            if self.peek_punct("(") {
                let args = self.args()?;
                e = Node::new(Ast::Apply(Box::new(e), args), span);
            } else if self.eat("'") {
                e = Node::new(Ast::Conj(Box::new(e)), span);
            } else {
                return Ok(e);
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Node>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.peek_punct(")") {
            args.push(self.expr()?);
            while self.eat(",") {
                args.push(self.expr()?);
            }
        }
        self.expect(")")?;
        Ok(args)
    }

    fn one_arg(&mut self, what: &str) -> Result<Node> {
        let span = self.span();
        let mut args = self.args()?;
        if args.len() != 1 {
            return Err(Error::Syntax {
                span,
                message: format!("`{what}` takes one argument, found {}", args.len()),
            });
        }
        Ok(args.pop().unwrap())
    }

    fn primary(&mut self) -> Result<Node> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(text) => {
                self.bump();
                let n = Num::parse_decimal(&text).ok_or_else(|| Error::Syntax {
                    span,
                    message: format!("number `{text}` is out of range"),
                })?;
                Ok(Node::new(Ast::Num(n), span))
            }
            Tok::Punct("@") => {
                self.bump();
                self.builtin(span)
            }
            Tok::Punct("(") => {
                self.bump();
                let first = self.expr()?;
                if self.eat(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat(",") {
                    if self.peek_punct(")") {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect(")")?;
                Ok(Node::new(Ast::Tuple(items), span))
            }
            Tok::Ident(name) if self.peek_at(1) == &Tok::Punct("(") => match name.as_str() {
                "sum" => {
                    self.bump();
                    self.sum(span)
                }
                "delta" => {
                    self.bump();
                    let mut a = self.args()?;
                    if a.len() != 3 {
                        return Err(Error::Syntax {
                            span,
                            message: format!("`delta` takes three arguments, found {}", a.len()),
                        });
                    }
                    let k = a.pop().unwrap();
                    let b = a.pop().unwrap();
                    let x = a.pop().unwrap();
                    Ok(Node::new(Ast::Delta(Box::new(x), Box::new(b), Box::new(k)), span))
                }
                "pullback" | "transpose" | "adjoint" => {
                    self.bump();
                    let x = Box::new(self.one_arg(&name)?);
                    Ok(Node::new(
                        match name.as_str() {
                            "pullback" => Ast::Pullback(x),
                            "transpose" => Ast::Transpose(x),
                            _ => Ast::Adjoint(x),
                        },
                        span,
                    ))
                }
                _ => {
                    let (n, sp) = self.ident()?;
                    Ok(Node::new(Ast::Var(n), sp))
                }
            },
            Tok::Ident(_) => {
                let (n, sp) = self.ident()?;
                Ok(Node::new(Ast::Var(n), sp))
            }
            _ => self.error(&["expression"]),
        }
    }

    fn sum(&mut self, span: Span) -> Result<Node> {
        self.expect("(")?;
        let params = if self.peek_punct("(") {
            self.param_list()?
        } else {
            vec![self.param()?]
        };
        self.expect(",")?;
        let body = self.expr()?;
        self.expect(")")?;
        Ok(Node::new(Ast::Sum(params, Box::new(body)), span))
    }

    fn builtin(&mut self, span: Span) -> Result<Node> {
        let (name, _) = match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.bump().span;
                (s, sp)
            }
            _ => return self.error(&["B", "C", "I", "conj", "id", "mul", "add", "sum"]),
        };
        let ast = match name.as_str() {
            "B" => Ast::Comb(Comb::B),
            "C" => Ast::Comb(Comb::C),
            "I" => Ast::Comb(Comb::I),
            "conj" => Ast::Prim(PrimAst::Conj),
            "id" => Ast::Prim(PrimAst::Identity),
            "mul" => Ast::Prim(PrimAst::Mul(Box::new(self.one_arg("@mul")?))),
            "add" => Ast::Prim(PrimAst::Add(Box::new(self.one_arg("@add")?))),
            "sum" => {
                self.expect("(")?;
                let t = self.type_expr()?;
                self.expect(")")?;
                Ast::Prim(PrimAst::Sum(t))
            }
            other => {
                return Err(Error::Syntax {
                    span,
                    message: format!("unknown builtin `@{other}`"),
                })
            }
        };
        Ok(Node::new(ast, span))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_shape() {
        let n = parse_expr("(x::CV) -> sum((i,j), x(i)'*A(i,j)*x(j))").unwrap();
        let Ast::Lambda(ps, body) = n.ast else { panic!() };
        assert_eq!(ps.len(), 1);
        let Ast::Sum(bs, inner) = body.ast else { panic!() };
        assert_eq!(bs.len(), 2);
        assert!(matches!(inner.ast, Ast::Mul(..)));
    }

    #[test]
    fn parenthesized_expression_is_not_a_lambda() {
        let n = parse_expr("(a + b) * c").unwrap();
        assert!(matches!(n.ast, Ast::Mul(..)));
    }

    #[test]
    fn declarations() {
        let p = parse(
            "domain BZ { base = I; periodic = true }\n\
             space T { type = (N, N, N, N) -> C; symmetries = [((2,1,4,3), conj), ((3,4,1,2), id)] }\n\
             (J::T) -> J",
        )
        .unwrap();
        assert_eq!(p.decls.len(), 2);
        let Decl::Space { symmetries, .. } = &p.decls[1] else { panic!() };
        assert_eq!(symmetries[0].perm, vec![2, 1, 4, 3]);
        assert_eq!(symmetries[1].action, "id");
        assert_eq!(p.text, "(J::T) -> J");
    }

    #[test]
    fn expected_set_in_message() {
        let Err(Error::Syntax { span, message }) = parse("(x::R -> x") else { panic!() };
        assert_eq!(span.line, 1);
        assert!(message.contains("expected"), "{message}");
    }

    #[test]
    fn rational_literal() {
        let n = parse_expr("1/3").unwrap();
        assert_eq!(n.ast, Ast::Num(Num::ratio(1, 3, false)));
    }
}
