//! Surface syntax, before name resolution and typing.

use crate::error::Span;
use crate::num::Num;

#[derive(Clone, Debug, PartialEq)]
pub enum TypeAst {
    Name(String, Span),
    Func(Vec<TypeAst>, Box<TypeAst>),
    Tuple(Vec<TypeAst>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Option<TypeAst>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PrimAst {
    Conj,
    Identity,
    Mul(Box<Node>),
    Add(Box<Node>),
    Sum(TypeAst),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Var(String),
    Num(Num),
    Lambda(Vec<Param>, Box<Node>),
    Apply(Box<Node>, Vec<Node>),
    Sum(Vec<Param>, Box<Node>),
    Delta(Box<Node>, Box<Node>, Box<Node>),
    Conj(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Tuple(Vec<Node>),
    Let(Vec<(String, Node)>, Box<Node>),
    Pullback(Box<Node>),
    Transpose(Box<Node>),
    Adjoint(Box<Node>),
    Comb(crate::ir::Comb),
    Prim(PrimAst),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub ast: Ast,
    pub span: Span,
}

impl Node {
    pub fn new(ast: Ast, span: Span) -> Self {
        Node { ast, span }
    }

    pub fn boxed(ast: Ast, span: Span) -> Box<Self> {
        Box::new(Node { ast, span })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainValue {
    Bool(bool),
    Int(i64),
    Name(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryAst {
    pub perm: Vec<usize>,
    pub action: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decl {
    Domain {
        name: String,
        fields: Vec<(String, DomainValue, Span)>,
        span: Span,
    },
    Space {
        name: String,
        ty: TypeAst,
        symmetries: Vec<SymmetryAst>,
        span: Span,
    },
}

/// A parsed source file: declarations followed by one expression.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceProgram {
    pub decls: Vec<Decl>,
    pub body: Node,
    /// The text of the main expression.
    pub text: String,
}
