use thiserror::Error;

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{span}: syntax error: {message}")]
    Syntax { span: Span, message: String },
    #[error("type error: {0}")]
    Type(String),
    #[error("unknown identifier `{0}`")]
    Unknown(String),
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("malformed symmetry: {0}")]
    Symmetry(String),
    #[error("step budget of {0} reductions exhausted")]
    StepBudget(usize),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("not differentiable: {0}")]
    NotDifferentiable(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("{span}: {source}")]
    At { span: Span, source: Box<Error> },
}

impl Error {
    /// Attach a source position unless the error already carries one.
    pub fn at(self, span: Span) -> Error {
        match self {
            Error::Syntax { .. } | Error::At { .. } => self,
            other => Error::At {
                span,
                source: Box::new(other),
            },
        }
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            Error::Syntax { span, .. } | Error::At { span, .. } => Some(*span),
            _ => None,
        }
    }

    /// The message without its position prefix.
    pub fn message(&self) -> String {
        match self {
            Error::Syntax { message, .. } => format!("syntax error: {message}"),
            Error::At { source, .. } => source.message(),
            other => other.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
