use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use super::tensor::{Axis, Tensor};
use crate::error::{Error, Result};
use crate::ir::{Binder, Domain, Expr, Name};
use crate::num::Scalar;

/// Runtime value of the numeric oracle.
#[derive(Clone)]
pub enum Value<T> {
    Scalar(Complex<T>),
    Index { value: i64, domain: Option<Arc<Domain>> },
    Tensor(Arc<Tensor<T>>),
    Closure(Arc<Closure<T>>),
    Builtin(Arc<Builtin<T>>),
    /// A function applied to fewer arguments than it takes.
    Partial(Arc<Value<T>>, Vec<Value<T>>),
    /// Lazy pointwise combination of functions and scalars.
    Pointwise(Arc<Pointwise<T>>),
    Tuple(Vec<Value<T>>),
    /// Additive identity of every type.
    Zero,
}

pub struct Closure<T> {
    pub params: Vec<Binder>,
    pub body: Expr,
    pub scope: Vec<(Name, Value<T>)>,
}

pub enum Builtin<T> {
    B,
    C,
    I,
    Conj,
    Identity,
    MulBy(Value<T>),
    AddBy(Value<T>),
    Contract(Axis),
}

impl<T> Builtin<T> {
    pub fn arity(&self) -> usize {
        match self {
            Builtin::B | Builtin::C => 3,
            _ => 1,
        }
    }
}

pub enum Pointwise<T> {
    Add(Vec<Value<T>>),
    Mul(Vec<Value<T>>),
    Conj(Value<T>),
}

impl<T: Scalar> fmt::Debug for Value<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Scalar(z) => write!(f, "{z}"),
            Value::Index { value, .. } => write!(f, "#{value}"),
            Value::Tensor(t) => write!(f, "tensor{:?}", t.data),
            Value::Closure(c) => write!(f, "<closure/{}>", c.params.len()),
            Value::Builtin(_) => f.write_str("<builtin>"),
            Value::Partial(g, a) => write!(f, "<partial {g:?} {a:?}>"),
            Value::Pointwise(_) => f.write_str("<pointwise>"),
            Value::Tuple(vs) => f.debug_list().entries(vs).finish(),
            Value::Zero => f.write_str("0"),
        }
    }
}

impl<T: Scalar> Value<T> {
    pub fn real(x: T) -> Self {
        Value::Scalar(Complex::new(x, T::zero()))
    }

    pub fn is_function(&self) -> bool {
        matches!(
            self,
            Value::Tensor(_) | Value::Closure(_) | Value::Builtin(_) | Value::Partial(..) | Value::Pointwise(_)
        )
    }

    pub fn as_scalar(&self) -> Option<Complex<T>> {
        match self {
            Value::Scalar(z) => Some(*z),
            Value::Zero => Some(Complex::new(T::zero(), T::zero())),
            Value::Index { value, .. } => Some(Complex::new(T::from_i64(*value)?, T::zero())),
            _ => None,
        }
    }

    /// Integer view used for index positions.
    pub fn as_index(&self) -> Result<i64> {
        match self {
            Value::Index { value, .. } => Ok(*value),
            Value::Zero => Ok(0),
            Value::Scalar(z) if z.im == T::zero() && z.re == z.re.round() => z
                .re
                .to_i64()
                .ok_or_else(|| Error::Eval(format!("index {z} out of range"))),
            other => Err(Error::Eval(format!("{other:?} is not an index"))),
        }
    }
}

pub fn add<T: Scalar>(a: Value<T>, b: Value<T>) -> Result<Value<T>> {
    Ok(match (a, b) {
        (Value::Zero, x) | (x, Value::Zero) => x,
        (Value::Tuple(xs), Value::Tuple(ys)) if xs.len() == ys.len() => Value::Tuple(
            xs.into_iter()
                .zip(ys)
                .map(|(x, y)| add(x, y))
                .collect::<Result<_>>()?,
        ),
        (Value::Tensor(x), Value::Tensor(y)) if x.axes == y.axes => Value::Tensor(Arc::new(Tensor {
            axes: x.axes.clone(),
            data: x.data.iter().zip(&y.data).map(|(p, q)| p + q).collect(),
        })),
        (x, y) if x.is_function() || y.is_function() => {
            Value::Pointwise(Arc::new(Pointwise::Add(vec![x, y])))
        }
        (x, y) => match (x.as_scalar(), y.as_scalar()) {
            (Some(p), Some(q)) => Value::Scalar(p + q),
            _ => return Err(Error::Eval(format!("cannot add {x:?} and {y:?}"))),
        },
    })
}

pub fn mul<T: Scalar>(a: Value<T>, b: Value<T>) -> Result<Value<T>> {
    Ok(match (a, b) {
        (Value::Zero, _) | (_, Value::Zero) => Value::Zero,
        (Value::Scalar(s), Value::Tensor(t)) | (Value::Tensor(t), Value::Scalar(s)) => {
            Value::Tensor(Arc::new(t.map(|z| z * s)))
        }
        (Value::Scalar(s), Value::Tuple(xs)) | (Value::Tuple(xs), Value::Scalar(s)) => Value::Tuple(
            xs.into_iter()
                .map(|x| mul(Value::Scalar(s), x))
                .collect::<Result<_>>()?,
        ),
        (x, y) if x.is_function() || y.is_function() => {
            Value::Pointwise(Arc::new(Pointwise::Mul(vec![x, y])))
        }
        (x, y) => match (x.as_scalar(), y.as_scalar()) {
            (Some(p), Some(q)) => Value::Scalar(p * q),
            _ => return Err(Error::Eval(format!("cannot multiply {x:?} and {y:?}"))),
        },
    })
}

pub fn conj<T: Scalar>(a: Value<T>) -> Result<Value<T>> {
    Ok(match a {
        Value::Scalar(z) => Value::Scalar(z.conj()),
        Value::Zero | Value::Index { .. } => a,
        Value::Tensor(t) => Value::Tensor(Arc::new(t.map(|z| z.conj()))),
        Value::Tuple(xs) => Value::Tuple(xs.into_iter().map(conj).collect::<Result<_>>()?),
        f => Value::Pointwise(Arc::new(Pointwise::Conj(f))),
    })
}

/// Exact equality of two index or scalar values, for `δ`.
pub fn same<T: Scalar>(a: &Value<T>, b: &Value<T>, extent_of: impl Fn(&Domain) -> Result<usize>) -> Result<bool> {
    let periodic = |v: &Value<T>| match v {
        Value::Index {
            domain: Some(d), ..
        } if d.periodic => Some(d.clone()),
        _ => None,
    };
    match (a, b) {
        (Value::Index { .. }, _) | (_, Value::Index { .. }) => {
            let (x, y) = (a.as_index()?, b.as_index()?);
            match periodic(a).or_else(|| periodic(b)) {
                Some(d) => {
                    let n = extent_of(&d)? as i64;
                    Ok(x.rem_euclid(n) == y.rem_euclid(n))
                }
                None => Ok(x == y),
            }
        }
        _ => match (a.as_scalar(), b.as_scalar()) {
            (Some(x), Some(y)) => Ok(x == y),
            _ => Err(Error::Eval(
                "delta over function values has no numeric meaning".into(),
            )),
        },
    }
}
