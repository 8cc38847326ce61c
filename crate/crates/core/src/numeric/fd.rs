//! Realification and Wirtinger finite differences.
//!
//! `realify` is the map that interleaves real and imaginary parts of every
//! entry; a complex map `f` is differentiated through `realify ∘ f ∘ unrealify`.

use std::sync::Arc;

use num_complex::Complex;

use super::tensor::Tensor;
use super::value::Value;
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Central-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Flatten scalars, tensors and tuples to `[re, im, re, im, ..]`.
pub fn realify<T: Scalar>(v: &Value<T>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    push_real(v, &mut out)?;
    Ok(out)
}

fn push_real<T: Scalar>(v: &Value<T>, out: &mut Vec<T>) -> Result<()> {
    match v {
        Value::Tensor(t) => {
            for z in &t.data {
                out.push(z.re);
                out.push(z.im);
            }
        }
        Value::Tuple(vs) => {
            for x in vs {
                push_real(x, out)?;
            }
        }
        other => {
            let z = other
                .as_scalar()
                .ok_or_else(|| Error::Eval(format!("cannot realify {other:?}")))?;
            out.push(z.re);
            out.push(z.im);
        }
    }
    Ok(())
}

/// Inverse of [`realify`], shaped like `template`.
pub fn unrealify<T: Scalar>(template: &Value<T>, r: &[T]) -> Result<Value<T>> {
    let mut pos = 0;
    let v = take(template, r, &mut pos)?;
    if pos != r.len() {
        return Err(Error::Eval(format!(
            "realified vector has {} entries, shape needs {pos}",
            r.len()
        )));
    }
    Ok(v)
}

fn take<T: Scalar>(template: &Value<T>, r: &[T], pos: &mut usize) -> Result<Value<T>> {
    let next = |pos: &mut usize| -> Result<Complex<T>> {
        if *pos + 2 > r.len() {
            return Err(Error::Eval("realified vector is too short".into()));
        }
        let z = Complex::new(r[*pos], r[*pos + 1]);
        *pos += 2;
        Ok(z)
    };
    Ok(match template {
        Value::Tensor(t) => {
            let mut data = Vec::with_capacity(t.data.len());
            for _ in 0..t.data.len() {
                data.push(next(pos)?);
            }
            Value::Tensor(Arc::new(Tensor {
                axes: t.axes.clone(),
                data,
            }))
        }
        Value::Tuple(vs) => Value::Tuple(vs.iter().map(|x| take(x, r, pos)).collect::<Result<_>>()?),
        _ => Value::Scalar(next(pos)?),
    })
}

/// The realified map `realify ∘ f ∘ unrealify`, at a real vector `r`
/// shaped like `template`.
pub fn realified<T: Scalar>(
    f: &mut dyn FnMut(&Value<T>) -> Result<Value<T>>,
    template: &Value<T>,
    r: &[T],
) -> Result<Vec<T>> {
    realify(&f(&unrealify(template, r)?)?)
}

/// Vector-Jacobian product of `f` at `x` with cotangent `k`, by central
/// differences on every real coordinate of `x`.
///
/// For a real-valued objective and `k = 1` this is the gradient
/// `∂f/∂a + i ∂f/∂b` of every complex entry `a + ib`. Coordinates whose
/// `active` flag is false (imaginary parts of real inputs) are not perturbed
/// and get a zero component.
pub fn fd_pullback<T: Scalar>(
    f: &mut dyn FnMut(&Value<T>) -> Result<Value<T>>,
    x: &Value<T>,
    k: &Value<T>,
    h: T,
    active: Option<&[bool]>,
) -> Result<Value<T>> {
    let base = realify(x)?;
    let kr = realify(k)?;
    let two_h = h + h;
    let mut grad = vec![T::zero(); base.len()];
    for m in 0..base.len() {
        if active.is_some_and(|a| !a.get(m).copied().unwrap_or(true)) {
            continue;
        }
        let mut plus = base.clone();
        plus[m] = plus[m] + h;
        let mut minus = base.clone();
        minus[m] = minus[m] - h;
        let fp = realify(&f(&unrealify(x, &plus)?)?)?;
        let fm = realify(&f(&unrealify(x, &minus)?)?)?;
        if fp.len() != kr.len() {
            return Err(Error::Eval(format!(
                "cotangent has {} real entries, output has {}",
                kr.len(),
                fp.len()
            )));
        }
        grad[m] = fp
            .iter()
            .zip(&fm)
            .zip(&kr)
            .fold(T::zero(), |acc, ((p, q), c)| acc + (*p - *q) / two_h * *c);
    }
    unrealify(x, &grad)
}

/// Wirtinger gradient of a real-valued objective by central differences.
pub fn wirtinger_fd_grad<T: Scalar>(
    f: &mut dyn FnMut(&Value<T>) -> Result<Value<T>>,
    x: &Value<T>,
    h: T,
    active: Option<&[bool]>,
) -> Result<Value<T>> {
    let y = f(x)?
        .as_scalar()
        .ok_or_else(|| Error::Eval("objective is not scalar".into()))?;
    let limit = T::from_f64(1e-9).unwrap() * T::one().max(y.re.abs());
    if y.im.abs() > limit {
        return Err(Error::Eval(format!(
            "objective is not real: imaginary part {} at the base point",
            y.im
        )));
    }
    fd_pullback(f, x, &Value::real(T::one()), h, active)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_squared_gradient() {
        let mut f = |v: &Value<f64>| {
            let z = v.as_scalar().unwrap();
            Ok(Value::real(z.norm_sqr()))
        };
        let g = wirtinger_fd_grad(&mut f, &Value::Scalar(Complex::new(1.0, 2.0)), DEFAULT_STEP, None).unwrap();
        let g = g.as_scalar().unwrap();
        assert!((g - Complex::new(2.0, 4.0)).norm() < 1e-8);
    }

    #[test]
    fn complex_output_is_rejected() {
        let mut f = |v: &Value<f64>| Ok(v.clone());
        let r = wirtinger_fd_grad(&mut f, &Value::Scalar(Complex::new(1.0, 2.0)), DEFAULT_STEP, None);
        assert!(r.is_err());
    }

    #[test]
    fn realify_round_trip() {
        let v: Value<f64> = Value::Tuple(vec![
            Value::Scalar(Complex::new(1.0, -1.0)),
            Value::Scalar(Complex::new(0.5, 3.0)),
        ]);
        let r = realify(&v).unwrap();
        assert_eq!(r, vec![1.0, -1.0, 0.5, 3.0]);
        assert_eq!(realify(&unrealify(&v, &r).unwrap()).unwrap(), r);
    }
}
