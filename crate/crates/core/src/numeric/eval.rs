use std::sync::Arc;

use num_complex::Complex;

use super::env::NumericEnv;
use super::tensor::{Axis, Tensor};
use super::value::{add, conj, mul, same, Builtin, Closure, Pointwise, Value};
use crate::error::{Error, Result};
use crate::ir::{Comb, Expr, ExprKind, Name, Primitive, TypeExpr};
use crate::num::Scalar;

/// Evaluate a closed term.
pub fn evaluate<T: Scalar>(e: &Expr, env: &NumericEnv<T>) -> Result<Value<T>> {
    Evaluator::new(env).eval(e)
}

/// Apply a value to arguments.
pub fn apply_value<T: Scalar>(f: &Value<T>, args: Vec<Value<T>>, env: &NumericEnv<T>) -> Result<Value<T>> {
    Evaluator::new(env).apply(f.clone(), args)
}

/// Tabulate a function of index arguments into a dense tensor; scalars,
/// tuples and tensors pass through.
pub fn materialize<T: Scalar>(v: &Value<T>, env: &NumericEnv<T>) -> Result<Value<T>> {
    Evaluator::new(env).materialize(v.clone())
}

/// Number of arguments a function value consumes at once.
fn value_arity<T: Scalar>(v: &Value<T>) -> usize {
    match v {
        Value::Closure(c) => c.params.len(),
        Value::Tensor(t) => t.rank().max(1),
        _ => 1,
    }
}

pub struct Evaluator<'a, T> {
    env: &'a NumericEnv<T>,
    stack: Vec<(Name, Value<T>)>,
}

impl<'a, T: Scalar> Evaluator<'a, T> {
    pub fn new(env: &'a NumericEnv<T>) -> Self {
        Evaluator {
            env,
            stack: Vec::new(),
        }
    }

    fn lookup(&self, n: &Name) -> Result<Value<T>> {
        self.stack
            .iter()
            .rev()
            .find(|(k, _)| k == n)
            .map(|(_, v)| v.clone())
            .or_else(|| self.env.bindings.get(n).cloned())
            .ok_or_else(|| Error::Eval(format!("unbound variable `{n}`")))
    }

    pub fn eval(&mut self, e: &Expr) -> Result<Value<T>> {
        match e.kind() {
            ExprKind::Var(n) => self.lookup(n),
            ExprKind::Const(c) => Ok(Value::real(c.to_scalar())),
            ExprKind::Lambda(ps, body) => Ok(Value::Closure(Arc::new(Closure {
                params: ps.clone(),
                body: body.clone(),
                scope: self.stack.clone(),
            }))),
            ExprKind::Apply(f, args) => {
                let f = self.eval(f)?;
                let args = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>>>()?;
                self.apply(f, args)
            }
            ExprKind::Sum(b, body) => {
                let axis = match &b.ty {
                    TypeExpr::Domain(_) => self.env.axis(&b.ty)?,
                    other => {
                        return Err(Error::Eval(format!(
                            "formal contraction over `{other}` cannot be evaluated"
                        )))
                    }
                };
                let mut acc = Value::Zero;
                for v in axis.values() {
                    self.stack.push((
                        b.name.clone(),
                        Value::Index {
                            value: v,
                            domain: Some(axis.domain.clone()),
                        },
                    ));
                    let r = self.eval(body);
                    self.stack.pop();
                    acc = add(acc, r?)?;
                }
                Ok(acc)
            }
            ExprKind::Delta(a, b, k) => {
                let a = self.eval(a)?;
                let b = self.eval(b)?;
                if same(&a, &b, |d| self.env.extent(d))? {
                    self.eval(k)
                } else {
                    Ok(Value::Zero)
                }
            }
            ExprKind::Conj(x) => conj(self.eval(x)?),
            ExprKind::Add(es) => {
                let mut acc = Value::Zero;
                for x in es {
                    acc = add(acc, self.eval(x)?)?;
                }
                Ok(acc)
            }
            ExprKind::Mul(es) => {
                let mut acc = Value::real(T::one());
                for x in es {
                    acc = mul(acc, self.eval(x)?)?;
                }
                Ok(acc)
            }
            ExprKind::Primitive(p) => {
                let b = match p {
                    Primitive::Conj => Builtin::Conj,
                    Primitive::Identity => Builtin::Identity,
                    Primitive::MulBy(v) => Builtin::MulBy(self.eval(v)?),
                    Primitive::AddBy(v) => Builtin::AddBy(self.eval(v)?),
                    Primitive::Contract(t) => Builtin::Contract(self.env.axis(t).map_err(|_| {
                        Error::Eval(format!("formal contraction over `{t}` cannot be evaluated"))
                    })?),
                };
                Ok(Value::Builtin(Arc::new(b)))
            }
            ExprKind::Comb(c) => Ok(Value::Builtin(Arc::new(match c {
                Comb::B => Builtin::B,
                Comb::C => Builtin::C,
                Comb::I => Builtin::I,
            }))),
            ExprKind::PullbackOf(h) => Err(Error::Eval(format!(
                "unexpanded pullback of `{h}` cannot be evaluated"
            ))),
            ExprKind::Tuple(es) => Ok(Value::Tuple(
                es.iter().map(|x| self.eval(x)).collect::<Result<_>>()?,
            )),
            ExprKind::Let(bs, body) => {
                let len = self.stack.len();
                for (n, v) in bs {
                    match self.eval(v) {
                        Ok(v) => self.stack.push((n.clone(), v)),
                        Err(err) => {
                            self.stack.truncate(len);
                            return Err(err);
                        }
                    }
                }
                let r = self.eval(body);
                self.stack.truncate(len);
                r
            }
            ExprKind::IndexArith(ts) => {
                let mut total = 0i64;
                let mut domain = None;
                for t in ts {
                    let v = self.eval(&t.atom)?;
                    if let Value::Index { domain: Some(d), .. } = &v {
                        if d.periodic || domain.is_none() {
                            domain = Some(d.clone());
                        }
                    }
                    let x = v.as_index()?;
                    total += if t.negated { -x } else { x };
                }
                if let Some(d) = domain.as_ref().filter(|d| d.periodic) {
                    total = total.rem_euclid(self.env.extent(d)? as i64);
                }
                Ok(Value::Index { value: total, domain })
            }
            ExprKind::Transpose(x) => {
                let v = self.eval(x)?;
                match self.materialize(v)? {
                    Value::Tensor(t) => Ok(Value::Tensor(Arc::new(t.transpose()))),
                    v => Ok(v),
                }
            }
            ExprKind::Adjoint(x) => {
                let v = self.eval(x)?;
                match conj(self.materialize(v)?)? {
                    Value::Tensor(t) => Ok(Value::Tensor(Arc::new(t.transpose()))),
                    v => Ok(v),
                }
            }
            ExprKind::MatMul(es) => {
                let mut acc: Option<Tensor<T>> = None;
                let mut scale = Complex::new(T::one(), T::zero());
                for x in es {
                    let v = self.eval(x)?;
                    match self.materialize(v)? {
                        Value::Tensor(t) => {
                            acc = Some(match acc {
                                None => (*t).clone(),
                                Some(a) => a.contract(&t)?,
                            })
                        }
                        v => {
                            scale = scale
                                * v.as_scalar().ok_or_else(|| {
                                    Error::Eval(format!("matrix product with {v:?}"))
                                })?
                        }
                    }
                }
                Ok(match acc {
                    None => Value::Scalar(scale),
                    Some(t) if t.rank() == 0 => Value::Scalar(t.data[0] * scale),
                    Some(t) => Value::Tensor(Arc::new(t.map(|z| z * scale))),
                })
            }
        }
    }

    pub fn apply(&mut self, f: Value<T>, args: Vec<Value<T>>) -> Result<Value<T>> {
        if args.is_empty() {
            return Ok(f);
        }
        match f {
            Value::Tensor(t) => {
                let r = t.rank();
                if args.len() < r {
                    return Ok(Value::Partial(Arc::new(Value::Tensor(t)), args));
                }
                let idx = args[..r].iter().map(Value::as_index).collect::<Result<Vec<_>>>()?;
                let v = Value::Scalar(t.get(&idx)?);
                self.apply(v, args[r..].to_vec())
            }
            Value::Closure(c) => {
                let n = c.params.len();
                if args.len() < n {
                    return Ok(Value::Partial(Arc::new(Value::Closure(c)), args));
                }
                let mut inner = Evaluator {
                    env: self.env,
                    stack: c.scope.clone(),
                };
                for (p, a) in c.params.iter().zip(&args) {
                    inner.stack.push((p.name.clone(), a.clone()));
                }
                let v = inner.eval(&c.body)?;
                self.apply(v, args[n..].to_vec())
            }
            Value::Builtin(b) => {
                let n = match &*b {
                    Builtin::C => 2 + args.first().map_or(1, value_arity),
                    _ => b.arity(),
                };
                if args.len() < n {
                    return Ok(Value::Partial(Arc::new(Value::Builtin(b)), args));
                }
                let mut it = args.into_iter();
                let v = match &*b {
                    Builtin::B => {
                        let (f, g, x) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                        let gx = self.apply(g, vec![x])?;
                        self.apply(f, vec![gx])?
                    }
                    Builtin::C => {
                        let (g, x) = (it.next().unwrap(), it.next().unwrap());
                        let bs: Vec<_> = it.by_ref().take(n - 2).collect();
                        let gb = self.apply(g, bs)?;
                        self.apply(gb, vec![x])?
                    }
                    Builtin::I | Builtin::Identity => it.next().unwrap(),
                    Builtin::Conj => conj(it.next().unwrap())?,
                    Builtin::MulBy(v) => mul(v.clone(), it.next().unwrap())?,
                    Builtin::AddBy(v) => add(v.clone(), it.next().unwrap())?,
                    Builtin::Contract(axis) => {
                        let x = it.next().unwrap();
                        self.contract(&x, axis)?
                    }
                };
                self.apply(v, it.collect())
            }
            Value::Partial(g, mut prev) => {
                prev.extend(args);
                self.apply((*g).clone(), prev)
            }
            Value::Pointwise(p) => match &*p {
                Pointwise::Add(vs) => {
                    let mut acc = Value::Zero;
                    for v in vs {
                        acc = add(acc, self.apply_operand(v, &args)?)?;
                    }
                    Ok(acc)
                }
                Pointwise::Mul(vs) => {
                    let mut acc = Value::real(T::one());
                    for v in vs {
                        acc = mul(acc, self.apply_operand(v, &args)?)?;
                    }
                    Ok(acc)
                }
                Pointwise::Conj(v) => conj(self.apply(v.clone(), args)?),
            },
            Value::Zero => Ok(Value::Zero),
            other => Err(Error::Eval(format!("cannot apply {other:?} to arguments"))),
        }
    }

    /// Scalars broadcast over the arguments of a pointwise combination.
    fn apply_operand(&mut self, v: &Value<T>, args: &[Value<T>]) -> Result<Value<T>> {
        if v.is_function() {
            self.apply(v.clone(), args.to_vec())
        } else {
            Ok(v.clone())
        }
    }

    fn contract(&mut self, f: &Value<T>, axis: &Axis) -> Result<Value<T>> {
        let mut acc = Value::Zero;
        for v in axis.values() {
            let i = Value::Index {
                value: v,
                domain: Some(axis.domain.clone()),
            };
            acc = add(acc, self.apply(f.clone(), vec![i])?)?;
        }
        Ok(acc)
    }

    /// Index axes a function value ranges over, when they are known.
    fn axes_of(&self, v: &Value<T>) -> Result<Option<Vec<Axis>>> {
        Ok(match v {
            Value::Tensor(t) => Some(t.axes.clone()),
            Value::Closure(c) => {
                if c.params.iter().all(|p| p.ty.is_index()) {
                    Some(
                        c.params
                            .iter()
                            .map(|p| self.env.axis(&p.ty))
                            .collect::<Result<_>>()?,
                    )
                } else {
                    None
                }
            }
            Value::Partial(g, args) => match (&**g, args.as_slice()) {
                // C(h)(x) = b ↦ h(b)(x) ranges over the first axis of h
                (Value::Builtin(b), [h, _]) if matches!(**b, Builtin::C) => {
                    self.axes_of(h)?.map(|a| a[..1.min(a.len())].to_vec())
                }
                // B(f)(g) = v ↦ f(g(v)) ranges over the axes of g
                (Value::Builtin(b), [_, h]) if matches!(**b, Builtin::B) => self.axes_of(h)?,
                _ => self.axes_of(g)?.map(|a| a[args.len().min(a.len())..].to_vec()),
            },
            Value::Pointwise(p) => {
                let vs: Vec<&Value<T>> = match &**p {
                    Pointwise::Add(vs) | Pointwise::Mul(vs) => vs.iter().collect(),
                    Pointwise::Conj(v) => vec![v],
                };
                let mut found = None;
                for v in vs {
                    if let Some(a) = self.axes_of(v)? {
                        found = Some(a);
                        break;
                    }
                }
                found
            }
            _ => None,
        })
    }

    /// Turn index functions into dense tensors, recursively through tuples
    /// and curried results.
    pub fn materialize(&mut self, v: Value<T>) -> Result<Value<T>> {
        match v {
            Value::Tuple(vs) => Ok(Value::Tuple(
                vs.into_iter().map(|x| self.materialize(x)).collect::<Result<_>>()?,
            )),
            Value::Tensor(_) | Value::Scalar(_) | Value::Zero | Value::Index { .. } => Ok(v),
            f => {
                let axes = self.axes_of(&f)?.ok_or_else(|| {
                    Error::Eval(format!("cannot tabulate {f:?}: its index domains are unknown"))
                })?;
                let shell = Tensor::<T>::zeros(axes.clone());
                let mut data = Vec::with_capacity(shell.len());
                let mut inner_axes: Option<Vec<Axis>> = None;
                for idx in shell.index_tuples() {
                    let args = idx
                        .iter()
                        .zip(&axes)
                        .map(|(&x, a)| Value::Index {
                            value: x,
                            domain: Some(a.domain.clone()),
                        })
                        .collect();
                    let r = self.apply(f.clone(), args)?;
                    match self.materialize(r)? {
                        Value::Tensor(t) => {
                            inner_axes.get_or_insert_with(|| t.axes.clone());
                            data.extend(t.data.iter().copied());
                        }
                        Value::Zero if inner_axes.is_some() => {
                            let n: usize = inner_axes.as_ref().unwrap().iter().map(|a| a.extent).product();
                            data.extend(std::iter::repeat_n(Complex::new(T::zero(), T::zero()), n));
                        }
                        s => data.push(s.as_scalar().ok_or_else(|| {
                            Error::Eval(format!("function entry {s:?} is not a scalar"))
                        })?),
                    }
                }
                let mut all = axes;
                all.extend(inner_axes.unwrap_or_default());
                if data.len() != all.iter().map(|a| a.extent).product::<usize>() {
                    return Err(Error::Eval("ragged function value".into()));
                }
                Ok(Value::Tensor(Arc::new(Tensor { axes: all, data })))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_expr;
    use crate::ir::Context;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn identity_quadratic_form() {
        let ctx = Context::builtin();
        let e = load_expr("(A::CM) -> (x::CV) -> sum((i, j), x(i)' * A(i, j) * x(j))", &ctx).unwrap();
        let env = NumericEnv::<f64>::new(0).with_extent("N", 2);
        let n = env.axis(&TypeExpr::Domain(ctx.domain("N").unwrap())).unwrap();
        let a = Tensor::from_fn(vec![n.clone(), n.clone()], |i| {
            Ok(if i[0] == i[1] { c(1.0, 0.0) } else { c(0.0, 0.0) })
        })
        .unwrap();
        let x = Tensor::from_fn(vec![n], |i| Ok(if i[0] == 0 { c(1.0, 0.0) } else { c(0.0, 1.0) })).unwrap();
        let f = evaluate(&e, &env).unwrap();
        let v = apply_value(
            &f,
            vec![Value::Tensor(Arc::new(a)), Value::Tensor(Arc::new(x))],
            &env,
        )
        .unwrap();
        assert_eq!(v.as_scalar().unwrap(), c(2.0, 0.0));
    }

    #[test]
    fn delta_selects_payload() {
        let env = NumericEnv::<f64>::new(0);
        let ctx = Context::builtin();
        let yes = load_expr("delta(1, 1, 5)", &ctx).unwrap();
        let no = load_expr("delta(1, 2, 5)", &ctx).unwrap();
        assert_eq!(evaluate(&yes, &env).unwrap().as_scalar().unwrap(), c(5.0, 0.0));
        assert_eq!(evaluate(&no, &env).unwrap().as_scalar().unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn combinators_evaluate_by_definition() {
        let env = NumericEnv::<f64>::new(0);
        let ctx = Context::builtin();
        let e = load_expr("@B(@mul(3))(@add(1))(2)", &ctx).unwrap();
        assert_eq!(evaluate(&e, &env).unwrap().as_scalar().unwrap(), c(9.0, 0.0));
        let e = load_expr("@C((b::R) -> (x::R) -> b * x + 1)(2)(5)", &ctx).unwrap();
        assert_eq!(evaluate(&e, &env).unwrap().as_scalar().unwrap(), c(11.0, 0.0));
    }

    #[test]
    fn functions_tabulate() {
        let env = NumericEnv::<f64>::new(0).with_extent("N", 3);
        let ctx = Context::builtin();
        let e = load_expr("(i::N) -> (j::N) -> delta(i, j, 1)", &ctx).unwrap();
        let Value::Tensor(t) = materialize(&evaluate(&e, &env).unwrap(), &env).unwrap() else {
            panic!()
        };
        assert_eq!(t.rank(), 2);
        assert_eq!(t.get(&[1, 1]).unwrap(), c(1.0, 0.0));
        assert_eq!(t.get(&[1, 2]).unwrap(), c(0.0, 0.0));
    }
}
