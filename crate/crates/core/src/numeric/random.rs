use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::env::NumericEnv;
use super::tensor::{Axis, Tensor};
use super::value::Value;
use crate::error::{Error, Result};
use crate::ir::{symmetry_group, GroupElement, ScalarKind, Space, TypeExpr};
use crate::num::Scalar;

pub type OracleRng = ChaCha8Rng;

pub fn rng_for(seed: u64) -> OracleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform<T: Scalar>(rng: &mut OracleRng) -> T {
    T::from_f64(rng.gen_range(-1.0..1.0)).expect("f64 converts to the scalar type")
}

pub fn random_scalar<T: Scalar>(kind: ScalarKind, rng: &mut OracleRng) -> Complex<T> {
    let re = uniform(rng);
    match kind {
        ScalarKind::Real => Complex::new(re, T::zero()),
        ScalarKind::Complex => Complex::new(re, uniform(rng)),
    }
}

pub fn random_tensor<T: Scalar>(axes: Vec<Axis>, kind: ScalarKind, rng: &mut OracleRng) -> Tensor<T> {
    let mut t = Tensor::zeros(axes);
    for z in t.data.iter_mut() {
        *z = random_scalar(kind, rng);
    }
    t
}

/// Average `t` over the symmetry group: the result satisfies every
/// declared symmetry.
pub fn project<T: Scalar>(t: &Tensor<T>, group: &[GroupElement]) -> Result<Tensor<T>> {
    for g in group {
        for (k, &(src, _)) in g.slots.iter().enumerate() {
            if t.axes[k].extent != t.axes[src].extent {
                return Err(Error::Symmetry(format!(
                    "symmetry maps axis {} onto axis {} of a different extent",
                    src + 1,
                    k + 1
                )));
            }
        }
    }
    let scale = T::from_usize(group.len()).expect("group size fits the scalar type");
    Tensor::from_fn(t.axes.clone(), |idx| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for g in group {
            let img: Vec<i64> = g
                .slots
                .iter()
                .map(|&(src, neg)| if neg { -idx[src] } else { idx[src] })
                .collect();
            let v = t.get(&img)?;
            acc = acc + if g.conj { v.conj() } else { v };
        }
        Ok(acc / scale)
    })
}

/// Seeded random tensor of a space, projected onto its symmetric subspace.
pub fn random_symmetric<T: Scalar>(space: &Space, env: &NumericEnv<T>) -> Result<Tensor<T>> {
    random_symmetric_with(space, env, &mut rng_for(env.seed))
}

pub fn random_symmetric_with<T: Scalar>(
    space: &Space,
    env: &NumericEnv<T>,
    rng: &mut OracleRng,
) -> Result<Tensor<T>> {
    let axes = space
        .indices
        .iter()
        .map(|d| env.axis(&TypeExpr::Domain(d.clone())))
        .collect::<Result<Vec<_>>>()?;
    let raw = random_tensor(axes, space.elem, rng);
    let group = symmetry_group(space.indices.len(), &space.symmetries)?;
    project(&raw, &group)
}

/// A random value of the given type.
pub fn random_value<T: Scalar>(ty: &TypeExpr, env: &NumericEnv<T>, rng: &mut OracleRng) -> Result<Value<T>> {
    match ty {
        TypeExpr::Real => Ok(Value::Scalar(random_scalar(ScalarKind::Real, rng))),
        TypeExpr::Complex => Ok(Value::Scalar(random_scalar(ScalarKind::Complex, rng))),
        TypeExpr::Space(s) => Ok(Value::Tensor(Arc::new(random_symmetric_with(s, env, rng)?))),
        TypeExpr::Product(ts) => Ok(Value::Tuple(
            ts.iter().map(|t| random_value(t, env, rng)).collect::<Result<_>>()?,
        )),
        TypeExpr::Func(args, ret) if args.iter().all(TypeExpr::is_index) && ret.is_scalar() => {
            let axes = args.iter().map(|a| env.axis(a)).collect::<Result<Vec<_>>>()?;
            let kind = ret.codomain_scalar().unwrap_or(ScalarKind::Complex);
            Ok(Value::Tensor(Arc::new(random_tensor(axes, kind, rng))))
        }
        other => Err(Error::Eval(format!("cannot draw a random value of type `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::frontend::typecheck;
    use crate::ir::Context;

    fn space(src: &str, name: &str) -> Arc<Space> {
        let (_, ctx) = typecheck(&parse(&format!("{src}\n0")).unwrap(), &Context::builtin()).unwrap();
        ctx.space(name).unwrap()
    }

    #[test]
    fn hermitian_projection() {
        let her = Context::builtin().space("Her").unwrap();
        let env = NumericEnv::<f64>::new(7).with_extent("N", 3);
        let a = random_symmetric(&her, &env).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = a.get(&[i, j]).unwrap() - a.get(&[j, i]).unwrap().conj();
                assert!(d.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn two_electron_symmetries() {
        let t = space(
            "space T { type = (N, N, N, N) -> C; symmetries = [((2,1,4,3), conj), ((3,4,1,2), id)] }",
            "T",
        );
        let env = NumericEnv::<f64>::new(3).with_extent("N", 3);
        let j = random_symmetric(&t, &env).unwrap();
        for idx in j.index_tuples() {
            let (p, q, r, s) = (idx[0], idx[1], idx[2], idx[3]);
            let v = j.get(&[p, q, r, s]).unwrap();
            assert!((v - j.get(&[q, p, s, r]).unwrap().conj()).norm() < 1e-15);
            assert!((v - j.get(&[r, s, p, q]).unwrap()).norm() < 1e-15);
        }
    }

    #[test]
    fn ineg_vector_is_even() {
        let sv = space(
            "domain X { symmetric = true }\nspace SV { type = (X) -> R; symmetries = [((1,), ineg)] }",
            "SV",
        );
        let env = NumericEnv::<f64>::new(1).with_extent("X", 5);
        let w = random_symmetric(&sv, &env).unwrap();
        for b in -2..=2 {
            assert!((w.get(&[b]).unwrap() - w.get(&[-b]).unwrap()).norm() < 1e-15);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let her = Context::builtin().space("Her").unwrap();
        let env = NumericEnv::<f64>::new(11);
        let a = random_symmetric(&her, &env).unwrap();
        let group = symmetry_group(2, &her.symmetries).unwrap();
        let b = project(&a, &group).unwrap();
        let diff = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-15);
    }
}
