use std::collections::BTreeMap;

use super::tensor::Axis;
use super::value::Value;
use crate::error::{Error, Result};
use crate::ir::{Domain, Name, TypeExpr};
use crate::num::Scalar;

/// Finite extents and variable bindings for numeric evaluation.
#[derive(Clone)]
pub struct NumericEnv<T> {
    pub extents: BTreeMap<String, usize>,
    pub bindings: BTreeMap<Name, Value<T>>,
    pub seed: u64,
}

/// Extents used when a domain is not given one explicitly.
pub const DEFAULT_EXTENTS: &[(&str, usize)] = &[("N", 4), ("I", 3)];

impl<T: Scalar> NumericEnv<T> {
    pub fn new(seed: u64) -> Self {
        NumericEnv {
            extents: DEFAULT_EXTENTS.iter().map(|&(n, k)| (n.to_string(), k)).collect(),
            bindings: BTreeMap::new(),
            seed,
        }
    }

    pub fn with_extent(mut self, domain: &str, k: usize) -> Self {
        self.extents.insert(domain.to_string(), k);
        self
    }

    pub fn bind(&mut self, name: &str, v: Value<T>) {
        self.bindings.insert(Name::from(name), v);
    }

    pub fn extent(&self, d: &Domain) -> Result<usize> {
        let k = *self
            .extents
            .get(&d.name)
            .ok_or_else(|| Error::Eval(format!("no extent given for domain {}", d.name)))?;
        if k == 0 {
            return Err(Error::Eval(format!("domain {} has extent 0", d.name)));
        }
        if d.symmetric && k % 2 == 0 {
            return Err(Error::Eval(format!(
                "symmetric domain {} needs an odd extent 2m+1, got {k}",
                d.name
            )));
        }
        Ok(k)
    }

    pub fn axis(&self, t: &TypeExpr) -> Result<Axis> {
        match t {
            TypeExpr::Domain(d) => Ok(Axis {
                domain: d.clone(),
                extent: self.extent(d)?,
            }),
            other => Err(Error::Eval(format!("`{other}` is not a finite index domain"))),
        }
    }

    /// Axes of a tensor-shaped type, or `None` for scalars.
    pub fn axes(&self, t: &TypeExpr) -> Result<Option<Vec<Axis>>> {
        match t.signature() {
            Some((args, _)) => args.iter().map(|a| self.axis(a)).collect::<Result<_>>().map(Some),
            None => Ok(None),
        }
    }
}
