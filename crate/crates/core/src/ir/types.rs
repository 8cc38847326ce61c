//! Types of the term language: scalar kinds, index domains, tensor spaces.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Element kind of a scalar or tensor value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarKind {
    Real,
    Complex,
}

/// An integer index domain.
///
/// Domains are symbolically infinite; finite extents only exist in a
/// [`crate::numeric::NumericEnv`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Domain {
    pub name: String,
    /// Indices wrap around, so `k + b` is meaningful.
    pub periodic: bool,
    /// The domain is closed under negation (`-m..=m` when finitized).
    pub symmetric: bool,
    /// The engine may introduce contractions over this domain.
    pub contractable: bool,
}

impl Domain {
    pub fn new(name: impl Into<String>) -> Self {
        Domain {
            name: name.into(),
            periodic: false,
            symmetric: false,
            contractable: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymAction {
    Id,
    Conj,
    Ineg,
}

impl fmt::Display for SymAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymAction::Id => "id",
            SymAction::Conj => "conj",
            SymAction::Ineg => "ineg",
        })
    }
}

/// A declared tensor symmetry `T(i) = action(T(i[perm]))`.
///
/// `perm` holds 1-based positions: for `((2, 1, 4, 3), conj)` the access
/// `T(p, q, r, s)` equals `T(q, p, s, r)*`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Symmetry {
    pub perm: Vec<usize>,
    pub action: SymAction,
}

/// A tensor space: index domains, element kind and symmetry generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Space {
    pub name: String,
    pub indices: Vec<Arc<Domain>>,
    pub elem: ScalarKind,
    pub symmetries: Vec<Symmetry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Real,
    Complex,
    Domain(Arc<Domain>),
    Space(Arc<Space>),
    Func(Vec<TypeExpr>, Box<TypeExpr>),
    Product(Vec<TypeExpr>),
    /// Placeholder for binders whose type is inferred by the typechecker.
    Unknown,
}

impl TypeExpr {
    pub fn scalar(kind: ScalarKind) -> Self {
        match kind {
            ScalarKind::Real => TypeExpr::Real,
            ScalarKind::Complex => TypeExpr::Complex,
        }
    }

    pub fn is_index(&self) -> bool {
        matches!(self, TypeExpr::Domain(_))
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, TypeExpr::Real | TypeExpr::Complex)
    }

    pub fn as_domain(&self) -> Option<&Arc<Domain>> {
        match self {
            TypeExpr::Domain(d) => Some(d),
            _ => None,
        }
    }

    /// Argument types and result type when the value can be applied.
    pub fn signature(&self) -> Option<(Vec<TypeExpr>, TypeExpr)> {
        match self {
            TypeExpr::Space(s) => Some((
                s.indices.iter().cloned().map(TypeExpr::Domain).collect(),
                TypeExpr::scalar(s.elem),
            )),
            TypeExpr::Func(args, ret) => Some((args.clone(), (**ret).clone())),
            _ => None,
        }
    }

    /// Result type after applying `n` arguments (curried semantics).
    pub fn apply_n(&self, n: usize) -> Option<TypeExpr> {
        if n == 0 {
            return Some(self.clone());
        }
        let (args, ret) = self.signature()?;
        if n < args.len() {
            Some(TypeExpr::Func(args[n..].to_vec(), Box::new(ret)))
        } else {
            ret.apply_n(n - args.len())
        }
    }

    /// Whether every value of this type is real (recursively through functions).
    pub fn is_real(&self) -> bool {
        match self {
            TypeExpr::Real | TypeExpr::Domain(_) => true,
            TypeExpr::Complex | TypeExpr::Unknown => false,
            TypeExpr::Space(s) => s.elem == ScalarKind::Real,
            TypeExpr::Func(_, r) => r.is_real(),
            TypeExpr::Product(ts) => ts.iter().all(TypeExpr::is_real),
        }
    }

    /// Scalar kind of the values a fully applied function of this type returns.
    pub fn codomain_scalar(&self) -> Option<ScalarKind> {
        match self {
            TypeExpr::Real => Some(ScalarKind::Real),
            TypeExpr::Complex => Some(ScalarKind::Complex),
            TypeExpr::Space(s) => Some(s.elem),
            TypeExpr::Func(_, r) => r.codomain_scalar(),
            _ => None,
        }
    }

    /// The symmetries attached to this type, if it is a declared space.
    pub fn symmetries(&self) -> &[Symmetry] {
        match self {
            TypeExpr::Space(s) => &s.symmetries,
            _ => &[],
        }
    }

    /// Widest scalar kind of two numeric types.
    pub fn join_scalar(a: &TypeExpr, b: &TypeExpr) -> TypeExpr {
        if a.is_real() && b.is_real() {
            TypeExpr::Real
        } else {
            TypeExpr::Complex
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Real => f.write_str("R"),
            TypeExpr::Complex => f.write_str("C"),
            TypeExpr::Domain(d) => f.write_str(&d.name),
            TypeExpr::Space(s) => f.write_str(&s.name),
            TypeExpr::Func(args, ret) => {
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")->{ret}")
            }
            TypeExpr::Product(ts) => {
                f.write_str("(")?;
                for (i, a) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            TypeExpr::Unknown => f.write_str("_"),
        }
    }
}

/// One element of a symmetry group, acting on index tuples.
///
/// Applying it to an access `T(i_1..i_n)` yields the equal value
/// `conj^c(T(s_1 i_{src_1}, .., s_n i_{src_n}))`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    /// `(source position, negate)` for each output slot, 0-based.
    pub slots: Vec<(usize, bool)>,
    pub conj: bool,
}

impl GroupElement {
    pub fn identity(rank: usize) -> Self {
        GroupElement {
            slots: (0..rank).map(|i| (i, false)).collect(),
            conj: false,
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.conj
            && self
                .slots
                .iter()
                .enumerate()
                .all(|(i, &(s, n))| s == i && !n)
    }

    fn from_symmetry(sym: &Symmetry) -> Self {
        let neg = sym.action == SymAction::Ineg;
        GroupElement {
            slots: sym.perm.iter().map(|&p| (p - 1, neg)).collect(),
            conj: sym.action == SymAction::Conj,
        }
    }

    /// `self` after `other`: first apply `other`, then `self` to the result.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let slots = self
            .slots
            .iter()
            .map(|&(src, neg)| {
                let (src2, neg2) = other.slots[src];
                (src2, neg ^ neg2)
            })
            .collect();
        GroupElement {
            slots,
            conj: self.conj ^ other.conj,
        }
    }
}

/// Validate the symmetry generators of a space of the given index domains.
pub fn validate_symmetries(indices: &[Arc<Domain>], syms: &[Symmetry]) -> Result<()> {
    let rank = indices.len();
    for sym in syms {
        let mut seen = BTreeSet::new();
        if sym.perm.len() != rank {
            return Err(Error::Symmetry(format!(
                "permutation {:?} has length {} but the space has rank {rank}",
                sym.perm,
                sym.perm.len()
            )));
        }
        for &p in &sym.perm {
            if p == 0 || p > rank || !seen.insert(p) {
                return Err(Error::Symmetry(format!(
                    "permutation {:?} is not a bijection on 1..{rank}",
                    sym.perm
                )));
            }
        }
        if sym.action == SymAction::Ineg {
            for &p in &sym.perm {
                if !indices[p - 1].symmetric {
                    return Err(Error::Symmetry(format!(
                        "ineg acts on index {p} of domain {} which is not symmetric",
                        indices[p - 1].name
                    )));
                }
            }
        }
    }
    symmetry_group(rank, syms).map(|_| ())
}

const MAX_GROUP: usize = 4096;

/// Close the generators under composition.
pub fn symmetry_group(rank: usize, syms: &[Symmetry]) -> Result<Vec<GroupElement>> {
    let gens: Vec<GroupElement> = syms.iter().map(GroupElement::from_symmetry).collect();
    let id = GroupElement::identity(rank);
    let mut seen: BTreeSet<GroupElement> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(id.clone());
    queue.push_back(id);
    while let Some(g) = queue.pop_front() {
        for h in &gens {
            let next = h.compose(&g);
            if seen.insert(next.clone()) {
                if seen.len() > MAX_GROUP {
                    return Err(Error::Symmetry("symmetry group is too large".into()));
                }
                queue.push_back(next);
            }
        }
    }
    Ok(seen.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(name: &str, symmetric: bool) -> Arc<Domain> {
        Arc::new(Domain {
            symmetric,
            ..Domain::new(name)
        })
    }

    #[test]
    fn hartree_fock_group_has_four_elements() {
        let n = dom("N", false);
        let syms = vec![
            Symmetry {
                perm: vec![2, 1, 4, 3],
                action: SymAction::Conj,
            },
            Symmetry {
                perm: vec![3, 4, 1, 2],
                action: SymAction::Id,
            },
        ];
        let idx = vec![n.clone(), n.clone(), n.clone(), n];
        validate_symmetries(&idx, &syms).unwrap();
        assert_eq!(symmetry_group(4, &syms).unwrap().len(), 4);
    }

    #[test]
    fn ineg_requires_symmetric_domain() {
        let syms = vec![Symmetry {
            perm: vec![1],
            action: SymAction::Ineg,
        }];
        assert!(validate_symmetries(&[dom("N", false)], &syms).is_err());
        assert!(validate_symmetries(&[dom("I", true)], &syms).is_ok());
    }

    #[test]
    fn non_bijective_permutation_rejected() {
        let n = dom("N", false);
        let syms = vec![Symmetry {
            perm: vec![1, 1],
            action: SymAction::Id,
        }];
        assert!(validate_symmetries(&[n.clone(), n], &syms).is_err());
    }
}
