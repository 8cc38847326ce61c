use std::collections::BTreeSet;
use std::sync::Arc;

use super::expr::Name;
use super::types::{Domain, ScalarKind, Space, SymAction, Symmetry, TypeExpr};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Domain(Arc<Domain>),
    Space(Arc<Space>),
    Var(TypeExpr),
}

/// Declaration environment: domains, spaces and typed variables, in
/// declaration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Context {
    entries: Vec<(Name, Entry)>,
    user: BTreeSet<Name>,
}

impl Context {
    pub fn empty() -> Self {
        Context::default()
    }

    /// The built-in abbreviations `R C N I RV CV CM Her Sym`.
    pub fn builtin() -> Self {
        let mut ctx = Context::empty();
        let n = Arc::new(Domain::new("N"));
        let i = Arc::new(Domain {
            symmetric: true,
            ..Domain::new("I")
        });
        ctx.insert_unchecked("N", Entry::Domain(n.clone()));
        ctx.insert_unchecked("I", Entry::Domain(i));
        let space = |name: &str, rank: usize, elem, symmetries| {
            Entry::Space(Arc::new(Space {
                name: name.into(),
                indices: vec![n.clone(); rank],
                elem,
                symmetries,
            }))
        };
        ctx.insert_unchecked("RV", space("RV", 1, ScalarKind::Real, vec![]));
        ctx.insert_unchecked("CV", space("CV", 1, ScalarKind::Complex, vec![]));
        ctx.insert_unchecked("RM", space("RM", 2, ScalarKind::Real, vec![]));
        ctx.insert_unchecked("CM", space("CM", 2, ScalarKind::Complex, vec![]));
        ctx.insert_unchecked(
            "Her",
            space(
                "Her",
                2,
                ScalarKind::Complex,
                vec![Symmetry {
                    perm: vec![2, 1],
                    action: SymAction::Conj,
                }],
            ),
        );
        ctx.insert_unchecked(
            "Sym",
            space(
                "Sym",
                2,
                ScalarKind::Real,
                vec![Symmetry {
                    perm: vec![2, 1],
                    action: SymAction::Id,
                }],
            ),
        );
        ctx
    }

    fn insert_unchecked(&mut self, n: &str, e: Entry) {
        self.entries.push((Name::from(n), e));
    }

    /// Add a declaration. User declarations may shadow built-ins but not each other.
    pub fn declare(&mut self, n: &str, e: Entry) -> Result<()> {
        if !self.user.insert(Name::from(n)) {
            return Err(Error::Type(format!("duplicate declaration of `{n}`")));
        }
        self.entries.push((Name::from(n), e));
        Ok(())
    }

    pub fn get(&self, n: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|(k, _)| &**k == n).map(|(_, e)| e)
    }

    pub fn domain(&self, n: &str) -> Option<Arc<Domain>> {
        match self.get(n)? {
            Entry::Domain(d) => Some(d.clone()),
            _ => None,
        }
    }

    pub fn space(&self, n: &str) -> Option<Arc<Space>> {
        match self.get(n)? {
            Entry::Space(s) => Some(s.clone()),
            _ => None,
        }
    }

    pub fn var_type(&self, n: &str) -> Option<TypeExpr> {
        match self.get(n)? {
            Entry::Var(t) => Some(t.clone()),
            _ => None,
        }
    }

    /// Resolve a type name (`R`, `C`, a domain or a space).
    pub fn resolve_type(&self, n: &str) -> Option<TypeExpr> {
        match n {
            "R" => Some(TypeExpr::Real),
            "C" => Some(TypeExpr::Complex),
            _ => match self.get(n)? {
                Entry::Domain(d) => Some(TypeExpr::Domain(d.clone())),
                Entry::Space(s) => Some(TypeExpr::Space(s.clone())),
                Entry::Var(_) => None,
            },
        }
    }

    pub fn with_var(&self, n: &str, t: TypeExpr) -> Context {
        let mut c = self.clone();
        c.entries.push((Name::from(n), Entry::Var(t)));
        c
    }

    pub fn push_var(&mut self, n: &Name, t: TypeExpr) {
        self.entries.push((n.clone(), Entry::Var(t)));
    }

    pub fn pop(&mut self) {
        self.entries.pop();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Name, &Entry)> {
        self.entries.iter().map(|(n, e)| (n, e))
    }

    /// All declared domains, in declaration order.
    pub fn domains(&self) -> Vec<Arc<Domain>> {
        self.entries
            .iter()
            .filter_map(|(_, e)| match e {
                Entry::Domain(d) => Some(d.clone()),
                _ => None,
            })
            .collect()
    }
}
