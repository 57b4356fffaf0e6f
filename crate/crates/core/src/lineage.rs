//! Injective functional dependencies and the compatibility predicate.
//!
//! Attributes may be plain (`batch`) or qualified by a relation or stream
//! name (`R.a`). Only identity edges and explicitly declared injective FDs
//! are chased, so `injective_fd` is sound but incomplete.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::{attrs, AttrSet, Gate};

/// Upper bound on attribute-set states explored by the chase.
pub const DEFAULT_CHASE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Via {
    Identity,
    #[default]
    Declared,
}

/// `determinant` injectively determines `dependent`: distinct determinant
/// values map to distinct dependent values.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InjectiveFd {
    pub determinant: AttrSet,
    pub dependent: AttrSet,
    #[serde(default)]
    pub via: Via,
}

impl InjectiveFd {
    pub fn declared<I, J, S, T>(determinant: I, dependent: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        InjectiveFd { determinant: attrs(determinant), dependent: attrs(dependent), via: Via::Declared }
    }

    /// Identity edge between equal-named attributes of two relations.
    pub fn identity(from_relation: &str, to_relation: &str, attribute: &str) -> Self {
        InjectiveFd {
            determinant: attrs([format!("{from_relation}.{attribute}")]),
            dependent: attrs([format!("{to_relation}.{attribute}")]),
            via: Via::Identity,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FdSet {
    fds: Vec<InjectiveFd>,
}

impl FdSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, fd: InjectiveFd) -> Self {
        self.insert(fd);
        self
    }

    pub fn insert(&mut self, fd: InjectiveFd) {
        if !self.fds.contains(&fd) {
            self.fds.push(fd);
        }
    }

    /// Identity lineage along a chain of projections: for each attribute,
    /// `chain[i].a -> chain[i+1].a`.
    pub fn with_projection_lineage(mut self, chain: &[&str], attributes: &[&str]) -> Self {
        for pair in chain.windows(2) {
            for a in attributes {
                self.insert(InjectiveFd::identity(pair[0], pair[1], a));
            }
        }
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = &InjectiveFd> {
        self.fds.iter()
    }

    pub fn len(&self) -> usize {
        self.fds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fds.is_empty()
    }

    /// Every attribute named by some FD, both as written and with any
    /// qualifier stripped.
    pub fn mentioned_attributes(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for fd in &self.fds {
            for a in fd.determinant.iter().chain(&fd.dependent) {
                out.insert(a.clone());
                if let Some((_, local)) = a.split_once('.') {
                    out.insert(local.to_string());
                }
            }
        }
        out
    }

    /// The FDs visible from `stream`: attributes qualified by `stream` lose
    /// their qualifier, unqualified FDs are kept, FDs naming any other
    /// qualifier are dropped.
    pub fn localize(&self, stream: &str) -> FdSet {
        let local = |set: &AttrSet| -> Option<AttrSet> {
            set.iter()
                .map(|a| match a.split_once('.') {
                    None => Some(a.clone()),
                    Some((q, name)) if q == stream => Some(name.to_string()),
                    Some(_) => None,
                })
                .collect()
        };
        let mut out = FdSet::new();
        for fd in &self.fds {
            if let (Some(d), Some(e)) = (local(&fd.determinant), local(&fd.dependent)) {
                out.insert(InjectiveFd { determinant: d, dependent: e, via: fd.via });
            }
        }
        out
    }
}

impl FromIterator<InjectiveFd> for FdSet {
    fn from_iter<T: IntoIterator<Item = InjectiveFd>>(iter: T) -> Self {
        let mut out = FdSet::new();
        for fd in iter {
            out.insert(fd);
        }
        out
    }
}

/// All attribute sets injectively determined by `start`.
///
/// Each FD `D -> E` with `D ⊆ X` yields two successors of `X`: `X ∪ E`
/// (keeping the determinant) and `(X \ D) ∪ E` (replacing it, legal because
/// `E` determines `D` back). Exploration stops after `limit` states.
pub fn chase(fds: &FdSet, start: &AttrSet, limit: usize) -> BTreeSet<AttrSet> {
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(x) = queue.pop_front() {
        for fd in fds.iter() {
            if fd.determinant.is_empty() || fd.dependent.is_empty() || !fd.determinant.is_subset(&x) {
                continue;
            }
            let extended: AttrSet = x.union(&fd.dependent).cloned().collect();
            let replaced: AttrSet = x.difference(&fd.determinant).chain(&fd.dependent).cloned().collect();
            for next in [extended, replaced] {
                if seen.len() >= limit {
                    return seen;
                }
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    seen
}

/// True iff `b` is injectively determined by `a` through identity and
/// declared FD edges.
pub fn injective_fd(fds: &FdSet, a: &AttrSet, b: &AttrSet) -> bool {
    injective_fd_limited(fds, a, b, DEFAULT_CHASE_LIMIT)
}

pub fn injective_fd_limited(fds: &FdSet, a: &AttrSet, b: &AttrSet, limit: usize) -> bool {
    a == b || chase(fds, a, limit).contains(b)
}

/// A seal on `seal` licenses partition-wise processing of `partition` iff
/// the seal injectively determines some nonempty subset of the partition.
pub fn compatible(partition: &Gate, seal: &AttrSet, fds: &FdSet) -> bool {
    let Gate::Keys(partition) = partition else {
        return false;
    };
    if seal.is_empty() {
        return false;
    }
    chase(fds, seal, DEFAULT_CHASE_LIMIT)
        .iter()
        .any(|s| !s.is_empty() && s.is_subset(partition))
}

/// Minimal description of a query statement, enough to derive a subscript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryDescriptor {
    Aggregation { grouping: AttrSet },
    Antijoin { theta: AttrSet },
    Other,
}

/// Grouping columns for aggregations, theta columns for antijoins, a
/// wildcard for anything else.
pub fn derive_subscript(q: &QueryDescriptor) -> Gate {
    match q {
        QueryDescriptor::Aggregation { grouping } if !grouping.is_empty() => Gate::Keys(grouping.clone()),
        QueryDescriptor::Antijoin { theta } if !theta.is_empty() => Gate::Keys(theta.clone()),
        _ => Gate::Wildcard,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_chain_is_injective() {
        // S = π_a π_ab π_abc R
        let fds = FdSet::new().with_projection_lineage(&["R", "T1", "T2", "S"], &["a"]);
        assert!(injective_fd(&fds, &attrs(["R.a"]), &attrs(["S.a"])));
        assert!(!injective_fd(&fds, &attrs(["S.a"]), &attrs(["R.a"])));
    }

    #[test]
    fn reflexive_without_fds() {
        let x = attrs(["p", "q"]);
        assert!(injective_fd(&FdSet::new(), &x, &x));
    }

    #[test]
    fn symbol_but_not_city() {
        let fds = FdSet::new().with(InjectiveFd::declared(["company"], ["symbol"]));
        assert!(injective_fd(&fds, &attrs(["company"]), &attrs(["symbol"])));
        assert!(!injective_fd(&fds, &attrs(["company"]), &attrs(["city"])));
    }

    #[test]
    fn compatibility_examples() {
        let none = FdSet::new();
        assert!(compatible(&Gate::keys(["id", "window"]), &attrs(["window"]), &none));
        assert!(!compatible(&Gate::keys(["id"]), &attrs(["campaign"]), &none));
        assert!(compatible(&Gate::keys(["g", "h"]), &attrs(["g", "h"]), &none));
        assert!(!compatible(&Gate::Wildcard, &attrs(["g"]), &none));
        assert!(!compatible(&Gate::keys(["g"]), &AttrSet::new(), &none));
    }

    #[test]
    fn declared_fd_extends_compatibility() {
        let fds = FdSet::new().with(InjectiveFd::declared(["campaign"], ["campaign_code"]));
        assert!(compatible(&Gate::keys(["id", "campaign_code"]), &attrs(["campaign"]), &fds));
    }

    #[test]
    fn subscripts_from_descriptors() {
        let window = QueryDescriptor::Aggregation { grouping: attrs(["window", "id"]) };
        assert_eq!(derive_subscript(&window), Gate::keys(["id", "window"]));
        let anti = QueryDescriptor::Antijoin { theta: attrs(["x"]) };
        assert_eq!(derive_subscript(&anti), Gate::keys(["x"]));
        assert_eq!(derive_subscript(&QueryDescriptor::Other), Gate::Wildcard);
    }

    #[test]
    fn localize_strips_own_qualifier() {
        let fds = FdSet::new()
            .with(InjectiveFd::declared(["c.campaign"], ["c.code"]))
            .with(InjectiveFd::declared(["other.x"], ["other.y"]))
            .with(InjectiveFd::declared(["k"], ["m"]));
        let local = fds.localize("c");
        assert_eq!(local.len(), 2);
        assert!(injective_fd(&local, &attrs(["campaign"]), &attrs(["code"])));
        assert!(injective_fd(&local, &attrs(["k"]), &attrs(["m"])));
    }

    #[test]
    fn chase_limit_is_respected() {
        let mut fds = FdSet::new();
        for i in 0..20 {
            fds.insert(InjectiveFd::declared(["a"], [format!("b{i}")]));
        }
        assert!(chase(&fds, &attrs(["a"]), 50).len() <= 50);
    }
}
