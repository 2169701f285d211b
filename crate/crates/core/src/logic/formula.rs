use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rustc_hash::FxHashMap;
use sha2::{Digest as _, Sha256};

/// A variable from the fixed family `x0, x1, ...`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Var(pub u32);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Positional variables `x0..x(k-1)`.
pub fn vars(k: usize) -> Vec<Var> {
    (0..k as u32).map(Var).collect()
}

pub type Digest = [u8; 32];

/// Node kinds. Disjunction and universal quantification are abbreviations
/// and have no node of their own.
#[derive(Debug)]
pub enum Kind {
    Atom { rel: Arc<str>, args: Box<[Var]> },
    Eq(Var, Var),
    Not(Formula),
    /// Children sorted by digest, no duplicates.
    And(Box<[Formula]>),
    Exists(Var, Formula),
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    digest: Digest,
    free: Box<[Var]>,
    size: u64,
    max_var: Option<u32>,
    quantifiers: u32,
    /// Child indices of an `And`, smallest first; used for short-circuiting.
    eval_order: Box<[u32]>,
}

/// An immutable, structurally shared formula with set-coded conjunctions.
///
/// Equality, ordering and hashing go through the canonical digest, so two
/// conjunctions with the same children in any order or multiplicity are equal.
#[derive(Clone)]
pub struct Formula(Arc<Node>);

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.digest == other.0.digest
    }
}
impl Eq for Formula {}

impl Hash for Formula {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write(&self.0.digest[..8]);
    }
}

impl PartialOrd for Formula {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Formula {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let head = |d: &Digest| u64::from_be_bytes(d[..8].try_into().expect("8 bytes"));
        head(&self.0.digest)
            .cmp(&head(&other.0.digest))
            .then_with(|| self.0.digest[8..].cmp(&other.0.digest[8..]))
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.size() <= 200 {
            write!(f, "{}", crate::logic::syntax::print(self))
        } else {
            write!(f, "<formula {} size {}>", &self.digest_hex()[..12], self.size())
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::logic::syntax::print(self))
    }
}

// Node digests. `digest_and` expects children already sorted and deduplicated;
// byte order on digests is the same order `Formula` uses.

pub(crate) fn digest_atom(rel: &str, args: &[Var]) -> Digest {
    let mut h = Sha256::new();
    h.update(b"A");
    h.update((rel.len() as u32).to_be_bytes());
    h.update(rel.as_bytes());
    h.update((args.len() as u32).to_be_bytes());
    for v in args {
        h.update(v.0.to_be_bytes());
    }
    h.finalize().into()
}

pub(crate) fn digest_eq(a: Var, b: Var) -> Digest {
    let mut h = Sha256::new();
    h.update(b"E");
    h.update(a.0.to_be_bytes());
    h.update(b.0.to_be_bytes());
    h.finalize().into()
}

pub(crate) fn digest_not(c: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update(b"N");
    h.update(c);
    h.finalize().into()
}

pub(crate) fn digest_and<'a>(cs: impl ExactSizeIterator<Item = &'a Digest>) -> Digest {
    let mut h = Sha256::new();
    h.update(b"C");
    h.update((cs.len() as u32).to_be_bytes());
    for c in cs {
        h.update(c);
    }
    h.finalize().into()
}

pub(crate) fn digest_exists(v: Var, c: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update(b"X");
    h.update(v.0.to_be_bytes());
    h.update(c);
    h.finalize().into()
}

fn max_opt(a: Option<u32>, b: Option<u32>) -> Option<u32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Formula {
    fn build(kind: Kind) -> Formula {
        let (free, size, max_var, quantifiers, eval_order): (Vec<Var>, u64, Option<u32>, u32, Vec<u32>) =
            match &kind {
                Kind::Atom { args, .. } => {
                    let mut free = args.to_vec();
                    free.sort();
                    free.dedup();
                    let mv = args.iter().map(|v| v.0).max();
                    (free, 1, mv, 0, vec![])
                }
                Kind::Eq(a, b) => {
                    let mut free = vec![*a, *b];
                    free.sort();
                    free.dedup();
                    (free, 1, Some(a.0.max(b.0)), 0, vec![])
                }
                Kind::Not(c) => {
                    (
                        c.free_vars().to_vec(),
                        c.size().saturating_add(1),
                        c.0.max_var,
                        c.0.quantifiers,
                        vec![],
                    )
                }
                Kind::And(cs) => {
                    let mut free: Vec<Var> = Vec::new();
                    let mut size = 1u64;
                    let mut mv = None;
                    let mut q = 0u32;
                    for c in cs.iter() {
                        free.extend_from_slice(c.free_vars());
                        size = size.saturating_add(c.size());
                        mv = max_opt(mv, c.0.max_var);
                        q = q.saturating_add(c.0.quantifiers);
                    }
                    free.sort_unstable();
                    free.dedup();
                    let mut order: Vec<u32> = (0..cs.len() as u32).collect();
                    order.sort_by_key(|&i| cs[i as usize].size());
                    (free, size, mv, q, order)
                }
                Kind::Exists(v, c) => {
                    let free = c.free_vars().iter().copied().filter(|w| w != v).collect();
                    (
                        free,
                        c.size().saturating_add(1),
                        max_opt(Some(v.0), c.0.max_var),
                        c.0.quantifiers.saturating_add(1),
                        vec![],
                    )
                }
            };
        let digest = match &kind {
            Kind::Atom { rel, args } => digest_atom(rel, args),
            Kind::Eq(a, b) => digest_eq(*a, *b),
            Kind::Not(c) => digest_not(c.digest()),
            Kind::And(cs) => digest_and(cs.iter().map(|c| c.digest())),
            Kind::Exists(v, c) => digest_exists(*v, c.digest()),
        };
        Formula(Arc::new(Node {
            kind,
            digest,
            free: free.into_boxed_slice(),
            size,
            max_var,
            quantifiers,
            eval_order: eval_order.into_boxed_slice(),
        }))
    }

    pub fn atom(rel: impl Into<Arc<str>>, args: impl Into<Box<[Var]>>) -> Formula {
        Formula::build(Kind::Atom {
            rel: rel.into(),
            args: args.into(),
        })
    }

    pub fn eq(a: Var, b: Var) -> Formula {
        Formula::build(Kind::Eq(a, b))
    }

    pub fn not(f: Formula) -> Formula {
        Formula::build(Kind::Not(f))
    }

    /// Set-coded conjunction: order and duplicates of `children` are irrelevant.
    pub fn and(children: impl IntoIterator<Item = Formula>) -> Formula {
        let mut cs: Vec<Formula> = children.into_iter().collect();
        cs.sort_unstable();
        cs.dedup();
        Formula::build(Kind::And(cs.into_boxed_slice()))
    }

    pub fn truth() -> Formula {
        Formula::and(std::iter::empty())
    }

    pub fn exists(v: Var, f: Formula) -> Formula {
        Formula::build(Kind::Exists(v, f))
    }

    /// `⋁ S` abbreviates `¬⋀{¬φ : φ ∈ S}`.
    pub fn or(children: impl IntoIterator<Item = Formula>) -> Formula {
        Formula::not(Formula::and(children.into_iter().map(Formula::not)))
    }

    /// `∀v φ` abbreviates `¬∃v ¬φ`.
    pub fn forall(v: Var, f: Formula) -> Formula {
        Formula::not(Formula::exists(v, Formula::not(f)))
    }

    pub fn forall_many(vs: &[Var], f: Formula) -> Formula {
        vs.iter().rev().fold(f, |acc, v| Formula::forall(*v, acc))
    }

    pub fn exists_many(vs: &[Var], f: Formula) -> Formula {
        vs.iter().rev().fold(f, |acc, v| Formula::exists(*v, acc))
    }

    /// `a → b` abbreviates `¬⋀{a, ¬b}`.
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::not(Formula::and([a, Formula::not(b)]))
    }

    /// `a ↔ b` as the conjunction of both implications.
    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::and([
            Formula::implies(a.clone(), b.clone()),
            Formula::implies(b, a),
        ])
    }

    /// Universal closure over the free variables.
    pub fn closure(&self) -> Formula {
        Formula::forall_many(&self.free_vars().to_vec(), self.clone())
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn digest(&self) -> &Digest {
        &self.0.digest
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.0.digest)
    }

    /// Sorted free variables.
    pub fn free_vars(&self) -> &[Var] {
        &self.0.free
    }

    pub fn is_sentence(&self) -> bool {
        self.0.free.is_empty()
    }

    /// Tree size (not DAG size), saturating.
    pub fn size(&self) -> u64 {
        self.0.size
    }

    /// Largest variable index occurring free or bound.
    pub fn max_var(&self) -> Option<u32> {
        self.0.max_var
    }

    /// Number of quantifier nodes in the tree, saturating.
    pub fn quantifier_count(&self) -> u32 {
        self.0.quantifiers
    }

    pub(crate) fn eval_order(&self) -> &[u32] {
        &self.0.eval_order
    }

    /// Identity of the shared node, stable while any clone is alive.
    pub fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn is_literal(&self) -> bool {
        match self.kind() {
            Kind::Atom { .. } | Kind::Eq(..) => true,
            Kind::Not(c) => matches!(c.kind(), Kind::Atom { .. } | Kind::Eq(..)),
            _ => false,
        }
    }

    /// Sort key for "smallest first, digest as tiebreak".
    pub fn size_digest_key(&self) -> (u64, Digest) {
        (self.size(), self.0.digest)
    }

    /// Relation symbols occurring in the formula with their arities.
    pub fn symbols(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        let mut seen = rustc_hash::FxHashSet::default();
        let mut stack = vec![self.clone()];
        while let Some(f) = stack.pop() {
            if !seen.insert(f.node_id()) {
                continue;
            }
            match f.kind() {
                Kind::Atom { rel, args } => {
                    out.insert(rel.to_string(), args.len());
                }
                Kind::Eq(..) => {}
                Kind::Not(c) | Kind::Exists(_, c) => stack.push(c.clone()),
                Kind::And(cs) => stack.extend(cs.iter().cloned()),
            }
        }
        out
    }

    /// Number of distinct nodes in the shared representation.
    pub fn dag_size(&self) -> usize {
        let mut seen = rustc_hash::FxHashSet::default();
        let mut stack = vec![self.clone()];
        while let Some(f) = stack.pop() {
            if !seen.insert(*f.digest()) {
                continue;
            }
            match f.kind() {
                Kind::Not(c) | Kind::Exists(_, c) => stack.push(c.clone()),
                Kind::And(cs) => stack.extend(cs.iter().cloned()),
                _ => {}
            }
        }
        seen.len()
    }

    /// Capture-avoiding renaming of free variables. Variables not in `map` stay.
    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Formula {
        let mut memo = FxHashMap::default();
        rename_rec(self, map, &mut memo)
    }
}

fn rename_rec(
    f: &Formula,
    map: &BTreeMap<Var, Var>,
    memo: &mut FxHashMap<(usize, Vec<(Var, Var)>), Formula>,
) -> Formula {
    let relevant: Vec<(Var, Var)> = f
        .free_vars()
        .iter()
        .filter_map(|v| map.get(v).map(|w| (*v, *w)))
        .filter(|(v, w)| v != w)
        .collect();
    if relevant.is_empty() {
        return f.clone();
    }
    let key = (f.node_id(), relevant.clone());
    if let Some(r) = memo.get(&key) {
        return r.clone();
    }
    let local: BTreeMap<Var, Var> = relevant.iter().copied().collect();
    let sub = |v: &Var| *local.get(v).unwrap_or(v);
    let out = match f.kind() {
        Kind::Atom { rel, args } => {
            Formula::atom(rel.clone(), args.iter().map(sub).collect::<Vec<_>>())
        }
        Kind::Eq(a, b) => Formula::eq(sub(a), sub(b)),
        Kind::Not(c) => Formula::not(rename_rec(c, &local, memo)),
        Kind::And(cs) => Formula::and(cs.iter().map(|c| rename_rec(c, &local, memo))),
        Kind::Exists(v, c) => {
            let mut inner = local.clone();
            inner.remove(v);
            let captured = inner.values().any(|w| w == v);
            if captured {
                let top = local
                    .values()
                    .map(|w| w.0)
                    .chain(f.max_var())
                    .max()
                    .unwrap_or(0);
                let fresh = Var(top + 1);
                inner.insert(*v, fresh);
                Formula::exists(fresh, rename_rec(c, &inner, memo))
            } else {
                Formula::exists(*v, rename_rec(c, &inner, memo))
            }
        }
    };
    memo.insert(key, out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: u32) -> Formula {
        Formula::atom("P", vec![Var(v)])
    }

    #[test]
    fn conjunction_is_a_set() {
        let a = p(0);
        let b = p(1);
        assert_eq!(
            Formula::and([a.clone(), b.clone()]),
            Formula::and([b.clone(), a.clone(), b.clone()])
        );
        assert_ne!(Formula::and([a.clone()]), a);
        match Formula::and([a.clone(), a.clone()]).kind() {
            Kind::And(cs) => assert_eq!(cs.len(), 1),
            _ => unreachable!(),
        }
    }

    #[test]
    fn free_variables_and_size() {
        let f = Formula::exists(
            Var(1),
            Formula::and([
                Formula::atom("R", vec![Var(0), Var(1)]),
                Formula::not(Formula::atom("R", vec![Var(1), Var(0)])),
            ]),
        );
        assert_eq!(f.free_vars(), &[Var(0)]);
        assert_eq!(f.size(), 5);
        assert_eq!(f.quantifier_count(), 1);
        assert!(Formula::exists(Var(0), f.clone()).is_sentence());
    }

    #[test]
    fn rename_avoids_capture() {
        // ∃x1 R(x0,x1) with x0 ↦ x1 must not become ∃x1 R(x1,x1).
        let f = Formula::exists(Var(1), Formula::atom("R", vec![Var(0), Var(1)]));
        let g = f.rename(&BTreeMap::from([(Var(0), Var(1))]));
        assert_eq!(g.free_vars(), &[Var(1)]);
        match g.kind() {
            Kind::Exists(v, body) => {
                assert_ne!(*v, Var(1));
                assert_eq!(body.free_vars().len(), 2);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rename_leaves_bound_variables() {
        let f = Formula::exists(Var(0), p(0));
        assert_eq!(f.rename(&BTreeMap::from([(Var(0), Var(5))])), f);
    }
}
