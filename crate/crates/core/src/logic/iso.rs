use std::collections::BTreeMap;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::logic::structure::{all_tuples, tuple_at, FiniteStructure};

/// An injective partial map from `0..n` to `0..m`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PartialMap {
    pairs: BTreeMap<usize, usize>,
    n: usize,
    m: usize,
}

impl PartialMap {
    pub fn new(n: usize, m: usize) -> Self {
        PartialMap {
            pairs: BTreeMap::new(),
            n,
            m,
        }
    }

    pub fn from_pairs(n: usize, m: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut p = PartialMap::new(n, m);
        for (a, b) in pairs {
            p.extend(a, b)?;
        }
        Ok(p)
    }

    /// Add `a ↦ b`, keeping the map an injective function.
    pub fn extend(&mut self, a: usize, b: usize) -> Result<()> {
        if a >= self.n || b >= self.m {
            return Err(Error::Invalid(format!("pair ({a},{b}) out of bounds")));
        }
        if let Some(&old) = self.pairs.get(&a) {
            if old != b {
                return Err(Error::Invalid(format!("{a} already maps to {old}")));
            }
            return Ok(());
        }
        if self.pairs.values().any(|&v| v == b) {
            return Err(Error::Invalid(format!("{b} already in the image")));
        }
        self.pairs.insert(a, b);
        Ok(())
    }

    pub fn get(&self, a: usize) -> Option<usize> {
        self.pairs.get(&a).copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|(a, b)| (*a, *b))
    }

    /// Whether the map preserves every relation in both directions on its domain.
    pub fn is_partial_isomorphism(&self, from: &FiniteStructure, to: &FiniteStructure) -> Result<bool> {
        if from.signature() != to.signature() {
            return Err(Error::SignatureMismatch("partial map between different signatures".into()));
        }
        let dom: Vec<usize> = self.pairs.keys().copied().collect();
        for (name, arity) in from.signature().iter() {
            for idx in 0..dom.len().pow(arity as u32) {
                let t: Vec<usize> = tuple_at(idx, dom.len().max(1), arity)
                    .into_iter()
                    .map(|i| dom[i])
                    .collect();
                let img: Vec<usize> = t.iter().map(|a| self.pairs[a]).collect();
                if from.holds(name, &t)? != to.holds(name, &img)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn same_signature(a: &FiniteStructure, b: &FiniteStructure) -> Result<()> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch(format!(
            "{:?} vs {:?}",
            a.signature().relations,
            b.signature().relations
        )));
    }
    Ok(())
}

/// Whether `perm` maps `a` isomorphically onto `b`.
pub fn is_isomorphism(a: &FiniteStructure, b: &FiniteStructure, perm: &[usize]) -> bool {
    let n = a.size();
    a.tables().all(|(name, ta)| {
        let tb = b.table(name).expect("same signature");
        let arity = ta.arity();
        ta.len() == tb.len()
            && ta.bits().ones().all(|i| {
                let (mut rest, mut idx, mut mult) = (i, 0usize, 1usize);
                for _ in 0..arity {
                    idx += perm[rest % n] * mult;
                    rest /= n;
                    mult *= n;
                }
                tb.get_index(idx)
            })
    })
}

/// First isomorphism in lexicographic permutation order, if any.
pub fn isomorphic_bruteforce(a: &FiniteStructure, b: &FiniteStructure) -> Result<Option<Vec<usize>>> {
    same_signature(a, b)?;
    if a.size() != b.size() {
        return Ok(None);
    }
    for (name, t) in a.tables() {
        if t.len() != b.table(name).map_or(0, |u| u.len()) {
            return Ok(None);
        }
    }
    Ok((0..a.size())
        .permutations(a.size())
        .find(|p| is_isomorphism(a, b, p)))
}

/// All automorphisms in lexicographic order (the identity first).
pub fn automorphisms(m: &FiniteStructure) -> Vec<Vec<usize>> {
    (0..m.size())
        .permutations(m.size())
        .filter(|p| is_isomorphism(m, m, p))
        .collect()
}

/// Orbit id of every tuple of length `k` (indexed like relation tables),
/// numbered by least member.
pub fn orbit_ids_with(m: &FiniteStructure, auts: &[Vec<usize>], k: usize) -> Vec<u32> {
    let n = m.size();
    let total = n.pow(k as u32);
    let mut ids = vec![u32::MAX; total];
    let mut next = 0u32;
    for idx in 0..total {
        if ids[idx] != u32::MAX {
            continue;
        }
        let t = tuple_at(idx, n, k);
        for s in auts {
            let img = t.iter().fold(0usize, |acc, &a| acc * n + s[a]);
            ids[img] = next;
        }
        next += 1;
    }
    ids
}

/// Orbits of `Aut(M)` on `M^k`, each sorted, classes ordered by least tuple.
pub fn automorphism_orbits(m: &FiniteStructure, k: usize) -> Vec<Vec<Vec<usize>>> {
    let auts = automorphisms(m);
    let ids = orbit_ids_with(m, &auts, k);
    group_by_ids(&ids, m.size(), k)
}

pub(crate) fn group_by_ids(ids: &[u32], n: usize, k: usize) -> Vec<Vec<Vec<usize>>> {
    let count = ids.iter().map(|&i| i as usize + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); count];
    for (idx, &c) in ids.iter().enumerate() {
        out[c as usize].push(tuple_at(idx, n, k));
    }
    out
}

/// Canonical form: the relabeling whose table encoding is lexicographically
/// least. Two structures are isomorphic iff their canonical encodings agree.
pub fn canonical_form(m: &FiniteStructure) -> (Vec<usize>, Vec<u8>) {
    let n = m.size();
    let mut best: Option<(Vec<usize>, Vec<u8>)> = None;
    for p in (0..n).permutations(n) {
        let mut code = Vec::new();
        for (_, t) in m.tables() {
            let arity = t.arity();
            let mut cells = vec![0u8; n.pow(arity as u32)];
            for i in t.bits().ones() {
                let img = tuple_at(i, n, arity).iter().fold(0usize, |acc, &a| acc * n + p[a]);
                cells[img] = 1;
            }
            code.extend(cells);
        }
        if best.as_ref().is_none_or(|(_, c)| code < *c) {
            best = Some((p, code));
        }
    }
    best.expect("non-empty universe")
}

/// All `n^k` tuples, re-exported for callers that iterate tuple spaces.
pub fn tuples(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    all_tuples(n, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::signature::Signature;

    fn graph(n: usize, edges: &[(usize, usize)]) -> FiniteStructure {
        FiniteStructure::from_tuples(
            Signature::new([("R", 2)]),
            n,
            [("R", edges.iter().map(|&(a, b)| vec![a, b]).collect())],
        )
        .unwrap()
    }

    fn chain(n: usize) -> FiniteStructure {
        let mut e = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                e.push((a, b));
            }
        }
        graph(n, &e)
    }

    #[test]
    fn bruteforce_examples() {
        let anti = graph(2, &[]);
        assert_eq!(isomorphic_bruteforce(&anti, &anti).unwrap(), Some(vec![0, 1]));
        assert_eq!(isomorphic_bruteforce(&chain(3), &graph(3, &[])).unwrap(), None);
        let rev = graph(2, &[(1, 0)]);
        assert_eq!(isomorphic_bruteforce(&chain(2), &rev).unwrap(), Some(vec![1, 0]));
        let other = FiniteStructure::new(Signature::new([("P", 1)]), 2).unwrap();
        assert!(isomorphic_bruteforce(&anti, &other).is_err());
    }

    #[test]
    fn orbit_examples() {
        assert_eq!(automorphism_orbits(&graph(2, &[]), 1), vec![vec![vec![0], vec![1]]]);
        assert_eq!(automorphism_orbits(&chain(2), 1), vec![vec![vec![0]], vec![vec![1]]]);
        let c4 = graph(4, &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2), (3, 0), (0, 3)]);
        assert_eq!(automorphisms(&c4).len(), 8);
        assert_eq!(automorphism_orbits(&c4, 2).len(), 3);
        assert_eq!(automorphism_orbits(&c4, 0), vec![vec![Vec::<usize>::new()]]);
    }

    #[test]
    fn canonical_form_detects_isomorphism() {
        let a = graph(3, &[(0, 1), (1, 2)]);
        let b = graph(3, &[(2, 0), (0, 1)]);
        let c = graph(3, &[(0, 1), (0, 2)]);
        assert_eq!(canonical_form(&a).1, canonical_form(&b).1);
        assert_ne!(canonical_form(&a).1, canonical_form(&c).1);
    }

    #[test]
    fn partial_maps() {
        let c = chain(3);
        let mut p = PartialMap::new(3, 3);
        p.extend(0, 1).unwrap();
        p.extend(2, 2).unwrap();
        assert!(p.extend(1, 1).is_err());
        assert!(p.is_partial_isomorphism(&c, &c).unwrap());
        let q = PartialMap::from_pairs(3, 3, [(0, 2), (2, 0)]).unwrap();
        assert!(!q.is_partial_isomorphism(&c, &c).unwrap());
    }
}
