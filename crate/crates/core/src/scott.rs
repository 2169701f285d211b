//! Back-and-forth formulas `φ_{α,ā}`, the stabilization stage `β`, Scott
//! sentences and the isomorphism invariant built from them.
//!
//! Classes are computed combinatorially on injective tuples of length at most
//! `n`: the stage `α+1` class of `ā` is the stage `α` class together with the
//! set of stage `α` classes of its one-point extensions. Tuples with repeated
//! entries are handled through their duplicate pattern and the class of the
//! deduplicated tuple. This is exactly the equivalence "same formula", which
//! the tests confirm against digests of independently built formulas.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::logic::eval::{check_symbols, Evaluator};
use crate::logic::formula::{self, Digest, Formula, Var};
use crate::logic::iso::group_by_ids;
use crate::logic::structure::{tuple_at, tuple_index, FiniteStructure};

/// Duplicate pattern (first-occurrence numbering) and the deduplicated tuple.
pub fn split_pattern(tuple: &[usize]) -> (Vec<u8>, Vec<usize>) {
    let mut dedup: Vec<usize> = Vec::new();
    let mut pattern = Vec::with_capacity(tuple.len());
    for &a in tuple {
        match dedup.iter().position(|&b| b == a) {
            Some(i) => pattern.push(i as u8),
            None => {
                pattern.push(dedup.len() as u8);
                dedup.push(a);
            }
        }
    }
    (pattern, dedup)
}

/// Per-stage partitions of tuples, with the least stable stage `β`.
#[derive(Clone, Debug)]
pub struct PartitionSystem {
    n: usize,
    beta: usize,
    index: Vec<FxHashMap<u64, u32>>,
    /// `classes[α][L][i]`: class of `inj[L][i]` at stage `α`, for `α ≤ β+1`.
    classes: Vec<Vec<Vec<u32>>>,
}

fn pack(t: &[usize], n: usize) -> u64 {
    t.iter().fold(0u64, |acc, &a| acc * n as u64 + a as u64)
}

fn number_by_first<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>) -> (Vec<u32>, usize) {
    let mut ids: FxHashMap<K, u32> = FxHashMap::default();
    let out: Vec<u32> = keys
        .map(|k| {
            let next = ids.len() as u32;
            *ids.entry(k).or_insert(next)
        })
        .collect();
    let count = ids.len();
    (out, count)
}

impl PartitionSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Least stage at which every partition is stable.
    pub fn beta(&self) -> usize {
        self.beta
    }

    fn stage(&self, alpha: usize) -> &Vec<Vec<u32>> {
        &self.classes[alpha.min(self.beta)]
    }

    /// Class of an injective tuple at stage `α`.
    pub fn injective_class(&self, tuple: &[usize], alpha: usize) -> u32 {
        let i = self.index[tuple.len()][&pack(tuple, self.n)];
        self.stage(alpha)[tuple.len()][i as usize]
    }

    /// Key identifying the stage-`α` class of an arbitrary tuple.
    pub fn class_key(&self, tuple: &[usize], alpha: usize) -> (Vec<u8>, u32) {
        let (pattern, dedup) = split_pattern(tuple);
        let c = self.injective_class(&dedup, alpha);
        (pattern, c)
    }

    /// Class id of every tuple in `M^k` (indexed like relation tables) at
    /// stage `α`, numbered by least tuple.
    pub fn class_ids(&self, k: usize, alpha: usize) -> Vec<u32> {
        let total = self.n.pow(k as u32);
        number_by_first((0..total).map(|i| self.class_key(&tuple_at(i, self.n, k), alpha))).0
    }

    /// The stage-`α` partition of `M^k`, classes ordered by least tuple.
    pub fn partition(&self, k: usize, alpha: usize) -> Vec<Vec<Vec<usize>>> {
        group_by_ids(&self.class_ids(k, alpha), self.n, k)
    }

    /// Number of classes of `M^k` for `k = 0..=n` at stage `α`.
    pub fn class_counts(&self, alpha: usize) -> Vec<usize> {
        (0..=self.n)
            .map(|k| self.class_ids(k, alpha).iter().map(|&c| c as usize + 1).max().unwrap_or(0))
            .collect()
    }

    /// Number of classes of injective tuples of each length at stage `α`.
    pub fn injective_counts(&self, alpha: usize) -> Vec<usize> {
        self.stage(alpha)
            .iter()
            .map(|cs| cs.iter().map(|&c| c as usize + 1).max().unwrap_or(0))
            .collect()
    }
}

/// Compute the stage partitions up to the least stable stage.
pub fn refine_to_fixpoint(m: &FiniteStructure) -> Result<PartitionSystem> {
    refine_to_fixpoint_with(m, &Budget::unlimited())
}

pub fn refine_to_fixpoint_with(m: &FiniteStructure, budget: &Budget) -> Result<PartitionSystem> {
    let n = m.size();
    if n > 12 {
        return Err(Error::ResourceLimit(format!("Scott analysis needs n ≤ 12, got {n}")));
    }
    let mut inj: Vec<Vec<Vec<usize>>> = vec![vec![vec![]]];
    for l in 1..=n {
        let mut next = Vec::new();
        for t in &inj[l - 1] {
            for b in 0..n {
                if !t.contains(&b) {
                    let mut u = t.clone();
                    u.push(b);
                    next.push(u);
                }
            }
        }
        next.sort();
        budget.charge(next.len() as u64 * (l as u64 + 1))?;
        inj.push(next);
    }
    let index: Vec<FxHashMap<u64, u32>> = inj
        .iter()
        .map(|ts| ts.iter().enumerate().map(|(i, t)| (pack(t, n), i as u32)).collect())
        .collect();
    let children: Vec<Vec<Vec<u32>>> = (0..=n)
        .map(|l| {
            if l == n {
                return vec![Vec::new(); inj[l].len()];
            }
            inj[l]
                .iter()
                .map(|t| {
                    (0..n)
                        .filter(|b| !t.contains(b))
                        .map(|b| {
                            let mut u = t.clone();
                            u.push(b);
                            index[l + 1][&pack(&u, n)]
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let rels: Vec<(usize, &crate::logic::structure::Table)> =
        m.tables().map(|(_, t)| (t.arity(), t)).collect();
    let stage0: Vec<Vec<u32>> = inj
        .iter()
        .enumerate()
        .map(|(l, ts)| {
            number_by_first(ts.iter().map(|t| {
                let mut key: Vec<bool> = Vec::new();
                for (arity, table) in &rels {
                    let cells = l.pow(*arity as u32);
                    for p in 0..cells {
                        let pos = tuple_at(p, l.max(1), *arity);
                        let img: Vec<usize> = pos.iter().map(|&i| t[i]).collect();
                        key.push(table.get_index(tuple_index(&img, n)));
                    }
                }
                key
            }))
            .0
        })
        .collect();

    let counts = |stage: &Vec<Vec<u32>>| -> Vec<usize> {
        stage
            .iter()
            .map(|cs| cs.iter().map(|&c| c as usize + 1).max().unwrap_or(0))
            .collect()
    };
    let mut classes = vec![stage0];
    loop {
        budget.check_time()?;
        let prev = classes.last().expect("stage 0");
        let next: Vec<Vec<u32>> = (0..=n)
            .map(|l| {
                number_by_first((0..inj[l].len()).map(|i| {
                    let mut kids: Vec<u32> =
                        children[l][i].iter().map(|&j| prev[l + 1][j as usize]).collect();
                    kids.sort_unstable();
                    kids.dedup();
                    (prev[l][i], kids)
                }))
                .0
            })
            .collect();
        let stable = counts(&next) == counts(prev);
        classes.push(next);
        if stable {
            break;
        }
    }
    let beta = classes.len() - 2;
    Ok(PartitionSystem {
        n,
        beta,
        index,
        classes,
    })
}

/// How stage formulas are materialized: as full ASTs, or as their digests
/// alone (same values, no node allocation).
pub trait Coding {
    type F: Clone + Eq + Ord + std::hash::Hash;
    fn atom(name: &str, args: &[Var]) -> Self::F;
    fn eq(a: Var, b: Var) -> Self::F;
    fn not(f: &Self::F) -> Self::F;
    /// Set-coded conjunction; `cs` may be unsorted and contain duplicates.
    fn and(cs: Vec<Self::F>) -> Self::F;
    fn exists(v: Var, f: &Self::F) -> Self::F;
}

pub struct Formulas;

impl Coding for Formulas {
    type F = Formula;
    fn atom(name: &str, args: &[Var]) -> Formula {
        Formula::atom(name, args.to_vec())
    }
    fn eq(a: Var, b: Var) -> Formula {
        Formula::eq(a, b)
    }
    fn not(f: &Formula) -> Formula {
        Formula::not(f.clone())
    }
    fn and(cs: Vec<Formula>) -> Formula {
        Formula::and(cs)
    }
    fn exists(v: Var, f: &Formula) -> Formula {
        Formula::exists(v, f.clone())
    }
}

pub struct Digests;

impl Coding for Digests {
    type F = Digest;
    fn atom(name: &str, args: &[Var]) -> Digest {
        formula::digest_atom(name, args)
    }
    fn eq(a: Var, b: Var) -> Digest {
        formula::digest_eq(a, b)
    }
    fn not(f: &Digest) -> Digest {
        formula::digest_not(f)
    }
    fn and(mut cs: Vec<Digest>) -> Digest {
        cs.sort_unstable();
        cs.dedup();
        formula::digest_and(cs.iter())
    }
    fn exists(v: Var, f: &Digest) -> Digest {
        formula::digest_exists(v, f)
    }
}

/// Builds and memoizes `φ_{α,ā}` by `(α, duplicate pattern, class)`.
pub struct ScottBuilder<'a, C: Coding = Formulas> {
    m: &'a FiniteStructure,
    ps: &'a PartitionSystem,
    memo: FxHashMap<(u32, u8, u128, u32), C::F>,
    atoms: FxHashMap<(usize, Vec<u8>), (C::F, C::F)>,
    equalities: FxHashMap<(usize, usize), (C::F, C::F)>,
    negations: FxHashMap<C::F, C::F>,
    rels: Vec<(String, usize)>,
    budget: &'a Budget,
}

impl<'a> ScottBuilder<'a, Formulas> {
    pub fn new(m: &'a FiniteStructure, ps: &'a PartitionSystem, budget: &'a Budget) -> Self {
        ScottBuilder::with_coding(m, ps, budget)
    }
}

impl<'a> ScottBuilder<'a, Digests> {
    pub fn digests(m: &'a FiniteStructure, ps: &'a PartitionSystem, budget: &'a Budget) -> Self {
        ScottBuilder::with_coding(m, ps, budget)
    }
}

impl<'a, C: Coding> ScottBuilder<'a, C> {
    pub fn with_coding(m: &'a FiniteStructure, ps: &'a PartitionSystem, budget: &'a Budget) -> Self {
        ScottBuilder {
            m,
            ps,
            memo: FxHashMap::default(),
            atoms: FxHashMap::default(),
            equalities: FxHashMap::default(),
            negations: FxHashMap::default(),
            rels: m.signature().iter().map(|(s, a)| (s.to_string(), a)).collect(),
            budget,
        }
    }

    /// Positive and negative literal for a relation at variable positions.
    fn literal(&mut self, rel_idx: usize, name: &str, pos: &[u8]) -> (C::F, C::F) {
        self.atoms
            .entry((rel_idx, pos.to_vec()))
            .or_insert_with(|| {
                let a = C::atom(name, &pos.iter().map(|&p| Var(p as u32)).collect::<Vec<_>>());
                let na = C::not(&a);
                (a, na)
            })
            .clone()
    }

    fn equality(&mut self, i: usize, j: usize) -> (C::F, C::F) {
        self.equalities
            .entry((i, j))
            .or_insert_with(|| {
                let e = C::eq(Var(i as u32), Var(j as u32));
                let ne = C::not(&e);
                (e, ne)
            })
            .clone()
    }

    fn literals(&mut self, tuple: &[usize]) -> C::F {
        let n = self.m.size();
        let l = tuple.len();
        let mut lits = Vec::new();
        let mut pos: Vec<u8> = Vec::new();
        for ri in 0..self.rels.len() {
            let (name, arity) = self.rels[ri].clone();
            let table = self.m.table(&name).expect("signature");
            let cells = l.pow(arity as u32);
            for p in 0..cells {
                pos.clear();
                let mut rest = p;
                let mut idx = 0usize;
                let mut mult = 1usize;
                for _ in 0..arity {
                    let d = rest % l.max(1);
                    rest /= l.max(1);
                    pos.push(d as u8);
                    idx += tuple[d] * mult;
                    mult *= n;
                }
                pos.reverse();
                let (a, na) = self.literal(ri, &name, &pos);
                lits.push(if table.get_index(idx) { a } else { na });
            }
        }
        for i in 0..l {
            for j in i + 1..l {
                let (e, ne) = self.equality(i, j);
                lits.push(if tuple[i] == tuple[j] { e } else { ne });
            }
        }
        C::and(lits)
    }

    /// `φ_{α,ā}` in the variables `x0..x(|ā|-1)`.
    pub fn stage_formula(&mut self, tuple: &[usize], alpha: usize) -> Result<C::F> {
        if let Some(&a) = tuple.iter().find(|&&a| a >= self.m.size()) {
            return Err(Error::Invalid(format!("element {a} out of range 0..{}", self.m.size())));
        }
        let (mut pattern, mut dedup) = split_pattern(tuple);
        self.build(alpha, &mut pattern, &mut dedup)
    }

    fn build(&mut self, alpha: usize, pattern: &mut Vec<u8>, dedup: &mut Vec<usize>) -> Result<C::F> {
        if pattern.len() > 32 {
            return Err(Error::ResourceLimit("stage formula over more than 32 variables".into()));
        }
        let packed = pattern
            .iter()
            .fold(0u128, |acc, &p| acc << 4 | p as u128);
        let cls = self.ps.injective_class(dedup, alpha);
        let key = (alpha as u32, pattern.len() as u8, packed, cls);
        if let Some(f) = self.memo.get(&key) {
            return Ok(f.clone());
        }
        self.budget.charge(pattern.len() as u64 + 4)?;
        let f = if alpha == 0 {
            let tuple: Vec<usize> = pattern.iter().map(|&p| dedup[p as usize]).collect();
            self.literals(&tuple)
        } else {
            let prev = self.build(alpha - 1, pattern, dedup)?;
            let mut kids = Vec::with_capacity(self.m.size());
            for b in 0..self.m.size() {
                match dedup.iter().position(|&d| d == b) {
                    Some(i) => {
                        pattern.push(i as u8);
                        kids.push(self.build(alpha - 1, pattern, dedup)?);
                        pattern.pop();
                    }
                    None => {
                        pattern.push(dedup.len() as u8);
                        dedup.push(b);
                        kids.push(self.build(alpha - 1, pattern, dedup)?);
                        dedup.pop();
                        pattern.pop();
                    }
                }
            }
            kids.sort();
            kids.dedup();
            let x = Var(pattern.len() as u32);
            // ∀x ⋁ kids, written out as ¬∃x ¬¬⋀{¬kid}.
            let negs: Vec<C::F> = kids
                .iter()
                .map(|k| {
                    self.negations
                        .entry(k.clone())
                        .or_insert_with(|| C::not(k))
                        .clone()
                })
                .collect();
            let all = C::not(&C::exists(x, &C::not(&C::not(&C::and(negs)))));
            let each = C::and(kids.iter().map(|k| C::exists(x, k)).collect());
            C::and(vec![prev, all, each])
        };
        self.memo.insert(key, f.clone());
        Ok(f)
    }

    /// `Sc(M) = φ_{β,∅} ∧ ⋀ ∀x̄(φ_{β,ā} → φ_{β+1,ā})`, one conjunct per stage-β
    /// class of tuples of length `0..=n`, represented by its least tuple.
    pub fn scott_sentence(&mut self) -> Result<C::F> {
        let beta = self.ps.beta();
        let n = self.m.size();
        let mut conj = vec![self.stage_formula(&[], beta)?];
        for k in 0..=n {
            let ids = self.ps.class_ids(k, beta);
            let mut seen = vec![false; ids.iter().map(|&c| c as usize + 1).max().unwrap_or(0)];
            for (idx, &c) in ids.iter().enumerate() {
                if std::mem::replace(&mut seen[c as usize], true) {
                    continue;
                }
                let t = tuple_at(idx, n, k);
                let lo = self.stage_formula(&t, beta)?;
                let hi = self.stage_formula(&t, beta + 1)?;
                // ∀x̄ ¬⋀{lo, ¬hi}
                let mut body = C::not(&C::and(vec![lo, C::not(&hi)]));
                for v in (0..k as u32).rev() {
                    body = C::not(&C::exists(Var(v), &C::not(&body)));
                }
                conj.push(body);
            }
        }
        Ok(C::and(conj))
    }
}

/// `φ_{α,ā}` for a single tuple.
pub fn stage_formula(m: &FiniteStructure, tuple: &[usize], alpha: usize) -> Result<Formula> {
    let ps = refine_to_fixpoint(m)?;
    let budget = Budget::unlimited();
    ScottBuilder::new(m, &ps, &budget).stage_formula(tuple, alpha)
}

pub fn scott_sentence(m: &FiniteStructure) -> Result<Formula> {
    scott_sentence_with(m, &Budget::unlimited())
}

pub fn scott_sentence_with(m: &FiniteStructure, budget: &Budget) -> Result<Formula> {
    let ps = refine_to_fixpoint_with(m, budget)?;
    ScottBuilder::new(m, &ps, budget).scott_sentence()
}

/// Canonical isomorphism invariant: digest of `Sc(M)`, `β`, and class counts
/// of `M^k` for `k = 0..=n` at stage `β`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct ScottInvariant {
    pub digest: String,
    pub beta: usize,
    pub class_counts: Vec<usize>,
}

pub fn scott_invariant(m: &FiniteStructure) -> Result<ScottInvariant> {
    scott_invariant_with(m, &Budget::unlimited())
}

pub fn scott_invariant_with(m: &FiniteStructure, budget: &Budget) -> Result<ScottInvariant> {
    let ps = refine_to_fixpoint_with(m, budget)?;
    let sc = ScottBuilder::digests(m, &ps, budget).scott_sentence()?;
    Ok(ScottInvariant {
        digest: hex::encode(sc),
        beta: ps.beta(),
        class_counts: ps.class_counts(ps.beta()),
    })
}

/// Isomorphism test by comparing Scott sentence digests.
pub fn iso_via_invariant(a: &FiniteStructure, b: &FiniteStructure) -> Result<bool> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch("structures have different signatures".into()));
    }
    Ok(scott_invariant(a)?.digest == scott_invariant(b)?.digest)
}

/// Whether `N ⊨ Sc`.
pub fn check_models_scott(nstruct: &FiniteStructure, sc: &Formula) -> Result<bool> {
    if !sc.is_sentence() {
        return Err(Error::NotASentence(sc.free_vars().iter().map(|v| v.0).collect()));
    }
    check_symbols(nstruct, sc)?;
    Evaluator::new(nstruct).eval_checked(sc, &BTreeMap::new())
}
