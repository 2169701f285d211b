//! Theory handles: the complete theory of a finite structure, or a list of
//! axioms read under bounded-model semantics.
//!
//! A bounded handle with parameter `k` calls a set of sentences consistent
//! when some structure of size at most `k` satisfies it together with the
//! axioms, and says `T ⊢ χ` when every such structure satisfies `χ`. Each
//! universe size gets its own incremental SAT instance: the axioms are
//! grounded over `0..s` once, and queries are grounded with full-equivalence
//! definitions and decided under assumptions. Models found along the way are
//! cached and consulted before the solver.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use serde_json::{json, Value};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::logic::eval::{check_symbols, Evaluator};
use crate::logic::formula::{Digest, Formula, Kind};
use crate::logic::signature::Signature;
use crate::logic::structure::{tuple_index, FiniteStructure};
use crate::logic::syntax::{parse_formula, print};
use crate::sat::{Lit, Solver};

/// Default size bound for bounded handles.
pub const DEFAULT_BOUND: usize = 4;
const MODEL_CACHE: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum G {
    Const(bool),
    Lit(Lit),
}

impl G {
    fn not(self) -> G {
        match self {
            G::Const(b) => G::Const(!b),
            G::Lit(l) => G::Lit(!l),
        }
    }
}

/// Axioms grounded over a universe of fixed size.
struct Grounding {
    size: usize,
    solver: Solver,
    symbols: FxHashMap<String, u32>,
    atoms: FxHashMap<(u32, usize), u32>,
    memo: FxHashMap<(Digest, u64), G>,
}

impl Grounding {
    fn new(size: usize, sig: &Signature) -> Self {
        Grounding {
            size,
            solver: Solver::new(),
            symbols: sig.iter().enumerate().map(|(i, (s, _))| (s.to_string(), i as u32)).collect(),
            atoms: FxHashMap::default(),
            memo: FxHashMap::default(),
        }
    }

    fn atom(&mut self, rel: &str, tuple: &[usize]) -> G {
        let sym = self.symbols[rel];
        let idx = tuple_index(tuple, self.size);
        let solver = &mut self.solver;
        let v = *self.atoms.entry((sym, idx)).or_insert_with(|| solver.new_var());
        G::Lit(Lit::pos(v))
    }

    fn key(f: &Formula, env: &[usize]) -> Option<(Digest, u64)> {
        let mut packed = 0u64;
        for v in f.free_vars() {
            let a = *env.get(v.0 as usize)? as u64;
            packed = packed.checked_mul(64)?.checked_add(a + 1)?;
        }
        Some((*f.digest(), packed))
    }

    /// A literal equivalent to `f` under `env`, defining fresh variables as
    /// needed.
    fn lit(&mut self, f: &Formula, env: &mut Vec<usize>, budget: &Budget) -> Result<G> {
        let key = Grounding::key(f, env);
        if let Some(k) = &key {
            if let Some(&g) = self.memo.get(k) {
                return Ok(g);
            }
        }
        budget.charge(1)?;
        let g = match f.kind() {
            Kind::Atom { rel, args } => {
                let t: Vec<usize> = args.iter().map(|v| env[v.0 as usize]).collect();
                self.atom(rel, &t)
            }
            Kind::Eq(a, b) => G::Const(env[a.0 as usize] == env[b.0 as usize]),
            Kind::Not(c) => self.lit(c, env, budget)?.not(),
            Kind::And(cs) => {
                let mut lits = Vec::with_capacity(cs.len());
                for c in f.eval_order().iter().map(|&i| &cs[i as usize]) {
                    match self.lit(c, env, budget)? {
                        G::Const(true) => {}
                        G::Const(false) => {
                            lits.clear();
                            lits.push(G::Const(false));
                            break;
                        }
                        g => lits.push(g),
                    }
                }
                self.conjoin(lits)
            }
            Kind::Exists(v, c) => {
                let i = v.0 as usize;
                let saved = grow(env, i);
                let mut lits = Vec::with_capacity(self.size);
                let mut witness = false;
                for a in 0..self.size {
                    env[i] = a;
                    match self.lit(c, env, budget)? {
                        G::Const(false) => {}
                        G::Const(true) => {
                            witness = true;
                            break;
                        }
                        g => lits.push(g.not()),
                    }
                }
                env[i] = saved;
                if witness {
                    G::Const(true)
                } else {
                    self.conjoin(lits).not()
                }
            }
        };
        if let Some(k) = key {
            self.memo.insert(k, g);
        }
        Ok(g)
    }

    fn conjoin(&mut self, lits: Vec<G>) -> G {
        let mut ls: Vec<Lit> = Vec::with_capacity(lits.len());
        for g in lits {
            match g {
                G::Const(false) => return G::Const(false),
                G::Const(true) => {}
                G::Lit(l) => ls.push(l),
            }
        }
        ls.sort();
        ls.dedup();
        if ls.windows(2).any(|w| w[0] == !w[1]) {
            return G::Const(false);
        }
        match ls.len() {
            0 => G::Const(true),
            1 => G::Lit(ls[0]),
            _ => {
                let y = Lit::pos(self.solver.new_var());
                let mut big: Vec<Lit> = vec![y];
                for &l in &ls {
                    self.solver.add_clause(&[!y, l]);
                    big.push(!l);
                }
                self.solver.add_clause(&big);
                G::Lit(y)
            }
        }
    }

    /// Add `f` (true under `env`) as a constraint, splitting conjunctions and
    /// universal quantifiers into separate clauses.
    fn assert(&mut self, f: &Formula, truth: bool, env: &mut Vec<usize>, budget: &Budget) -> Result<()> {
        match (f.kind(), truth) {
            (Kind::Not(c), _) => self.assert(c, !truth, env, budget),
            (Kind::And(cs), true) => {
                for c in cs.iter() {
                    self.assert(c, true, env, budget)?;
                }
                Ok(())
            }
            (Kind::Exists(v, c), false) => {
                let i = v.0 as usize;
                let saved = grow(env, i);
                for a in 0..self.size {
                    env[i] = a;
                    self.assert(c, false, env, budget)?;
                }
                env[i] = saved;
                Ok(())
            }
            (Kind::And(cs), false) => {
                let mut clause = Vec::with_capacity(cs.len());
                for c in cs.iter() {
                    match self.lit(c, env, budget)? {
                        G::Const(false) => return Ok(()),
                        G::Const(true) => {}
                        G::Lit(l) => clause.push(!l),
                    }
                }
                self.solver.add_clause(&clause);
                Ok(())
            }
            (Kind::Exists(v, c), true) => {
                let i = v.0 as usize;
                let saved = grow(env, i);
                let mut clause = Vec::with_capacity(self.size);
                for a in 0..self.size {
                    env[i] = a;
                    match self.lit(c, env, budget)? {
                        G::Const(true) => {
                            env[i] = saved;
                            return Ok(());
                        }
                        G::Const(false) => {}
                        G::Lit(l) => clause.push(l),
                    }
                }
                env[i] = saved;
                self.solver.add_clause(&clause);
                Ok(())
            }
            _ => match self.lit(f, env, budget)? {
                G::Const(b) => {
                    if b != truth {
                        self.solver.add_clause(&[]);
                    }
                    Ok(())
                }
                G::Lit(l) => {
                    self.solver.add_clause(&[if truth { l } else { !l }]);
                    Ok(())
                }
            },
        }
    }

    fn decode(&self, sig: &Signature) -> Result<FiniteStructure> {
        let mut m = FiniteStructure::new(sig.clone(), self.size)?;
        let names: FxHashMap<u32, &str> = self.symbols.iter().map(|(s, &i)| (i, s.as_str())).collect();
        let mut tables: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (&(sym, idx), &v) in &self.atoms {
            if self.solver.model_value(v) {
                tables.entry(names[&sym]).or_default().push(idx);
            }
        }
        for (name, idxs) in tables {
            let arity = sig.arity(name).expect("signature");
            let mut table = m.table(name).expect("signature").clone();
            let mut bits = table.bits().clone();
            for i in idxs {
                bits.insert(i);
            }
            table = crate::logic::structure::Table::from_bits(arity, bits);
            m.set_table(name, table)?;
        }
        Ok(m)
    }
}

fn grow(env: &mut Vec<usize>, i: usize) -> usize {
    if env.len() <= i {
        env.resize(i + 1, 0);
    }
    env[i]
}

/// Axioms with bounded-model semantics.
pub struct BoundedTheory {
    signature: Signature,
    axioms: Vec<Formula>,
    bound: usize,
    groundings: Vec<Option<Grounding>>,
    models: Vec<FiniteStructure>,
    // satisfiability of query lists, cleared when an axiom is added
    answers: FxHashMap<Vec<(Digest, bool)>, bool>,
}

impl BoundedTheory {
    fn grounding(&mut self, s: usize, budget: &Budget) -> Result<&mut Grounding> {
        if self.groundings[s - 1].is_none() {
            let mut g = Grounding::new(s, &self.signature);
            for a in &self.axioms {
                g.assert(a, true, &mut Vec::new(), budget)?;
            }
            self.groundings[s - 1] = Some(g);
        }
        Ok(self.groundings[s - 1].as_mut().expect("just built"))
    }

    fn satisfiable(&mut self, extra: &[(Formula, bool)], budget: &Budget) -> Result<bool> {
        let key: Vec<(Digest, bool)> = extra.iter().map(|(f, b)| (*f.digest(), *b)).collect();
        if let Some(&a) = self.answers.get(&key) {
            return Ok(a);
        }
        let a = self.find_model(extra, budget)?.is_some();
        self.answers.insert(key, a);
        Ok(a)
    }

    fn remember(&mut self, m: FiniteStructure) {
        if self.models.len() >= MODEL_CACHE {
            self.models.remove(0);
        }
        self.models.push(m);
    }

    /// Some model of size ≤ k satisfies the axioms and `extra` (truth values
    /// given per sentence).
    fn find_model(&mut self, extra: &[(Formula, bool)], budget: &Budget) -> Result<Option<FiniteStructure>> {
        for m in &self.models {
            let mut ev = Evaluator::new(m);
            let mut ok = true;
            for (f, want) in extra {
                if ev.eval_checked(f, &BTreeMap::new())? != *want {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(Some(m.clone()));
            }
        }
        for s in 1..=self.bound {
            budget.check_time()?;
            let sig = self.signature.clone();
            let g = self.grounding(s, budget)?;
            if g.solver.is_unsat() {
                continue;
            }
            let mut assumptions = Vec::new();
            let mut dead = false;
            for (f, want) in extra {
                match g.lit(f, &mut Vec::new(), budget)? {
                    G::Const(b) => dead |= b != *want,
                    G::Lit(l) => assumptions.push(if *want { l } else { !l }),
                }
            }
            if dead {
                continue;
            }
            if g.solver.solve(&assumptions, budget)? {
                let m = g.decode(&sig)?;
                self.remember(m.clone());
                return Ok(Some(m));
            }
        }
        Ok(None)
    }
}

/// The complete theory of a finite structure, possibly with added sentences
/// (which make it inconsistent if any of them fails in the structure).
pub struct CompleteTheory {
    model: FiniteStructure,
    added: Vec<Formula>,
    consistent: bool,
}

pub enum TheoryHandle {
    Complete(CompleteTheory),
    Bounded(BoundedTheory),
}

fn check_sentence(sig: &Signature, f: &Formula) -> Result<()> {
    if !f.is_sentence() {
        return Err(Error::NotASentence(f.free_vars().iter().map(|v| v.0).collect()));
    }
    for (name, arity) in f.symbols() {
        sig.check(&name, arity)?;
    }
    Ok(())
}

impl TheoryHandle {
    /// `Th(M)`, answering every query by evaluation in `M`.
    pub fn complete(m: FiniteStructure) -> TheoryHandle {
        TheoryHandle::Complete(CompleteTheory {
            model: m,
            added: Vec::new(),
            consistent: true,
        })
    }

    /// Axioms under bounded-model semantics with parameter `k`.
    pub fn bounded(signature: Signature, axioms: Vec<Formula>, k: usize) -> Result<TheoryHandle> {
        if k == 0 {
            return Err(Error::Invalid("model size bound must be at least 1".into()));
        }
        for a in &axioms {
            check_sentence(&signature, a)?;
        }
        Ok(TheoryHandle::Bounded(BoundedTheory {
            signature,
            axioms,
            bound: k,
            groundings: (0..k).map(|_| None).collect(),
            models: Vec::new(),
            answers: FxHashMap::default(),
        }))
    }

    pub fn signature(&self) -> &Signature {
        match self {
            TheoryHandle::Complete(c) => c.model.signature(),
            TheoryHandle::Bounded(b) => &b.signature,
        }
    }

    /// The size bound of a bounded handle.
    pub fn bound(&self) -> Option<usize> {
        match self {
            TheoryHandle::Complete(_) => None,
            TheoryHandle::Bounded(b) => Some(b.bound),
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, TheoryHandle::Complete(_))
    }

    /// Explicit axioms (for `Th(M)`, only the added sentences).
    pub fn axioms(&self) -> &[Formula] {
        match self {
            TheoryHandle::Complete(c) => &c.added,
            TheoryHandle::Bounded(b) => &b.axioms,
        }
    }

    pub fn contains_axiom(&self, f: &Formula) -> bool {
        self.axioms().contains(f)
    }

    pub fn add_axiom(&mut self, f: Formula) -> Result<()> {
        check_sentence(self.signature(), &f)?;
        if self.contains_axiom(&f) {
            return Ok(());
        }
        match self {
            TheoryHandle::Complete(c) => {
                if !Evaluator::new(&c.model).eval_checked(&f, &BTreeMap::new())? {
                    c.consistent = false;
                }
                c.added.push(f);
            }
            TheoryHandle::Bounded(b) => {
                let budget = Budget::unlimited();
                for g in b.groundings.iter_mut().flatten() {
                    g.assert(&f, true, &mut Vec::new(), &budget)?;
                }
                let mut kept = Vec::new();
                for m in b.models.drain(..) {
                    if Evaluator::new(&m).eval_checked(&f, &BTreeMap::new())? {
                        kept.push(m);
                    }
                }
                b.models = kept;
                b.axioms.push(f);
                b.answers.clear();
            }
        }
        Ok(())
    }

    pub fn is_consistent(&mut self, budget: &Budget) -> Result<bool> {
        self.consistent_with(&[], budget)
    }

    /// Whether the theory together with the given sentences is consistent.
    pub fn consistent_with(&mut self, extra: &[Formula], budget: &Budget) -> Result<bool> {
        for f in extra {
            check_sentence(self.signature(), f)?;
        }
        match self {
            TheoryHandle::Complete(c) => {
                if !c.consistent {
                    return Ok(false);
                }
                let mut ev = Evaluator::new(&c.model);
                for f in extra {
                    if !ev.eval_checked(f, &BTreeMap::new())? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            TheoryHandle::Bounded(b) => {
                let want: Vec<(Formula, bool)> = extra.iter().map(|f| (f.clone(), true)).collect();
                b.satisfiable(&want, budget)
            }
        }
    }

    /// Whether the theory proves `χ` (under the handle's semantics).
    pub fn entails(&mut self, chi: &Formula, budget: &Budget) -> Result<bool> {
        check_sentence(self.signature(), chi)?;
        match self {
            TheoryHandle::Complete(c) => {
                if !c.consistent {
                    return Ok(true);
                }
                Evaluator::new(&c.model).eval_checked(chi, &BTreeMap::new())
            }
            TheoryHandle::Bounded(b) => Ok(!b.satisfiable(&[(chi.clone(), false)], budget)?),
        }
    }

    /// A model of size ≤ k of the axioms and `extra`, if one exists (for a
    /// complete handle, the structure itself when all of `extra` holds).
    pub fn model_of(&mut self, extra: &[Formula], budget: &Budget) -> Result<Option<FiniteStructure>> {
        match self {
            TheoryHandle::Complete(c) => {
                let m = c.model.clone();
                Ok(if self.consistent_with(extra, budget)? { Some(m) } else { None })
            }
            TheoryHandle::Bounded(b) => {
                let want: Vec<(Formula, bool)> = extra.iter().map(|f| (f.clone(), true)).collect();
                b.find_model(&want, budget)
            }
        }
    }

    /// The structure behind a complete handle.
    pub fn structure(&self) -> Option<&FiniteStructure> {
        match self {
            TheoryHandle::Complete(c) => Some(&c.model),
            TheoryHandle::Bounded(_) => None,
        }
    }

    /// JSON form of a bounded handle.
    pub fn to_value(&self) -> Value {
        match self {
            TheoryHandle::Complete(c) => json!({"complete": c.model.to_value(), "axioms": c.added.iter().map(print).collect::<Vec<_>>()}),
            TheoryHandle::Bounded(b) => json!({
                "signature": {"relations": b.signature.relations},
                "axioms": b.axioms.iter().map(print).collect::<Vec<_>>(),
                "k": b.bound,
            }),
        }
    }

    /// Read `{"signature": …, "axioms": […], "k": 4}`.
    pub fn from_value(v: &Value) -> Result<TheoryHandle> {
        let sig: Signature = serde_json::from_value(
            v.get("signature")
                .cloned()
                .ok_or_else(|| Error::Invalid("theory lacks \"signature\"".into()))?,
        )?;
        let axioms = v
            .get("axioms")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Invalid("theory lacks \"axioms\"".into()))?
            .iter()
            .map(|a| {
                a.as_str()
                    .ok_or_else(|| Error::Invalid("axioms must be strings".into()))
                    .and_then(|s| parse_formula(s, &sig))
            })
            .collect::<Result<Vec<_>>>()?;
        let k = v.get("k").and_then(Value::as_u64).unwrap_or(DEFAULT_BOUND as u64) as usize;
        TheoryHandle::bounded(sig, axioms, k)
    }
}

/// Whether `m` satisfies every sentence.
pub fn satisfies_all(m: &FiniteStructure, sentences: &[Formula]) -> Result<bool> {
    let mut ev = Evaluator::new(m);
    for f in sentences {
        check_symbols(m, f)?;
        if !ev.eval_checked(f, &BTreeMap::new())? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::syntax::parse_formula_infer;

    fn sentence(text: &str, sig: &Signature) -> Formula {
        parse_formula(text, sig).unwrap()
    }

    #[test]
    fn bounded_consistency_and_entailment() {
        let sig = Signature::new([("R", 2)]);
        // irreflexive, total on distinct pairs, antisymmetric: a tournament
        let ax = vec![
            sentence("Not Exists x0 . R(x0,x0)", &sig),
            sentence("Not Exists x0 . Exists x1 . And{R(x0,x1), R(x1,x0)}", &sig),
        ];
        let mut t = TheoryHandle::bounded(sig.clone(), ax, 3).unwrap();
        let b = Budget::unlimited();
        assert!(t.is_consistent(&b).unwrap());
        assert!(t.entails(&sentence("Not Exists x0 . R(x0,x0)", &sig), &b).unwrap());
        assert!(!t.entails(&sentence("Exists x0 . Exists x1 . R(x0,x1)", &sig), &b).unwrap());
        // a 3-cycle exists among models of size ≤ 3
        let cyc = sentence(
            "Exists x0 . Exists x1 . Exists x2 . And{R(x0,x1), R(x1,x2), R(x2,x0)}",
            &sig,
        );
        assert!(t.consistent_with(&[cyc.clone()], &b).unwrap());
        let m = t.model_of(&[cyc.clone()], &b).unwrap().unwrap();
        assert!(satisfies_all(&m, &[cyc.clone()]).unwrap());
        t.add_axiom(Formula::not(cyc.clone())).unwrap();
        assert!(!t.consistent_with(&[cyc], &b).unwrap());
    }

    #[test]
    fn size_bound_matters() {
        let (f, sig) = parse_formula_infer(
            "Exists x0 . Exists x1 . Exists x2 . And{Not x0 = x1, Not x1 = x2, Not x0 = x2, P(x0)}",
        )
        .unwrap();
        let b = Budget::unlimited();
        let mut small = TheoryHandle::bounded(sig.clone(), vec![], 2).unwrap();
        assert!(!small.consistent_with(&[f.clone()], &b).unwrap());
        let mut big = TheoryHandle::bounded(sig, vec![], 3).unwrap();
        assert!(big.consistent_with(&[f], &b).unwrap());
    }

    #[test]
    fn inconsistent_axioms_entail_everything() {
        let sig = Signature::new([("Q", 0)]);
        let ax = vec![sentence("Q()", &sig), sentence("Not Q()", &sig)];
        let mut t = TheoryHandle::bounded(sig.clone(), ax, 2).unwrap();
        let b = Budget::unlimited();
        assert!(!t.is_consistent(&b).unwrap());
        assert!(t.entails(&sentence("Q()", &sig), &b).unwrap());
    }

    #[test]
    fn complete_handle() {
        let sig = Signature::new([("R", 2)]);
        let m = FiniteStructure::from_tuples(sig.clone(), 2, [("R", vec![vec![0, 1]])]).unwrap();
        let mut t = TheoryHandle::complete(m);
        let b = Budget::unlimited();
        let q = sentence("Exists x0 . Exists x1 . R(x0,x1)", &sig);
        assert!(t.entails(&q, &b).unwrap());
        assert!(!t.entails(&Formula::not(q.clone()), &b).unwrap());
        t.add_axiom(Formula::not(q)).unwrap();
        assert!(!t.is_consistent(&b).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let sig = Signature::new([("P", 1)]);
        let t = TheoryHandle::bounded(sig.clone(), vec![sentence("Exists x0 . P(x0)", &sig)], 3).unwrap();
        let back = TheoryHandle::from_value(&t.to_value()).unwrap();
        assert_eq!(back.axioms(), t.axioms());
        assert_eq!(back.bound(), Some(3));
    }
}
