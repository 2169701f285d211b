//! Compilation of an infinitary sentence `Ψ` into a first-order language
//! `L_Ψ`, a theory `T_Ψ` and a list `Γ_Ψ` of types to omit, together with the
//! structure transform `H_Ψ` and its inverse, and the completion step that
//! adds `¬∃x̄ φ` for formulas `φ` isolating some omitted type.

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap;
use serde_json::{json, Value};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::logic::eval::{check_symbols, ExtensionCache};
use crate::logic::formula::{Digest, Formula, Kind, Var};
use crate::logic::signature::Signature;
use crate::logic::structure::{FiniteStructure, Table};
use crate::logic::syntax::{parse_formula, print, try_print};
use crate::pool::{Pool, PoolSpec};
use crate::theory::TheoryHandle;

/// `Σ_Φ = {R_{φ_i}(x̄)} ∪ {¬R_Φ(x̄)}` for a conjunction sub-formula `Φ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OmittedType {
    /// Digest of `Φ`.
    pub key: String,
    /// Position of `Φ` in the sub-formula list.
    pub conjunction: usize,
    pub vars: Vec<Var>,
    pub literals: Vec<Formula>,
}

impl OmittedType {
    /// The conjunction of all literals; a tuple realizes the type iff it
    /// satisfies this formula.
    pub fn realization(&self) -> Formula {
        Formula::and(self.literals.iter().cloned())
    }
}

#[derive(Clone, Debug)]
pub struct CompiledTheory {
    original: Formula,
    source: Formula,
    source_signature: Signature,
    subformulas: Vec<Formula>,
    names: Vec<String>,
    index: FxHashMap<Digest, usize>,
    signature: Signature,
    axioms: Vec<Formula>,
    omitted: Vec<OmittedType>,
}

/// Conjuncts `∀x̄(P(x̄) ∨ ¬P(x̄))` for relation symbols whose atom
/// `P(x0,…,x(n-1))` is not already a sub-formula of `Ψ`.
pub fn saturate(psi: &Formula, sig: &Signature) -> Formula {
    let mut present = BTreeSet::new();
    collect(psi, &mut BTreeSet::new(), &mut |f| {
        present.insert(*f.digest());
    });
    let missing: Vec<Formula> = sig
        .iter()
        .map(|(p, a)| Formula::atom(p, crate::logic::formula::vars(a)))
        .filter(|atom| !present.contains(atom.digest()))
        .map(|atom| {
            let vs = atom.free_vars().to_vec();
            Formula::forall_many(&vs, Formula::or([atom.clone(), Formula::not(atom)]))
        })
        .collect();
    if missing.is_empty() {
        psi.clone()
    } else {
        Formula::and([psi.clone(), Formula::and(missing)])
    }
}

// Post-order over the DAG, children in stored (digest) order.
fn collect(f: &Formula, seen: &mut BTreeSet<Digest>, visit: &mut impl FnMut(&Formula)) {
    if seen.contains(f.digest()) {
        return;
    }
    match f.kind() {
        Kind::Not(c) | Kind::Exists(_, c) => collect(c, seen, visit),
        Kind::And(cs) => {
            for c in cs.iter() {
                collect(c, seen, visit);
            }
        }
        Kind::Atom { .. } | Kind::Eq(..) => {}
    }
    if seen.insert(*f.digest()) {
        visit(f);
    }
}

/// Sub-formulas of the saturated sentence in post-order: children before
/// parents, the sentence itself last.
pub fn subformulas(psi: &Formula, sig: &Signature) -> Result<Vec<Formula>> {
    if !psi.is_sentence() {
        return Err(Error::NotASentence(psi.free_vars().iter().map(|v| v.0).collect()));
    }
    let sat = saturate(psi, sig);
    let mut out = Vec::new();
    collect(&sat, &mut BTreeSet::new(), &mut |f| out.push(f.clone()));
    Ok(out)
}

fn symbol_prefix(sig: &Signature) -> String {
    let mut prefix = "R_".to_string();
    while sig.iter().any(|(name, _)| name.starts_with(&prefix)) {
        prefix.insert(1, '_');
    }
    prefix
}

/// Compile `Ψ` (a sentence over `sig`).
pub fn compile_sentence(psi: &Formula, sig: &Signature) -> Result<CompiledTheory> {
    compile_sentence_with(psi, sig, &Budget::unlimited())
}

pub fn compile_sentence_with(psi: &Formula, sig: &Signature, budget: &Budget) -> Result<CompiledTheory> {
    for (name, arity) in psi.symbols() {
        sig.check(&name, arity)?;
    }
    let subs = subformulas(psi, sig)?;
    budget.charge(subs.len() as u64)?;
    let prefix = symbol_prefix(sig);
    let names: Vec<String> = (0..subs.len()).map(|i| format!("{prefix}{i}")).collect();
    let index: FxHashMap<Digest, usize> = subs.iter().enumerate().map(|(i, f)| (*f.digest(), i)).collect();
    let signature = Signature::new(
        subs.iter()
            .zip(&names)
            .map(|(f, name)| (name.clone(), f.free_vars().len())),
    );
    let rel = |f: &Formula| -> Formula {
        Formula::atom(names[index[f.digest()]].as_str(), f.free_vars().to_vec())
    };

    let mut axioms = Vec::new();
    let mut omitted = Vec::new();
    for (i, f) in subs.iter().enumerate() {
        budget.check_time()?;
        let own: Vec<Var> = f.free_vars().to_vec();
        match f.kind() {
            Kind::Exists(v, c) => {
                let body = Formula::iff(Formula::exists(*v, rel(c)), rel(f));
                axioms.push(Formula::forall_many(&own, body));
            }
            Kind::Not(c) => {
                let body = Formula::iff(Formula::not(rel(c)), rel(f));
                axioms.push(Formula::forall_many(&own, body));
            }
            Kind::And(cs) => {
                for c in cs.iter() {
                    axioms.push(Formula::forall_many(&own, Formula::implies(rel(f), rel(c))));
                }
                let mut literals: Vec<Formula> = cs.iter().map(&rel).collect();
                literals.push(Formula::not(rel(f)));
                omitted.push(OmittedType {
                    key: f.digest_hex(),
                    conjunction: i,
                    vars: own,
                    literals,
                });
            }
            Kind::Atom { .. } | Kind::Eq(..) => {}
        }
    }
    let root = subs.last().expect("non-empty").clone();
    axioms.push(rel(&root));
    let mut seen = BTreeSet::new();
    axioms.retain(|a| seen.insert(*a.digest()));

    Ok(CompiledTheory {
        original: psi.clone(),
        source: root,
        source_signature: sig.clone(),
        subformulas: subs,
        names,
        index,
        signature,
        axioms,
        omitted,
    })
}

impl CompiledTheory {
    /// The sentence as given, before saturation.
    pub fn original(&self) -> &Formula {
        &self.original
    }

    /// The saturated sentence actually compiled.
    pub fn source(&self) -> &Formula {
        &self.source
    }

    pub fn source_signature(&self) -> &Signature {
        &self.source_signature
    }

    pub fn subformulas(&self) -> &[Formula] {
        &self.subformulas
    }

    /// `L_Ψ`.
    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    /// `T_Ψ`.
    pub fn axioms(&self) -> &[Formula] {
        &self.axioms
    }

    /// `Γ_Ψ`.
    pub fn omitted_types(&self) -> &[OmittedType] {
        &self.omitted
    }

    /// Name of `R_φ`, if `φ` is a sub-formula.
    pub fn symbol_of(&self, f: &Formula) -> Option<&str> {
        self.index.get(f.digest()).map(|&i| self.names[i].as_str())
    }

    /// The atom `R_φ(x̄)` over the free variables of `φ`.
    pub fn relation_atom(&self, f: &Formula) -> Option<Formula> {
        self.symbol_of(f)
            .map(|name| Formula::atom(name, f.free_vars().to_vec()))
    }

    /// The sub-formula `φ` named by `R_φ`.
    pub fn formula_of(&self, symbol: &str) -> Option<&Formula> {
        self.names.iter().position(|n| n == symbol).map(|i| &self.subformulas[i])
    }

    /// `H_Ψ(M)`: same universe, `R_φ` interpreted as the extension of `φ`.
    pub fn transform(&self, m: &FiniteStructure) -> Result<FiniteStructure> {
        self.transform_with(m, &Budget::unlimited())
    }

    pub fn transform_with(&self, m: &FiniteStructure, budget: &Budget) -> Result<FiniteStructure> {
        if m.signature() != &self.source_signature {
            return Err(Error::SignatureMismatch(
                "structure is not over the sentence's signature".into(),
            ));
        }
        let mut out = FiniteStructure::new(self.signature.clone(), m.size())?;
        let mut ext = ExtensionCache::new(m, budget);
        for (f, name) in self.subformulas.iter().zip(&self.names) {
            let e = ext.get(f)?;
            out.set_table(name, Table::from_bits(e.vars.len(), e.bits.clone()))?;
        }
        Ok(out)
    }

    /// `H_Ψ^{-1}(N)`: `P` read off from `R_{P(x0,…,x(n-1))}`.
    pub fn inverse_transform(&self, n: &FiniteStructure) -> Result<FiniteStructure> {
        if n.signature() != &self.signature {
            return Err(Error::SignatureMismatch("structure is not over L_Ψ".into()));
        }
        let mut out = FiniteStructure::new(self.source_signature.clone(), n.size())?;
        for (p, a) in self.source_signature.iter() {
            let atom = Formula::atom(p, crate::logic::formula::vars(a));
            let name = self
                .symbol_of(&atom)
                .ok_or_else(|| Error::UnknownSymbol(format!("no relation for the atom {atom}")))?;
            let table = n.table(name).expect("L_Ψ symbol").clone();
            out.set_table(p, table)?;
        }
        Ok(out)
    }

    /// Indices of the omitted types realized in `N`.
    pub fn realized_types(&self, n: &FiniteStructure) -> Result<Vec<usize>> {
        realized_types(n, &self.omitted)
    }

    /// Whether `N` satisfies every axiom of `T_Ψ`.
    pub fn models_axioms(&self, n: &FiniteStructure) -> Result<bool> {
        let budget = Budget::unlimited();
        let mut ext = ExtensionCache::new(n, &budget);
        for a in &self.axioms {
            check_symbols(n, a)?;
            if !ext.get(a)?.bits.contains(0) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Stored JSON form. The sentence is kept as a DAG: each relation's
    /// definition mentions its children through their relation symbols.
    pub fn to_value(&self) -> Value {
        let rel = |f: &Formula| self.relation_atom(f).expect("sub-formula");
        let relations: Vec<Value> = self
            .subformulas
            .iter()
            .zip(&self.names)
            .map(|(f, name)| {
                let def = match f.kind() {
                    Kind::Atom { .. } | Kind::Eq(..) => f.clone(),
                    Kind::Not(c) => Formula::not(rel(c)),
                    Kind::Exists(v, c) => Formula::exists(*v, rel(c)),
                    Kind::And(cs) => Formula::and(cs.iter().map(rel)),
                };
                json!({
                    "name": name,
                    "arity": f.free_vars().len(),
                    "definition": print(&def),
                })
            })
            .collect();
        let omitted: Vec<Value> = self
            .omitted
            .iter()
            .map(|t| json!({"key": t.key, "literals": t.literals.iter().map(print).collect::<Vec<_>>()}))
            .collect();
        json!({
            "source": try_print(&self.original, 100_000).ok(),
            "source_digest": self.original.digest_hex(),
            "source_signature": {"relations": self.source_signature.relations},
            "signature": {"relations": self.signature.relations},
            "relations": relations,
            "root": self.names.last(),
            "axioms": self.axioms.iter().map(print).collect::<Vec<_>>(),
            "omitted_types": omitted,
        })
    }

    /// Read back a stored theory: the sentence is rebuilt from the relation
    /// definitions, recompiled, and checked against the stored axioms.
    pub fn from_value(v: &Value) -> Result<CompiledTheory> {
        let field = |k: &str| v.get(k).ok_or_else(|| Error::Invalid(format!("compiled theory lacks \"{k}\"")));
        let sig: Signature = serde_json::from_value(field("source_signature")?.clone())?;
        let rels = field("relations")?
            .as_array()
            .ok_or_else(|| Error::Invalid("\"relations\" must be an array".into()))?;
        let mut full = sig.relations.clone();
        let mut defs: BTreeMap<String, Formula> = BTreeMap::new();
        let mut last = None;
        for r in rels {
            let name = r["name"].as_str().ok_or_else(|| Error::Invalid("relation without a name".into()))?;
            let arity = r["arity"].as_u64().ok_or_else(|| Error::Invalid(format!("{name} without an arity")))?;
            let text = r["definition"]
                .as_str()
                .ok_or_else(|| Error::Invalid(format!("{name} without a definition")))?;
            let def = parse_formula(text, &Signature { relations: full.clone() })?;
            let f = expand(&def, &defs)?;
            if f.free_vars().len() as u64 != arity {
                return Err(Error::Invalid(format!("{name}: arity {arity} does not match its definition")));
            }
            full.insert(name.to_string(), arity as usize);
            defs.insert(name.to_string(), f.clone());
            last = Some(f);
        }
        let root = last.ok_or_else(|| Error::Invalid("no relations".into()))?;
        let original = match v.get("source").and_then(Value::as_str) {
            Some(text) => parse_formula(text, &sig)?,
            None => root.clone(),
        };
        let c = compile_sentence(&original, &sig)?;
        let stored: Vec<&str> = field("axioms")?
            .as_array()
            .ok_or_else(|| Error::Invalid("\"axioms\" must be an array".into()))?
            .iter()
            .filter_map(Value::as_str)
            .collect();
        let ours: Vec<String> = c.axioms.iter().map(print).collect();
        if c.source != root || stored != ours {
            return Err(Error::Invalid("stored axioms do not match the recompiled sentence".into()));
        }
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<CompiledTheory> {
        CompiledTheory::from_value(&serde_json::from_str(text)?)
    }
}

// Replace relation atoms by the formulas they name.
fn expand(def: &Formula, defs: &BTreeMap<String, Formula>) -> Result<Formula> {
    Ok(match def.kind() {
        Kind::Atom { rel, args } => match defs.get(rel.as_ref()) {
            Some(f) => {
                if args.as_ref() != f.free_vars() {
                    return Err(Error::Invalid(format!("{rel} used with arguments other than its free variables")));
                }
                f.clone()
            }
            None => def.clone(),
        },
        Kind::Eq(..) => def.clone(),
        Kind::Not(c) => Formula::not(expand(c, defs)?),
        Kind::Exists(v, c) => Formula::exists(*v, expand(c, defs)?),
        Kind::And(cs) => Formula::and(cs.iter().map(|c| expand(c, defs)).collect::<Result<Vec<_>>>()?),
    })
}

/// Indices (into `types`) of the types some tuple of `N` realizes.
pub fn realized_types(n: &FiniteStructure, types: &[OmittedType]) -> Result<Vec<usize>> {
    let budget = Budget::unlimited();
    let mut ext = ExtensionCache::new(n, &budget);
    let mut out = Vec::new();
    for (i, t) in types.iter().enumerate() {
        let f = t.realization();
        check_symbols(n, &f)?;
        if ext.get(&f)?.bits.count_ones(..) > 0 {
            out.push(i);
        }
    }
    Ok(out)
}

/// Whether no tuple of `N` realizes any of the types.
pub fn omits_all(n: &FiniteStructure, types: &[OmittedType]) -> Result<bool> {
    Ok(realized_types(n, types)?.is_empty())
}

/// One round of the completion: every pool candidate isolating some omitted
/// type in `T` contributes the axiom `¬∃x̄ φ`. Returns the new axioms, in
/// pool order; `T` is extended in place.
pub fn completion_step(
    t: &mut TheoryHandle,
    c: &CompiledTheory,
    pool: &Pool,
    budget: &Budget,
) -> Result<Vec<Formula>> {
    if !t.is_consistent(budget)? {
        return Err(Error::Inconsistent(t.bound().unwrap_or(0)));
    }
    let mut found: Vec<Formula> = Vec::new();
    for phi in pool.formulas() {
        for sigma in &c.omitted {
            if !phi.free_vars().iter().all(|v| sigma.vars.contains(v)) {
                continue;
            }
            if crate::atomicity::isolates_with(phi, &sigma.literals, &sigma.vars, t, budget)? {
                let ax = Formula::not(Formula::exists_many(&sigma.vars, phi.clone()));
                if !t.contains_axiom(&ax) && !found.contains(&ax) {
                    found.push(ax);
                }
                break;
            }
        }
    }
    for ax in &found {
        t.add_axiom(ax.clone())?;
    }
    Ok(found)
}

/// Iterate [`completion_step`] until nothing changes or `max_steps` rounds
/// have run. Returns the number of rounds that added axioms and whether a
/// fixpoint was reached.
pub fn complete_to_fixpoint(
    t: &mut TheoryHandle,
    c: &CompiledTheory,
    pool: &Pool,
    max_steps: usize,
    budget: &Budget,
) -> Result<(usize, bool)> {
    for step in 0..max_steps {
        if completion_step(t, c, pool, budget)?.is_empty() {
            return Ok((step, true));
        }
    }
    Ok((max_steps, false))
}

/// The pool of isolation candidates over `L_Ψ` used by the completion.
pub fn candidate_pool(c: &CompiledTheory, spec: &PoolSpec) -> Result<Pool> {
    let vars = c
        .omitted
        .iter()
        .map(|t| t.vars.iter().map(|v| v.0 as usize + 1).max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    Pool::enumerate(&c.signature, &PoolSpec { vars: spec.vars.max(vars), ..spec.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::syntax::parse_formula;

    fn compile(text: &str, sig: &Signature) -> CompiledTheory {
        compile_sentence(&parse_formula(text, sig).unwrap(), sig).unwrap()
    }

    fn printed(c: &CompiledTheory) -> Vec<String> {
        c.axioms().iter().map(print).collect()
    }

    #[test]
    fn subformula_lists() {
        let sig = Signature::new([("P", 1)]);
        let psi = parse_formula("Exists x0 . P(x0)", &sig).unwrap();
        let subs: Vec<String> = subformulas(&psi, &sig).unwrap().iter().map(print).collect();
        assert_eq!(subs, ["P(x0)", "Exists x0 . P(x0)"]);

        let sig = Signature::new([("A", 0), ("B", 0)]);
        let subs = subformulas(&parse_formula("And{A, B}", &sig).unwrap(), &sig).unwrap();
        let texts: Vec<String> = subs.iter().map(print).collect();
        assert_eq!(subs.len(), 3);
        assert_eq!(subs[2], parse_formula("And{A, B}", &sig).unwrap());
        assert!(texts.contains(&"A()".to_string()) && texts.contains(&"B()".to_string()));
        assert!(!texts.contains(&"And{A}".to_string()));

        let sig = Signature::new([("P", 1)]);
        let open = parse_formula("P(x0)", &sig).unwrap();
        assert_eq!(subformulas(&open, &sig), Err(Error::NotASentence(vec![0])));
    }

    #[test]
    fn saturation_adds_missing_atoms() {
        let sig = Signature::new([("Q", 0), ("R", 2)]);
        let c = compile("Q", &sig);
        let r = Formula::atom("R", crate::logic::formula::vars(2));
        assert!(c.symbol_of(&r).is_some());
        assert_eq!(c.original(), &parse_formula("Q", &sig).unwrap());
        assert_ne!(c.source(), c.original());
        // the two saturating conjunctions and the disjunction inside
        assert_eq!(c.omitted_types().len(), 3);
    }

    #[test]
    fn four_schemas() {
        let sig = Signature::new([("P", 1)]);
        let c = compile("Exists x0 . P(x0)", &sig);
        assert_eq!(c.signature().arity("R_0"), Some(1));
        assert_eq!(c.signature().arity("R_1"), Some(0));
        assert_eq!(c.formula_of("R_0").map(print).as_deref(), Some("P(x0)"));
        let bridge = Formula::iff(
            Formula::exists(Var(0), Formula::atom("R_0", vec![Var(0)])),
            Formula::atom("R_1", vec![]),
        );
        assert_eq!(c.axioms(), &[bridge, Formula::atom("R_1", vec![])]);
        assert!(c.omitted_types().is_empty());

        let sig = Signature::new([("A", 0)]);
        let c = compile("Not A", &sig);
        let (ra, rn) = (Formula::atom("R_0", vec![]), Formula::atom("R_1", vec![]));
        assert_eq!(c.axioms(), &[Formula::iff(Formula::not(ra), rn.clone()), rn]);

        let c = compile("And{}", &Signature::default());
        assert_eq!(printed(&c), ["R_0()"]);
        let sigma = &c.omitted_types()[0];
        assert_eq!(sigma.literals, vec![Formula::not(Formula::atom("R_0", vec![]))]);
    }

    #[test]
    fn symbol_prefix_avoids_clashes() {
        let sig = Signature::new([("R_0", 0)]);
        let c = compile("R_0", &sig);
        assert!(c.signature().iter().all(|(n, _)| n.starts_with("R__")));
    }

    #[test]
    fn transform_and_inverse() {
        let sig = Signature::new([("P", 1)]);
        let c = compile("Exists x0 . P(x0)", &sig);
        let m = FiniteStructure::from_tuples(sig.clone(), 1, [("P", vec![vec![0]])]).unwrap();
        let h = c.transform(&m).unwrap();
        assert!(h.holds("R_0", &[0]).unwrap() && h.holds("R_1", &[]).unwrap());
        assert!(c.models_axioms(&h).unwrap() && omits_all(&h, c.omitted_types()).unwrap());
        assert_eq!(c.inverse_transform(&h).unwrap(), m);

        let empty = FiniteStructure::new(sig.clone(), 1).unwrap();
        let h = c.transform(&empty).unwrap();
        assert!(!h.holds("R_1", &[]).unwrap() && !c.models_axioms(&h).unwrap());
        assert_eq!(c.inverse_transform(&h).unwrap(), empty);

        let other = FiniteStructure::new(Signature::new([("S", 1)]), 1).unwrap();
        assert!(matches!(c.transform(&other), Err(Error::SignatureMismatch(_))));
    }

    #[test]
    fn realized_conjunction_type() {
        let sig = Signature::new([("A", 0), ("B", 0)]);
        let c = compile("And{A, B}", &sig);
        let m = FiniteStructure::from_tuples(sig, 1, [("A", vec![vec![]]), ("B", vec![vec![]])]).unwrap();
        let mut h = c.transform(&m).unwrap();
        assert!(omits_all(&h, c.omitted_types()).unwrap());
        let root = c.symbol_of(c.source()).unwrap().to_string();
        h.set_table(&root, Table::empty(0, 1).unwrap()).unwrap();
        assert_eq!(c.realized_types(&h).unwrap(), vec![0]);
        assert!(omits_all(&h, &[]).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let sig = Signature::new([("P", 1), ("R", 2)]);
        let c = compile("Exists x0 . And{P(x0), Not Exists x1 . R(x0, x1)}", &sig);
        let back = CompiledTheory::from_value(&c.to_value()).unwrap();
        assert_eq!(back.axioms(), c.axioms());
        assert_eq!(back.signature(), c.signature());
        assert_eq!(back.omitted_types(), c.omitted_types());
        let mut v = c.to_value();
        v["axioms"][0] = json!("R_0(x0)");
        assert!(CompiledTheory::from_value(&v).is_err());
    }

    #[test]
    fn completion_without_candidates_is_identity() {
        let sig = Signature::new([("P", 1)]);
        let c = compile("Exists x0 . P(x0)", &sig);
        let b = Budget::unlimited();
        let mut t = TheoryHandle::bounded(c.signature().clone(), c.axioms().to_vec(), 2).unwrap();
        let empty = Pool::from_formulas(PoolSpec::default(), vec![]);
        assert!(completion_step(&mut t, &c, &empty, &b).unwrap().is_empty());
        assert_eq!(t.axioms(), c.axioms());

        let mut bad = TheoryHandle::bounded(c.signature().clone(), vec![Formula::not(Formula::truth())], 2).unwrap();
        assert!(matches!(completion_step(&mut bad, &c, &empty, &b), Err(Error::Inconsistent(2))));
    }

    #[test]
    fn complete_handle_queries() {
        let sig = Signature::new([("P", 1)]);
        let c = compile("Exists x0 . P(x0)", &sig);
        let m = FiniteStructure::from_tuples(sig, 1, [("P", vec![vec![0]])]).unwrap();
        let mut t = TheoryHandle::complete(c.transform(&m).unwrap());
        let b = Budget::unlimited();
        let q = Formula::exists(Var(0), Formula::atom("R_0", vec![Var(0)]));
        assert!(t.entails(&q, &b).unwrap());
        assert!(!t.entails(&Formula::not(q), &b).unwrap());
        assert!(t.entails(&Formula::atom("R_1", vec![]), &b).unwrap());
    }
}
