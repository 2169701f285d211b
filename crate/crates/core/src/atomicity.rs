//! Isolation, density of isolated types, atomicity of structures and sets,
//! and the greedy construction of an atomic set closed under witnesses.
//!
//! Against the complete theory of a finite structure every question is
//! decided exactly: a formula isolates a complete type iff its extension is
//! non-empty and lies inside one automorphism orbit. Against a bounded handle
//! "complete type" means "decides every formula of the declared pool", and
//! anything not certified within the pool is reported as unknown.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use serde::Serialize;
use serde_json::{json, Value};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::logic::eval::{check_symbols, ExtensionCache};
use crate::logic::formula::{Formula, Var};
use crate::logic::iso::{automorphisms, isomorphic_bruteforce, orbit_ids_with};
use crate::logic::structure::{all_tuples, checked_pow, tuple_index, FiniteStructure};
use crate::logic::syntax::try_print;
use crate::pool::Pool;
use crate::scott::{refine_to_fixpoint, PartitionSystem, ScottBuilder};
use crate::theory::{satisfies_all, TheoryHandle};

const WITNESS_PRINT_LIMIT: u64 = 2000;

fn check_vars(f: &Formula, l: usize) -> Result<()> {
    match f.free_vars().iter().find(|v| v.0 as usize >= l) {
        Some(v) => Err(Error::UnboundVariable(v.0)),
        None => Ok(()),
    }
}

/// The stage-β formula of a tuple, whose extension is its orbit.
fn orbit_formula(m: &FiniteStructure, ps: &PartitionSystem, tuple: &[usize]) -> Result<Formula> {
    let b = Budget::unlimited();
    ScottBuilder::new(m, ps, &b).stage_formula(tuple, ps.beta())
}

fn prefix(l: usize) -> Vec<Var> {
    (0..l as u32).map(Var).collect()
}

/// Whether `θ` isolates `Σ` in `T`: `T ∪ {∃x̄ θ}` is consistent and
/// `T ⊢ ∀x̄(θ → ψ)` for every `ψ ∈ Σ`, with `x̄` the free variables of all
/// formulas involved.
pub fn isolates(theta: &Formula, sigma: &[Formula], t: &mut TheoryHandle, budget: &Budget) -> Result<bool> {
    let mut vars: Vec<Var> = theta.free_vars().to_vec();
    for s in sigma {
        vars.extend_from_slice(s.free_vars());
    }
    vars.sort();
    vars.dedup();
    isolates_with(theta, sigma, &vars, t, budget)
}

/// [`isolates`] over an explicit variable tuple.
pub fn isolates_with(
    theta: &Formula,
    sigma: &[Formula],
    vars: &[Var],
    t: &mut TheoryHandle,
    budget: &Budget,
) -> Result<bool> {
    for f in std::iter::once(theta).chain(sigma) {
        if let Some(v) = f.free_vars().iter().find(|v| !vars.contains(v)) {
            return Err(Error::UnboundVariable(v.0));
        }
    }
    // universes are non-empty, so only θ's own variables need binding
    if !t.consistent_with(&[Formula::exists_many(theta.free_vars(), theta.clone())], budget)? {
        return Ok(false);
    }
    let claim = Formula::forall_many(vars, Formula::implies(theta.clone(), Formula::and(sigma.iter().cloned())));
    t.entails(&claim, budget)
}

/// Answers the questions the constructions ask, exactly for a complete
/// handle and under bounded semantics otherwise.
enum Judge<'a> {
    Exact {
        m: &'a FiniteStructure,
        cache: ExtensionCache<'a>,
        auts: Vec<Vec<usize>>,
        orbits: FxHashMap<usize, Vec<u32>>,
        consistent: bool,
    },
    Bounded {
        t: &'a mut TheoryHandle,
        budget: &'a Budget,
        types: &'a Pool,
    },
}

impl<'a> Judge<'a> {
    /// Holds on tuples of length `l`, as indices into `M^l`.
    fn holds_on(&mut self, f: &Formula, l: usize) -> Result<Vec<usize>> {
        let Judge::Exact { m, cache, .. } = self else {
            unreachable!("exact judge only")
        };
        let n = m.size();
        let e = cache.get(f)?;
        let pos: Vec<usize> = e.vars.iter().map(|v| v.0 as usize).collect();
        let total = checked_pow(n, l)?;
        let mut out = Vec::new();
        let mut proj = vec![0usize; pos.len()];
        for (idx, t) in all_tuples(n, l).enumerate().take(total) {
            for (p, &i) in proj.iter_mut().zip(&pos) {
                *p = t[i];
            }
            if e.bits.contains(tuple_index(&proj, n)) {
                out.push(idx);
            }
        }
        Ok(out)
    }

    fn satisfiable(&mut self, f: &Formula, l: usize) -> Result<bool> {
        check_vars(f, l)?;
        match self {
            Judge::Exact { cache, consistent, .. } => Ok(*consistent && cache.get(f)?.bits.count_ones(..) > 0),
            Judge::Bounded { t, budget, .. } => t.consistent_with(&[Formula::exists_many(&prefix(l), f.clone())], budget),
        }
    }

    fn implies(&mut self, a: &Formula, b: &Formula, l: usize) -> Result<bool> {
        check_vars(a, l)?;
        check_vars(b, l)?;
        match self {
            Judge::Exact { cache, consistent, .. } => {
                let both = Formula::and([a.clone(), Formula::not(b.clone())]);
                Ok(!*consistent || cache.get(&both)?.bits.count_ones(..) == 0)
            }
            Judge::Bounded { t, budget, .. } => {
                let claim = Formula::forall_many(&prefix(l), Formula::implies(a.clone(), b.clone()));
                t.entails(&claim, budget)
            }
        }
    }

    /// `θ(x0..x(l-1))` is consistent and isolates a complete type.
    fn isolates_complete(&mut self, theta: &Formula, l: usize) -> Result<bool> {
        if !self.satisfiable(theta, l)? {
            return Ok(false);
        }
        if let Judge::Bounded { types, .. } = self {
            let decide: Vec<Formula> = types.over(l).cloned().collect();
            for psi in decide {
                if !self.implies(theta, &psi, l)? && !self.implies(theta, &Formula::not(psi.clone()), l)? {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
        let hits = self.holds_on(theta, l)?;
        let Judge::Exact { m, auts, orbits, .. } = self else { unreachable!() };
        let ids = orbits.entry(l).or_insert_with(|| orbit_ids_with(m, auts, l));
        Ok(hits.iter().all(|&i| ids[i] == ids[hits[0]]))
    }

    fn is_exact(&self) -> bool {
        matches!(self, Judge::Exact { .. })
    }
}

fn exact_judge<'a>(m: &'a FiniteStructure, t: &TheoryHandle, budget: &'a Budget) -> Result<Judge<'a>> {
    let consistent = match t {
        TheoryHandle::Complete(_) => {
            // added sentences are decided by evaluation in the structure
            satisfies_all(m, t.axioms())?
        }
        TheoryHandle::Bounded(_) => unreachable!(),
    };
    Ok(Judge::Exact {
        m,
        cache: ExtensionCache::new(m, budget),
        auts: automorphisms(m),
        orbits: FxHashMap::default(),
        consistent,
    })
}

/// Exact judge for a complete handle (after checking `M` is isomorphic to
/// its structure), bounded judge otherwise (after checking `M` satisfies the
/// axioms).
fn judge_for<'a>(
    m: &'a FiniteStructure,
    t: &'a mut TheoryHandle,
    types: &'a Pool,
    budget: &'a Budget,
) -> Result<Judge<'a>> {
    if let Some(n) = t.structure() {
        if n != m && isomorphic_bruteforce(m, n)?.is_none() {
            return Err(Error::Invalid("the structure is not a model of the theory".into()));
        }
        return exact_judge(m, t, budget);
    }
    if !satisfies_all(m, t.axioms())? {
        return Err(Error::Invalid("the structure fails the theory's axioms".into()));
    }
    Ok(Judge::Bounded { t, budget, types })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Isolated,
    NotIsolated,
    UnknownAtBound,
}

#[derive(Clone, Debug)]
pub struct TupleVerdict {
    pub tuple: Vec<usize>,
    pub verdict: Verdict,
    pub witness: Option<Formula>,
}

#[derive(Clone, Debug)]
pub struct AtomicityReport {
    pub verdicts: Vec<TupleVerdict>,
    pub semantics: String,
    pub pool_bound: u64,
    pub pool_size: usize,
    pub pool_truncated: bool,
    /// The set under test, when not the whole structure.
    pub set: Option<Vec<usize>>,
    /// Whether a construction finished (closure reached) within its budget.
    pub complete: bool,
    pub notes: Vec<String>,
}

fn print_witness(f: &Formula) -> String {
    try_print(f, WITNESS_PRINT_LIMIT)
        .unwrap_or_else(|_| format!("<formula of size {} with digest {}>", f.size(), f.digest_hex()))
}

fn tuple_key(t: &[usize]) -> String {
    t.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
}

impl AtomicityReport {
    pub fn all_isolated(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict == Verdict::Isolated)
    }

    pub fn to_value(&self) -> Value {
        let verdicts: Vec<Value> = self
            .verdicts
            .iter()
            .map(|v| json!({"tuple": v.tuple, "verdict": v.verdict}))
            .collect();
        let witnesses: BTreeMap<String, String> = self
            .verdicts
            .iter()
            .filter_map(|v| v.witness.as_ref().map(|w| (tuple_key(&v.tuple), print_witness(w))))
            .collect();
        json!({
            "verdicts": verdicts,
            "witnesses": witnesses,
            "pool_bound": self.pool_bound,
            "pool_size": self.pool_size,
            "pool_truncated": self.pool_truncated,
            "semantics": self.semantics,
            "set": self.set,
            "complete": self.complete,
            "all_isolated": self.all_isolated(),
            "notes": self.notes,
        })
    }
}

fn semantics_label(t: &TheoryHandle) -> String {
    match t.bound() {
        None => "complete theory of a finite structure".into(),
        Some(k) => format!("bounded models of size <= {k}"),
    }
}

/// Tuples of `M` (or of `set`) of every length up to `max_len`, each with an
/// isolation verdict in `T`. `types` is the pool a complete type must decide
/// under bounded semantics; `candidates` supplies isolating formulas.
pub fn is_atomic_with(
    m: &FiniteStructure,
    t: &mut TheoryHandle,
    set: Option<&[usize]>,
    types: &Pool,
    candidates: &Pool,
    max_len: usize,
    budget: &Budget,
) -> Result<AtomicityReport> {
    if let Some(s) = set {
        if let Some(a) = s.iter().find(|&&a| a >= m.size()) {
            return Err(Error::Invalid(format!("element {a} out of range")));
        }
    }
    let elems: Vec<usize> = match set {
        Some(s) => {
            let mut v = s.to_vec();
            v.sort();
            v.dedup();
            v
        }
        None => (0..m.size()).collect(),
    };
    let semantics = semantics_label(t);
    let mut notes = Vec::new();

    let mut judge = judge_for(m, t, types, budget)?;
    let exact = judge.is_exact();
    let scott = if exact { Some(refine_to_fixpoint(m)?) } else { None };
    if exact {
        notes.push("verdicts are exact; pool formulas are preferred as witnesses".into());
    } else {
        notes.push("a complete type is one deciding every formula of the pool".into());
    }

    let mut verdicts = Vec::new();
    for l in 0..=max_len {
        let ext_budget = Budget::unlimited();
        let mut ext = ExtensionCache::new(m, &ext_budget);
        for tup in tuples_over(&elems, l) {
            budget.check_time()?;
            let mut holds = |f: &Formula| -> Result<bool> {
                check_symbols(m, f)?;
                let e = ext.get(f)?;
                let proj: Vec<usize> = e.vars.iter().map(|v| tup[v.0 as usize]).collect();
                Ok(e.bits.contains(tuple_index(&proj, m.size())))
            };
            let pool_type: Vec<Formula> = if exact {
                Vec::new()
            } else {
                let mut ty = Vec::new();
                for psi in types.over(l) {
                    ty.push(if holds(psi)? { psi.clone() } else { Formula::not(psi.clone()) });
                }
                ty
            };
            let mut witness = None;
            for theta in candidates.over(l) {
                if !holds(theta)? {
                    continue;
                }
                let ok = if exact {
                    judge.isolates_complete(theta, l)?
                } else {
                    let Judge::Bounded { t, budget, .. } = &mut judge else { unreachable!() };
                    isolates_with(theta, &pool_type, &prefix(l), t, budget)?
                };
                if ok {
                    witness = Some(theta.clone());
                    break;
                }
            }
            let verdict = if witness.is_some() {
                Verdict::Isolated
            } else if exact {
                // the stage-β Scott formula defines the orbit of the tuple
                let ps = scott.as_ref().expect("just computed");
                let f = orbit_formula(m, ps, &tup)?;
                debug_assert!(judge.isolates_complete(&f, l)?);
                witness = Some(f);
                Verdict::Isolated
            } else {
                Verdict::UnknownAtBound
            };
            verdicts.push(TupleVerdict {
                tuple: tup,
                verdict,
                witness,
            });
        }
    }
    Ok(AtomicityReport {
        verdicts,
        semantics,
        pool_bound: candidates.spec().max_size,
        pool_size: candidates.len(),
        pool_truncated: candidates.truncated(),
        set: set.map(|_| elems),
        complete: true,
        notes,
    })
}

/// [`is_atomic_with`] using one pool for both roles.
pub fn is_atomic(
    m: &FiniteStructure,
    t: &mut TheoryHandle,
    pool: &Pool,
    max_len: usize,
    budget: &Budget,
) -> Result<AtomicityReport> {
    is_atomic_with(m, t, None, pool, pool, max_len, budget)
}

fn tuples_over(elems: &[usize], l: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    all_tuples(elems.len(), l).map(move |t| t.iter().map(|&i| elems[i]).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityEntry {
    pub formula: String,
    pub verdict: DensityVerdict,
    pub witness: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityVerdict {
    /// Some pool formula below it isolates a complete type.
    Dense,
    /// The formula is inconsistent with the theory.
    Inconsistent,
    UnknownAtBound,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub theory_consistent: bool,
    /// The theory is inconsistent, so density holds vacuously.
    pub vacuous: bool,
    pub entries: Vec<DensityEntry>,
    pub pool_bound: u64,
    pub pool_size: usize,
    pub semantics: String,
}

impl DensityReport {
    pub fn dense(&self) -> bool {
        self.vacuous || self.entries.iter().all(|e| e.verdict != DensityVerdict::UnknownAtBound)
    }
}

/// For every consistent pool formula `φ(x0..x(l-1))`, look for a pool formula
/// `θ` with `T ⊢ θ → φ` that isolates a complete type.
pub fn isolated_types_dense(t: &mut TheoryHandle, pool: &Pool, budget: &Budget) -> Result<DensityReport> {
    let l = pool.spec().vars;
    let semantics = semantics_label(t);
    let consistent = t.is_consistent(budget)?;
    let mut report = DensityReport {
        theory_consistent: consistent,
        vacuous: !consistent,
        entries: Vec::new(),
        pool_bound: pool.spec().max_size,
        pool_size: pool.len(),
        semantics,
    };
    if !consistent {
        return Ok(report);
    }
    let owned = t.structure().cloned();
    let scott = match &owned {
        Some(m) => Some(refine_to_fixpoint(m)?),
        None => None,
    };
    let mut judge = match &owned {
        Some(m) => exact_judge(m, t, budget)?,
        None => Judge::Bounded { t, budget, types: pool },
    };
    for phi in pool.formulas() {
        budget.check_time()?;
        if !judge.satisfiable(phi, l)? {
            report.entries.push(DensityEntry {
                formula: print_witness(phi),
                verdict: DensityVerdict::Inconsistent,
                witness: None,
            });
            continue;
        }
        let mut witness = None;
        for theta in pool.formulas() {
            if judge.implies(theta, phi, l)? && judge.isolates_complete(theta, l)? {
                witness = Some(print_witness(theta));
                break;
            }
        }
        if witness.is_none() && judge.is_exact() {
            let m = owned.as_ref().expect("exact judge has a structure");
            let hits = judge.holds_on(phi, l)?;
            let tup = crate::logic::structure::tuple_at(hits[0], m.size(), l);
            let ps = scott.as_ref().expect("just computed");
            let f = orbit_formula(m, ps, &tup)?;
            witness = Some(print_witness(&f));
        }
        report.entries.push(DensityEntry {
            formula: print_witness(phi),
            verdict: if witness.is_some() { DensityVerdict::Dense } else { DensityVerdict::UnknownAtBound },
            witness,
        });
    }
    Ok(report)
}

/// Least pool formula (in pool order) over `x0..x(l-1)` that is consistent,
/// isolates a complete type and implies `psi`.
fn choose_isolator(judge: &mut Judge, pool: &Pool, psi: &Formula, l: usize) -> Result<Option<Formula>> {
    for theta in pool.over(l) {
        if judge.implies(theta, psi, l)? && judge.isolates_complete(theta, l)? {
            return Ok(Some(theta.clone()));
        }
    }
    Ok(None)
}

/// The result of one extension step, with the formula chain that chose it.
#[derive(Clone, Debug)]
pub struct ExtensionStep {
    pub element: usize,
    /// `ψ_n, …, ψ_m` with `x` renamed to `x_m`, `m = |A|`.
    pub chain: Vec<Formula>,
}

/// Given an atomic set `A`, a tuple `b̄` from `A` and `φ(x, b̄)` with
/// `M ⊨ ∃x φ(x, b̄)`, find `c` with `M ⊨ φ(c, b̄)` such that `A ∪ {c}` is
/// atomic, through the chain `ψ_n = θ_{φ ∧ θ_n}`, `ψ_{i+1} = θ_{ψ_i ∧ θ_{i+1}}`.
///
/// `φ` mentions `b̄` through `x0..x(|b̄|-1)` and the new element through `x`.
pub fn extend_atomic(
    m: &FiniteStructure,
    t: &mut TheoryHandle,
    a: &[usize],
    b: &[usize],
    phi: &Formula,
    x: Var,
    pool: &Pool,
    budget: &Budget,
) -> Result<ExtensionStep> {
    let n = b.len();
    if (x.0 as usize) < n {
        return Err(Error::Invalid(format!("{x} is already a parameter variable")));
    }
    if let Some(v) = phi.free_vars().iter().find(|v| **v != x && v.0 as usize >= n) {
        return Err(Error::UnboundVariable(v.0));
    }
    if let Some(e) = b.iter().find(|e| !a.contains(e)) {
        return Err(Error::Invalid(format!("parameter {e} is not in the set")));
    }
    // enumerate A with b̄ first
    let mut order: Vec<usize> = Vec::new();
    for &e in b.iter().chain(a) {
        if !order.contains(&e) {
            order.push(e);
        }
    }
    // parameter variables move to the positions of their elements in the
    // enumeration; repeated parameters share a variable
    let width = order.len();
    let xm = Var(width as u32);
    let mut ren: BTreeMap<Var, Var> = b
        .iter()
        .enumerate()
        .map(|(i, e)| (Var(i as u32), Var(order.iter().position(|f| f == e).expect("present") as u32)))
        .collect();
    ren.insert(x, xm);
    let phi = phi.rename(&ren);
    let nb = b.iter().collect::<std::collections::BTreeSet<_>>().len();

    let mut judge = judge_for(m, t, pool, budget)?;
    let scott = if judge.is_exact() { Some(refine_to_fixpoint(m)?) } else { None };

    // θ_i isolates tp(ā_i): least pool formula true of ā_i isolating a
    // complete type (exact fallback: the Scott stage formula).
    let theta_of = |i: usize, judge: &mut Judge| -> Result<Formula> {
        let tup = &order[..i];
        let ext_budget = Budget::unlimited();
        let mut ext = ExtensionCache::new(m, &ext_budget);
        for theta in pool.over(i) {
            let e = ext.get(theta)?;
            let proj: Vec<usize> = e.vars.iter().map(|v| tup[v.0 as usize]).collect();
            if e.bits.contains(tuple_index(&proj, m.size())) && judge.isolates_complete(theta, i)? {
                return Ok(theta.clone());
            }
        }
        if let Some(ps) = &scott {
            return orbit_formula(m, ps, tup);
        }
        Err(Error::ResourceLimit(format!(
            "no pool formula isolates the type of the first {i} elements"
        )))
    };

    // ψ(x_m, x0..x(i-1)) is searched for as a formula over x0..x_i
    let down = |f: &Formula, i: usize| f.rename(&BTreeMap::from([(xm, Var(i as u32))]));
    let up = |f: &Formula, i: usize| f.rename(&BTreeMap::from([(Var(i as u32), xm)]));

    let mut chain = Vec::new();
    let mut psi = phi.clone();
    for i in nb..=width {
        let th = theta_of(i, &mut judge)?;
        let target = down(&Formula::and([psi.clone(), th]), i);
        let chosen = choose_isolator(&mut judge, pool, &target, i + 1)?;
        let chosen = match chosen {
            Some(f) => up(&f, i),
            None if judge.is_exact() => {
                // exact fallback: the orbit formula of some realization
                let hits = judge.holds_on(&target, i + 1)?;
                let mut pick = None;
                for h in hits {
                    let tup = crate::logic::structure::tuple_at(h, m.size(), i + 1);
                    if tup[..i] == order[..i] {
                        pick = Some(tup);
                        break;
                    }
                }
                let tup = pick.ok_or_else(|| Error::Invalid("no realization over the enumerated set".into()))?;
                let ps = scott.as_ref().expect("just computed");
                up(&orbit_formula(m, ps, &tup)?, i)
            }
            None => {
                return Err(Error::ResourceLimit(format!(
                    "no pool formula isolates a complete type below the chain formula at step {i}"
                )))
            }
        };
        chain.push(chosen.clone());
        psi = chosen;
    }
    // c realizes ψ_m(x, ā_m) and φ(x, b̄)
    let mut asg: BTreeMap<Var, usize> = order.iter().enumerate().map(|(i, &e)| (Var(i as u32), e)).collect();
    let mut ev = crate::logic::eval::Evaluator::new(m);
    for c in 0..m.size() {
        asg.insert(xm, c);
        if ev.eval_checked(&psi, &asg)? && ev.eval_checked(&phi, &asg)? {
            return Ok(ExtensionStep { element: c, chain });
        }
    }
    Err(Error::Invalid(
        "the chain formula has no realization over the set (is M ⊨ ∃x φ(x, b̄)?)".into(),
    ))
}

/// Greedy atomic set closed under witnesses for pool formulas: for every
/// `φ(x0, x1, …, xj)` in the pool and `b̄` from the set placed on `x1..xj`,
/// if `M ⊨ ∃x0 φ(x0, b̄)` some witness lies in the set. `steps` bounds the
/// number of elements added.
pub fn build_atomic_set(
    m: &FiniteStructure,
    t: &mut TheoryHandle,
    pool: &Pool,
    steps: usize,
    max_len: usize,
    budget: &Budget,
) -> Result<(Vec<usize>, AtomicityReport)> {
    let mut set: Vec<usize> = Vec::new();
    let mut added = 0usize;
    let mut complete = false;
    let mut notes = Vec::new();
    loop {
        budget.check_time()?;
        let gap = first_gap(m, &set, pool)?;
        let Some((phi, params)) = gap else {
            complete = true;
            break;
        };
        if added >= steps {
            notes.push(format!("step budget {steps} exhausted before closure"));
            break;
        }
        // shift: x0 ↦ fresh witness variable, x(i+1) ↦ xi
        let j = params.len();
        let fresh = Var(j as u32 + 1 + phi.max_var().unwrap_or(0));
        let mut ren: BTreeMap<Var, Var> = BTreeMap::from([(Var(0), fresh)]);
        for i in 0..j {
            ren.insert(Var(i as u32 + 1), Var(i as u32));
        }
        let shifted = phi.rename(&ren);
        let step = extend_atomic(m, t, &set, &params, &shifted, fresh, pool, budget)?;
        if set.contains(&step.element) {
            return Err(Error::Invalid("extension returned an element already in the set".into()));
        }
        set.push(step.element);
        added += 1;
    }
    let mut report = is_atomic_with(m, t, Some(&set), pool, pool, max_len, budget)?;
    report.complete = complete;
    report.notes.extend(notes);
    Ok((set, report))
}

/// First (pool order, then parameter order) witness requirement the set
/// fails.
fn first_gap(m: &FiniteStructure, set: &[usize], pool: &Pool) -> Result<Option<(Formula, Vec<usize>)>> {
    let budget = Budget::unlimited();
    let mut ext = ExtensionCache::new(m, &budget);
    let mut sorted = set.to_vec();
    sorted.sort();
    for phi in pool.formulas() {
        check_symbols(m, phi)?;
        let j = phi.free_vars().iter().map(|v| v.0 as usize).max().unwrap_or(0);
        let e = ext.get(phi)?;
        let pos: Vec<usize> = e.vars.iter().map(|v| v.0 as usize).collect();
        let sat = |tuple: &[usize]| {
            let proj: Vec<usize> = pos.iter().map(|&p| tuple[p]).collect();
            e.bits.contains(tuple_index(&proj, m.size()))
        };
        for params in tuples_over(&sorted, j) {
            let mut tuple = vec![0usize];
            tuple.extend_from_slice(&params);
            let exists = (0..m.size()).any(|c| {
                tuple[0] = c;
                sat(&tuple)
            });
            let inside = sorted.iter().any(|&c| {
                tuple[0] = c;
                sat(&tuple)
            });
            if exists && !inside {
                return Ok(Some((phi.clone(), params)));
            }
        }
    }
    Ok(None)
}

/// Whether the set is closed under pool witnesses (see [`build_atomic_set`]).
pub fn is_witness_closed(m: &FiniteStructure, set: &[usize], pool: &Pool) -> Result<bool> {
    Ok(first_gap(m, set, pool)?.is_none())
}

#[derive(Clone, Debug, Serialize)]
pub struct AclReport {
    pub set: Vec<usize>,
    pub closure: Vec<usize>,
    pub threshold: Option<usize>,
    pub atomic: bool,
    pub note: String,
}

/// Finite surrogate of `acl(A)`: elements whose orbit under the automorphisms
/// fixing `A` pointwise has at most `threshold` elements (no threshold: every
/// orbit of a finite structure is finite, so everything); then re-check that
/// the closure is atomic in `Th(M)`.
pub fn acl_atomic_check(
    m: &FiniteStructure,
    a: &[usize],
    threshold: Option<usize>,
    pool: &Pool,
    max_len: usize,
    budget: &Budget,
) -> Result<AclReport> {
    if let Some(e) = a.iter().find(|&&e| e >= m.size()) {
        return Err(Error::Invalid(format!("element {e} out of range")));
    }
    let fixing: Vec<Vec<usize>> = automorphisms(m)
        .into_iter()
        .filter(|s| a.iter().all(|&e| s[e] == e))
        .collect();
    let mut closure: Vec<usize> = (0..m.size())
        .filter(|&b| {
            let mut orbit: Vec<usize> = fixing.iter().map(|s| s[b]).collect();
            orbit.sort();
            orbit.dedup();
            threshold.is_none_or(|k| orbit.len() <= k)
        })
        .collect();
    for &e in a {
        if !closure.contains(&e) {
            closure.push(e);
        }
    }
    closure.sort();
    let mut t = TheoryHandle::complete(m.clone());
    let report = is_atomic_with(m, &mut t, Some(&closure), pool, pool, max_len, budget)?;
    let mut set = a.to_vec();
    set.sort();
    set.dedup();
    Ok(AclReport {
        set,
        closure,
        threshold,
        atomic: report.all_isolated(),
        note: "finite surrogate: algebraic means orbit over the set of size at most the threshold".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::signature::Signature;
    use crate::logic::syntax::parse_formula;
    use crate::pool::{PoolSpec, Quantifiers};

    fn sig() -> Signature {
        Signature::new([("R", 2)])
    }

    fn chain(n: usize) -> FiniteStructure {
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| vec![i, j])).collect();
        FiniteStructure::from_tuples(sig(), n, [("R", pairs)]).unwrap()
    }

    fn antichain(n: usize) -> FiniteStructure {
        FiniteStructure::new(sig(), n).unwrap()
    }

    fn f(text: &str) -> Formula {
        parse_formula(text, &sig()).unwrap()
    }

    fn pool(max_size: u64, vars: usize) -> Pool {
        let spec = PoolSpec {
            max_size,
            vars,
            quantifiers: Quantifiers::Single,
            max_formulas: 3000,
        };
        Pool::enumerate(&sig(), &spec).unwrap()
    }

    #[test]
    fn isolation_examples() {
        let b = Budget::unlimited();
        let mut t = TheoryHandle::complete(chain(2));
        let psi = f("R(x0, x1)");
        assert!(isolates(&psi, std::slice::from_ref(&psi), &mut t, &b).unwrap());
        assert!(!isolates(&f("R(x0, x0)"), &[], &mut t, &b).unwrap());
        // ∃x1 R(x0,x1) decides every small formula in one variable
        let theta = f("Exists x1 . R(x0, x1)");
        let m = chain(2);
        let mut ev = crate::logic::eval::Evaluator::new(&m);
        let sigma: Vec<Formula> = pool(8, 2)
            .over(1)
            .map(|p| if ev.eval_tuple(p, &[0]).unwrap() { p.clone() } else { Formula::not(p.clone()) })
            .collect();
        assert!(isolates_with(&theta, &sigma, &[Var(0)], &mut t, &b).unwrap());
        assert_eq!(
            isolates_with(&f("R(x0, x2)"), &[], &[Var(0)], &mut t, &b),
            Err(Error::UnboundVariable(2))
        );
    }

    #[test]
    fn finite_structures_are_atomic() {
        let b = Budget::unlimited();
        for m in [chain(3), antichain(3)] {
            let mut t = TheoryHandle::complete(m.clone());
            let r = is_atomic(&m, &mut t, &pool(4, 2), 3, &b).unwrap();
            assert!(r.all_isolated());
            assert_eq!(r.verdicts.len(), 1 + 3 + 9 + 27);
            assert_eq!(r.verdicts[0].witness.as_ref(), Some(&Formula::truth()));
            let v = r.to_value();
            assert!(v["witnesses"].is_object() && v["pool_bound"] == 4);
        }
    }

    #[test]
    fn bounded_handle_never_says_not_isolated() {
        let b = Budget::unlimited();
        let axioms = vec![f("Forall x0 . Not R(x0, x0)")];
        let mut t = TheoryHandle::bounded(sig(), axioms, 2).unwrap();
        let m = chain(2);
        let r = is_atomic(&m, &mut t, &pool(3, 2), 1, &b).unwrap();
        assert!(r.verdicts.iter().all(|v| v.verdict != Verdict::NotIsolated));
        assert_eq!(r.verdicts[0].verdict, Verdict::Isolated);
        let mut bad = TheoryHandle::bounded(sig(), vec![f("Forall x0 . R(x0, x0)")], 2).unwrap();
        assert!(is_atomic(&m, &mut bad, &pool(3, 2), 1, &b).is_err());
    }

    #[test]
    fn density() {
        let b = Budget::unlimited();
        let mut t = TheoryHandle::complete(chain(3));
        let r = isolated_types_dense(&mut t, &pool(4, 2), &b).unwrap();
        assert!(r.dense() && !r.vacuous);
        assert!(r.entries.iter().any(|e| e.verdict == DensityVerdict::Inconsistent));
        let mut bad = TheoryHandle::bounded(sig(), vec![f("Not And{}")], 2).unwrap();
        let r = isolated_types_dense(&mut bad, &pool(3, 1), &b).unwrap();
        assert!(r.vacuous && r.dense() && r.entries.is_empty());
    }

    #[test]
    fn extension_examples() {
        let b = Budget::unlimited();
        let p = pool(6, 3);
        let m = chain(4);
        let mut t = TheoryHandle::complete(m.clone());
        // A = ∅: the least witness
        let step = extend_atomic(&m, &mut t, &[], &[], &f("Not Exists x1 . R(x1, x0)"), Var(0), &p, &b).unwrap();
        assert_eq!(step.element, 0);
        // x = a re-selects a
        let step = extend_atomic(&m, &mut t, &[2], &[2], &f("x1 = x0"), Var(1), &p, &b).unwrap();
        assert_eq!(step.element, 2);
        let step = extend_atomic(&m, &mut t, &[0], &[0], &f("R(x0, x1)"), Var(1), &p, &b).unwrap();
        assert!((1..4).contains(&step.element));
        let r = is_atomic_with(&m, &mut t, Some(&[0, step.element]), &p, &p, 3, &b).unwrap();
        assert!(r.all_isolated());
        assert!(extend_atomic(&m, &mut t, &[0], &[0], &f("R(x0, x0)"), Var(0), &p, &b).is_err());
    }

    #[test]
    fn greedy_closure() {
        let b = Budget::unlimited();
        let p = pool(4, 2);
        let m = chain(3);
        let mut t = TheoryHandle::complete(m.clone());
        let (set, r) = build_atomic_set(&m, &mut t, &p, 0, 2, &b).unwrap();
        assert!(set.is_empty() && !r.complete);
        let (mut set, r) = build_atomic_set(&m, &mut t, &p, 100, 2, &b).unwrap();
        set.sort();
        assert_eq!(set, vec![0, 1, 2]);
        assert!(r.complete && r.all_isolated());

        let a = antichain(3);
        let mut t = TheoryHandle::complete(a.clone());
        let (set, r) = build_atomic_set(&a, &mut t, &p, 100, 2, &b).unwrap();
        assert_eq!(set.len(), 2);
        assert!(r.complete && is_witness_closed(&a, &set, &p).unwrap());
    }

    #[test]
    fn acl_surrogate() {
        let b = Budget::unlimited();
        let p = pool(3, 2);
        let r = acl_atomic_check(&chain(3), &[], None, &p, 2, &b).unwrap();
        assert_eq!(r.closure, vec![0, 1, 2]);
        assert!(r.atomic);
        let r = acl_atomic_check(&antichain(3), &[], None, &p, 2, &b).unwrap();
        assert_eq!(r.closure, vec![0, 1, 2]);
        let r = acl_atomic_check(&antichain(3), &[], Some(1), &p, 2, &b).unwrap();
        assert!(r.closure.is_empty() && r.atomic);
        let r = acl_atomic_check(&antichain(3), &[1], Some(1), &p, 2, &b).unwrap();
        assert_eq!(r.closure, vec![1]);
    }
}
