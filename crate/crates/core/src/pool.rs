//! Finite formula pools, enumerated by AST size and then digest.
//!
//! Pools stand in for "all formulas" wherever a search over formulas is
//! needed: isolating candidates, types to decide, witnesses to close under.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::error::Result;
use crate::logic::eval::ExtensionCache;
use crate::logic::formula::{Formula, Kind, Var};
use crate::logic::signature::Signature;
use crate::logic::structure::{all_tuples, FiniteStructure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantifiers {
    None,
    /// At most one quantifier per formula.
    Single,
    Any,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    /// Largest AST size.
    pub max_size: u64,
    /// Variables `x0..x(vars-1)` may occur, free or bound.
    pub vars: usize,
    pub quantifiers: Quantifiers,
    /// Stop once this many formulas are collected.
    pub max_formulas: usize,
}

impl Default for PoolSpec {
    fn default() -> Self {
        PoolSpec {
            max_size: 12,
            vars: 2,
            quantifiers: Quantifiers::Single,
            max_formulas: 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Pool {
    spec: PoolSpec,
    formulas: Vec<Formula>,
    truncated: bool,
}

// Guard against levels too large to sort.
const LEVEL_CAP: usize = 1 << 21;

fn is_and(f: &Formula) -> bool {
    matches!(f.kind(), Kind::And(_))
}

impl Pool {
    /// All formulas over `sig` within the spec, ordered by (size, digest).
    pub fn enumerate(sig: &Signature, spec: &PoolSpec) -> Result<Pool> {
        let v = spec.vars;
        let mut levels: Vec<Vec<Formula>> = vec![Vec::new()];
        let mut out: Vec<Formula> = Vec::new();
        let mut truncated = false;
        let mut seen: BTreeSet<[u8; 32]> = BTreeSet::new();
        for s in 1..=spec.max_size {
            let mut level: Vec<Formula> = Vec::new();
            if s == 1 {
                level.push(Formula::truth());
                for (name, arity) in sig.iter() {
                    for t in all_tuples(v, arity) {
                        level.push(Formula::atom(name, t.iter().map(|&i| Var(i as u32)).collect::<Vec<_>>()));
                    }
                }
                for i in 0..v {
                    for j in i + 1..v {
                        level.push(Formula::eq(Var(i as u32), Var(j as u32)));
                    }
                }
            } else {
                let s = s as usize;
                for f in &levels[s - 1] {
                    if !matches!(f.kind(), Kind::Not(_)) {
                        level.push(Formula::not(f.clone()));
                    }
                    let q = f.quantifier_count();
                    let allowed = match spec.quantifiers {
                        Quantifiers::None => false,
                        Quantifiers::Single => q == 0,
                        Quantifiers::Any => true,
                    };
                    if allowed {
                        for &x in f.free_vars() {
                            level.push(Formula::exists(x, f.clone()));
                        }
                    }
                }
                // Flat conjunctions: a non-conjunction joined with another, or
                // appended to a conjunction whose children all sort below it.
                for a in 1..s - 1 {
                    let b = s - 1 - a;
                    if a > b {
                        break;
                    }
                    for f in levels[a].iter().filter(|f| !is_and(f)) {
                        for g in levels[b].iter().filter(|g| !is_and(g)) {
                            if f < g {
                                level.push(Formula::and([f.clone(), g.clone()]));
                            }
                        }
                    }
                }
                for a in 3..s {
                    let b = s - a;
                    for f in levels[a].iter().filter(|f| is_and(f)) {
                        let Kind::And(cs) = f.kind() else { unreachable!() };
                        let top = cs.last().expect("non-empty conjunction");
                        for g in levels[b].iter().filter(|g| !is_and(g)) {
                            if g > top {
                                let mut all = cs.to_vec();
                                all.push(g.clone());
                                level.push(Formula::and(all));
                            }
                        }
                    }
                    if level.len() > LEVEL_CAP {
                        break;
                    }
                }
            }
            if level.len() > LEVEL_CAP {
                level.truncate(LEVEL_CAP);
                truncated = true;
            }
            level.sort();
            level.dedup();
            level.retain(|f| f.quantifier_count() == 0 || spec.quantifiers != Quantifiers::None);
            for f in &level {
                if out.len() >= spec.max_formulas {
                    truncated = true;
                    break;
                }
                if seen.insert(*f.digest()) {
                    out.push(f.clone());
                }
            }
            levels.push(level);
            if truncated {
                break;
            }
        }
        Ok(Pool {
            spec: spec.clone(),
            formulas: out,
            truncated,
        })
    }

    pub fn from_formulas(spec: PoolSpec, formulas: Vec<Formula>) -> Pool {
        Pool {
            spec,
            formulas,
            truncated: false,
        }
    }

    pub fn spec(&self) -> &PoolSpec {
        &self.spec
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }

    /// Whether enumeration stopped at `max_formulas` (or a level cap) before
    /// exhausting `max_size`.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Formulas whose free variables lie among `x0..x(k-1)`.
    pub fn over(&self, k: usize) -> impl Iterator<Item = &Formula> + '_ {
        self.formulas
            .iter()
            .filter(move |f| f.free_vars().iter().all(|v| (v.0 as usize) < k))
    }

    /// Keep the first formula of each equivalence class, where formulas are
    /// equivalent when they have the same free variables and the same
    /// extension in every one of `models`.
    pub fn semantic_dedup(&self, models: &[FiniteStructure]) -> Result<Pool> {
        let budget = Budget::unlimited();
        let mut caches: Vec<ExtensionCache> = models.iter().map(|m| ExtensionCache::new(m, &budget)).collect();
        let mut seen: FxHashMap<(Vec<Var>, Vec<Vec<usize>>), ()> = FxHashMap::default();
        let mut out = Vec::new();
        for f in &self.formulas {
            let mut key = Vec::with_capacity(models.len());
            for c in caches.iter_mut() {
                key.push(c.get(f)?.bits.as_slice().to_vec());
            }
            if seen.insert((f.free_vars().to_vec(), key), ()).is_none() {
                out.push(f.clone());
            }
        }
        Ok(Pool {
            spec: self.spec.clone(),
            formulas: out,
            truncated: self.truncated,
        })
    }
}
