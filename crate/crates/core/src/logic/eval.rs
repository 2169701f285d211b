use std::collections::BTreeMap;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::logic::formula::{Digest, Formula, Kind, Var};
use crate::logic::structure::{checked_pow, tuple_index, FiniteStructure, Table};

const UNSET: u32 = u32::MAX;

/// Check that all symbols of `f` are in the structure's signature with the right arity.
pub fn check_symbols(m: &FiniteStructure, f: &Formula) -> Result<()> {
    for (name, arity) in f.symbols() {
        m.signature().check(&name, arity)?;
    }
    Ok(())
}

/// Truth of `f` in `m` under `asg`.
pub fn evaluate(m: &FiniteStructure, f: &Formula, asg: &BTreeMap<Var, usize>) -> Result<bool> {
    check_symbols(m, f)?;
    let mut ev = Evaluator::new(m);
    ev.eval_checked(f, asg)
}

/// Memoizing top-down evaluator over one structure.
///
/// The memo is keyed by node identity and the values of the node's free
/// variables; memoized nodes are kept alive by the evaluator.
pub struct Evaluator<'a> {
    m: &'a FiniteStructure,
    tables: FxHashMap<&'a str, &'a Table>,
    memo: FxHashMap<(usize, u64), bool>,
    keep: FxHashSet<usize>,
    keep_alive: Vec<Formula>,
    env: Vec<u32>,
}

impl<'a> Evaluator<'a> {
    pub fn new(m: &'a FiniteStructure) -> Self {
        Evaluator {
            m,
            tables: m.tables().collect(),
            memo: FxHashMap::default(),
            keep: FxHashSet::default(),
            keep_alive: Vec::new(),
            env: Vec::new(),
        }
    }

    pub fn structure(&self) -> &'a FiniteStructure {
        self.m
    }

    /// Evaluate after checking the assignment covers the free variables.
    /// Symbols are assumed to have been checked by the caller.
    pub fn eval_checked(&mut self, f: &Formula, asg: &BTreeMap<Var, usize>) -> Result<bool> {
        for v in f.free_vars() {
            match asg.get(v) {
                None => return Err(Error::UnboundVariable(v.0)),
                Some(&a) if a >= self.m.size() => {
                    return Err(Error::Invalid(format!("{v} assigned {a}, outside the universe")))
                }
                _ => {}
            }
        }
        let width = f
            .max_var()
            .into_iter()
            .chain(asg.keys().map(|v| v.0))
            .max()
            .map_or(0, |m| m as usize + 1);
        self.env.clear();
        self.env.resize(width, UNSET);
        for (v, &a) in asg {
            self.env[v.0 as usize] = a as u32;
        }
        Ok(self.eval(f))
    }

    /// Evaluate with positional assignment `x_i ↦ tuple[i]`.
    pub fn eval_tuple(&mut self, f: &Formula, tuple: &[usize]) -> Result<bool> {
        let asg: BTreeMap<Var, usize> =
            tuple.iter().enumerate().map(|(i, &a)| (Var(i as u32), a)).collect();
        self.eval_checked(f, &asg)
    }

    fn key(&self, f: &Formula) -> Option<u64> {
        let n = self.m.size() as u64;
        let mut idx: u64 = 0;
        for v in f.free_vars() {
            idx = idx.checked_mul(n)?.checked_add(self.env[v.0 as usize] as u64)?;
        }
        Some(idx)
    }

    fn eval(&mut self, f: &Formula) -> bool {
        match f.kind() {
            Kind::Atom { rel, args } => {
                let n = self.m.size();
                let idx = args.iter().fold(0usize, |acc, v| acc * n + self.env[v.0 as usize] as usize);
                self.tables[&**rel].get_index(idx)
            }
            Kind::Eq(a, b) => self.env[a.0 as usize] == self.env[b.0 as usize],
            Kind::Not(c) => !self.eval(c),
            Kind::And(_) | Kind::Exists(..) => {
                let memo_key = if f.size() >= 4 {
                    self.key(f).map(|k| (f.node_id(), k))
                } else {
                    None
                };
                if let Some(k) = memo_key {
                    if let Some(&r) = self.memo.get(&k) {
                        return r;
                    }
                }
                let r = match f.kind() {
                    Kind::And(cs) => {
                        let order = f.eval_order();
                        order.iter().all(|&i| self.eval(&cs[i as usize]))
                    }
                    Kind::Exists(v, body) => {
                        let slot = v.0 as usize;
                        if slot >= self.env.len() {
                            self.env.resize(slot + 1, UNSET);
                        }
                        let saved = self.env[slot];
                        let mut found = false;
                        for a in 0..self.m.size() as u32 {
                            self.env[slot] = a;
                            if self.eval(body) {
                                found = true;
                                break;
                            }
                        }
                        self.env[slot] = saved;
                        found
                    }
                    _ => unreachable!(),
                };
                if let Some(k) = memo_key {
                    if self.keep.insert(k.0) {
                        self.keep_alive.push(f.clone());
                    }
                    self.memo.insert(k, r);
                }
                r
            }
        }
    }
}

/// The set of satisfying assignments of a formula over its sorted free
/// variables, as a bitset indexed like relation tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extension {
    pub vars: Vec<Var>,
    pub bits: FixedBitSet,
}

/// Bottom-up extension computation with a digest-keyed cache.
pub struct ExtensionCache<'a> {
    m: &'a FiniteStructure,
    cache: FxHashMap<Digest, Arc<Extension>>,
    budget: &'a Budget,
}

impl<'a> ExtensionCache<'a> {
    pub fn new(m: &'a FiniteStructure, budget: &'a Budget) -> Self {
        ExtensionCache {
            m,
            cache: FxHashMap::default(),
            budget,
        }
    }

    pub fn get(&mut self, f: &Formula) -> Result<Arc<Extension>> {
        if let Some(e) = self.cache.get(f.digest()) {
            return Ok(e.clone());
        }
        let e = Arc::new(self.compute(f)?);
        self.cache.insert(*f.digest(), e.clone());
        Ok(e)
    }

    fn compute(&mut self, f: &Formula) -> Result<Extension> {
        let n = self.m.size();
        let vars = f.free_vars().to_vec();
        let k = vars.len();
        let cells = checked_pow(n, k)?;
        self.budget.charge(cells as u64 / 64 + 1)?;
        let pos = |v: &Var| vars.binary_search(v).expect("free variable");
        let bits = match f.kind() {
            Kind::Atom { rel, args } => {
                let table = self
                    .m
                    .table(rel)
                    .ok_or_else(|| Error::UnknownSymbol(rel.to_string()))?;
                if table.arity() != args.len() {
                    return Err(Error::ArityMismatch {
                        symbol: rel.to_string(),
                        expected: table.arity(),
                        found: args.len(),
                    });
                }
                let map: Vec<usize> = args.iter().map(pos).collect();
                let mut bits = FixedBitSet::with_capacity(cells);
                let mut digits = vec![0usize; k];
                let mut tuple = vec![0usize; args.len()];
                for idx in 0..cells {
                    for (t, &p) in tuple.iter_mut().zip(&map) {
                        *t = digits[p];
                    }
                    if table.get_index(tuple_index(&tuple, n)) {
                        bits.insert(idx);
                    }
                    bump(&mut digits, n);
                }
                bits
            }
            Kind::Eq(a, b) => {
                let (pa, pb) = (pos(a), pos(b));
                let mut bits = FixedBitSet::with_capacity(cells);
                let mut digits = vec![0usize; k];
                for idx in 0..cells {
                    if digits[pa] == digits[pb] {
                        bits.insert(idx);
                    }
                    bump(&mut digits, n);
                }
                bits
            }
            Kind::Not(c) => {
                let mut bits = self.get(c)?.bits.clone();
                bits.toggle_range(..);
                bits
            }
            Kind::And(cs) => {
                let mut bits = FixedBitSet::with_capacity(cells);
                bits.insert_range(..);
                for c in cs.iter() {
                    let ce = self.get(c)?;
                    let map: Vec<usize> = ce.vars.iter().map(pos).collect();
                    if map.len() == k {
                        bits.intersect_with(&ce.bits);
                        continue;
                    }
                    let mut digits = vec![0usize; k];
                    for idx in 0..cells {
                        if bits.contains(idx) {
                            let ci = map.iter().fold(0usize, |acc, &p| acc * n + digits[p]);
                            if !ce.bits.contains(ci) {
                                bits.set(idx, false);
                            }
                        }
                        bump(&mut digits, n);
                    }
                }
                bits
            }
            Kind::Exists(v, body) => {
                let be = self.get(body)?;
                match be.vars.binary_search(v) {
                    Err(_) => be.bits.clone(),
                    Ok(p) => {
                        let low = checked_pow(n, be.vars.len() - p - 1)?;
                        let mut bits = FixedBitSet::with_capacity(cells);
                        for ci in be.bits.ones() {
                            let high = ci / (low * n);
                            bits.insert(high * low + ci % low);
                        }
                        bits
                    }
                }
            }
        };
        Ok(Extension { vars, bits })
    }
}

#[inline]
fn bump(digits: &mut [usize], n: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < n {
            return;
        }
        *d = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::signature::Signature;
    use crate::logic::structure::all_tuples;
    use crate::logic::syntax::parse_formula;

    fn chain2() -> FiniteStructure {
        FiniteStructure::from_tuples(Signature::new([("R", 2)]), 2, [("R", vec![vec![0, 1]])]).unwrap()
    }

    #[test]
    fn spec_examples() {
        let m = FiniteStructure::from_tuples(Signature::new([("P", 1)]), 1, [("P", vec![vec![0]])]).unwrap();
        let p = parse_formula("P(x0)", m.signature()).unwrap();
        assert!(evaluate(&m, &p, &BTreeMap::from([(Var(0), 0)])).unwrap());
        assert!(evaluate(&m, &Formula::truth(), &BTreeMap::new()).unwrap());

        let c = chain2();
        let f = parse_formula("Exists x1 . R(x0,x1)", c.signature()).unwrap();
        assert!(!evaluate(&c, &f, &BTreeMap::from([(Var(0), 1)])).unwrap());
        assert!(evaluate(&c, &f, &BTreeMap::from([(Var(0), 0)])).unwrap());
    }

    #[test]
    fn errors() {
        let c = chain2();
        let f = parse_formula("R(x0,x1)", c.signature()).unwrap();
        assert_eq!(
            evaluate(&c, &f, &BTreeMap::from([(Var(0), 0)])),
            Err(Error::UnboundVariable(1))
        );
        let g = Formula::atom("S", vec![Var(0)]);
        assert!(matches!(
            evaluate(&c, &g, &BTreeMap::from([(Var(0), 0)])),
            Err(Error::UnknownSymbol(_))
        ));
    }

    #[test]
    fn extension_matches_evaluator() {
        let c = chain2();
        let f = parse_formula(
            "And{Exists x2 . And{R(x0,x2), Not x2 = x1}, Not R(x1,x1), Or{x0 = x1, R(x1,x0)}}",
            c.signature(),
        )
        .unwrap();
        let budget = Budget::unlimited();
        let mut cache = ExtensionCache::new(&c, &budget);
        let ext = cache.get(&f).unwrap();
        let mut ev = Evaluator::new(&c);
        for (i, t) in all_tuples(2, 2).enumerate() {
            assert_eq!(ext.bits.contains(i), ev.eval_tuple(&f, &t).unwrap(), "{t:?}");
        }
    }
}
