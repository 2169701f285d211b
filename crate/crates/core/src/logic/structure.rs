use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::logic::signature::Signature;

/// Largest number of cells a single relation table may have.
pub const MAX_TABLE_CELLS: usize = 1 << 28;

/// Index of `tuple` in the mixed-radix encoding, first coordinate most significant.
#[inline]
pub fn tuple_index(tuple: &[usize], n: usize) -> usize {
    tuple.iter().fold(0, |acc, &a| acc * n + a)
}

/// Inverse of [`tuple_index`].
pub fn tuple_at(mut idx: usize, n: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = idx % n;
        idx /= n;
    }
    out
}

pub fn checked_pow(n: usize, k: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..k {
        acc = acc
            .checked_mul(n)
            .filter(|&c| c <= MAX_TABLE_CELLS)
            .ok_or_else(|| Error::ResourceLimit(format!("table of {n}^{k} cells")))?;
    }
    Ok(acc)
}

/// All tuples of `0..n` of length `k` in lexicographic order.
pub fn all_tuples(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.checked_pow(k as u32).unwrap_or(usize::MAX);
    (0..total).map(move |i| tuple_at(i, n, k))
}

/// A relation stored densely over all `n^arity` tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    arity: usize,
    bits: FixedBitSet,
}

impl Table {
    pub fn empty(arity: usize, n: usize) -> Result<Self> {
        Ok(Table {
            arity,
            bits: FixedBitSet::with_capacity(checked_pow(n, arity)?),
        })
    }

    pub fn from_bits(arity: usize, bits: FixedBitSet) -> Self {
        Table { arity, bits }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.bits.contains(idx)
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A finite relational structure with universe `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteStructure {
    signature: Signature,
    size: usize,
    tables: BTreeMap<String, Table>,
}

#[derive(Serialize, Deserialize)]
struct SigJson {
    #[serde(default)]
    relations: BTreeMap<String, usize>,
    #[serde(default)]
    functions: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct StructureJson {
    signature: SigJson,
    size: usize,
    #[serde(default)]
    tables: BTreeMap<String, Vec<Vec<usize>>>,
}

impl FiniteStructure {
    /// A structure with all relations empty.
    pub fn new(signature: Signature, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidStructure("universe must be non-empty".into()));
        }
        let mut tables = BTreeMap::new();
        for (name, arity) in signature.iter() {
            tables.insert(name.to_string(), Table::empty(arity, size)?);
        }
        Ok(FiniteStructure {
            signature,
            size,
            tables,
        })
    }

    /// Build from explicit tuple lists; relations missing from `tables` are empty.
    pub fn from_tuples<S: AsRef<str>>(
        signature: Signature,
        size: usize,
        tables: impl IntoIterator<Item = (S, Vec<Vec<usize>>)>,
    ) -> Result<Self> {
        let mut m = FiniteStructure::new(signature, size)?;
        for (name, tuples) in tables {
            for t in tuples {
                m.insert(name.as_ref(), &t)?;
            }
        }
        Ok(m)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = (&str, &Table)> {
        self.tables.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn set_table(&mut self, name: &str, table: Table) -> Result<()> {
        self.signature.check(name, table.arity)?;
        if table.bits.len() != checked_pow(self.size, table.arity)? {
            return Err(Error::InvalidStructure(format!("table `{name}` has the wrong length")));
        }
        self.tables.insert(name.to_string(), table);
        Ok(())
    }

    pub fn insert(&mut self, name: &str, tuple: &[usize]) -> Result<()> {
        self.signature.check(name, tuple.len())?;
        if let Some(&a) = tuple.iter().find(|&&a| a >= self.size) {
            return Err(Error::InvalidStructure(format!(
                "element {a} of `{name}` tuple out of range 0..{}",
                self.size
            )));
        }
        let n = self.size;
        let t = self.tables.get_mut(name).expect("signature checked");
        t.bits.insert(tuple_index(tuple, n));
        Ok(())
    }

    /// Membership test; unknown names and bad arities are errors.
    pub fn holds(&self, name: &str, tuple: &[usize]) -> Result<bool> {
        self.signature.check(name, tuple.len())?;
        if tuple.iter().any(|&a| a >= self.size) {
            return Err(Error::Invalid(format!("tuple {tuple:?} out of range")));
        }
        Ok(self.tables[name].get_index(tuple_index(tuple, self.size)))
    }

    /// Tuples of a relation in lexicographic order.
    pub fn tuples(&self, name: &str) -> Vec<Vec<usize>> {
        match self.tables.get(name) {
            None => Vec::new(),
            Some(t) => t.bits.ones().map(|i| tuple_at(i, self.size, t.arity)).collect(),
        }
    }

    /// The image structure under the bijection `perm` (element `i` becomes `perm[i]`).
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.size {
            return Err(Error::Invalid("permutation has the wrong length".into()));
        }
        let mut seen = vec![false; self.size];
        for &p in perm {
            if p >= self.size || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Invalid("not a permutation".into()));
            }
        }
        let mut out = FiniteStructure::new(self.signature.clone(), self.size)?;
        for (name, _) in self.signature.iter() {
            for t in self.tuples(name) {
                let img: Vec<usize> = t.iter().map(|&a| perm[a]).collect();
                out.insert(name, &img)?;
            }
        }
        Ok(out)
    }

    /// Parse the JSON exchange format. Function symbols given under
    /// `"functions"` become graph relations of arity `k+1`, checked total and
    /// functional.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: StructureJson = serde_json::from_str(text)?;
        Self::from_json_value(raw)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let raw: StructureJson = serde_json::from_value(v.clone())?;
        Self::from_json_value(raw)
    }

    fn from_json_value(raw: StructureJson) -> Result<Self> {
        let mut rels = raw.signature.relations.clone();
        for (f, k) in &raw.signature.functions {
            if rels.insert(f.clone(), k + 1).is_some() {
                return Err(Error::InvalidStructure(format!(
                    "`{f}` declared as both relation and function"
                )));
            }
        }
        for name in raw.tables.keys() {
            if !rels.contains_key(name) {
                return Err(Error::UnknownSymbol(name.clone()));
            }
        }
        let mut m = FiniteStructure::new(Signature { relations: rels }, raw.size)?;
        for (name, tuples) in &raw.tables {
            for t in tuples {
                m.insert(name, t)?;
            }
        }
        for (f, &k) in &raw.signature.functions {
            let n = raw.size;
            let table = &m.tables[f];
            for args in all_tuples(n, k) {
                let base = tuple_index(&args, n) * n;
                let count = (0..n).filter(|&v| table.get_index(base + v)).count();
                if count != 1 {
                    return Err(Error::InvalidStructure(format!(
                        "function `{f}` has {count} values at {args:?}"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn to_value(&self) -> Value {
        let tables: BTreeMap<&str, Vec<Vec<usize>>> = self
            .signature
            .iter()
            .map(|(name, _)| (name, self.tuples(name)))
            .collect();
        json!({
            "signature": {"relations": self.signature.relations},
            "size": self.size,
            "tables": tables,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("serializable")
    }
}
