//! Additively edge-colored finite linear orders.
//!
//! Points are `0..n` in their order. Every point carries a vertex color
//! (the `P_i`) and every increasing pair a edge color (the `Q_j`). An
//! [`AdditivityTable`] stores the composition law `f(j1, j2)` for chains
//! `x < y < z`.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::logic::signature::Signature;
use crate::logic::structure::FiniteStructure;

pub mod formulas;
pub mod refine;
pub mod term;

pub use formulas::{emit_class_formula, emit_class_formulas, ClassFormula};
pub use refine::{
    classify, e1, endpoint_equivalence, nonuniform_colors, pattern, refine_fixpoint, refine_step, Base, Classification,
    ColorEquivalence, Pairs,
    RefineMode, Refinement,
};
pub use term::{encode_order, recover_order, recover_order_with_edges, Block, OrderTerm};

/// Name of the order relation in structures built from colored orders.
pub const LT: &str = "Lt";

pub fn vertex_symbol(c: u32) -> String {
    format!("P{c}")
}

pub fn edge_symbol(j: u32) -> String {
    format!("Q{j}")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoredOrder {
    n: usize,
    vertex: Vec<u32>,
    // row-major n×n, only entries i < j are meaningful
    edge: Vec<u32>,
}

impl ColoredOrder {
    /// `edge(i, j)` is called for every `i < j`.
    pub fn new(vertex: Vec<u32>, mut edge: impl FnMut(usize, usize) -> u32) -> Self {
        let n = vertex.len();
        let mut e = vec![0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                e[i * n + j] = edge(i, j);
            }
        }
        ColoredOrder { n, vertex, edge: e }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertex_colors(&self) -> &[u32] {
        &self.vertex
    }

    pub fn vertex_color(&self, a: usize) -> u32 {
        self.vertex[a]
    }

    /// Color of the increasing pair `a < b`.
    pub fn edge(&self, a: usize, b: usize) -> u32 {
        debug_assert!(a < b);
        self.edge[a * self.n + b]
    }

    /// Unordered lookup: the color of `{a, b}` whichever way round.
    pub fn q(&self, a: usize, b: usize) -> u32 {
        if a < b {
            self.edge(a, b)
        } else {
            self.edge(b, a)
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).tuple_combinations()
    }

    /// Realized edge colors, sorted.
    pub fn edge_colors(&self) -> Vec<u32> {
        let s: BTreeSet<u32> = self.pairs().map(|(a, b)| self.edge(a, b)).collect();
        s.into_iter().collect()
    }

    /// Realized vertex colors, sorted.
    pub fn vertex_palette(&self) -> Vec<u32> {
        let s: BTreeSet<u32> = self.vertex.iter().copied().collect();
        s.into_iter().collect()
    }

    /// The order and vertex colors only.
    pub fn reduct(&self) -> (usize, Vec<u32>) {
        (self.n, self.vertex.clone())
    }

    /// Table read off the realized chains. Conflicting chains keep the first
    /// value seen; [`validate_kmu`] reports the rest.
    pub fn derived_table(&self) -> AdditivityTable {
        let mut t = AdditivityTable::default();
        for (x, y, z) in (0..self.n).tuple_combinations() {
            t.map.entry((self.edge(x, y), self.edge(y, z))).or_insert(self.edge(x, z));
        }
        t
    }

    /// The order as a relational structure: `Lt`, plus `P<c>` per realized
    /// vertex color and `Q<j>` per realized edge color when asked for.
    pub fn to_structure(&self, vertex: bool, edges: bool) -> FiniteStructure {
        let mut rels: Vec<(String, usize)> = vec![(LT.to_string(), 2)];
        if vertex {
            rels.extend(self.vertex_palette().into_iter().map(|c| (vertex_symbol(c), 1)));
        }
        if edges {
            rels.extend(self.edge_colors().into_iter().map(|j| (edge_symbol(j), 2)));
        }
        let mut m = FiniteStructure::new(Signature::new(rels), self.n).expect("small structure");
        for (a, b) in self.pairs() {
            m.insert(LT, &[a, b]).expect("declared");
            if edges {
                m.insert(&edge_symbol(self.edge(a, b)), &[a, b]).expect("declared");
            }
        }
        if vertex {
            for a in 0..self.n {
                m.insert(&vertex_symbol(self.vertex[a]), &[a]).expect("declared");
            }
        }
        m
    }

    /// Parse the JSON form. Returns the order and its table; a missing
    /// `additivity` field yields the table derived from the order.
    pub fn from_json(text: &str) -> Result<(ColoredOrder, AdditivityTable)> {
        let v: Value = serde_json::from_str(text)?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<(ColoredOrder, AdditivityTable)> {
        let bad = |m: &str| Error::Invalid(format!("colored order: {m}"));
        let obj = v.as_object().ok_or_else(|| bad("expected an object"))?;
        let n = obj.get("n").and_then(Value::as_u64).ok_or_else(|| bad("missing natural `n`"))? as usize;
        let vertex: Vec<u32> = obj
            .get("vertex_colors")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing array `vertex_colors`"))?
            .iter()
            .map(|c| c.as_u64().and_then(|c| u32::try_from(c).ok()).ok_or_else(|| bad("vertex colors must be naturals")))
            .collect::<Result<_>>()?;
        if vertex.len() != n {
            return Err(bad(&format!("`vertex_colors` has {} entries, expected {n}", vertex.len())));
        }
        let edges = obj
            .get("edge_colors")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing object `edge_colors`"))?;
        let mut e: Vec<Option<u32>> = vec![None; n * n];
        for (k, c) in edges {
            let (i, j) = k
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect_tuple()
                .and_then(|(i, j)| Some((i.ok()?, j.ok()?)))
                .ok_or_else(|| bad(&format!("edge key `{k}` is not `i,j`")))?;
            if i >= j || j >= n {
                return Err(bad(&format!("edge key `{k}` is not an increasing pair below {n}")));
            }
            let c = c
                .as_u64()
                .and_then(|c| u32::try_from(c).ok())
                .ok_or_else(|| bad(&format!("edge color at `{k}` must be a natural")))?;
            e[i * n + j] = Some(c);
        }
        if let Some((i, j)) = (0..n).tuple_combinations().find(|&(i, j)| e[i * n + j].is_none()) {
            return Err(bad(&format!("pair {i},{j} has no edge color")));
        }
        let order = ColoredOrder {
            n,
            vertex,
            edge: e.into_iter().map(|c| c.unwrap_or(0)).collect(),
        };
        let table = match obj.get("additivity") {
            None | Some(Value::Null) => order.derived_table(),
            Some(a) => AdditivityTable::from_value(a)?,
        };
        Ok((order, table))
    }

    pub fn to_value(&self, table: Option<&AdditivityTable>) -> Value {
        let mut edges = Map::new();
        for (a, b) in self.pairs() {
            edges.insert(format!("{a},{b}"), json!(self.edge(a, b)));
        }
        let mut out = Map::new();
        out.insert("n".into(), json!(self.n));
        out.insert("vertex_colors".into(), json!(self.vertex));
        out.insert("edge_colors".into(), Value::Object(edges));
        if let Some(t) = table {
            out.insert("additivity".into(), t.to_value());
        }
        Value::Object(out)
    }
}

/// Partial composition law on edge colors.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdditivityTable {
    pub map: BTreeMap<(u32, u32), u32>,
}

impl AdditivityTable {
    pub fn get(&self, j1: u32, j2: u32) -> Option<u32> {
        self.map.get(&(j1, j2)).copied()
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let bad = |m: String| Error::Invalid(format!("additivity table: {m}"));
        let rows = v.as_array().ok_or_else(|| bad("expected an array of [j1, j2, j3]".into()))?;
        let mut map = BTreeMap::new();
        for r in rows {
            let t: Vec<u32> = r
                .as_array()
                .filter(|a| a.len() == 3)
                .and_then(|a| a.iter().map(|x| x.as_u64().and_then(|x| u32::try_from(x).ok())).collect())
                .ok_or_else(|| bad(format!("entry {r} is not [j1, j2, j3]")))?;
            if let Some(old) = map.insert((t[0], t[1]), t[2]) {
                if old != t[2] {
                    return Err(bad(format!("f({}, {}) given as both {old} and {}", t[0], t[1], t[2])));
                }
            }
        }
        Ok(AdditivityTable { map })
    }

    pub fn to_value(&self) -> Value {
        Value::Array(self.map.iter().map(|(&(a, b), &c)| json!([a, b, c])).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    /// Check name to pass/fail.
    pub checks: BTreeMap<String, bool>,
    pub violations: Vec<Violation>,
    /// Longest chain length used by the chain-pattern check.
    pub chain_length: usize,
}

// Keep reports readable on badly broken inputs.
const MAX_LISTED: usize = 200;

/// Check the K_μ axioms on a finite order: partitions, endpoint uniformity,
/// additivity on every triple, and that a chain pattern
/// `Q_{j1}(x0,x1) ∧ … ∧ Q_{jk}(x(k-1),xk)` fixes the quantifier-free type
/// of the tuple. A finite linear order is rigid, so "same orbit" is read as
/// "same quantifier-free type".
pub fn validate_kmu(o: &ColoredOrder, f: &AdditivityTable) -> ValidationReport {
    let mut violations = Vec::new();
    let mut checks = BTreeMap::new();
    let push = |v: &mut Vec<Violation>, kind: &str, detail: String| {
        if v.len() < MAX_LISTED {
            v.push(Violation { kind: kind.into(), detail });
        }
    };

    // Both partitions are total by construction of the representation.
    checks.insert("vertex-partition".into(), o.vertex.len() == o.n);
    checks.insert("edge-partition".into(), true);

    let mut ends: BTreeMap<u32, (u32, u32, (usize, usize))> = BTreeMap::new();
    let mut endpoint_ok = true;
    for (a, b) in o.pairs() {
        let j = o.edge(a, b);
        let here = (o.vertex[a], o.vertex[b]);
        let (s, t, first) = *ends.entry(j).or_insert((here.0, here.1, (a, b)));
        if (s, t) != here {
            endpoint_ok = false;
            push(
                &mut violations,
                "endpoint",
                format!("color {j}: pair {a},{b} has endpoint colors {here:?}, pair {},{} has {:?}", first.0, first.1, (s, t)),
            );
        }
    }
    checks.insert("endpoint-uniformity".into(), endpoint_ok);

    let mut additive = true;
    for (x, y, z) in (0..o.n).tuple_combinations() {
        let (j1, j2, j3) = (o.edge(x, y), o.edge(y, z), o.edge(x, z));
        match f.get(j1, j2) {
            None => {
                additive = false;
                push(&mut violations, "additivity-missing", format!("f({j1}, {j2}) undefined, realized by {x}<{y}<{z}"));
            }
            Some(c) if c != j3 => {
                additive = false;
                push(
                    &mut violations,
                    "additivity-mismatch",
                    format!("f({j1}, {j2}) = {c} but Q({x},{z}) = {j3} for {x}<{y}<{z}"),
                );
            }
            _ => {}
        }
    }
    checks.insert("additivity".into(), additive);

    // Chains of length 3 suffice: given those, Q(xi, xk) is fixed by
    // induction on k - i. Length 2 is endpoint uniformity again.
    let chain_length = 3.min(o.n);
    let mut chain_ok = true;
    for k in 2..=chain_length {
        let mut seen: BTreeMap<Vec<u32>, (Vec<u32>, Vec<usize>)> = BTreeMap::new();
        for t in (0..o.n).combinations(k) {
            let pattern: Vec<u32> = t.windows(2).map(|w| o.edge(w[0], w[1])).collect();
            let mut ty: Vec<u32> = t.iter().map(|&a| o.vertex[a]).collect();
            ty.extend(t.iter().tuple_combinations().map(|(&a, &b)| o.edge(a, b)));
            let (first_ty, first) = seen.entry(pattern.clone()).or_insert((ty.clone(), t.clone()));
            if *first_ty != ty {
                chain_ok = false;
                push(
                    &mut violations,
                    "chain-type",
                    format!("chain pattern {pattern:?} realized by {first:?} and {t:?} with different types"),
                );
            }
        }
    }
    checks.insert("chain-pattern-type".into(), chain_ok);

    ValidationReport {
        ok: checks.values().all(|&b| b),
        checks,
        violations,
        chain_length,
    }
}

impl ValidationReport {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("plain data")
    }
}
