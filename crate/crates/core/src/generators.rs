//! Structure generators: seeded random structures and colored orders, the
//! rational-sequence colored orders, and the finite splitting-tree models.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::logic::signature::Signature;
use crate::logic::structure::{all_tuples, FiniteStructure};
use crate::orders::{AdditivityTable, ColoredOrder};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for run `index` under `base`: splitmix64 of the base advanced by
/// `index + 1` golden-ratio steps.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Each tuple of each relation is present with probability `density`.
pub fn random_structure(sig: &Signature, n: usize, density: f64, seed: u64) -> Result<FiniteStructure> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::Invalid(format!("density {density} is not in [0, 1]")));
    }
    let mut r = rng(seed);
    let mut m = FiniteStructure::new(sig.clone(), n)?;
    for (name, arity) in sig.iter() {
        for t in all_tuples(n, arity) {
            if r.gen_bool(density) {
                m.insert(name, &t)?;
            }
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug)]
enum Law {
    Max,
    Min,
    Left,
    Right,
    TruncatedSum,
    CyclicSum,
}

impl Law {
    fn apply(self, a: u32, b: u32, size: u32) -> u32 {
        match self {
            Law::Max => a.max(b),
            Law::Min => a.min(b),
            Law::Left => a,
            Law::Right => b,
            Law::TruncatedSum => (a + b).min(size - 1),
            Law::CyclicSum => (a + b) % size,
        }
    }
}

/// A random valid colored order on `n` points with at most `vertex_colors`
/// vertex colors and at most `max_edge_colors` edge colors. Pairs are
/// colored `(color x, color y, s(x,y))` where `s` composes along the order
/// under a random associative law, so the coloring is additive.
pub fn random_colored_order(
    n: usize,
    vertex_colors: u32,
    max_edge_colors: usize,
    r: &mut impl Rng,
) -> (ColoredOrder, AdditivityTable) {
    let laws = [Law::Max, Law::Min, Law::Left, Law::Right, Law::TruncatedSum, Law::CyclicSum];
    for attempt in 0.. {
        // shrink the palettes if sampling keeps overshooting
        let vc = if attempt > 20 { 1 } else { r.gen_range(1..=vertex_colors.max(1)) };
        let size = if attempt > 40 { 1 } else { r.gen_range(1..=3u32) };
        let law = laws[r.gen_range(0..laws.len())];
        let vertex: Vec<u32> = (0..n).map(|_| r.gen_range(0..vc)).collect();
        let step: Vec<u32> = (0..n.saturating_sub(1)).map(|_| r.gen_range(0..size)).collect();
        let mut s = vec![0u32; n * n];
        for a in 0..n {
            for b in a + 1..n {
                s[a * n + b] = if b == a + 1 { step[a] } else { law.apply(s[a * n + b - 1], step[b - 1], size) };
            }
        }
        let label = |a: usize, b: usize| (vertex[a], vertex[b], s[a * n + b]);
        let labels: BTreeSet<(u32, u32, u32)> = (0..n).tuple_combinations().map(|(a, b)| label(a, b)).collect();
        if labels.len() > max_edge_colors {
            continue;
        }
        let ids: BTreeMap<(u32, u32, u32), u32> = labels.iter().enumerate().map(|(i, &l)| (l, i as u32)).collect();
        let o = ColoredOrder::new(vertex.clone(), |a, b| ids[&label(a, b)]);
        let mut t = AdditivityTable::default();
        for (&(i1, i2, x), &j1) in &ids {
            for (&(k1, k2, y), &j2) in &ids {
                if i2 == k1 {
                    if let Some(&j3) = ids.get(&(i1, k2, law.apply(x, y, size))) {
                        t.map.insert((j1, j2), j3);
                    }
                }
            }
        }
        return (o, t);
    }
    unreachable!()
}

/// Edge label of the sequence example: endpoint colors, first differing
/// index, and the (positive) difference there.
pub type Label53 = (u32, u32, usize, i64);

/// Composition of labels along `x < y < z`.
pub fn compose53(a: Label53, b: Label53) -> Label53 {
    let (i1, _, n, q) = a;
    let (_, k2, m, r) = b;
    if n > m {
        (i1, k2, m, r)
    } else if n < m {
        (i1, k2, n, q)
    } else {
        (i1, k2, n, q + r)
    }
}

#[derive(Clone, Debug)]
pub struct Example53 {
    pub order: ColoredOrder,
    pub table: AdditivityTable,
    /// Edge color id to its label.
    pub labels: BTreeMap<u32, Label53>,
    /// The sequences, in order.
    pub points: Vec<Vec<i64>>,
    pub vertex_colors: u32,
}

impl Example53 {
    pub fn label(&self, a: usize, b: usize) -> Label53 {
        self.labels[&self.order.edge(a, b)]
    }

    /// Triples whose outer label differs from the composition rule.
    pub fn rule_mismatches(&self) -> Vec<[usize; 3]> {
        (0..self.order.n())
            .tuple_combinations()
            .filter(|&(x, y, z)| self.label(x, z) != compose53(self.label(x, y), self.label(y, z)))
            .map(|(x, y, z)| [x, y, z])
            .collect()
    }

    /// Triples whose three pairs share the `(n, q)` part of their labels.
    pub fn monochromatic_triples(&self) -> Vec<[usize; 3]> {
        let nq = |a, b| {
            let (_, _, n, q) = self.label(a, b);
            (n, q)
        };
        (0..self.order.n())
            .tuple_combinations()
            .filter(|&(x, y, z)| nq(x, y) == nq(y, z) && nq(y, z) == nq(x, z))
            .map(|(x, y, z)| [x, y, z])
            .collect()
    }

    pub fn to_value(&self) -> Value {
        let mut v = self.order.to_value(Some(&self.table));
        let labels: serde_json::Map<String, Value> = self
            .labels
            .iter()
            .map(|(j, &(i1, i2, n, q))| (j.to_string(), json!([i1, i2, n, q])))
            .collect();
        let obj = v.as_object_mut().expect("object");
        obj.insert("labels".into(), Value::Object(labels));
        obj.insert("points".into(), json!(self.points));
        obj.insert(
            "note".into(),
            json!(format!(
                "vertex colors assigned round-robin over {} colors; density is a property of the infinite order and is not checked",
                self.vertex_colors
            )),
        );
        v
    }
}

/// Sequences of length `depth` over `0..grid`, ordered by first difference,
/// vertex colors round-robin over `vertex_colors`, pair `η1 < η2` labelled
/// `(i1, i2, n, η2(n) - η1(n))` for the first difference `n`. The table is
/// the composition rule on every composable pair of realized labels whose
/// result is realized.
pub fn gen_example_53(depth: usize, grid: u32, vertex_colors: u32) -> Result<Example53> {
    if grid == 0 || vertex_colors == 0 {
        return Err(Error::Invalid("grid and vertex color count must be positive".into()));
    }
    let count = (grid as u64).checked_pow(depth as u32).filter(|&c| c <= 4096);
    let Some(count) = count else {
        return Err(Error::Invalid(format!("{grid}^{depth} points is too many")));
    };
    // lexicographic order on equal-length sequences is the first-difference order
    let points: Vec<Vec<i64>> = (0..count as usize)
        .map(|i| crate::logic::structure::tuple_at(i, grid as usize, depth).into_iter().map(|x| x as i64).collect())
        .collect();
    let vertex: Vec<u32> = (0..points.len()).map(|i| i as u32 % vertex_colors).collect();
    let label = |a: usize, b: usize| -> Label53 {
        let n = (0..depth).find(|&k| points[a][k] != points[b][k]).expect("distinct sequences");
        (vertex[a], vertex[b], n, points[b][n] - points[a][n])
    };
    let labels: BTreeSet<Label53> = (0..points.len()).tuple_combinations().map(|(a, b)| label(a, b)).collect();
    let ids: BTreeMap<Label53, u32> = labels.iter().enumerate().map(|(i, &l)| (l, i as u32)).collect();
    let order = ColoredOrder::new(vertex.clone(), |a, b| ids[&label(a, b)]);
    let mut table = AdditivityTable::default();
    for (&l1, &j1) in &ids {
        for (&l2, &j2) in &ids {
            if l1.1 == l2.0 {
                if let Some(&j3) = ids.get(&compose53(l1, l2)) {
                    table.map.insert((j1, j2), j3);
                }
            }
        }
    }
    Ok(Example53 {
        order,
        table,
        labels: ids.into_iter().map(|(l, j)| (j, l)).collect(),
        points,
        vertex_colors,
    })
}

pub fn superstable_signature(levels: usize) -> Signature {
    let mut rels: Vec<(String, usize)> = vec![("U".into(), 1), ("V".into(), 1), ("Pi".into(), 2)];
    rels.extend((0..=levels).map(|n| (format!("E{n}"), 2)));
    Signature::new(rels)
}

/// A finite model of the splitting-tree theory with relations `E0..E{levels}`:
/// `U` holds `m` points in each of the `2^levels` leaf classes, `V` has `m`
/// points, and `π` (the graph `Pi`) sends the k-th point of every leaf to the
/// k-th point of `V`. `m` is the largest with `m (2^levels + 1) ≤ max_size`.
pub fn gen_example_superstable(levels: usize, max_size: usize) -> Result<FiniteStructure> {
    if levels > 16 {
        return Err(Error::Invalid(format!("{levels} levels is too many")));
    }
    let leaves = 1usize << levels;
    let m = max_size / (leaves + 1);
    if m == 0 {
        return Err(Error::Invalid(format!(
            "size bound {max_size} is below the smallest model ({} points) for {levels} levels",
            leaves + 1
        )));
    }
    let n = m * (leaves + 1);
    let mut s = FiniteStructure::new(superstable_signature(levels), n)?;
    let u = |leaf: usize, k: usize| leaf * m + k;
    let v = |k: usize| leaves * m + k;
    for leaf in 0..leaves {
        for k in 0..m {
            s.insert("U", &[u(leaf, k)])?;
            s.insert("Pi", &[u(leaf, k), v(k)])?;
        }
    }
    for k in 0..m {
        s.insert("V", &[v(k)])?;
    }
    for lvl in 0..=levels {
        let name = format!("E{lvl}");
        for (l1, l2) in (0..leaves).cartesian_product(0..leaves) {
            if l1 >> (levels - lvl) == l2 >> (levels - lvl) {
                for (k1, k2) in (0..m).cartesian_product(0..m) {
                    s.insert(&name, &[u(l1, k1), u(l2, k2)])?;
                }
            }
        }
    }
    Ok(s)
}

/// Violations of the universal splitting-tree axioms (plus `π` onto `V`).
pub fn check_superstable(s: &FiniteStructure, levels: usize) -> Result<Vec<String>> {
    let n = s.size();
    let mut out = Vec::new();
    let holds = |r: &str, t: &[usize]| s.holds(r, t);
    let in_u: Vec<bool> = (0..n).map(|a| holds("U", &[a])).collect::<Result<_>>()?;
    let in_v: Vec<bool> = (0..n).map(|a| holds("V", &[a])).collect::<Result<_>>()?;
    for a in 0..n {
        if in_u[a] && in_v[a] {
            out.push(format!("{a} is in both U and V"));
        }
    }
    let mut image = vec![false; n];
    for a in 0..n {
        let targets: Vec<usize> = (0..n).filter(|&b| s.holds("Pi", &[a, b]).unwrap_or(false)).collect();
        if !in_u[a] && !targets.is_empty() {
            out.push(format!("π defined on {a} outside U"));
        }
        if in_u[a] && targets.len() != 1 {
            out.push(format!("π has {} values at {a}", targets.len()));
        }
        for &b in &targets {
            image[b] = true;
            if !in_v[b] {
                out.push(format!("π({a}) = {b} is outside V"));
            }
        }
    }
    for b in 0..n {
        if in_v[b] && !image[b] {
            out.push(format!("{b} in V is not in the image of π"));
        }
    }
    let us: Vec<usize> = (0..n).filter(|&a| in_u[a]).collect();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for lvl in 0..=levels {
        let e = format!("E{lvl}");
        let rel = |a: usize, b: usize| s.holds(&e, &[a, b]).unwrap_or(false);
        for a in 0..n {
            for b in 0..n {
                if rel(a, b) && !(in_u[a] && in_u[b]) {
                    out.push(format!("{e}({a}, {b}) outside U"));
                }
            }
        }
        for &a in &us {
            if !rel(a, a) {
                out.push(format!("{e} is not reflexive at {a}"));
            }
            for &b in &us {
                if rel(a, b) != rel(b, a) {
                    out.push(format!("{e} is not symmetric at {a}, {b}"));
                }
                for &c in &us {
                    if rel(a, b) && rel(b, c) && !rel(a, c) {
                        out.push(format!("{e} is not transitive at {a}, {b}, {c}"));
                    }
                }
            }
        }
        // class id per U point, by least member
        let ids: Vec<usize> = us.iter().map(|&a| *us.iter().find(|&&b| rel(a, b)).unwrap_or(&a)).collect();
        if lvl == 0 && ids.iter().collect::<BTreeSet<_>>().len() > 1 {
            out.push("E0 has more than one class".into());
        }
        if lvl > 0 {
            let prev = &classes;
            let mut subclasses: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
            for (i, &a) in us.iter().enumerate() {
                for (i2, &b) in us.iter().enumerate() {
                    if rel(a, b) && prev[lvl - 1][i] != prev[lvl - 1][i2] {
                        out.push(format!("E{lvl}({a}, {b}) but not E{}", lvl - 1));
                    }
                }
                subclasses.entry(prev[lvl - 1][i]).or_default().insert(ids[i]);
            }
            for (c, sub) in subclasses {
                if sub.len() > 2 {
                    out.push(format!("the E{} class of {c} splits into {} E{lvl} classes", lvl - 1, sub.len()));
                }
            }
        }
        classes.push(ids);
    }
    Ok(out)
}

/// Distinct `U` points related by every `E_n` present.
pub fn indiscernible_pairs(s: &FiniteStructure, levels: usize) -> Vec<(usize, usize)> {
    let n = s.size();
    (0..n)
        .tuple_combinations()
        .filter(|&(a, b)| (0..=levels).all(|l| s.holds(&format!("E{l}"), &[a, b]).unwrap_or(false)))
        .collect()
}
