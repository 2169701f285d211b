//! Stagewise refinement of equivalence relations on edge colors.
//!
//! Stage `α+1` keeps `j1 ~ j2` when every pair of either color sees the
//! same middle-point pattern: for each third point `c`, its position
//! relative to the pair and the stage-`α` classes of `Q(a,c)` and `Q(c,b)`.
//! Everything is evaluated on the given finite order, so verdicts are about
//! this fragment only. Unless the mode is `literal`, each step is followed by
//! the least additive closure inside the previous stage (see
//! [`additive_closure`]), which stands in for the homogeneity a finite
//! fragment lacks.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::Serialize;
use serde_json::{json, Value};

use super::{validate_kmu, AdditivityTable, ColoredOrder, ValidationReport};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Base {
    /// Same endpoint vertex colors.
    E0,
    /// Everything related.
    E1,
    /// Endpoint colors compared after collapsing the listed vertex colors.
    Es(Vec<u32>),
    Custom,
}

impl Base {
    pub fn label(&self) -> String {
        match self {
            Base::E0 => "E0".into(),
            Base::E1 => "E1".into(),
            Base::Es(s) => format!("E_s{{{}}}", s.iter().join(",")),
            Base::Custom => "custom".into(),
        }
    }
}

/// Which pairs of the two colors must match.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairs {
    /// Every pair of `j1` against every pair of `j2`, both ways.
    #[default]
    All,
    /// Some pair of `j1` and some pair of `j2` with the same pattern, closed
    /// under transitivity inside each old class.
    Some,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RefineMode {
    pub pairs: Pairs,
    /// Only look at points strictly between `a` and `b`. Allowed when the
    /// base is edge preserving and additive.
    pub interval: bool,
    /// Also require `c` and `c'` to have the same vertex color.
    pub vertex_strict: bool,
    /// Skip the additive closure and keep the bare middle-point step.
    pub literal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorEquivalence {
    colors: Vec<u32>,
    class: Vec<u32>,
    stage: usize,
    base: Base,
}

/// Middle-point pattern of a pair: sorted, deduplicated entries
/// `(region, class of Q(a,c), class of Q(c,b), vertex color of c or MAX)`
/// with region 0 below `a`, 1 between, 2 above `b`.
pub type Pattern = Vec<(u8, u32, u32, u32)>;

pub(crate) fn canonical(keys: &[impl Ord + Clone]) -> Vec<u32> {
    let mut ids: BTreeMap<_, u32> = BTreeMap::new();
    keys.iter()
        .map(|k| {
            let next = ids.len() as u32;
            *ids.entry(k.clone()).or_insert(next)
        })
        .collect()
}

impl ColorEquivalence {
    /// `class_of(j)` gives any key; equal keys mean related.
    pub fn from_keys<K: Ord + Clone>(o: &ColoredOrder, base: Base, class_of: impl Fn(u32) -> K) -> Self {
        let colors = o.edge_colors();
        let keys: Vec<K> = colors.iter().map(|&j| class_of(j)).collect();
        ColorEquivalence {
            class: canonical(&keys),
            colors,
            stage: 0,
            base,
        }
    }

    pub fn custom(o: &ColoredOrder, classes: &[Vec<u32>]) -> Result<Self> {
        let mut of: BTreeMap<u32, usize> = BTreeMap::new();
        for (i, c) in classes.iter().enumerate() {
            for &j in c {
                if of.insert(j, i).is_some() {
                    return Err(Error::Invalid(format!("color {j} listed in two classes")));
                }
            }
        }
        if let Some(j) = o.edge_colors().into_iter().find(|j| !of.contains_key(j)) {
            return Err(Error::Invalid(format!("color {j} is in no class")));
        }
        Ok(Self::from_keys(o, Base::Custom, |j| of[&j]))
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    fn index(&self, j: u32) -> usize {
        self.colors.binary_search(&j).expect("realized color")
    }

    /// Class id of color `j`; ids number classes by least member.
    pub fn class_of(&self, j: u32) -> u32 {
        self.class[self.index(j)]
    }

    pub fn related(&self, j1: u32, j2: u32) -> bool {
        self.class_of(j1) == self.class_of(j2)
    }

    pub fn num_classes(&self) -> usize {
        self.class.iter().max().map_or(0, |&m| m as usize + 1)
    }

    pub fn classes(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.num_classes()];
        for (&j, &c) in self.colors.iter().zip(&self.class) {
            out[c as usize].push(j);
        }
        out
    }

    pub fn is_discrete(&self) -> bool {
        self.num_classes() == self.colors.len()
    }

    /// Whether `self ⊆ other` as relations (over the same colors).
    pub fn refines(&self, other: &ColorEquivalence) -> bool {
        self.colors == other.colors
            && self.classes().iter().all(|c| c.iter().all(|&j| other.related(c[0], j)))
    }

    /// Related colors have the same endpoint vertex colors.
    pub fn is_edge_preserving(&self, o: &ColoredOrder) -> bool {
        let mut ends: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
        o.pairs().all(|(a, b)| {
            let e = (o.vertex_color(a), o.vertex_color(b));
            *ends.entry(self.class_of(o.edge(a, b))).or_insert(e) == e
        })
    }

    /// Related first legs and related second legs of realized chains give
    /// related composites.
    pub fn is_additive(&self, o: &ColoredOrder) -> bool {
        self.additivity_failure(o).is_none()
    }

    /// Two chains `x<y<z`, `x'<y'<z'` breaking additivity, if any.
    pub fn additivity_failure(&self, o: &ColoredOrder) -> Option<[usize; 6]> {
        let mut seen: BTreeMap<(u32, u32), (u32, [usize; 3])> = BTreeMap::new();
        for (x, y, z) in (0..o.n()).tuple_combinations() {
            let key = (self.class_of(o.edge(x, y)), self.class_of(o.edge(y, z)));
            let c = self.class_of(o.edge(x, z));
            let (c0, t0) = *seen.entry(key).or_insert((c, [x, y, z]));
            if c0 != c {
                return Some([t0[0], t0[1], t0[2], x, y, z]);
            }
        }
        None
    }

    pub fn to_value(&self) -> Value {
        json!({
            "base": self.base.label(),
            "stage": self.stage,
            "classes": self.classes(),
            "discrete": self.is_discrete(),
        })
    }
}

/// The base relations: `None` gives E0, a set `s` gives E_s (labelled E1
/// when it covers every realized vertex color, E0 when empty).
pub fn endpoint_equivalence(o: &ColoredOrder, s: Option<&[u32]>) -> Result<ColorEquivalence> {
    let mut ends: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
    for (a, b) in o.pairs() {
        let e = (o.vertex_color(a), o.vertex_color(b));
        let j = o.edge(a, b);
        if *ends.entry(j).or_insert(e) != e {
            return Err(Error::Invalid(format!("edge color {j} joins more than one pair of vertex colors")));
        }
    }
    let palette = o.vertex_palette();
    let (base, s): (Base, Vec<u32>) = match s {
        None => (Base::E0, vec![]),
        Some(s) => {
            let mut s = s.to_vec();
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                (Base::E0, s)
            } else if palette.iter().all(|c| s.contains(c)) {
                (Base::E1, s)
            } else {
                (Base::Es(s.clone()), s)
            }
        }
    };
    let collapse = |c: u32| if s.contains(&c) { None } else { Some(c) };
    Ok(ColorEquivalence::from_keys(o, base, |j| {
        let (x, y) = ends[&j];
        (collapse(x), collapse(y))
    }))
}

pub(crate) fn region(a: usize, b: usize, c: usize) -> u8 {
    if c < a {
        0
    } else if c < b {
        1
    } else {
        2
    }
}

/// The middle-point pattern of the pair `a < b` against `e`.
pub fn pattern(o: &ColoredOrder, e: &ColorEquivalence, mode: RefineMode, a: usize, b: usize) -> Pattern {
    pattern_with(o, mode, a, b, |x, y| e.class_of(o.q(x, y)))
}

/// The middle-point pattern of `a < b` for any class labelling of pairs;
/// `class(x, y)` is called with `x < y`.
pub fn pattern_with(o: &ColoredOrder, mode: RefineMode, a: usize, b: usize, class: impl Fn(usize, usize) -> u32) -> Pattern {
    let range = if mode.interval { a + 1..b } else { 0..o.n() };
    let cls = |x: usize, y: usize| if x < y { class(x, y) } else { class(y, x) };
    let mut p: Pattern = range
        .filter(|&c| c != a && c != b)
        .map(|c| {
            let v = if mode.vertex_strict { o.vertex_color(c) } else { u32::MAX };
            (region(a, b, c), cls(a, c), cls(c, b), v)
        })
        .collect();
    p.sort_unstable();
    p.dedup();
    p
}

fn check_mode(o: &ColoredOrder, e: &ColorEquivalence, mode: RefineMode) -> Result<()> {
    if mode.interval && !(e.is_edge_preserving(o) && e.is_additive(o)) {
        return Err(Error::Invalid(format!(
            "interval mode needs an edge preserving, additive base; {} at stage {} is not",
            e.base.label(),
            e.stage
        )));
    }
    Ok(())
}

/// One refinement stage.
pub fn refine_step(o: &ColoredOrder, e: &ColorEquivalence, mode: RefineMode) -> Result<ColorEquivalence> {
    check_mode(o, e, mode)?;
    Ok(step(o, e, mode))
}

fn step(o: &ColoredOrder, e: &ColorEquivalence, mode: RefineMode) -> ColorEquivalence {
    let k = e.colors.len();
    let mut pats: Vec<Vec<Pattern>> = vec![Vec::new(); k];
    for (a, b) in o.pairs() {
        pats[e.index(o.edge(a, b))].push(pattern(o, e, mode, a, b));
    }
    let class = match mode.pairs {
        Pairs::All => {
            // A color whose pairs disagree is related to nothing else.
            let keys: Vec<(u32, std::result::Result<&Pattern, usize>)> = (0..k)
                .map(|i| {
                    let ps = &pats[i];
                    let key = if ps.iter().all_equal() { Ok(&ps[0]) } else { Err(i) };
                    (e.class[i], key)
                })
                .collect();
            canonical(&keys)
        }
        Pairs::Some => {
            let mut parent: Vec<usize> = (0..k).collect();
            fn find(p: &mut [usize], i: usize) -> usize {
                let mut r = i;
                while p[r] != r {
                    r = p[r];
                }
                p[i] = r;
                r
            }
            let mut first: BTreeMap<(u32, &Pattern), usize> = BTreeMap::new();
            for i in 0..k {
                for p in &pats[i] {
                    let j = *first.entry((e.class[i], p)).or_insert(i);
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
            let roots: Vec<usize> = (0..k).map(|i| find(&mut parent, i)).collect();
            canonical(&roots)
        }
    };
    let mut next = ColorEquivalence {
        colors: e.colors.clone(),
        class,
        stage: e.stage + 1,
        base: e.base.clone(),
    };
    if !mode.literal && e.is_additive(o) {
        next = additive_closure(o, e, next);
    }
    next
}

/// The least additive equivalence containing `s`, merging only colors
/// related in `outer`. A finite order has ends, so pairs near them see
/// fewer middle points than pairs of the same color elsewhere; the bare
/// step can then split composites that additivity of the previous stage
/// forces together.
fn additive_closure(o: &ColoredOrder, outer: &ColorEquivalence, s: ColorEquivalence) -> ColorEquivalence {
    let k = s.colors.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    // union-find seeded with the classes of s
    let mut rep: BTreeMap<u32, usize> = BTreeMap::new();
    for i in 0..k {
        let r = *rep.entry(s.class[i]).or_insert(i);
        parent[i] = r;
    }
    let chains: std::collections::BTreeSet<(usize, usize, usize)> = (0..o.n())
        .tuple_combinations()
        .map(|(x, y, z)| (s.index(o.edge(x, y)), s.index(o.edge(y, z)), s.index(o.edge(x, z))))
        .collect();
    loop {
        let mut changed = false;
        let mut image: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &(a, b, c) in &chains {
            let key = (find(&mut parent, a), find(&mut parent, b));
            let c = find(&mut parent, c);
            let d = *image.entry(key).or_insert(c);
            let d = find(&mut parent, d);
            if d != c && outer.class[c] == outer.class[d] {
                parent[c.max(d)] = c.min(d);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let roots: Vec<usize> = (0..k).map(|i| find(&mut parent, i)).collect();
    ColorEquivalence {
        class: canonical(&roots),
        ..s
    }
}

/// Colors whose own pairs see different middle-point patterns against `e`.
/// Such a color is not even related to itself by the bare step; on a
/// discrete fixpoint these are the colors without a back-and-forth witness.
pub fn nonuniform_colors(o: &ColoredOrder, e: &ColorEquivalence, mode: RefineMode) -> Vec<u32> {
    let mut first: BTreeMap<u32, Pattern> = BTreeMap::new();
    let mut bad = std::collections::BTreeSet::new();
    for (a, b) in o.pairs() {
        let j = o.edge(a, b);
        let p = pattern(o, e, mode, a, b);
        if *first.entry(j).or_insert_with(|| p.clone()) != p {
            bad.insert(j);
        }
    }
    bad.into_iter().collect()
}

/// A refinement run: stages `0..=alpha`, with `stages[alpha]` stable.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub stages: Vec<ColorEquivalence>,
    pub alpha: usize,
    pub mode: RefineMode,
}

impl Refinement {
    pub fn fixpoint(&self) -> &ColorEquivalence {
        &self.stages[self.alpha]
    }

    pub fn nonuniform(&self, o: &ColoredOrder) -> Vec<u32> {
        nonuniform_colors(o, self.fixpoint(), self.mode)
    }

    pub fn to_value(&self) -> Value {
        json!({
            "alpha": self.alpha,
            "mode": self.mode,
            "stages": self.stages.iter().map(ColorEquivalence::to_value).collect::<Vec<_>>(),
            "fixpoint": self.fixpoint().to_value(),
            "level": "fragment",
        })
    }
}

/// Iterate [`refine_step`] until nothing splits.
pub fn refine_fixpoint(o: &ColoredOrder, e: &ColorEquivalence, mode: RefineMode) -> Result<Refinement> {
    let mut e0 = e.clone();
    e0.stage = 0;
    let mut stages = vec![e0];
    check_mode(o, &stages[0], mode)?;
    loop {
        let last = stages.last().expect("non-empty");
        let next = step(o, last, mode);
        if next.num_classes() == last.num_classes() {
            break;
        }
        stages.push(next);
    }
    Ok(Refinement {
        alpha: stages.len() - 1,
        stages,
        mode,
    })
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub validation: ValidationReport,
    /// Fixpoint from E0; discrete means the fragment looks like K⁺.
    pub plus: Option<Refinement>,
    /// Fixpoint from E1; discrete means the fragment looks like K*.
    pub star: Option<Refinement>,
}

impl Classification {
    pub fn in_kplus(&self) -> Option<bool> {
        self.plus.as_ref().map(|r| r.fixpoint().is_discrete())
    }

    pub fn in_kstar(&self) -> Option<bool> {
        self.star.as_ref().map(|r| r.fixpoint().is_discrete())
    }

    pub fn to_value(&self, o: &ColoredOrder) -> Value {
        let verdict = |r: &Option<Refinement>| match r {
            None => Value::Null,
            Some(r) => json!({
                "member": r.fixpoint().is_discrete(),
                "alpha": r.alpha,
                "fixpoint": r.fixpoint().classes(),
                "nonuniform_colors": r.nonuniform(o),
            }),
        };
        json!({
            "validation": self.validation.to_value(),
            "in_kplus": verdict(&self.plus),
            "in_kstar": verdict(&self.star),
            "level": "fragment",
        })
    }
}

/// Validate, then run E0 and E1 to their fixpoints. An invalid order gets
/// no verdicts.
pub fn classify(o: &ColoredOrder, f: &AdditivityTable, mode: RefineMode) -> Result<Classification> {
    let validation = validate_kmu(o, f);
    if !validation.ok {
        return Ok(Classification {
            validation,
            plus: None,
            star: None,
        });
    }
    let plus = refine_fixpoint(o, &endpoint_equivalence(o, None)?, mode)?;
    let e1 = ColorEquivalence::from_keys(o, Base::E1, |_| ());
    let star = refine_fixpoint(o, &e1, mode)?;
    Ok(Classification {
        validation,
        plus: Some(plus),
        star: Some(star),
    })
}

/// The trivial relation on the realized colors.
pub fn e1(o: &ColoredOrder) -> ColorEquivalence {
    ColorEquivalence::from_keys(o, Base::E1, |_| ())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize, colors: impl Fn(usize, usize) -> u32) -> ColoredOrder {
        ColoredOrder::new(vec![0; n], colors)
    }

    #[test]
    fn one_color_is_stable() {
        let o = chain(4, |_, _| 3);
        let r = refine_fixpoint(&o, &e1(&o), RefineMode::default()).unwrap();
        assert_eq!(r.alpha, 0);
        assert_eq!(r.fixpoint().num_classes(), 1);
    }

    #[test]
    fn middle_points_separate() {
        // consecutive pairs have nothing in between, the others do
        let o = chain(4, |a, b| if b == a + 1 { 1 } else { 2 });
        let e = e1(&o);
        assert_eq!(e.num_classes(), 1);
        let next = refine_step(&o, &e, RefineMode::default()).unwrap();
        assert!(!next.related(1, 2));
        assert!(next.refines(&e));
    }

    #[test]
    fn discrete_stays_discrete() {
        let o = ColoredOrder::new(vec![0, 1, 2], |a, b| (a * 3 + b) as u32);
        let e = endpoint_equivalence(&o, None).unwrap();
        assert!(e.is_discrete());
        let r = refine_fixpoint(&o, &e, RefineMode::default()).unwrap();
        assert_eq!(r.alpha, 0);
    }

    #[test]
    fn endpoint_relations() {
        // colors named by endpoint pair
        let o = ColoredOrder::new(vec![0, 1, 2, 1], |a, b| [0, 1, 2, 1][a] * 10 + [0, 1, 2, 1][b]);
        let e0 = endpoint_equivalence(&o, None).unwrap();
        assert!(e0.is_discrete());
        assert_eq!(*e0.base(), Base::E0);
        let all = endpoint_equivalence(&o, Some(&[0, 1, 2])).unwrap();
        assert_eq!(all.num_classes(), 1);
        assert_eq!(*all.base(), Base::E1);
        // collapsing {1, 2}: 01 ~ 02, 12 ~ 11 ~ 21
        let s = endpoint_equivalence(&o, Some(&[1, 2])).unwrap();
        assert!(s.related(1, 2));
        assert!(s.related(12, 11) && s.related(12, 21));
        assert!(!s.related(1, 12));
        assert!(e0.refines(&s) && s.refines(&all));
        assert!(e0.is_edge_preserving(&o) && !s.is_edge_preserving(&o));
        let bad = ColoredOrder::new(vec![0, 1, 0], |_, _| 5);
        assert!(endpoint_equivalence(&bad, None).is_err());
    }

    #[test]
    fn interval_needs_a_good_base() {
        let o = ColoredOrder::new(vec![0, 1, 0], |a, b| [0, 1, 0][a] * 10 + [0, 1, 0][b] + 100 * (b - a) as u32);
        let mode = RefineMode {
            interval: true,
            ..RefineMode::default()
        };
        let e = e1(&o);
        assert!(!e.is_edge_preserving(&o));
        assert!(refine_step(&o, &e, mode).is_err());
        let e0 = endpoint_equivalence(&o, None).unwrap();
        assert!(refine_step(&o, &e0, mode).is_ok());
    }

    #[test]
    fn some_pair_is_coarser() {
        let o = chain(5, |a, b| ((b - a) as u32).min(2));
        let all = refine_fixpoint(&o, &e1(&o), RefineMode::default()).unwrap();
        let some = refine_fixpoint(
            &o,
            &e1(&o),
            RefineMode {
                pairs: Pairs::Some,
                ..RefineMode::default()
            },
        )
        .unwrap();
        assert!(all.fixpoint().refines(some.fixpoint()));
    }
}
