//! Defining formulas for refinement classes.
//!
//! A stage-0 class is defined from `<` and, unless the base is E1, the
//! vertex predicates. A class `C` at stage `α+1` inside the stage-`α` class
//! `D` is defined by `D(x,y)` together with a disjunction, over the
//! middle-point patterns its pairs realize, of "every third point matches a
//! triple of the pattern and every triple is matched by some point".
//!
//! On a finite order that formula can also catch pairs of another color
//! with the same pattern. The same construction is then run on the
//! partition of pairs (rather than colors), refined until the class is a
//! union of pair classes, and the class is defined as that union. In
//! interval mode a pair only sees the points between its ends, so pairs
//! with the same gaps never split; there the pair refinement is rerun with
//! middle points from the whole order.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use super::refine::{canonical, pattern_with, Base, Pattern, RefineMode, Refinement};
use super::{vertex_symbol, ColoredOrder, LT};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::logic::eval::ExtensionCache;
use crate::logic::formula::{Formula, Var};
use crate::logic::structure::tuple_index;
use crate::logic::syntax::try_print;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Construction {
    /// From the color classes of the refinement history.
    Colors,
    /// From the refinement of the partition of pairs, at the given stage.
    Pairs(usize),
    /// As `Pairs`, but with middle points ranging over the whole order
    /// (interval mode only).
    WholeOrderPairs(usize),
}

#[derive(Clone, Debug)]
pub struct ClassFormula {
    pub stage: usize,
    pub class: Vec<u32>,
    /// Free variables `x0 < x1`.
    pub formula: Formula,
    /// `{<}` or `{<, P_i}`.
    pub language: String,
    pub construction: Construction,
    /// Pairs satisfying the formula outside the class.
    pub extra: Vec<(usize, usize)>,
    /// Pairs of the class the formula misses.
    pub missing: Vec<(usize, usize)>,
}

impl ClassFormula {
    pub fn exact(&self) -> bool {
        self.extra.is_empty() && self.missing.is_empty()
    }

    pub fn to_value(&self, print_limit: u64) -> Value {
        let construction = match self.construction {
            Construction::Colors => json!("colors"),
            Construction::Pairs(s) => json!({"pairs": s}),
            Construction::WholeOrderPairs(s) => json!({"pairs": s, "middle_points": "whole order"}),
        };
        json!({
            "stage": self.stage,
            "class": self.class,
            "formula": try_print(&self.formula, print_limit).unwrap_or_else(|_| format!("<{} nodes>", self.formula.dag_size())),
            "digest": self.formula.digest_hex(),
            "language": self.language,
            "construction": construction,
            "exact": self.exact(),
            "extra": self.extra,
            "missing": self.missing,
        })
    }
}

fn lt(a: u32, b: u32) -> Formula {
    Formula::atom(LT, vec![Var(a), Var(b)])
}

fn disjunction(mut fs: Vec<Formula>) -> Formula {
    if fs.len() == 1 {
        fs.pop().expect("one")
    } else {
        Formula::or(fs)
    }
}

/// Stages of a partition of the increasing pairs, each refining the last.
struct History {
    n: usize,
    base: Base,
    mode: RefineMode,
    // class id per pair index a*n+b, a < b
    stages: Vec<Vec<u32>>,
}

impl History {
    fn from_colors(o: &ColoredOrder, r: &Refinement) -> History {
        let n = o.n();
        let stages = r
            .stages
            .iter()
            .map(|e| {
                let mut v = vec![u32::MAX; n * n];
                for (a, b) in o.pairs() {
                    v[a * n + b] = e.class_of(o.edge(a, b));
                }
                v
            })
            .collect();
        History {
            n,
            base: r.stages[0].base().clone(),
            mode: r.mode,
            stages,
        }
    }

    /// Pair refinement from the base until nothing splits.
    fn of_pairs(o: &ColoredOrder, r: &Refinement, mode: RefineMode) -> History {
        let mut h = History::from_colors(o, r);
        h.stages.truncate(1);
        h.mode = mode;
        let n = o.n();
        let count = |v: &Vec<u32>| o.pairs().map(|(a, b)| v[a * n + b]).collect::<BTreeSet<_>>().len();
        loop {
            let prev = h.stages.last().expect("base");
            let keys: Vec<(u32, Pattern)> = o
                .pairs()
                .map(|(a, b)| (prev[a * n + b], pattern_with(o, h.mode, a, b, |x, y| prev[x * n + y])))
                .collect();
            let ids = canonical(&keys);
            let mut next = vec![u32::MAX; n * n];
            for ((a, b), id) in o.pairs().zip(ids) {
                next[a * n + b] = id;
            }
            if count(&next) == count(prev) {
                return h;
            }
            h.stages.push(next);
        }
    }

    fn class(&self, stage: usize, a: usize, b: usize) -> u32 {
        self.stages[stage][a * self.n + b]
    }

    fn pairs_of(&self, stage: usize, class: u32) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |a| (a + 1..n).map(move |b| (a, b)))
            .filter(move |&(a, b)| self.class(stage, a, b) == class)
    }
}

struct Builder<'a> {
    o: &'a ColoredOrder,
    h: History,
    memo: BTreeMap<(usize, u32, u32, u32), Formula>,
}

impl<'a> Builder<'a> {
    fn new(o: &'a ColoredOrder, h: History) -> Self {
        Builder {
            o,
            h,
            memo: BTreeMap::new(),
        }
    }

    // Patterns realized by pairs of the class, read against the stage before.
    fn patterns(&self, stage: usize, class: u32) -> Vec<Pattern> {
        let set: BTreeSet<Pattern> = self
            .h
            .pairs_of(stage, class)
            .map(|(a, b)| pattern_with(self.o, self.h.mode, a, b, |x, y| self.h.class(stage - 1, x, y)))
            .collect();
        set.into_iter().collect()
    }

    fn base(&self, class: u32, u: u32, v: u32) -> Result<Formula> {
        match self.h.base {
            Base::E1 => Ok(lt(u, v)),
            Base::Custom => Err(Error::Invalid("a custom base has no defining formulas".into())),
            Base::E0 | Base::Es(_) => {
                let ends: BTreeSet<(u32, u32)> = self
                    .h
                    .pairs_of(0, class)
                    .map(|(a, b)| (self.o.vertex_color(a), self.o.vertex_color(b)))
                    .collect();
                let alts: Vec<Formula> = ends
                    .into_iter()
                    .map(|(i1, i2)| {
                        Formula::and([
                            Formula::atom(vertex_symbol(i1), vec![Var(u)]),
                            lt(u, v),
                            Formula::atom(vertex_symbol(i2), vec![Var(v)]),
                        ])
                    })
                    .collect();
                Ok(disjunction(alts))
            }
        }
    }

    /// Defines the class on the pair `u < v`; the third variable is bound.
    fn formula(&mut self, stage: usize, class: u32, u: u32, v: u32) -> Result<Formula> {
        if let Some(f) = self.memo.get(&(stage, class, u, v)) {
            return Ok(f.clone());
        }
        let f = if stage == 0 {
            self.base(class, u, v)?
        } else {
            let members: Vec<(usize, usize)> = self.h.pairs_of(stage, class).collect();
            let (a, b) = members[0];
            let parent = self.h.class(stage - 1, a, b);
            if self.h.pairs_of(stage - 1, parent).count() == members.len() {
                self.formula(stage - 1, parent, u, v)?
            } else {
                let w = 3 - u - v;
                let d = self.formula(stage - 1, parent, u, v)?;
                let mut alts = Vec::new();
                for p in self.patterns(stage, class) {
                    alts.push(self.pattern_formula(stage - 1, &p, u, v, w)?);
                }
                Formula::and([d, disjunction(alts)])
            }
        };
        self.memo.insert((stage, class, u, v), f.clone());
        Ok(f)
    }

    fn pattern_formula(&mut self, prev: usize, p: &Pattern, u: u32, v: u32, w: u32) -> Result<Formula> {
        let mut triples = Vec::new();
        for &(r, c1, c2, vc) in p {
            let mut parts = match r {
                0 => vec![lt(w, u), self.formula(prev, c1, w, u)?, self.formula(prev, c2, w, v)?],
                1 => vec![lt(u, w), lt(w, v), self.formula(prev, c1, u, w)?, self.formula(prev, c2, w, v)?],
                _ => vec![lt(v, w), self.formula(prev, c1, u, w)?, self.formula(prev, c2, v, w)?],
            };
            if vc != u32::MAX {
                parts.push(Formula::atom(vertex_symbol(vc), vec![Var(w)]));
            }
            triples.push(Formula::and(parts));
        }
        let scope = if self.h.mode.interval {
            Formula::and([lt(u, w), lt(w, v)])
        } else {
            Formula::and([Formula::not(Formula::eq(Var(w), Var(u))), Formula::not(Formula::eq(Var(w), Var(v)))])
        };
        let every = Formula::forall(Var(w), Formula::implies(scope, Formula::or(triples.clone())));
        let some = triples.into_iter().map(|t| Formula::exists(Var(w), t));
        Ok(Formula::and(std::iter::once(every).chain(some)))
    }
}

struct Checker<'a> {
    n: usize,
    ext: ExtensionCache<'a>,
}

impl Checker<'_> {
    /// Extra and missing pairs of `f` against `target`.
    fn diff(&mut self, f: &Formula, target: &BTreeSet<(usize, usize)>) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
        let n = self.n;
        let x = self.ext.get(f)?;
        let holds = |a: usize, c: usize| -> bool {
            match x.vars.len() {
                0 => x.bits.contains(0),
                1 => x.bits.contains(if x.vars[0] == Var(0) { a } else { c }),
                _ => x.bits.contains(tuple_index(&[a, c], n)),
            }
        };
        let mut extra = Vec::new();
        let mut missing = Vec::new();
        for a in 0..n {
            for c in 0..n {
                match (holds(a, c), target.contains(&(a, c))) {
                    (true, false) => extra.push((a, c)),
                    (false, true) => missing.push((a, c)),
                    _ => {}
                }
            }
        }
        Ok((extra, missing))
    }
}

/// Formulas for every class at `stage`, each checked by evaluation on `o`.
pub fn emit_class_formulas(o: &ColoredOrder, r: &Refinement, stage: usize) -> Result<Vec<ClassFormula>> {
    if stage >= r.stages.len() {
        return Err(Error::Invalid(format!(
            "stage {stage} exceeds the recorded history (stages 0..={})",
            r.stages.len() - 1
        )));
    }
    let vertex = !matches!(r.stages[0].base(), Base::E1) || r.mode.vertex_strict;
    let language = if vertex { "{<, P_i}" } else { "{<}" };
    let m = o.to_structure(true, false);
    let budget = Budget::unlimited();
    let mut check = Checker {
        n: o.n(),
        ext: ExtensionCache::new(&m, &budget),
    };
    let mut colors = Builder::new(o, History::from_colors(o, r));
    // pair refinement in the refinement's own mode, then, for interval mode,
    // over the whole order
    let mut scopes = vec![r.mode];
    if r.mode.interval {
        scopes.push(RefineMode { interval: false, ..r.mode });
    }
    let mut pairs: Vec<Option<Builder>> = scopes.iter().map(|_| None).collect();
    let e = &r.stages[stage];
    let mut out = Vec::new();
    for (id, class) in e.classes().into_iter().enumerate() {
        let target: BTreeSet<(usize, usize)> = o.pairs().filter(|&(a, b)| class.contains(&o.edge(a, b))).collect();
        let mut formula = colors.formula(stage, id as u32, 0, 1)?;
        let mut construction = Construction::Colors;
        let (mut extra, mut missing) = check.diff(&formula, &target)?;
        for (i, mode) in scopes.iter().enumerate() {
            if extra.is_empty() && missing.is_empty() {
                break;
            }
            let pb = pairs[i].get_or_insert_with(|| Builder::new(o, History::of_pairs(o, r, *mode)));
            // least stage at which the class is a union of pair classes
            let found = (0..pb.h.stages.len()).find(|&s| {
                o.pairs().all(|(a, b)| {
                    let k = pb.h.class(s, a, b);
                    pb.h.pairs_of(s, k).all(|p| target.contains(&p)) || pb.h.pairs_of(s, k).all(|p| !target.contains(&p))
                })
            });
            if let Some(s) = found {
                let ks: BTreeSet<u32> = target.iter().map(|&(a, b)| pb.h.class(s, a, b)).collect();
                let mut alts = Vec::new();
                for k in ks {
                    alts.push(pb.formula(s, k, 0, 1)?);
                }
                formula = disjunction(alts);
                construction = if i == 0 { Construction::Pairs(s) } else { Construction::WholeOrderPairs(s) };
                (extra, missing) = check.diff(&formula, &target)?;
            }
        }
        out.push(ClassFormula {
            stage,
            class,
            formula,
            language: language.into(),
            construction,
            extra,
            missing,
        });
    }
    Ok(out)
}

/// The formula of the class containing color `j` at `stage`.
pub fn emit_class_formula(o: &ColoredOrder, r: &Refinement, j: u32, stage: usize) -> Result<ClassFormula> {
    if stage >= r.stages.len() {
        return Err(Error::Invalid(format!("stage {stage} exceeds the recorded history")));
    }
    if r.stages[stage].colors().binary_search(&j).is_err() {
        return Err(Error::Invalid(format!("color {j} is not realized")));
    }
    let id = r.stages[stage].class_of(j) as usize;
    Ok(emit_class_formulas(o, r, stage)?.swap_remove(id))
}
