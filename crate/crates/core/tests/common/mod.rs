#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;
use scottbench_core::logic::{FiniteStructure, Formula, Kind, Signature, Var};

pub fn test_signature() -> Signature {
    Signature::new([("P", 1), ("R", 2), ("Q", 0)])
}

pub fn arb_var() -> impl Strategy<Value = Var> {
    (0u32..3).prop_map(Var)
}

pub fn arb_formula(depth: u32) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        arb_var().prop_map(|v| Formula::atom("P", vec![v])),
        (arb_var(), arb_var()).prop_map(|(a, b)| Formula::atom("R", vec![a, b])),
        Just(Formula::atom("Q", Vec::new())),
        (arb_var(), arb_var()).prop_map(|(a, b)| Formula::eq(a, b)),
    ];
    leaf.prop_recursive(depth, 48, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Formula::and),
            (arb_var(), inner).prop_map(|(v, f)| Formula::exists(v, f)),
        ]
    })
}

/// Structures over the test signature with `1..=max_n` elements.
pub fn arb_structure(max_n: usize) -> impl Strategy<Value = FiniteStructure> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), n * n),
            any::<bool>(),
        )
            .prop_map(move |(p, r, q)| structure_from_bits(n, &p, &r, q))
    })
}

pub fn structure_from_bits(n: usize, p: &[bool], r: &[bool], q: bool) -> FiniteStructure {
    let mut m = FiniteStructure::new(test_signature(), n).unwrap();
    for a in 0..n {
        if p[a] {
            m.insert("P", &[a]).unwrap();
        }
        for b in 0..n {
            if r[a * n + b] {
                m.insert("R", &[a, b]).unwrap();
            }
        }
    }
    if q {
        m.insert("Q", &[]).unwrap();
    }
    m
}

/// All binary relations on `n` points, as structures over `{R:2}`.
pub fn all_digraphs(n: usize) -> Vec<FiniteStructure> {
    let sig = Signature::new([("R", 2)]);
    (0u64..1 << (n * n))
        .map(|mask| {
            let mut m = FiniteStructure::new(sig.clone(), n).unwrap();
            for i in 0..n * n {
                if mask >> i & 1 == 1 {
                    m.insert("R", &[i / n, i % n]).unwrap();
                }
            }
            m
        })
        .collect()
}

/// Plain recursive evaluator with no memoization and no shared code paths.
pub fn naive_eval(m: &FiniteStructure, f: &Formula, asg: &mut HashMap<u32, usize>) -> bool {
    match f.kind() {
        Kind::Atom { rel, args } => {
            let t: Vec<usize> = args.iter().map(|v| asg[&v.0]).collect();
            m.tuples(rel).contains(&t)
        }
        Kind::Eq(a, b) => asg[&a.0] == asg[&b.0],
        Kind::Not(c) => !naive_eval(m, c, asg),
        Kind::And(cs) => cs.iter().all(|c| naive_eval(m, c, asg)),
        Kind::Exists(v, c) => {
            let saved = asg.get(&v.0).copied();
            let mut found = false;
            for a in 0..m.size() {
                asg.insert(v.0, a);
                if naive_eval(m, c, asg) {
                    found = true;
                    break;
                }
            }
            match saved {
                Some(s) => asg.insert(v.0, s),
                None => asg.remove(&v.0),
            };
            found
        }
    }
}

/// Exact structural equality with conjunctions compared as sets; never
/// consults digests.
pub fn structural_eq(a: &Formula, b: &Formula) -> bool {
    match (a.kind(), b.kind()) {
        (Kind::Atom { rel: r1, args: a1 }, Kind::Atom { rel: r2, args: a2 }) => r1 == r2 && a1 == a2,
        (Kind::Eq(x1, y1), Kind::Eq(x2, y2)) => x1 == x2 && y1 == y2,
        (Kind::Not(c1), Kind::Not(c2)) => structural_eq(c1, c2),
        (Kind::Exists(v1, c1), Kind::Exists(v2, c2)) => v1 == v2 && structural_eq(c1, c2),
        (Kind::And(c1), Kind::And(c2)) => {
            c1.iter().all(|x| c2.iter().any(|y| structural_eq(x, y)))
                && c2.iter().all(|y| c1.iter().any(|x| structural_eq(x, y)))
        }
        _ => false,
    }
}

pub fn arb_digraph(min_n: usize, max_n: usize) -> impl Strategy<Value = FiniteStructure> {
    (min_n..=max_n).prop_flat_map(|n| {
        prop::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
            let mut m = FiniteStructure::new(Signature::new([("R", 2)]), n).unwrap();
            for (i, b) in bits.iter().enumerate() {
                if *b {
                    m.insert("R", &[i / n, i % n]).unwrap();
                }
            }
            m
        })
    })
}

/// `φ_{α,ā}` straight from the definition: no memo, no class bookkeeping.
pub fn naive_stage_formula(m: &FiniteStructure, t: &[usize], alpha: usize) -> Formula {
    if alpha == 0 {
        let mut lits = Vec::new();
        for (name, arity) in m.signature().iter() {
            let l = t.len();
            for idx in 0..l.pow(arity as u32) {
                let mut pos = Vec::new();
                let mut rest = idx;
                for _ in 0..arity {
                    pos.push(rest % l);
                    rest /= l;
                }
                pos.reverse();
                let atom = Formula::atom(name, pos.iter().map(|&p| Var(p as u32)).collect::<Vec<_>>());
                let img: Vec<usize> = pos.iter().map(|&p| t[p]).collect();
                lits.push(if m.holds(name, &img).unwrap() { atom } else { Formula::not(atom) });
            }
        }
        for i in 0..t.len() {
            for j in i + 1..t.len() {
                let e = Formula::eq(Var(i as u32), Var(j as u32));
                lits.push(if t[i] == t[j] { e } else { Formula::not(e) });
            }
        }
        return Formula::and(lits);
    }
    let x = Var(t.len() as u32);
    let kids: Vec<Formula> = (0..m.size())
        .map(|b| {
            let mut u = t.to_vec();
            u.push(b);
            naive_stage_formula(m, &u, alpha - 1)
        })
        .collect();
    Formula::and([
        naive_stage_formula(m, t, alpha - 1),
        Formula::forall(x, Formula::or(kids.clone())),
        Formula::and(kids.into_iter().map(|k| Formula::exists(x, k))),
    ])
}
