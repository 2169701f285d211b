mod common;

use std::collections::HashMap;

use common::*;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use scottbench_core::atomicity::isolates_with;
use scottbench_core::compiler::{
    candidate_pool, complete_to_fixpoint, completion_step, compile_sentence, omits_all, CompiledTheory,
};
use scottbench_core::logic::iso::{is_isomorphism, orbit_ids_with};
use scottbench_core::logic::structure::tuple_index;
use scottbench_core::logic::{all_tuples, automorphisms, vars, ExtensionCache, FiniteStructure, Formula, Signature, Var};
use scottbench_core::pool::{Pool, PoolSpec, Quantifiers};
use scottbench_core::scott::{refine_to_fixpoint, scott_sentence, stage_formula};
use scottbench_core::theory::TheoryHandle;
use scottbench_core::Budget;

fn sentence(f: Formula) -> Formula {
    Formula::exists_many(&f.free_vars().to_vec(), f)
}

fn ternary(max_n: usize) -> impl Strategy<Value = FiniteStructure> {
    (1..=max_n).prop_flat_map(|n| {
        (prop::collection::vec(any::<bool>(), n * n * n), any::<bool>()).prop_map(move |(bits, c)| {
            let sig = Signature::new([("S", 3), ("C", 0)]);
            let mut m = FiniteStructure::new(sig, n).unwrap();
            for (i, t) in all_tuples(n, 3).enumerate() {
                if bits[i] {
                    m.insert("S", &t).unwrap();
                }
            }
            if c {
                m.insert("C", &[]).unwrap();
            }
            m
        })
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_mixed(m in arb_structure(4), f in arb_formula(3)) {
        let c = compile_sentence(&sentence(f), &test_signature()).unwrap();
        prop_assert_eq!(c.inverse_transform(&c.transform(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn round_trip_digraphs(m in arb_digraph(1, 4)) {
        let sig = Signature::new([("R", 2)]);
        let psi = sentence(Formula::atom("R", vec![Var(0), Var(1)]));
        let c = compile_sentence(&psi, &sig).unwrap();
        prop_assert_eq!(c.inverse_transform(&c.transform(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn round_trip_ternary(m in ternary(4)) {
        let c = compile_sentence(&Formula::truth(), m.signature()).unwrap();
        prop_assert_eq!(c.inverse_transform(&c.transform(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn isomorphism_transport(m in arb_structure(4), perm in (1usize..=4).prop_flat_map(permutation), f in arb_formula(2)) {
        prop_assume!(perm.len() == m.size());
        let c = compile_sentence(&sentence(f), &test_signature()).unwrap();
        let m2 = m.relabel(&perm).unwrap();
        let (h1, h2) = (c.transform(&m).unwrap(), c.transform(&m2).unwrap());
        prop_assert!(is_isomorphism(&h1, &h2, &perm));
        prop_assert_eq!(h1.relabel(&perm).unwrap(), h2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    // M ⊨ Ψ iff H(M) satisfies T_Ψ and omits Γ_Ψ.
    #[test]
    fn semantic_equivalence(m in arb_structure(3), f in arb_formula(3)) {
        let psi = sentence(f);
        let c = compile_sentence(&psi, &test_signature()).unwrap();
        let h = c.transform(&m).unwrap();
        let holds = naive_eval(&m, &psi, &mut HashMap::new());
        prop_assert_eq!(holds, c.models_axioms(&h).unwrap() && omits_all(&h, c.omitted_types()).unwrap());
        // H(M) omits Γ_Ψ whether or not M ⊨ Ψ
        prop_assert!(omits_all(&h, c.omitted_types()).unwrap());
    }
}

#[test]
fn json_round_trip_on_random_sentences() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..100 {
        let f = arb_formula(3).new_tree(&mut runner).unwrap().current();
        let c = compile_sentence(&sentence(f), &test_signature()).unwrap();
        let text = serde_json::to_string(&c.to_value()).unwrap();
        let back = CompiledTheory::from_json(&text).unwrap();
        assert_eq!(back.axioms(), c.axioms());
        assert_eq!(back.omitted_types(), c.omitted_types());
    }
}

fn two_chain() -> FiniteStructure {
    FiniteStructure::from_tuples(Signature::new([("R", 2)]), 2, [("R", vec![vec![0, 1]])]).unwrap()
}

#[test]
fn completion_reaches_a_fixpoint() {
    let m = two_chain();
    let c = compile_sentence(&scott_sentence(&m).unwrap(), m.signature()).unwrap();
    let spec = PoolSpec {
        max_size: 2,
        vars: 2,
        quantifiers: Quantifiers::Single,
        max_formulas: 200,
    };
    let pool = candidate_pool(&c, &spec).unwrap();
    let b = Budget::unlimited();
    let mut t = TheoryHandle::bounded(c.signature().clone(), c.axioms().to_vec(), 4).unwrap();
    let mut sizes = vec![t.axioms().len()];
    let mut reached = false;
    for _ in 0..=pool.len() {
        let before: Vec<Formula> = t.axioms().to_vec();
        let added = completion_step(&mut t, &c, &pool, &b).unwrap();
        // monotone: the old axioms survive
        assert!(before.iter().all(|a| t.contains_axiom(a)));
        sizes.push(t.axioms().len());
        if added.is_empty() {
            reached = true;
            break;
        }
    }
    assert!(reached, "no fixpoint within the candidate count; sizes {sizes:?}");
    // idempotent at the fixpoint
    let again = completion_step(&mut t, &c, &pool, &b).unwrap();
    assert!(again.is_empty());
    // H(M) still models the completed theory
    let h = c.transform(&m).unwrap();
    assert!(scottbench_core::theory::satisfies_all(&h, t.axioms()).unwrap());

    let mut fresh = TheoryHandle::bounded(c.signature().clone(), c.axioms().to_vec(), 4).unwrap();
    let (_, done) = complete_to_fixpoint(&mut fresh, &c, &pool, pool.len() + 1, &b).unwrap();
    assert!(done);
    assert_eq!(fresh.axioms(), t.axioms());
}

// Every tuple of H(M), M = a digraph on at most 3 points and Ψ = Sc(M), has
// its type isolated by R_{φ_{β,ā}}.
#[test]
fn image_is_atomic() {
    let b = Budget::unlimited();
    for n in 1..=3 {
        for m in all_digraphs(n).into_iter().step_by(if n == 3 { 7 } else { 1 }) {
            let ps = refine_to_fixpoint(&m).unwrap();
            let c = compile_sentence(&scott_sentence(&m).unwrap(), m.signature()).unwrap();
            let h = c.transform(&m).unwrap();
            let auts = automorphisms(&h);
            let spec = PoolSpec {
                max_size: 1,
                vars: 2,
                quantifiers: Quantifiers::None,
                max_formulas: 400,
            };
            let pool = Pool::enumerate(c.signature(), &spec).unwrap();
            let mut t = TheoryHandle::complete(h.clone());
            let mut ext = ExtensionCache::new(&h, &b);
            for l in 1..=2usize {
                let orbit = orbit_ids_with(&h, &auts, l);
                for tup in all_tuples(n, l) {
                    let phi = stage_formula(&m, &tup, ps.beta()).unwrap();
                    let atom = c.relation_atom(&phi).expect("stage formula is a sub-formula");
                    assert_eq!(atom.free_vars(), vars(l).as_slice());
                    // extension of R_{φ_{β,ā}} is exactly the orbit of ā
                    let e = ext.get(&atom).unwrap();
                    for u in all_tuples(n, l) {
                        let same = orbit[tuple_index(&u, n)] == orbit[tuple_index(&tup, n)];
                        assert_eq!(e.bits.contains(tuple_index(&u, n)), same);
                    }
                    let ty: Vec<Formula> = pool
                        .over(l)
                        .map(|p| {
                            let pe = ext.get(p).unwrap();
                            let proj: Vec<usize> = pe.vars.iter().map(|v| tup[v.0 as usize]).collect();
                            if pe.bits.contains(tuple_index(&proj, n)) { p.clone() } else { Formula::not(p.clone()) }
                        })
                        .collect();
                    assert!(isolates_with(&atom, &ty, &vars(l), &mut t, &b).unwrap());
                }
            }
        }
    }
}

// Ψ = ∃x0 ¬⋀{P(x0), Q(x0)}: a bounded model of T_Ψ can have an element in
// R_P and R_Q but outside R_⋀, and ⋀{R_P, R_Q, ¬R_⋀} isolates that type.
#[test]
fn completion_excludes_an_isolated_type() {
    let sig = Signature::new([("P", 1), ("Q", 1)]);
    let psi = scottbench_core::logic::parse_formula("Exists x0 . Not And{P(x0), Q(x0)}", &sig).unwrap();
    let c = compile_sentence(&psi, &sig).unwrap();
    let spec = PoolSpec {
        max_size: 5,
        vars: 1,
        quantifiers: Quantifiers::None,
        max_formulas: 5000,
    };
    let pool = candidate_pool(&c, &spec).unwrap();
    assert!(!pool.truncated());
    let b = Budget::unlimited();
    let mut t = TheoryHandle::bounded(c.signature().clone(), c.axioms().to_vec(), 3).unwrap();
    let conj = c.omitted_types().iter().find(|o| o.vars.len() == 1).unwrap();
    assert!(t.consistent_with(&[Formula::exists(Var(0), conj.realization())], &b).unwrap());

    let (steps, done) = complete_to_fixpoint(&mut t, &c, &pool, pool.len(), &b).unwrap();
    assert!(done && steps >= 1);
    assert!(t.axioms().len() > c.axioms().len());
    // no bounded model of the completion realizes the type any more
    assert!(!t.consistent_with(&[Formula::exists(Var(0), conj.realization())], &b).unwrap());
    // and H(M) for small M ⊨ Ψ still satisfies it
    let m = FiniteStructure::from_tuples(sig, 2, [("P", vec![vec![0]]), ("Q", vec![vec![0], vec![1]])]).unwrap();
    assert!(scottbench_core::theory::satisfies_all(&c.transform(&m).unwrap(), t.axioms()).unwrap());
}
