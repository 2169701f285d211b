mod common;

use std::collections::HashMap;

use common::*;
use proptest::prelude::*;
use scottbench_core::logic::{all_tuples, automorphism_orbits, isomorphic_bruteforce};
use scottbench_core::scott::{
    check_models_scott, iso_via_invariant, refine_to_fixpoint, scott_invariant, scott_sentence, ScottBuilder,
};
use scottbench_core::Budget;

/// Partition `a` refines partition `b` (both given as class ids per tuple).
fn refines(a: &[u32], b: &[u32]) -> bool {
    let mut map: HashMap<u32, u32> = HashMap::new();
    a.iter().zip(b).all(|(x, y)| *map.entry(*x).or_insert(*y) == *y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stages_refine(m in arb_digraph(1, 5)) {
        let ps = refine_to_fixpoint(&m).unwrap();
        prop_assert!(ps.beta() <= m.size());
        for alpha in 0..=ps.beta() {
            for k in 0..=m.size().min(4) {
                prop_assert!(refines(&ps.class_ids(k, alpha + 1), &ps.class_ids(k, alpha)));
            }
        }
        prop_assert_eq!(ps.class_counts(ps.beta()), ps.class_counts(ps.beta() + 1));
    }

    #[test]
    fn stable_partition_is_orbit_partition(m in arb_digraph(1, 4)) {
        let ps = refine_to_fixpoint(&m).unwrap();
        for k in 0..=m.size() {
            prop_assert_eq!(ps.partition(k, ps.beta()), automorphism_orbits(&m, k));
        }
    }

    #[test]
    fn scott_sentence_holds_in_its_model(m in arb_structure(3)) {
        let sc = scott_sentence(&m).unwrap();
        prop_assert!(check_models_scott(&m, &sc).unwrap());
    }

    #[test]
    fn invariant_matches_bruteforce_on_mixed_signature(a in arb_structure(3), b in arb_structure(3)) {
        let iso = isomorphic_bruteforce(&a, &b).unwrap().is_some();
        prop_assert_eq!(iso_via_invariant(&a, &b).unwrap(), iso);
        let sc = scott_sentence(&a).unwrap();
        prop_assert_eq!(check_models_scott(&b, &sc).unwrap(), iso);
    }

    #[test]
    fn invariant_survives_relabeling(m in arb_digraph(1, 4), seed in any::<u64>()) {
        let n = m.size();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let r = m.relabel(&perm).unwrap();
        prop_assert_eq!(scott_invariant(&m).unwrap(), scott_invariant(&r).unwrap());
    }
}

/// The memoized builder and the class bookkeeping produce exactly the
/// formulas of the definition, and classes are digest classes.
#[test]
fn memoized_formulas_match_definition() {
    for n in 1..=3 {
        for m in all_digraphs(n).into_iter().step_by(if n == 3 { 7 } else { 1 }) {
            let ps = refine_to_fixpoint(&m).unwrap();
            let budget = Budget::unlimited();
            let mut b = ScottBuilder::new(&m, &ps, &budget);
            for alpha in 0..=ps.beta() + 1 {
                for k in 0..=n {
                    let ids = ps.class_ids(k, alpha);
                    let mut by_digest: HashMap<[u8; 32], u32> = HashMap::new();
                    for (i, t) in all_tuples(n, k).enumerate() {
                        let naive = naive_stage_formula(&m, &t, alpha);
                        let fast = b.stage_formula(&t, alpha).unwrap();
                        assert!(structural_eq(&naive, &fast));
                        let c = *by_digest.entry(*naive.digest()).or_insert(ids[i]);
                        assert_eq!(c, ids[i], "class mismatch at {t:?}, stage {alpha}");
                    }
                    let distinct: std::collections::HashSet<u32> = ids.iter().copied().collect();
                    assert_eq!(distinct.len(), by_digest.len());
                }
            }
        }
    }
}

#[test]
fn exhaustive_small_pairs() {
    let mut all = Vec::new();
    for n in 1..=2 {
        all.extend(all_digraphs(n));
    }
    let invs: Vec<_> = all.iter().map(|m| scott_invariant(m).unwrap()).collect();
    let scs: Vec<_> = all.iter().map(|m| scott_sentence(m).unwrap()).collect();
    for (i, a) in all.iter().enumerate() {
        for (j, b) in all.iter().enumerate() {
            let iso = isomorphic_bruteforce(a, b).unwrap().is_some();
            assert_eq!(invs[i].digest == invs[j].digest, iso);
            assert_eq!(check_models_scott(b, &scs[i]).unwrap(), iso);
        }
    }
}
