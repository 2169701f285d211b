mod common;

use std::collections::{BTreeMap, HashMap};

use common::*;
use proptest::prelude::*;
use scottbench_core::logic::{
    automorphism_orbits, evaluate, isomorphic_bruteforce, parse_formula, print, print_sugared, Formula, Kind,
    Var,
};

/// Print with conjunction children shuffled and one child duplicated, to
/// exercise set normalization in the parser.
fn scrambled(f: &Formula, salt: &mut u64) -> String {
    match f.kind() {
        Kind::And(cs) => {
            let mut parts: Vec<String> = cs.iter().map(|c| scrambled(c, salt)).collect();
            if !parts.is_empty() {
                *salt = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let k = (*salt >> 33) as usize % parts.len();
                parts.rotate_left(k);
                let dup = parts[0].clone();
                parts.push(dup);
            }
            format!("And{{{}}}", parts.join(", "))
        }
        Kind::Not(c) => format!("Not {}", scrambled(c, salt)),
        Kind::Exists(v, c) => format!("Exists {v} . {}", scrambled(c, salt)),
        _ => print(f),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn parse_inverts_print(f in arb_formula(4)) {
        let g = parse_formula(&print(&f), &test_signature()).unwrap();
        prop_assert!(structural_eq(&f, &g));
        prop_assert_eq!(f.digest(), g.digest());
        let h = parse_formula(&print_sugared(&f), &test_signature()).unwrap();
        prop_assert!(structural_eq(&f, &h));
    }

    #[test]
    fn print_inverts_parse_up_to_set_normalization(f in arb_formula(4), salt in any::<u64>()) {
        let mut s = salt;
        let text = scrambled(&f, &mut s);
        let g = parse_formula(&text, &test_signature()).unwrap();
        prop_assert!(structural_eq(&f, &g));
        prop_assert_eq!(print(&g), print(&f));
    }

    #[test]
    fn evaluator_agrees_with_naive(m in arb_structure(3), f in arb_formula(4), a in prop::collection::vec(0usize..3, 3)) {
        let asg: BTreeMap<Var, usize> = (0..3).map(|i| (Var(i as u32), a[i] % m.size())).collect();
        let mut naive: HashMap<u32, usize> = asg.iter().map(|(v, x)| (v.0, *x)).collect();
        prop_assert_eq!(evaluate(&m, &f, &asg).unwrap(), naive_eval(&m, &f, &mut naive));
    }

    #[test]
    fn bruteforce_iso_is_symmetric(a in arb_structure(4), b in arb_structure(4)) {
        prop_assert_eq!(
            isomorphic_bruteforce(&a, &b).unwrap().is_some(),
            isomorphic_bruteforce(&b, &a).unwrap().is_some()
        );
    }

    #[test]
    fn found_bijection_is_an_isomorphism(a in arb_structure(4), seed in any::<u64>()) {
        let n = a.size();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let b = a.relabel(&perm).unwrap();
        let f = isomorphic_bruteforce(&a, &b).unwrap().expect("relabeling is isomorphic");
        prop_assert_eq!(a.relabel(&f).unwrap(), b);
    }

    #[test]
    fn zero_length_orbits(a in arb_structure(4)) {
        prop_assert_eq!(automorphism_orbits(&a, 0), vec![vec![Vec::<usize>::new()]]);
    }
}

#[test]
fn digest_collision_free_on_corpus() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let strat = arb_formula(4);
    let mut corpus: Vec<Formula> = Vec::new();
    for _ in 0..600 {
        let f = strat.new_tree(&mut runner).unwrap().current();
        corpus.push(f.clone());
        for sub in subterms(&f) {
            corpus.push(sub);
        }
    }
    corpus.truncate(3000);
    for (i, a) in corpus.iter().enumerate() {
        for b in &corpus[i..] {
            assert_eq!(a.digest() == b.digest(), structural_eq(a, b), "{a} vs {b}");
        }
    }
}

fn subterms(f: &Formula) -> Vec<Formula> {
    let mut out = vec![f.clone()];
    match f.kind() {
        Kind::Not(c) | Kind::Exists(_, c) => out.extend(subterms(c)),
        Kind::And(cs) => cs.iter().for_each(|c| out.extend(subterms(c))),
        _ => {}
    }
    out
}
