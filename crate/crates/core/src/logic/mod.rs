//! Signatures, formulas, finite structures, evaluation and brute-force oracles.

pub mod eval;
pub mod formula;
pub mod iso;
pub mod signature;
pub mod structure;
pub mod syntax;

pub use eval::{evaluate, Evaluator, Extension, ExtensionCache};
pub use formula::{vars, Digest, Formula, Kind, Var};
pub use iso::{automorphism_orbits, automorphisms, canonical_form, isomorphic_bruteforce, PartialMap};
pub use signature::Signature;
pub use structure::{all_tuples, FiniteStructure, Table};
pub use syntax::{parse_formula, parse_formula_infer, print, print_sugared, try_print};

/// Hex digest of a formula under the set coding of conjunctions.
pub fn canonical_digest(f: &Formula) -> String {
    f.digest_hex()
}
