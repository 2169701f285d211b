//! Finite model theory workbench.
//!
//! Scott analysis of finite structures, compilation of infinitary sentences
//! into first-order theories with omitted types, isolation and atomicity
//! checks, and partition refinement on additively colored linear orders.

pub mod budget;
pub mod error;
pub mod logic;
pub mod sat;
pub mod scott;
pub mod theory;
pub mod pool;
pub mod compiler;
pub mod atomicity;
pub mod orders;
pub mod generators;

pub use budget::Budget;
pub use error::{Error, Result};
