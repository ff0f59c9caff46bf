//! Finite-dimensional calculus of orthogonal semi-saturated partial
//! representations of free groups.
//!
//! The crate evaluates partial representations given by generator images,
//! checks their axioms, builds the range-projection families and the
//! approximation maps `a_n`, measures how fast the averaging maps converge,
//! and tests the Fell-bundle and ternary-ring structure of the associated
//! operator fibers.

pub mod approx;
pub mod bundle;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod freegroup;
pub mod linop;
pub mod prep;
pub mod report;
pub mod section;

pub use error::{Error, Result};
pub use freegroup::{GeneratorSet, Letter, Word};
pub use linop::{Operator, Tolerance, C64};
pub use prep::{GeneratorFamily, PartialRep};
pub use report::CheckSummary;
pub use section::Section;
