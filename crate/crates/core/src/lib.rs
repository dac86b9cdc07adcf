//! Ranged program analysis at desk scale.
//!
//! The crate splits a program's path space into ranges bounded by
//! test-case-induced paths, runs configurable program analyses on the
//! ranges in parallel (optionally with work stealing), and aggregates
//! verdicts and correctness witnesses into a joint result.

pub mod cpa;
pub mod domains;
pub mod frontend;
pub mod range_reduction;
pub mod semantics;
pub mod splitter;
pub mod solver;
