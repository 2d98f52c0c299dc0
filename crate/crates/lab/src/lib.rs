//! Numerical laboratory for dyadic harmonic analysis on model domains.
//!
//! The crate builds Hytönen–Kairema style dyadic grids on the boundary of
//! the unit disc in ℂ and the unit ball in ℂⁿ (n ≤ 3), extends them into the
//! domain as tents, kubes and a Bergman tree, and measures the constants in
//! the classical embedding and domination inequalities for weighted
//! composition operators: Carleson ratios, Berezin transforms, maximal
//! operators, sparse sums, Sawyer-type testing constants and weighted
//! estimates.
//!
//! Everything is driven by seeded Monte-Carlo sampling; all results are
//! deterministic for a fixed seed, independent of the number of worker
//! threads.

pub mod config;
pub mod domain;
pub mod error;
pub mod grid;
pub mod measure;
pub mod mesh;
pub mod operator;
pub mod parallel;
pub mod report;
pub mod spatial;
pub mod suites;
pub mod symbol;
pub mod tent;

pub use domain::{Model, Point};
pub use error::{Error, Result};
