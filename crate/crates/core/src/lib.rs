//! Gomory cutting planes with pluggable cut selection.
//!
//! The crate solves LP relaxations with an in-house dense simplex, reads
//! Gomory cuts off the optimal tableau, and exposes cut selection as a Markov
//! decision process. Selection policies are either the classic heuristics or
//! an attention network trained with evolution strategies; both can also drive
//! a simple branch-and-cut.

pub mod bnc;
pub mod dataset;
pub mod env;
pub mod es;
pub mod eval;
pub mod exact;
pub mod gomory;
pub mod heuristics;
pub mod instances;
pub mod interpret;
pub mod lp;
pub mod par;
pub mod policy;
pub mod rng;
