//! Shared finite element machinery.

pub mod linalg;

pub use linalg::{Assembler, LinearSystem, SolveStats, SolverKind, SolverOptions};
