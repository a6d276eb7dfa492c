//! Penalty-regulated stochastic forward-backward splitting for constrained
//! monotone inclusions `0 ∈ A x + N_C(x)` with `C = argmin Ψ`.

// NaN-aware guards like `!(x > 0.0)` are deliberate throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod harness;
pub mod linalg;
pub mod operators;
pub mod penalty;
pub mod problems;
pub mod series;
pub mod solver;
pub mod sparse;
pub mod stochastic;
