//! String-averaging Halpern-type iterations for the best approximation problem.
//!
//! Given a family of firmly nonexpansive operators `T_1, ..., T_m` on `R^n`
//! whose fixed-point sets have a nonempty intersection `F`, and an anchor
//! `u`, the solvers in this crate generate iterates
//!
//! ```text
//! x^{k+1} = λ_k u + (1 − λ_k) S_k(x^k)
//! ```
//!
//! where `S_k` is a weighted average of string operators
//! `T[t] = T_{t_q} ∘ ... ∘ T_{t_1}`. With a steering sequence `(λ_k)` the
//! iterates converge to `P_F(u)`, the point of `F` nearest to the anchor.
//!
//! The crate is organised as:
//!
//! * [`operators`]: closed-form projections and their relaxations.
//! * [`strings`]: index vectors, string families, `M*` bounds and truncated
//!   countable families.
//! * [`steering`]: steering sequences and prefix validation.
//! * [`solvers`]: the iteration engines and trace recording.
//! * [`oracle`]: independent active-set and grid-search oracles for `P_F(u)`
//!   on polyhedral problems.
//! * [`problems`]: the shipped test problems.

pub mod error;
pub mod operators;
pub mod oracle;
pub mod point;
pub mod problems;
pub mod solvers;
pub mod steering;
pub mod strings;
pub mod tol;

pub use error::{Error, Result};
pub use operators::{Operator, OperatorKind};
pub use oracle::PolyhedralSpec;
pub use point::Point;
pub use solvers::{
    AlgorithmVariant, OperatorFamily, ProblemSpec, RunError, RunOptions, Solver, SolverRun,
    TraceRow,
};
pub use steering::SteeringSequence;
pub use strings::{CountableFamily, IndexVector, MStarBounds, StringFamily};
