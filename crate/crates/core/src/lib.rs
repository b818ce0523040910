//! Minimax solutions of one-dimensional Hamilton–Jacobi Cauchy problems.
//!
//! The pipeline integrates characteristics into an isochrone wave front,
//! reads the front combinatorially (cusps, branch indices, double points,
//! triangles), and selects the minimax section either fiber by fiber or by
//! eliminating vanishing triangles. Independent viscosity solvers and a
//! singularity classifier close the loop.

pub mod characteristics;
pub mod expr;
pub mod front;
pub mod grid;
pub mod morse1d;
pub mod render;
pub mod selector;
pub mod singular;
pub mod viscosity;

pub use characteristics::{CharStrand, Domain, ProblemSpec};
pub use expr::{Expression, Var};
pub use front::{FrontAnalysis, FrontCurve};
pub use grid::{GridSolution, Provenance};
pub use morse1d::{CouplingDecomposition, CriticalPoint, FiberFunction};
