//! Entanglement-assisted quantum rate-distortion by alternating minimization.
//!
//! The solver minimizes `S(ρ_RB ‖ ρ_R ⊗ σ_B)` over joint states with first
//! marginal `ρ_R` and expected distortion `Tr(Δ ρ_RB) ≤ D`. Two paths are
//! provided: [`solver::solve`] works on dense `mn × mn` matrices for any
//! distortion, and [`sym::solve_sym`] exploits the structure of the
//! entanglement-fidelity distortion to run each iteration in `O(n³)`.
//!
//! ```
//! use qrd_core::{problem, solver, ProblemInstance, SolverConfig};
//!
//! let instance = ProblemInstance::entanglement_fidelity(problem::uniform_input(2), 0.375).unwrap();
//! let result = solver::solve(&instance, &SolverConfig::default()).unwrap();
//! let expected = qrd_core::oracles::analytic_uniform_rd(2, 0.375);
//! assert!((result.rate - expected).abs() < 1e-6);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod hermitian;
pub mod oracles;
pub mod problem;
pub mod solver;
pub mod sym;

pub use error::{Error, Result};
pub use hermitian::{CMatrix, HermitianMatrix};
pub use problem::{DensityMatrix, Distortion, ProblemInstance};
pub use solver::{SolverConfig, SolverPath, SolverResult, SolverStatus};
