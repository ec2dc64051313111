//! Self-consistent field iterations for nonlinear eigenvector problems
//! `H(V)V = VΛ` and sharp estimates of their local convergence rate.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense Hermitian eigensolver, canonical angles, tangent-angle matrices.
//! - [`problems`]: the [`NepvProblem`] trait with the Kohn–Sham and Gross–Pitaevskii models.
//! - [`scf`]: plain and level-shifted SCF, solution certificates, observed rates.
//! - [`analysis`]: local R-linear operators, spectral radius, operator norms and shift selection.
//! - [`experiment`]: ground-truth policy, rate reports and parameter sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod problems;
pub mod scf;

pub use analysis::{GapMatrix, QExtremes, RateReport, RealLinearMap};
pub use error::{Error, Result};
pub use linalg::{CMat, HermitianEig, RMat, Subspace};
pub use problems::{Gpe, GpeParams, KohnSham, KohnShamParams, NepvProblem, Potential};
pub use scf::{IterationHistory, IterationRecord, ScfOptions, SolutionCertificate, Status};
