//! Numerical laboratory for iterated function systems with probabilities on
//! the real line.
//!
//! The stationary measure `μ = Σ p_i (φ_i)_* μ` is approximated by iterating
//! the dual transfer operator on discrete measures, with every approximation
//! carrying a rigorous Wasserstein error bound. Around the solver sit exact
//! 1D optimal transport, chaos-game simulation, moment and tail bounds,
//! perturbation bounds and skew products over rotations and Markov shifts.
//!
//! Start from [`ifs::IfsModel`], certify it with
//! [`ifs::certify_contraction`] and solve with
//! [`stationary::solve_stationary`].

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod cli;
pub mod error;
pub mod ifs;
pub mod measures;
pub mod response;
pub mod rng;
pub mod skew;
pub mod stationary;
pub mod transport;
pub mod verdict;

pub use error::{Error, Result};
pub use ifs::{certify_contraction, ContractionCertificate, IfsModel, Map1D};
pub use measures::{DiscreteMeasure, MomentSpec};
pub use stationary::{solve_stationary, SolveReport, SolverOptions};
pub use transport::TransportPlan;
pub use verdict::Verdict;
