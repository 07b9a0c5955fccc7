//! Stationary measures by iterating the dual transfer operator with support
//! compression, under an explicit Wasserstein error ledger.
//!
//! Starting from `m_0 = δ_{x0}`, each step computes `m_k = Q(L* m_{k−1})`
//! where `Q` is [`quantize`] with exact error `ε_k`. Since `L*` contracts
//! `W_q` by `ρ̄`,
//!
//! ```text
//! W_q(m_k, μ) <= ρ̄^k · W_q(δ_{x0}, μ) + Σ_{j<=k} ρ̄^{k−j} ε_j
//! ```
//!
//! and `W_q(δ_{x0}, μ)` is bounded through the certificate's moment bound.

mod moments;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{apply_dual_transfer, ContractionCertificate, IfsModel};
use crate::measures::{quantize, DiscreteMeasure, MomentSpec};

pub use moments::{
    check_generalized_moment, exp_moment_product, tail_constant, tail_upper_bound, ExpMomentReport,
    GeneralizedMomentReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub max_atoms: usize,
    pub target_error: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_atoms: 4096, target_error: 1e-3, max_iterations: 10_000 }
    }
}

impl SolverOptions {
    pub fn new(max_atoms: usize, target_error: f64) -> Self {
        Self { max_atoms, target_error, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRow {
    pub iteration: usize,
    pub step_error: f64,
    pub contraction_term: f64,
    pub quantization_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub measure: DiscreteMeasure,
    pub iterations: usize,
    pub contraction_term: f64,
    pub quantization_term: f64,
    /// Bound on `W_q(measure, μ)`.
    pub total_error_bound: f64,
    pub certificate: ContractionCertificate,
    pub max_atoms: usize,
    pub target_error: f64,
    pub converged: bool,
    #[serde(skip)]
    pub history: Vec<LedgerRow>,
}

impl SolveReport {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,step_error,contraction_term,quantization_term,total\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?}\n",
                r.iteration, r.step_error, r.contraction_term, r.quantization_term, r.total
            ));
        }
        out
    }
}

/// Iterations allowed after the contraction term has become negligible
/// without the quantization term dropping below target.
const STALL_WINDOW: usize = 50;

pub fn solve_stationary(ifs: &IfsModel, cert: &ContractionCertificate, opts: &SolverOptions) -> Result<SolveReport> {
    if opts.max_atoms < 2 {
        return Err(Error::InvalidInput(format!("max_atoms must be at least 2, got {}", opts.max_atoms)));
    }
    if !(opts.target_error > 0.0) {
        return Err(Error::InvalidInput(format!("target error must be positive, got {}", opts.target_error)));
    }
    if !(cert.rho >= 0.0 && cert.rho < 1.0) {
        return Err(Error::NotContractingAtThisExponent { q: cert.q, rho: cert.rho });
    }
    let spec = MomentSpec::new(cert.q, cert.x0)?;
    let rho_bar = cert.rho_bar();
    let w0 = cert.dirac_distance_bound();
    if !w0.is_finite() {
        return Err(Error::CannotCertify("moment bound is not finite".into()));
    }

    let mut m = DiscreteMeasure::dirac(cert.x0);
    let mut contraction = w0;
    let mut quant = 0.0;
    let mut history = Vec::new();
    let mut negligible_since: Option<usize> = None;
    let mut k = 0;
    let mut converged = contraction <= opts.target_error;
    while !converged && k < opts.max_iterations {
        k += 1;
        let pushed = apply_dual_transfer(ifs, &m);
        let (next, eps) = quantize(&pushed, opts.max_atoms, &spec)?;
        m = next;
        contraction *= rho_bar;
        quant = rho_bar * quant + eps;
        let total = contraction + quant;
        history.push(LedgerRow {
            iteration: k,
            step_error: eps,
            contraction_term: contraction,
            quantization_term: quant,
            total,
        });
        if total <= opts.target_error {
            converged = true;
            break;
        }
        if contraction <= 1e-3 * opts.target_error {
            let since = *negligible_since.get_or_insert(k);
            if k - since >= STALL_WINDOW {
                break;
            }
        }
    }

    let report = SolveReport {
        measure: m,
        iterations: k,
        contraction_term: contraction,
        quantization_term: quant,
        total_error_bound: contraction + quant,
        certificate: *cert,
        max_atoms: opts.max_atoms,
        target_error: opts.target_error,
        converged,
        history,
    };
    if converged {
        Ok(report)
    } else {
        Err(Error::TargetUnreachable(Box::new(report)))
    }
}
