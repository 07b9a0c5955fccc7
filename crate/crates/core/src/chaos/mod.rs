//! The chaos game `X_{k+1} = φ_{i_k}(X_k)` with i.i.d. indices, and the
//! experiments built on it.

mod experiments;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{ContractionCertificate, IfsModel};
use crate::rng::{chain_rng, IndexSampler};

pub use experiments::{
    ergodicity_experiment, moment_growth_probe, rao_blackwell_survival, ErgodicityOptions, ErgodicityRow,
    ErgodicityTable, MomentGrowthRow,
};
pub(crate) use experiments::{ls_slope, mean_and_se};

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub ifs: IfsModel,
    pub x_start: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Stream index within the seed.
    pub chain: u64,
}

impl ChainConfig {
    pub fn new(ifs: IfsModel, x_start: f64, steps: usize, seed: u64) -> Self {
        Self { ifs, x_start, steps, burn_in: 0, seed, chain: 0 }
    }
}

/// Runs one chain and returns `X_{burn_in+1}, …, X_steps`.
pub fn simulate_chain(cfg: &ChainConfig) -> Result<Vec<f64>> {
    if cfg.steps <= cfg.burn_in {
        return Err(Error::InvalidInput(format!("steps ({}) must exceed burn-in ({})", cfg.steps, cfg.burn_in)));
    }
    if !cfg.x_start.is_finite() {
        return Err(Error::InvalidInput(format!("start point {} is not finite", cfg.x_start)));
    }
    let sampler = IndexSampler::new(&cfg.ifs);
    let maps = cfg.ifs.maps();
    let mut rng = chain_rng(cfg.seed, cfg.chain);
    let mut x = cfg.x_start;
    let mut out = Vec::with_capacity(cfg.steps - cfg.burn_in);
    for k in 1..=cfg.steps {
        x = maps[sampler.sample(&mut rng)].apply(x);
        if k > cfg.burn_in {
            out.push(x);
        }
    }
    Ok(out)
}

/// Endpoint of a chain of length `depth` started at `x_start`.
pub(crate) fn chain_endpoint(
    ifs: &IfsModel,
    sampler: &IndexSampler,
    x_start: f64,
    depth: usize,
    seed: u64,
    chain: u64,
) -> f64 {
    let maps = ifs.maps();
    let mut rng = chain_rng(seed, chain);
    let mut x = x_start;
    for _ in 0..depth {
        x = maps[sampler.sample(&mut rng)].apply(x);
    }
    x
}

/// Smallest `k` with `ρ̄^k · W_q(δ_{x0}, μ) <= bias`.
pub fn mixing_depth(cert: &ContractionCertificate, bias: f64) -> Result<usize> {
    if !(bias > 0.0) {
        return Err(Error::InvalidParameter(format!("bias must be positive, got {bias}")));
    }
    let w0 = cert.dirac_distance_bound();
    let rho_bar = cert.rho_bar();
    if w0 <= bias || rho_bar == 0.0 {
        return Ok(if w0 <= bias { 0 } else { 1 });
    }
    Ok(((bias / w0).ln() / rho_bar.ln()).ceil().max(0.0) as usize)
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarySample {
    pub samples: Vec<f64>,
    pub depth: usize,
    /// Bound on `W_q` between the law of each draw and `μ`.
    pub bias_bound: f64,
    pub q: f64,
}

/// `n_samples` independent draws, each the endpoint of its own chain of
/// length `depth` from `x0`. The draws are computed in parallel; draw `j` uses
/// stream `j`.
pub fn sample_stationary(
    ifs: &IfsModel,
    cert: &ContractionCertificate,
    n_samples: usize,
    depth: usize,
    seed: u64,
) -> Result<StationarySample> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let sampler = IndexSampler::new(ifs);
    let samples: Vec<f64> =
        (0..n_samples as u64).into_par_iter().map(|j| chain_endpoint(ifs, &sampler, cert.x0, depth, seed, j)).collect();
    let bias_bound = cert.rho_bar().powi(depth as i32) * cert.dirac_distance_bound();
    Ok(StationarySample { samples, depth, bias_bound, q: cert.q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::certify_contraction;
    use crate::response::bernoulli_ifs;

    #[test]
    fn deterministic_single_map() {
        let ifs = IfsModel::affine("half", &[(0.5, 0.0, 1.0)], 0.0).unwrap();
        let xs = simulate_chain(&ChainConfig::new(ifs, 1.0, 20, 99)).unwrap();
        for (k, x) in xs.iter().enumerate() {
            assert_eq!(*x, 0.5f64.powi(k as i32 + 1));
        }
    }

    #[test]
    fn same_seed_same_path() {
        let cfg = ChainConfig::new(bernoulli_ifs(0.7).unwrap(), 0.0, 1000, 5);
        assert_eq!(simulate_chain(&cfg).unwrap(), simulate_chain(&cfg).unwrap());
        let other = ChainConfig { seed: 6, ..cfg.clone() };
        assert_ne!(simulate_chain(&cfg).unwrap(), simulate_chain(&other).unwrap());
    }

    #[test]
    fn bernoulli_half_stays_in_unit_interval() {
        let xs = simulate_chain(&ChainConfig::new(bernoulli_ifs(0.5).unwrap(), 0.0, 10_000, 1)).unwrap();
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn burn_in_must_be_shorter_than_run() {
        let cfg = ChainConfig { burn_in: 10, ..ChainConfig::new(bernoulli_ifs(0.5).unwrap(), 0.0, 10, 1) };
        assert!(simulate_chain(&cfg).is_err());
    }

    #[test]
    fn single_contraction_samples_near_fixed_point() {
        let ifs = IfsModel::affine("half", &[(0.5, 0.0, 1.0)], 1.0).unwrap();
        let cert = certify_contraction(&ifs, 1.0, 1.0).unwrap();
        let depth = mixing_depth(&cert, 1e-6).unwrap();
        let s = sample_stationary(&ifs, &cert, 100, depth, 3).unwrap();
        assert!(s.samples.iter().all(|x| x.abs() <= 0.5f64.powi(depth as i32)));
        assert!(s.bias_bound <= 1e-6);
    }
}
