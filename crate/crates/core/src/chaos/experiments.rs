use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{chain_endpoint, simulate_chain, ChainConfig};
use crate::error::{Error, Result};
use crate::ifs::IfsModel;
use crate::measures::empirical_from_samples;
use crate::rng::{chain_rng, IndexSampler};
use crate::stationary::SolveReport;
use crate::transport::wasserstein;

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityOptions {
    pub n_grid: Vec<usize>,
    pub chains: usize,
    pub seed: u64,
    pub x_start: f64,
    pub burn_in: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErgodicityRow {
    pub n: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub chains: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityTable {
    pub rows: Vec<ErgodicityRow>,
    /// Least-squares slope of `log mean_error` against `log n`.
    pub slope: f64,
    pub reference_ledger: f64,
}

impl ErgodicityTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("n,mean_w1,std_error,chains\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:?},{:?},{}\n", r.n, r.mean_error, r.std_error, r.chains));
        }
        out
    }
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean `W_1` distance between the empirical measure of `n` chain steps and a
/// solver reference, for each `n` in the grid.
///
/// Requires a uniformly contracting model (bounded invariant interval) and a
/// reference whose ledger is at most a tenth of the smallest measured error.
/// Chain `c` of grid entry `g` uses stream `g · chains + c`.
pub fn ergodicity_experiment(
    ifs: &IfsModel,
    reference: &SolveReport,
    opts: &ErgodicityOptions,
) -> Result<ErgodicityTable> {
    if opts.chains < 2 {
        return Err(Error::InvalidInput("need at least two chains".into()));
    }
    if opts.n_grid.is_empty() || opts.n_grid.windows(2).any(|w| w[0] >= w[1]) || opts.n_grid[0] == 0 {
        return Err(Error::InvalidInput("n grid must be positive and strictly increasing".into()));
    }
    if ifs.invariant_interval().is_none() {
        return Err(Error::NoInvariantDomain(format!("{} is not uniformly contracting", ifs.label())));
    }
    if reference.certificate.q < 1.0 {
        return Err(Error::InvalidInput("reference must carry a W_q ledger with q >= 1".into()));
    }
    let mu = &reference.measure;
    let mut rows = Vec::with_capacity(opts.n_grid.len());
    for (g, &n) in opts.n_grid.iter().enumerate() {
        let errors: Vec<f64> = (0..opts.chains)
            .into_par_iter()
            .map(|c| {
                let cfg = ChainConfig {
                    ifs: ifs.clone(),
                    x_start: opts.x_start,
                    steps: opts.burn_in + n,
                    burn_in: opts.burn_in,
                    seed: opts.seed,
                    chain: (g * opts.chains + c) as u64,
                };
                let xs = simulate_chain(&cfg)?;
                wasserstein(&empirical_from_samples(&xs)?, mu, 1.0)
            })
            .collect::<Result<_>>()?;
        let (mean_error, std_error) = mean_and_se(&errors);
        rows.push(ErgodicityRow { n, mean_error, std_error, chains: opts.chains });
    }
    // W_1 <= W_q for q >= 1, so the W_q ledger also bounds the W_1 error.
    let smallest = rows.iter().map(|r| r.mean_error).fold(f64::INFINITY, f64::min);
    if reference.total_error_bound > 0.1 * smallest {
        return Err(Error::ReferenceTooCoarse { ledger: reference.total_error_bound, smallest });
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.mean_error.ln()).collect();
    Ok(ErgodicityTable { slope: ls_slope(&lx, &ly), rows, reference_ledger: reference.total_error_bound })
}

/// Survival `μ_{a,p}([t, ∞))` of the `(a, p)` model estimated from stationary
/// draws `y` by conditioning on the last contraction: `X = a·Y + N` with
/// `P(N >= n) = (1−p)^n` independent of `Y`, so
/// `P(X >= t) = E[(1−p)^{max(0, ⌈t − aY⌉)}]`. Returns the estimate and its
/// standard error.
pub fn rao_blackwell_survival(samples: &[f64], a: f64, p: f64, t: f64) -> (f64, f64) {
    let lq = (1.0 - p).ln();
    let values: Vec<f64> = samples.iter().map(|&y| (lq * (t - a * y).ceil().max(0.0)).exp()).collect();
    mean_and_se(&values)
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentGrowthRow {
    pub q: f64,
    /// Sample sizes of the doubling sequence.
    pub sizes: Vec<usize>,
    /// Median over replicates of the empirical moment at each size.
    pub medians: Vec<f64>,
    /// Moment over all draws.
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Log-log slope of the medians against size.
    pub growth_slope: f64,
    /// Heuristic: the medians keep growing as the sample doubles.
    pub flagged_divergent: bool,
}

const REPLICATES: usize = 8;
const DOUBLINGS: usize = 5;
const BOOTSTRAP: usize = 200;
/// Growth slope above which a moment is flagged.
const GROWTH_THRESHOLD: f64 = 0.1;

/// Empirical moments `∫|x − x0|^q` from `REPLICATES × n_samples` stationary
/// draws at depth `depth`. For each `q` the median over replicates is
/// recorded along the sizes `n/16, …, n`; a log-log growth slope above `0.1`
/// flags the moment as divergent. This is a heuristic: no finite sample proves
/// divergence. Percentile bootstrap (200 resamples) gives a 95% interval for
/// the pooled estimate.
pub fn moment_growth_probe(
    ifs: &IfsModel,
    q_grid: &[f64],
    n_samples: usize,
    depth: usize,
    seed: u64,
) -> Result<Vec<MomentGrowthRow>> {
    if n_samples < 1 << (DOUBLINGS - 1) {
        return Err(Error::InvalidInput(format!("need at least {} samples", 1 << (DOUBLINGS - 1))));
    }
    if let Some(q) = q_grid.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
        return Err(Error::InvalidExponent(format!("moment exponent must be positive, got {q}")));
    }
    let sampler = IndexSampler::new(ifs);
    let x0 = ifs.x0();
    let total = REPLICATES * n_samples;
    let draws: Vec<f64> =
        (0..total as u64).into_par_iter().map(|j| chain_endpoint(ifs, &sampler, x0, depth, seed, j)).collect();
    let sizes: Vec<usize> = (0..DOUBLINGS).rev().map(|d| n_samples >> d).collect();

    q_grid
        .iter()
        .enumerate()
        .map(|(qi, &q)| {
            let powers: Vec<f64> = draws.iter().map(|x| (x - x0).abs().powf(q)).collect();
            let medians: Vec<f64> = sizes
                .iter()
                .map(|&s| {
                    let mut means: Vec<f64> =
                        powers.chunks(n_samples).map(|rep| rep[..s].iter().sum::<f64>() / s as f64).collect();
                    means.sort_by(f64::total_cmp);
                    0.5 * (means[REPLICATES / 2 - 1] + means[REPLICATES / 2])
                })
                .collect();
            let estimate = powers.iter().sum::<f64>() / total as f64;
            let mut rng = chain_rng(seed ^ 0xb007_57ab, qi as u64);
            let mut boot: Vec<f64> = (0..BOOTSTRAP)
                .map(|_| (0..total).map(|_| powers[rng.gen_range(0..total)]).sum::<f64>() / total as f64)
                .collect();
            boot.sort_by(f64::total_cmp);
            let lx: Vec<f64> = sizes.iter().map(|&s| (s as f64).ln()).collect();
            let ly: Vec<f64> = medians.iter().map(|m| m.max(f64::MIN_POSITIVE).ln()).collect();
            let growth_slope = ls_slope(&lx, &ly);
            Ok(MomentGrowthRow {
                q,
                sizes: sizes.clone(),
                medians,
                estimate,
                ci_low: boot[(BOOTSTRAP as f64 * 0.025) as usize],
                ci_high: boot[(BOOTSTRAP as f64 * 0.975) as usize - 1],
                growth_slope,
                flagged_divergent: growth_slope > GROWTH_THRESHOLD,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [1.0f64, 10.0, 100.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 10.0, 100.0].iter().map(|v| (2.0 * v.powf(-0.5)).ln()).collect();
        assert!((ls_slope(&x, &y) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn rao_blackwell_is_exact_for_degenerate_contraction() {
        // a = 0: X = N is geometric, P(X >= t) = (1-p)^t for integer t
        let (s, se) = rao_blackwell_survival(&[0.0, 3.0, 7.5], 0.0, 0.4, 5.0);
        assert!((s - 0.6f64.powi(5)).abs() < 1e-15);
        assert_eq!(se, 0.0);
    }
}
