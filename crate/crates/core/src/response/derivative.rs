use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use super::solve_bernoulli;
use crate::error::{Error, Result};
use crate::stationary::{SolveReport, SolverOptions};

/// A test function with a Lipschitz bound valid on `[0, 1]`, where every
/// Bernoulli convolution lives.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lip: f64,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TestFunction({}, lip={})", self.name, self.lip)
    }
}

impl TestFunction {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static, lip: f64) -> Self {
        Self { name: name.into(), f: Arc::new(f), lip }
    }

    pub fn identity() -> Self {
        Self::new("x", |x| x, 1.0)
    }

    pub fn square() -> Self {
        Self::new("x^2", |x| x * x, 2.0)
    }
}

/// `∫x² dμ_λ = 1/(2(1 + λ))`, from `m₂ = λ²m₂ + λ(1−λ)/2 + (1−λ)²/2`.
pub fn bernoulli_second_moment(lambda: f64) -> f64 {
    0.5 / (1.0 + lambda)
}

pub fn bernoulli_second_moment_derivative(lambda: f64) -> f64 {
    -0.5 / ((1.0 + lambda) * (1.0 + lambda))
}

/// The mean is `1/2` for every `λ`.
pub fn bernoulli_mean_derivative(_lambda: f64) -> f64 {
    0.0
}

/// Bernoulli stationary approximations keyed by `λ`, solved on demand.
pub struct BernoulliSolveCache {
    q: f64,
    opts: SolverOptions,
    solved: HashMap<u64, SolveReport>,
}

impl BernoulliSolveCache {
    pub fn new(q: f64, opts: SolverOptions) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(Error::InvalidExponent(format!("derivative error bars need q >= 1, got {q}")));
        }
        Ok(Self { q, opts, solved: HashMap::new() })
    }

    pub fn get(&mut self, lambda: f64) -> Result<&SolveReport> {
        let key = lambda.to_bits();
        if !self.solved.contains_key(&key) {
            let r = solve_bernoulli(lambda, self.q, &self.opts)?;
            self.solved.insert(key, r);
        }
        Ok(&self.solved[&key])
    }

    /// Solves all listed parameters in parallel; results are independent of
    /// scheduling.
    pub fn prefetch(&mut self, lambdas: &[f64]) -> Result<()> {
        use rayon::prelude::*;
        let mut missing: Vec<f64> =
            lambdas.iter().copied().filter(|l| !self.solved.contains_key(&l.to_bits())).collect();
        missing.sort_by(f64::total_cmp);
        missing.dedup();
        let (q, opts) = (self.q, self.opts);
        let reports: Vec<SolveReport> =
            missing.par_iter().map(|&l| solve_bernoulli(l, q, &opts)).collect::<Result<_>>()?;
        for (l, r) in missing.into_iter().zip(reports) {
            self.solved.insert(l.to_bits(), r);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivativeRow {
    pub h: f64,
    /// `(∫f dμ_{λ+h} − ∫f dμ_{λ−h}) / 2h`.
    pub estimate: f64,
    /// `Lip(f) · (ledger₊ + ledger₋) / 2h`.
    pub error_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DerivativeStatus {
    /// Successive estimates agree within their combined bars.
    Consistent,
    Inconsistent,
    /// Every bar exceeds its estimate in absolute value.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub function: String,
    pub lambda: f64,
    pub rows: Vec<DerivativeRow>,
    /// Estimate at the smallest `h`.
    pub estimate: f64,
    pub error_bar: f64,
    pub status: DerivativeStatus,
}

impl DerivativeReport {
    fn build(f: &TestFunction, lambda: f64, h_schedule: &[f64], cache: &mut BernoulliSolveCache) -> Result<Self> {
        if h_schedule.is_empty() || h_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidParameter("h schedule must be nonempty and strictly decreasing".into()));
        }
        if h_schedule.iter().any(|&h| !(h > 0.0 && lambda - h > 0.0 && lambda + h < 1.0)) {
            return Err(Error::InvalidParameter(format!("λ ± h leaves (0, 1) at λ = {lambda}")));
        }
        let wanted: Vec<f64> = h_schedule.iter().flat_map(|&h| [lambda + h, lambda - h]).collect();
        cache.prefetch(&wanted)?;
        let mut rows = Vec::with_capacity(h_schedule.len());
        for &h in h_schedule {
            let (ip, lp) = {
                let r = cache.get(lambda + h)?;
                (r.measure.integrate(&*f.f), r.total_error_bound)
            };
            let (im, lm) = {
                let r = cache.get(lambda - h)?;
                (r.measure.integrate(&*f.f), r.total_error_bound)
            };
            // W_1 <= W_q bounds |∫f dm − ∫f dμ| by Lip(f) times the ledger.
            rows.push(DerivativeRow { h, estimate: (ip - im) / (2.0 * h), error_bar: f.lip * (lp + lm) / (2.0 * h) });
        }
        let status = if rows.iter().all(|r| r.error_bar >= r.estimate.abs()) {
            DerivativeStatus::Inconclusive
        } else if rows.windows(2).all(|w| (w[0].estimate - w[1].estimate).abs() <= w[0].error_bar + w[1].error_bar) {
            DerivativeStatus::Consistent
        } else {
            DerivativeStatus::Inconsistent
        };
        let last = *rows.last().unwrap();
        Ok(Self { function: f.name.clone(), lambda, rows, estimate: last.estimate, error_bar: last.error_bar, status })
    }
}

/// Central differences of `λ ↦ ∫f dμ_λ` for Bernoulli convolutions along a
/// decreasing schedule of `h`. This estimates the derivative; it does not
/// construct the velocity field behind it.
pub fn finite_difference_response(
    f: &TestFunction,
    lambda: f64,
    h_schedule: &[f64],
    q: f64,
    opts: &SolverOptions,
) -> Result<DerivativeReport> {
    let mut cache = BernoulliSolveCache::new(q, *opts)?;
    DerivativeReport::build(f, lambda, h_schedule, &mut cache)
}

impl BernoulliSolveCache {
    pub fn finite_difference(&mut self, f: &TestFunction, lambda: f64, h_schedule: &[f64]) -> Result<DerivativeReport> {
        DerivativeReport::build(f, lambda, h_schedule, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_moment_closed_form_solves_recursion() {
        for l in [0.3, 0.5, 0.8] {
            let m: f64 = bernoulli_second_moment(l);
            assert!((m - (l * l * m + l * (1.0 - l) * 0.5 + (1.0 - l) * (1.0 - l) * 0.5)).abs() < 1e-15);
            let d = (bernoulli_second_moment(l + 1e-6) - bernoulli_second_moment(l - 1e-6)) / 2e-6;
            assert!((d - bernoulli_second_moment_derivative(l)).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_function_has_zero_derivative() {
        let f = TestFunction::new("1", |_| 1.0, 0.0);
        let r = finite_difference_response(&f, 0.6, &[0.02, 0.01], 1.0, &SolverOptions::new(512, 1e-3)).unwrap();
        assert!(r.rows.iter().all(|row| row.estimate == 0.0));
    }

    #[test]
    fn square_derivative_stabilizes() {
        let mut cache = BernoulliSolveCache::new(1.0, SolverOptions::new(1 << 14, 5e-5)).unwrap();
        let r = cache.finite_difference(&TestFunction::square(), 0.6, &[0.02, 0.01, 0.005]).unwrap();
        assert_eq!(r.status, DerivativeStatus::Consistent, "{r:?}");
        let exact = bernoulli_second_moment_derivative(0.6);
        assert!((r.estimate - exact).abs() <= r.error_bar, "{r:?} vs {exact}");
        let id = cache.finite_difference(&TestFunction::identity(), 0.6, &[0.02, 0.01, 0.005]).unwrap();
        assert!(id.estimate.abs() <= id.error_bar);
    }

    #[test]
    fn schedule_must_decrease() {
        let opts = SolverOptions::new(64, 1e-2);
        assert!(finite_difference_response(&TestFunction::identity(), 0.6, &[0.01, 0.02], 1.0, &opts).is_err());
    }
}
