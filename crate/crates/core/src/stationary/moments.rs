//! Drift-based moment bounds and the exponential moments and tails of the
//! `(a, p)` model (`x ↦ a·x` with probability `p`, `x ↦ x + 1` otherwise).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{apply_transfer, IfsModel};
use crate::measures::DiscreteMeasure;

const STRESS_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Serialize)]
pub struct GeneralizedMomentReport {
    pub integral_phi: f64,
    pub integral_psi: f64,
    /// `B/(1 − θ) · ∫ψ dm`.
    pub bound: f64,
    pub margin: f64,
    pub theta: f64,
    pub b: f64,
    /// Stress-grid points where `Lφ <= θφ + Bψ` fails.
    pub grid_violations: Vec<f64>,
    pub grid_lo: f64,
    pub grid_hi: f64,
}

impl GeneralizedMomentReport {
    pub fn passed(&self) -> bool {
        self.grid_violations.is_empty() && self.margin >= 0.0
    }
}

/// Checks the drift inequality `Lφ <= θφ + Bψ` on the support of `m` and on a
/// grid of `10^4` points over `[x0 − R, x0 + R]`, `R` ten times the support
/// radius of `m`, then evaluates both sides of `∫φ dm <= B/(1−θ) ∫ψ dm`.
/// The grid check is numerical, not a proof.
pub fn check_generalized_moment(
    ifs: &IfsModel,
    m: &DiscreteMeasure,
    phi: impl Fn(f64) -> f64,
    psi: impl Fn(f64) -> f64,
    theta: f64,
    b: f64,
) -> Result<GeneralizedMomentReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("B must be a nonnegative number, got {b}")));
    }
    let violates = |x: f64| {
        let lhs = apply_transfer(ifs, &phi, x);
        let rhs = theta * phi(x) + b * psi(x);
        lhs > rhs + 1e-12 * rhs.abs().max(1.0)
    };
    let witnesses: Vec<f64> = m.positions().iter().copied().filter(|&x| violates(x)).collect();
    if !witnesses.is_empty() {
        return Err(Error::HypothesisFailed { witnesses });
    }
    let x0 = ifs.x0();
    let radius = 10.0 * m.support_radius(x0);
    let radius = if radius > 0.0 { radius } else { 1.0 };
    let (lo, hi) = (x0 - radius, x0 + radius);
    let step = (hi - lo) / (STRESS_GRID_POINTS - 1) as f64;
    let grid_violations: Vec<f64> =
        (0..STRESS_GRID_POINTS).map(|k| lo + step * k as f64).filter(|&x| violates(x)).collect();

    let integral_phi = m.integrate(&phi);
    let integral_psi = m.integrate(&psi);
    let bound = b / (1.0 - theta) * integral_psi;
    Ok(GeneralizedMomentReport {
        integral_phi,
        integral_psi,
        bound,
        margin: bound - integral_phi,
        theta,
        b,
        grid_violations,
        grid_lo: lo,
        grid_hi: hi,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpMomentReport {
    pub a: f64,
    pub p: f64,
    pub b: f64,
    pub terms: usize,
    /// `Π_{k<K} p/(1 − (1−p)e^{a^k b})`.
    pub product_value: f64,
    /// Bound on `|E[e^{bX}] − product_value|`.
    pub truncation_bound: f64,
    /// `C(a, p) = p Π_{k>=1} p/(1 − (1−p)^{1−a^k})`.
    pub c_ap: f64,
    /// `C(a, p)/(1 − (1−p)e^b)`.
    pub uniform_bound: f64,
}

fn check_ap(a: f64, p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!("a must lie in [0, 1), got {a}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// `E[e^{bX}]` under the stationary law of the `(a, p)` model as a truncated
/// infinite product.
///
/// The `k`-th log-factor `g(u) = log p − log(1 − (1−p)e^u)` at `u = a^k b`
/// has `g(0) = 0` and increasing derivative `(1−p)e^u / (1 − (1−p)e^u)`, so
/// `|g(u)| <= c|u|` with `c` that derivative at `a^K |b|` (or at `0` when
/// `b < 0`). The omitted factors then contribute at most
/// `T = c |b| a^K/(1 − a)` to the log, and the error is `<= P_K (e^T − 1)`.
pub fn exp_moment_product(a: f64, p: f64, b: f64, terms: usize) -> Result<ExpMomentReport> {
    check_ap(a, p)?;
    if terms == 0 {
        return Err(Error::InvalidParameter("need at least one product term".into()));
    }
    let limit = -(1.0 - p).ln();
    if !(b < limit) {
        return Err(Error::DivergentMoment { b, limit });
    }
    // 1 − (1−p)e^u written as p − (1−p)(e^u − 1) so that u = 0 gives exactly 1
    let factor = |u: f64| p / (p - (1.0 - p) * u.exp_m1());
    let mut product = 1.0;
    let mut ak = 1.0;
    for _ in 0..terms {
        product *= factor(ak * b);
        ak *= a;
    }
    let slope = |u: f64| (1.0 - p) * u.exp() / (1.0 - (1.0 - p) * u.exp());
    let c = if b >= 0.0 { slope(ak * b) } else { slope(0.0) };
    let t = c * b.abs() * ak / (1.0 - a);
    let truncation_bound = product * t.exp_m1();
    let c_ap = tail_constant(a, p)?;
    Ok(ExpMomentReport {
        a,
        p,
        b,
        terms,
        product_value: product,
        truncation_bound,
        c_ap,
        uniform_bound: c_ap / (1.0 - (1.0 - p) * b.exp()),
    })
}

/// `C(a, p) = p Π_{k>=1} p/(1 − (1−p)^{1−a^k})`.
pub fn tail_constant(a: f64, p: f64) -> Result<f64> {
    check_ap(a, p)?;
    let mut c = p;
    let mut ak = a;
    let ln1p = (1.0 - p).ln();
    for _ in 0..100_000 {
        if ak < 1e-18 {
            break;
        }
        // (1−p)^{1−a^k} = (1−p)·e^{−a^k log(1−p)}
        let denom = 1.0 - (1.0 - p) * (-ak * ln1p).exp();
        c *= p / denom;
        ak *= a;
    }
    Ok(c)
}

/// Chebyshev bound on `μ_{a,p}([t, ∞))` from the exponential moment with the
/// optimal `e^b = t/((1−p)(1+t))`:
/// `C(a, p)(1 + t)(1 + 1/t)^t (1 − p)^t`. When that `b` is not positive the
/// bound at `b = 0`, `C(a, p)/p`, is returned.
pub fn tail_upper_bound(a: f64, p: f64, t: f64) -> Result<f64> {
    check_ap(a, p)?;
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be at least 1, got {t}")));
    }
    let c = tail_constant(a, p)?;
    if t * p <= 1.0 - p {
        return Ok(c / p);
    }
    let log = (1.0 + t).ln() + t * (1.0 / t).ln_1p() + t * (1.0 - p).ln();
    Ok(c * log.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::ap_model;
    use crate::response::bernoulli_ifs;

    #[test]
    fn product_is_one_at_zero() {
        let r = exp_moment_product(0.5, 0.3, 0.0, 10).unwrap();
        assert_eq!(r.product_value, 1.0);
        assert_eq!(r.truncation_bound, 0.0);
    }

    #[test]
    fn degenerate_contraction_gives_geometric_mgf() {
        for (p, b) in [(0.5, 0.3), (0.3, 0.2), (0.7, -0.5)] {
            let r = exp_moment_product(0.0, p, b, 64).unwrap();
            let geometric = p / (1.0 - (1.0 - p) * f64::exp(b));
            assert!((r.product_value - geometric).abs() < 1e-12);
        }
    }

    #[test]
    fn divergent_moment_rejected() {
        let limit = -(0.5f64).ln();
        assert!(matches!(exp_moment_product(0.5, 0.5, limit, 10), Err(Error::DivergentMoment { .. })));
    }

    #[test]
    fn truncation_bound_brackets_long_product() {
        let long = exp_moment_product(0.5, 0.5, 0.3, 200).unwrap().product_value;
        let mut prev = f64::INFINITY;
        for k in [4, 8, 16, 32] {
            let r = exp_moment_product(0.5, 0.5, 0.3, k).unwrap();
            // the envelope is tight to first order, so allow for product rounding
            assert!((long - r.product_value).abs() <= r.truncation_bound + 1e-13 * long);
            assert!(r.truncation_bound < prev);
            prev = r.truncation_bound;
        }
        let r = exp_moment_product(0.5, 0.5, 0.3, 64).unwrap();
        assert!(r.truncation_bound <= 1e-10);
        assert!(r.product_value <= r.uniform_bound);
    }

    #[test]
    fn tail_constant_dominates_partial_products() {
        // partial products of C(a,p) increase towards the limit
        let (a, p) = (0.5f64, 0.3f64);
        let mut partial = p;
        for k in 1..40 {
            partial *= p / (1.0 - (1.0 - p).powf(1.0 - a.powi(k)));
        }
        let c = tail_constant(a, p).unwrap();
        assert!(partial <= c && c - partial < 1e-9);
    }

    #[test]
    fn tail_bound_decays_at_the_geometric_rate() {
        let (a, p) = (0.5, 0.5);
        let slope = (tail_upper_bound(a, p, 40.0).unwrap().ln() - tail_upper_bound(a, p, 20.0).unwrap().ln()) / 20.0;
        let target = (1.0f64 - p).ln();
        assert!(((slope - target) / target).abs() < 0.05, "slope {slope}");
        let mut prev = f64::INFINITY;
        for t in 2..60 {
            let v = tail_upper_bound(a, p, t as f64).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        assert!(prev < 1e-12);
        assert!(tail_upper_bound(a, p, 0.5).is_err());
    }

    #[test]
    fn exponential_drift_passes() {
        let (a, p, b) = (0.5f64, 0.5f64, 0.3f64);
        let ifs = ap_model(a, p).unwrap();
        let theta = 0.5 * ((1.0 - p) * b.exp() + 1.0);
        let c = ((p / (theta - (1.0 - p) * b.exp())).ln() / ((1.0 - a) * b)).max(0.0);
        let bb = (b * c).exp();
        // a rough stationary approximation is enough for the drift check
        let m = DiscreteMeasure::new((0..40).map(|n| (n as f64, p * (1.0 - p).powi(n)))).unwrap();
        let r = check_generalized_moment(&ifs, &m, |x| (b * x).exp(), |_| 1.0, theta, bb).unwrap();
        assert!(r.passed(), "{:?}", r.grid_violations.first());
        assert!((r.bound - bb / (1.0 - theta)).abs() < 1e-12);
    }

    #[test]
    fn quadratic_drift_on_uniform_bernoulli() {
        let ifs = bernoulli_ifs(0.5).unwrap();
        let m = DiscreteMeasure::uniform_grid(0.0, 1.0, 1001).unwrap();
        // Lx² − ½x² = −x²/4 + x/4 + 1/8 <= 3/16
        let r = check_generalized_moment(&ifs, &m, |x| x * x, |_| 1.0, 0.5, 3.0 / 16.0).unwrap();
        assert!(r.passed());
        assert!((r.bound - 0.375).abs() < 1e-12);
        assert!((r.integral_phi - 1.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn drift_failure_on_support_is_an_error() {
        let ifs = bernoulli_ifs(0.5).unwrap();
        let m = DiscreteMeasure::uniform_grid(0.0, 1.0, 11).unwrap();
        let err = check_generalized_moment(&ifs, &m, |x| x * x, |_| 1.0, 0.25, 0.0).unwrap_err();
        assert!(matches!(err, Error::HypothesisFailed { .. }));
    }
}
