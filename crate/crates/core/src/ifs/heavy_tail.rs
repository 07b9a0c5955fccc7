//! The contraction `x ↦ a·x` mixed with integer translations `x ↦ x + n`.

use serde::{Deserialize, Serialize};

use super::{IfsModel, Map1D};
use crate::error::{Error, Result};

/// Shape of the translation weights `p_n`, `n >= 1`, before scaling to total
/// mass `1 − p_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TailLaw {
    /// `p_n ∝ r^n`.
    Geometric { ratio: f64 },
    /// `p_n ∝ n^{−s}`, `s > 1`.
    Power { exponent: f64 },
    /// `p_n ∝ w[n − 1]`, zero beyond the list.
    Explicit { weights: Vec<f64> },
}

/// Record of a countable index set cut at `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truncation {
    pub n_max: usize,
    /// Probability of indices beyond `n_max`, added to `p_{n_max}`.
    pub lumped_mass: f64,
    pub law: TailLaw,
}

impl TailLaw {
    fn validate(&self) -> Result<()> {
        match self {
            TailLaw::Geometric { ratio } if !(*ratio > 0.0 && *ratio < 1.0) => {
                Err(Error::InvalidModel(format!("geometric tail ratio must lie in (0, 1), got {ratio}")))
            }
            TailLaw::Power { exponent } if !(*exponent > 1.0 && exponent.is_finite()) => {
                Err(Error::InvalidModel(format!("power tail exponent must exceed 1, got {exponent}")))
            }
            TailLaw::Explicit { weights } => {
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::InvalidModel("tail weights must be nonnegative numbers".into()));
                }
                if !(weights.iter().sum::<f64>() > 0.0) {
                    return Err(Error::InvalidModel("tail weights have zero total".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Unnormalized weights for `n = 1..=n_max` and the unnormalized mass
    /// beyond `n_max`.
    fn unnormalized(&self, n_max: usize) -> (Vec<f64>, f64) {
        match self {
            TailLaw::Geometric { ratio } => {
                let w: Vec<f64> = (1..=n_max).map(|n| ratio.powi(n as i32)).collect();
                (w, ratio.powi(n_max as i32 + 1) / (1.0 - ratio))
            }
            TailLaw::Power { exponent: s } => {
                let w: Vec<f64> = (1..=n_max).map(|n| (n as f64).powf(-s)).collect();
                (w, zeta_tail(*s, n_max))
            }
            TailLaw::Explicit { weights } => {
                let mut w = weights.clone();
                let beyond: f64 = if w.len() > n_max { w.split_off(n_max).iter().sum() } else { 0.0 };
                w.resize(n_max, 0.0);
                (w, beyond)
            }
        }
    }
}

/// `Σ_{n > N} n^{−s}` by Euler–Maclaurin with three correction terms.
fn zeta_tail(s: f64, n: usize) -> f64 {
    // Sum exactly up to a cutoff so the expansion is accurate.
    let cutoff = n.max(64);
    let mut exact = 0.0;
    for k in (n + 1..=cutoff).rev() {
        exact += (k as f64).powf(-s);
    }
    let m = cutoff as f64;
    exact + m.powf(1.0 - s) / (s - 1.0) - 0.5 * m.powf(-s) + s * m.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * m.powf(-s - 3.0) / 720.0
}

/// `φ_0(x) = a·x` with probability `p0`, `φ_n(x) = x + n` for `n = 1..=n_max`
/// with the tail law scaled to mass `1 − p0`; mass beyond `n_max` is lumped
/// into `p_{n_max}`.
pub fn heavy_tail_ifs(a: f64, p0: f64, tail: &TailLaw, n_max: usize) -> Result<IfsModel> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(Error::InvalidModel(format!("p0 must lie in (0, 1], got {p0}")));
    }
    if !(0.0..1.0).contains(&a) {
        return Err(Error::InvalidModel(format!("contraction ratio must lie in [0, 1), got {a}")));
    }
    tail.validate()?;
    if n_max == 0 && p0 < 1.0 {
        return Err(Error::InvalidModel("truncation level must be at least 1".into()));
    }
    let (mut w, beyond) = tail.unnormalized(n_max);
    let total: f64 = w.iter().sum::<f64>() + beyond;
    let scale = (1.0 - p0) / total;
    for x in &mut w {
        *x *= scale;
    }
    let lumped_mass = beyond * scale;
    if let Some(last) = w.last_mut() {
        *last += lumped_mass;
    }
    let mut maps = vec![Map1D::affine(a, 0.0)];
    maps.extend((1..=n_max).map(|n| Map1D::affine(1.0, n as f64)));
    let mut probs = vec![p0];
    probs.extend(w);
    let label = format!("heavy-tail a={a} p0={p0} N={n_max}");
    Ok(IfsModel::new(label, maps, probs, 0.0)?.with_truncation(Truncation { n_max, lumped_mass, law: tail.clone() }))
}

/// The `(a, p)` model: `x ↦ a·x` with probability `p`, `x ↦ x + 1` otherwise.
pub fn ap_model(a: f64, p: f64) -> Result<IfsModel> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    if !(0.0..1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!("a must lie in [0, 1), got {a}")));
    }
    IfsModel::affine(format!("ap a={a} p={p}"), &[(a, 0.0, p), (1.0, 1.0, 1.0 - p)], 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::certify_contraction;

    #[test]
    fn geometric_tail_lumps_little_mass() {
        let ifs = heavy_tail_ifs(0.5, 0.5, &TailLaw::Geometric { ratio: 0.5 }, 30).unwrap();
        let t = ifs.truncation().unwrap();
        assert!(t.lumped_mass < 1e-9 && t.lumped_mass > 0.0);
        assert!((ifs.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((ifs.probabilities()[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zeta_tail_matches_direct_sum() {
        for s in [1.5, 2.5, 4.0] {
            let direct: f64 = (11..2_000_000).map(|n| (n as f64).powf(-s)).sum::<f64>();
            let rest = 2_000_000f64.powf(1.0 - s) / (s - 1.0);
            assert!((zeta_tail(s, 10) - direct - rest).abs() < 1e-9, "s={s}");
        }
        // ζ(2) − 1 = π²/6 − 1
        let z = zeta_tail(2.0, 1);
        assert!((z - (std::f64::consts::PI.powi(2) / 6.0 - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn power_tail_has_finite_first_moment_bound() {
        let ifs = heavy_tail_ifs(0.5, 0.5, &TailLaw::Power { exponent: 4.0 }, 10_000).unwrap();
        let c = certify_contraction(&ifs, 1.0, 0.0).unwrap();
        assert!((c.rho - (1.0 - 0.5 * 0.5)).abs() < 1e-12);
        assert!(c.moment_bound().is_finite());
    }

    #[test]
    fn rho_matches_closed_form() {
        for q in [0.5, 1.0, 2.0] {
            let ifs = heavy_tail_ifs(0.3, 0.4, &TailLaw::Geometric { ratio: 0.5 }, 40).unwrap();
            let c = certify_contraction(&ifs, q, 0.0).unwrap();
            assert!((c.rho - (1.0 - (1.0 - 0.3f64.powf(q)) * 0.4)).abs() < 1e-12);
        }
    }

    #[test]
    fn p0_one_is_single_contraction() {
        let ifs = heavy_tail_ifs(0.5, 1.0, &TailLaw::Geometric { ratio: 0.5 }, 5).unwrap();
        assert_eq!(ifs.active().count(), 1);
        assert!(heavy_tail_ifs(0.5, 0.0, &TailLaw::Geometric { ratio: 0.5 }, 5).is_err());
    }
}
