//! Iterated function systems with probabilities on the line: the transfer
//! operator, its dual on discrete measures, and contraction certificates.

mod heavy_tail;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{merge_sorted_atoms, DiscreteMeasure};

pub use heavy_tail::{ap_model, heavy_tail_ifs, TailLaw, Truncation};

type MapFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A map of the line: affine, or a user callable with declared constants.
#[derive(Clone)]
pub enum Map1D {
    Affine {
        a: f64,
        b: f64,
    },
    Tagged {
        name: String,
        f: MapFn,
        lip: f64,
        /// Declared bound on `|φ(x0) − x0|`; evaluated at certification time when absent.
        displacement: Option<f64>,
    },
}

impl fmt::Debug for Map1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Map1D::Affine { a, b } => write!(f, "Affine({a}·x + {b})"),
            Map1D::Tagged { name, lip, displacement, .. } => f
                .debug_struct("Tagged")
                .field("name", name)
                .field("lip", lip)
                .field("displacement", displacement)
                .finish(),
        }
    }
}

impl Map1D {
    pub fn affine(a: f64, b: f64) -> Self {
        Map1D::Affine { a, b }
    }

    pub fn user(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static, lip: f64) -> Self {
        Map1D::Tagged { name: name.into(), f: Arc::new(f), lip, displacement: None }
    }

    pub fn with_displacement(self, bound: f64) -> Self {
        match self {
            Map1D::Tagged { name, f, lip, .. } => Map1D::Tagged { name, f, lip, displacement: Some(bound) },
            affine => affine,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Map1D::Affine { a, b } => a * x + b,
            Map1D::Tagged { f, .. } => f(x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Map1D::Affine { a, .. } => a.abs(),
            Map1D::Tagged { lip, .. } => *lip,
        }
    }

    pub fn affine_coefficients(&self) -> Option<(f64, f64)> {
        match self {
            Map1D::Affine { a, b } => Some((*a, *b)),
            Map1D::Tagged { .. } => None,
        }
    }

    fn displacement_at(&self, x0: f64) -> f64 {
        match self {
            Map1D::Tagged { displacement: Some(d), .. } => *d,
            _ => (self.apply(x0) - x0).abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Map1D::Affine { a, b } if !(a.is_finite() && b.is_finite()) => {
                Err(Error::InvalidModel(format!("affine map {a}·x + {b} has a non-finite coefficient")))
            }
            Map1D::Tagged { name, lip, displacement, .. } => {
                if !(lip.is_finite() && *lip >= 0.0) {
                    return Err(Error::InvalidModel(format!("map {name}: Lipschitz bound {lip} is not finite")));
                }
                if let Some(d) = displacement {
                    if !(d.is_finite() && *d >= 0.0) {
                        return Err(Error::InvalidModel(format!("map {name}: displacement bound {d} is not finite")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A finite IFS `(Φ, η)` with reference point `x0`.
#[derive(Debug, Clone)]
pub struct IfsModel {
    label: String,
    maps: Vec<Map1D>,
    probs: Vec<f64>,
    x0: f64,
    truncation: Option<Truncation>,
}

impl IfsModel {
    /// Probabilities must sum to one within `1e-12`; drift up to `1e-9` is
    /// renormalized.
    pub fn new(label: impl Into<String>, maps: Vec<Map1D>, probs: Vec<f64>, x0: f64) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidModel("an IFS needs at least one map".into()));
        }
        if maps.len() != probs.len() {
            return Err(Error::InvalidModel(format!("{} maps but {} probabilities", maps.len(), probs.len())));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidModel(format!("reference point {x0} is not finite")));
        }
        for m in &maps {
            m.validate()?;
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidModel(format!("probability {p} is not a nonnegative number")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("probabilities sum to {total}, not 1")));
        }
        let probs = if total == 1.0 { probs } else { probs.iter().map(|p| p / total).collect() };
        Ok(Self { label: label.into(), maps, probs, x0, truncation: None })
    }

    /// Affine IFS from `(a, b, p)` triples.
    pub fn affine(label: impl Into<String>, maps: &[(f64, f64, f64)], x0: f64) -> Result<Self> {
        Self::new(
            label,
            maps.iter().map(|&(a, b, _)| Map1D::affine(a, b)).collect(),
            maps.iter().map(|m| m.2).collect(),
            x0,
        )
    }

    pub(crate) fn with_truncation(mut self, t: Truncation) -> Self {
        self.truncation = Some(t);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn maps(&self) -> &[Map1D] {
        &self.maps
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn truncation(&self) -> Option<&Truncation> {
        self.truncation.as_ref()
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn is_affine(&self) -> bool {
        self.maps.iter().all(|m| matches!(m, Map1D::Affine { .. }))
    }

    /// Maps with positive probability.
    pub fn active(&self) -> impl Iterator<Item = (&Map1D, f64)> + '_ {
        self.maps.iter().zip(self.probs.iter().copied()).filter(|&(_, p)| p > 0.0)
    }

    /// Cumulative probabilities for inverse-CDF index sampling; the last entry is exactly one.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        cdf
    }

    /// An interval mapped into itself by every active map, when all active
    /// maps are uniformly contracting. Nonnegative affine slopes give the
    /// hull of the fixed points; otherwise the ball `|x − x0| <= d/(1 − L)`.
    pub fn invariant_interval(&self) -> Option<(f64, f64)> {
        let lip = self.active().map(|(m, _)| m.lipschitz()).fold(0.0, f64::max);
        if !(lip < 1.0) {
            return None;
        }
        let coeffs: Option<Vec<(f64, f64)>> = self.active().map(|(m, _)| m.affine_coefficients()).collect();
        if let Some(coeffs) = coeffs.filter(|c| c.iter().all(|&(a, _)| a >= 0.0)) {
            let fixed = coeffs.iter().map(|&(a, b)| b / (1.0 - a));
            let lo = fixed.clone().fold(f64::INFINITY, f64::min);
            let hi = fixed.fold(f64::NEG_INFINITY, f64::max);
            return Some((lo, hi));
        }
        let d = self.active().map(|(m, _)| m.displacement_at(self.x0)).fold(0.0, f64::max);
        let r = d / (1.0 - lip);
        Some((self.x0 - r, self.x0 + r))
    }
}

/// `L*m = Σ p_i (φ_i)_* m`, canonicalized.
pub fn apply_dual_transfer(ifs: &IfsModel, m: &DiscreteMeasure) -> DiscreteMeasure {
    let n = m.len();
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(n * ifs.len());
    let (xs, ws) = (m.positions(), m.weights());
    for (map, p) in ifs.active() {
        match map {
            Map1D::Affine { a, b } if *a < 0.0 => {
                atoms.extend((0..n).rev().map(|k| (a * xs[k] + b, p * ws[k])));
            }
            _ => atoms.extend((0..n).map(|k| (map.apply(xs[k]), p * ws[k]))),
        }
    }
    // Each map contributes a sorted run (or a constant one); the stable sort
    // detects and merges runs.
    atoms.sort_by(|u, v| u.0.total_cmp(&v.0));
    merge_sorted_atoms(atoms.into_iter())
}

/// `Lf(x) = Σ p_i f(φ_i(x))`.
pub fn apply_transfer(ifs: &IfsModel, f: impl Fn(f64) -> f64, x: f64) -> f64 {
    ifs.active().map(|(m, p)| p * f(m.apply(x))).sum()
}

/// Constants `(q, ρ, A, x0)` with `Σ p_i Lip(φ_i)^q <= ρ < 1` and
/// `Σ p_i |φ_i(x0) − x0|^q <= A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCertificate {
    pub q: f64,
    pub rho: f64,
    #[serde(rename = "A")]
    pub displacement: f64,
    pub x0: f64,
    /// Constants are the exact values rather than upper bounds.
    pub exact: bool,
}

impl ContractionCertificate {
    /// `ρ̄ = ρ^{min(1, 1/q)}`, the contraction ratio of `L*` in `W_q`.
    pub fn rho_bar(&self) -> f64 {
        self.rho.powf(self.q.recip().min(1.0))
    }

    /// Bound on `m^q_{x0}(μ)`.
    pub fn moment_bound(&self) -> f64 {
        moment_bound(self)
    }

    /// Bound on `W_q(δ_{x0}, μ)`.
    pub fn dirac_distance_bound(&self) -> f64 {
        self.moment_bound().powf(self.q.recip().min(1.0))
    }
}

/// Certifies contraction on average at exponent `q`. Affine maps give the
/// exact constants, user maps their declared bounds.
pub fn certify_contraction(ifs: &IfsModel, q: f64, x0: f64) -> Result<ContractionCertificate> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidExponent(format!("exponent must be positive, got {q}")));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidInput(format!("reference point {x0} is not finite")));
    }
    let mut rho = 0.0;
    let mut displacement = 0.0;
    for (m, p) in ifs.active() {
        rho += p * m.lipschitz().powf(q);
        displacement += p * m.displacement_at(x0).powf(q);
    }
    if !(rho < 1.0) {
        return Err(Error::NotContractingAtThisExponent { q, rho });
    }
    if !displacement.is_finite() {
        return Err(Error::CannotCertify(format!("displacement constant is not finite at q = {q}")));
    }
    Ok(ContractionCertificate { q, rho, displacement, x0, exact: ifs.is_affine() })
}

/// Passes a certificate to a smaller exponent: `ρ' = ρ^{q'/q}`, `A' = A^{q'/q}`.
pub fn reduce_exponent(cert: &ContractionCertificate, q_new: f64) -> Result<ContractionCertificate> {
    if !(q_new > 0.0 && q_new < cert.q) {
        return Err(Error::InvalidExponent(format!("reduced exponent must lie in (0, {}), got {q_new}", cert.q)));
    }
    let r = q_new / cert.q;
    Ok(ContractionCertificate {
        q: q_new,
        rho: cert.rho.powf(r),
        displacement: cert.displacement.powf(r),
        x0: cert.x0,
        exact: false,
    })
}

const FIND_THRESHOLD: f64 = 1.0 - 1e-6;

/// Finds `q ∈ (0, 1]` with `F(q) = Σ p_i Lip(φ_i)^q < 1` when the
/// log-Lipschitz average is negative. Returns the largest such `q` (up to
/// bisection accuracy) and `F(q)`.
pub fn find_exponent(ifs: &IfsModel) -> Option<(f64, f64)> {
    let terms: Vec<(f64, f64)> = ifs.active().map(|(m, p)| (p, m.lipschitz().max(1e-300))).collect();
    let log_avg: f64 = terms.iter().map(|(p, l)| p * l.ln()).sum();
    if !(log_avg < 0.0) {
        return None;
    }
    let f = |q: f64| terms.iter().map(|(p, l)| p * l.powf(q)).sum::<f64>();
    let f1 = f(1.0);
    if f1 <= FIND_THRESHOLD {
        return Some((1.0, f1));
    }
    // F is convex with F(0) = 1 and F'(0) < 0.
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let q_star = 0.5 * (a + b);
    if !(f(q_star) <= FIND_THRESHOLD) {
        return None;
    }
    let (mut lo, mut hi) = (q_star, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= FIND_THRESHOLD {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Some((lo, f(lo)))
}

/// Bound on `m^q_{x0}(μ)`: `A/(1−ρ)` for `q <= 1`, `A/(1−ρ^{1/q})^q` for `q >= 1`.
pub fn moment_bound(cert: &ContractionCertificate) -> f64 {
    let (q, rho, a) = (cert.q, cert.rho, cert.displacement);
    if q <= 1.0 {
        a / (1.0 - rho)
    } else {
        a / (1.0 - rho.powf(1.0 / q)).powf(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::bernoulli_ifs;

    #[test]
    fn dual_transfer_examples() {
        let half = IfsModel::affine("half", &[(0.5, 0.0, 1.0)], 0.0).unwrap();
        assert_eq!(apply_dual_transfer(&half, &DiscreteMeasure::dirac(1.0)), DiscreteMeasure::dirac(0.5));

        let b = bernoulli_ifs(0.5).unwrap();
        let out = apply_dual_transfer(&b, &DiscreteMeasure::dirac(0.0));
        assert_eq!(out.positions(), &[0.0, 0.5]);
        assert_eq!(out.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn dual_transfer_handles_orientation_reversal() {
        let ifs = IfsModel::affine("flip", &[(-0.5, 1.0, 0.3), (0.25, 0.0, 0.7)], 0.0).unwrap();
        let m = DiscreteMeasure::new([(0.0, 0.2), (1.0, 0.3), (3.0, 0.5)]).unwrap();
        let out = apply_dual_transfer(&ifs, &m);
        assert!(out.is_canonical());
        let f = |x: f64| (x * 1.3).sin();
        let lhs = out.integrate(f);
        let rhs = m.integrate(|x| apply_transfer(&ifs, f, x));
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn transfer_examples() {
        let b = bernoulli_ifs(0.5).unwrap();
        assert_eq!(apply_transfer(&b, |_| 1.0, 0.7), 1.0);
        assert_eq!(apply_transfer(&b, |x| x, 0.0), 0.25);
    }

    #[test]
    fn certificate_examples() {
        for (lambda, q) in [(0.6, 1.0), (0.3, 2.0), (0.8, 0.5)] {
            let c = certify_contraction(&bernoulli_ifs(lambda).unwrap(), q, 0.0).unwrap();
            assert!((c.rho - lambda.powf(q)).abs() < 1e-15);
            assert!((c.displacement - 0.5 * (1.0 - lambda).powf(q)).abs() < 1e-15);
            assert!(c.displacement <= 1.0 && c.exact);
        }

        let two = IfsModel::affine("two", &[(0.5, 0.0, 0.5), (1.5, 1.0, 0.5)], 0.0).unwrap();
        let c = certify_contraction(&two, 0.5, 0.0).unwrap();
        let expect = 0.5 * (0.5f64.sqrt() + 1.5f64.sqrt());
        assert!((c.rho - expect).abs() < 1e-15);
        assert!((c.rho - 0.96593).abs() < 1e-5);
        assert!((c.displacement - 0.5).abs() < 1e-15);
        assert!(matches!(certify_contraction(&two, 1.0, 0.0), Err(Error::NotContractingAtThisExponent { .. })));
    }

    #[test]
    fn reduce_exponent_examples() {
        let c = ContractionCertificate { q: 2.0, rho: 0.25, displacement: 1.0, x0: 0.0, exact: true };
        let r = reduce_exponent(&c, 1.0).unwrap();
        assert_eq!((r.q, r.rho, r.displacement, r.exact), (1.0, 0.5, 1.0, false));
        assert!(reduce_exponent(&c, 2.0).is_err());
    }

    #[test]
    fn find_exponent_examples() {
        let two = IfsModel::affine("two", &[(0.5, 0.0, 0.5), (1.5, 1.0, 0.5)], 0.0).unwrap();
        let (q, f) = find_exponent(&two).unwrap();
        assert!(q > 0.0 && q < 1.0 && f < 1.0);
        // a^q0 + b^q0 = 2 has its root just above the returned q
        let f_at = |q: f64| 0.5 * (0.5f64.powf(q) + 1.5f64.powf(q));
        assert!(f_at(q) <= 1.0 - 1e-6 + 1e-15);
        assert!(f_at(q + 1e-6) > 1.0 - 1e-6);

        let uniform = IfsModel::affine("u", &[(0.3, 0.0, 0.5), (-0.3, 1.0, 0.5)], 0.0).unwrap();
        let (q, f) = find_exponent(&uniform).unwrap();
        assert_eq!(q, 1.0);
        assert!((f - 0.3).abs() < 1e-15);

        let expanding = IfsModel::affine("e", &[(0.9, 0.0, 0.1), (1.2, 1.0, 0.9)], 0.0).unwrap();
        assert!(find_exponent(&expanding).is_none());
    }

    #[test]
    fn moment_bound_examples() {
        let c = ContractionCertificate { q: 1.0, rho: 0.6, displacement: 0.2, x0: 0.0, exact: true };
        assert!((moment_bound(&c) - 0.5).abs() < 1e-15);
        let c = ContractionCertificate { q: 2.0, rho: 0.25, displacement: 1.0, x0: 0.0, exact: true };
        assert!((moment_bound(&c) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn invariant_interval_of_bernoulli() {
        assert_eq!(bernoulli_ifs(0.7).unwrap().invariant_interval(), Some((0.0, 1.0)));
    }

    #[test]
    fn model_validation() {
        assert!(IfsModel::affine("bad", &[(0.5, 0.0, 0.5), (0.5, 1.0, 0.4)], 0.0).is_err());
        assert!(IfsModel::affine("nan", &[(f64::NAN, 0.0, 1.0)], 0.0).is_err());
        assert!(IfsModel::new("len", vec![Map1D::affine(0.5, 0.0)], vec![0.5, 0.5], 0.0).is_err());
    }
}
