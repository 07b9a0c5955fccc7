//! Skew products `Ψ(x, y) = (ψ_y(x), S(y))` over a circle rotation or a
//! Markov shift, with fibers affine in `x`.
//!
//! The process is `X_{n+1} = ψ_{S^n Y}(X_n)` with `Y` drawn from the
//! invariant base measure. Under fiber contraction `ρ` and bounded
//! displacement `A`, the law of `X_k` approaches the stationary marginal at
//! rate `ρ^{min(q,1)}` in `W_q`.

mod experiment;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::IfsModel;
use crate::measures::DiscreteMeasure;
use crate::rng::chain_rng;
use crate::transport::{cost_to_distance, monotone_cost, wq_exact_flow};

pub use experiment::{
    iid_reduction_check, skew_convergence_experiment, ReductionReport, SkewConvergenceRow, SkewConvergenceTable,
    SkewExperimentOptions,
};

/// Golden ratio conjugate `(√5 − 1)/2`.
pub const GOLDEN_ALPHA: f64 = 0.618_033_988_749_894_8;

/// Grid size for suprema over the circle.
pub const CIRCLE_GRID: usize = 100_000;

fn golden() -> f64 {
    GOLDEN_ALPHA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SkewBase {
    /// `y ↦ y + α mod 1` with Lebesgue measure.
    Rotation {
        #[serde(default = "golden")]
        alpha: f64,
    },
    /// One-sided Markov shift started from a stationary vector. When
    /// `initial` is omitted the stationary vector is computed.
    MarkovShift {
        transition: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<Vec<f64>>,
    },
}

/// `c + Σ_k (cos_k · cos(2πky) + sin_k · sin(2πky))`, harmonics from 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigPoly {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, ..Self::default() }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let t = std::f64::consts::TAU * y;
        let mut v = self.constant;
        for (k, c) in self.cos.iter().enumerate() {
            v += c * ((k + 1) as f64 * t).cos();
        }
        for (k, s) in self.sin.iter().enumerate() {
            v += s * ((k + 1) as f64 * t).sin();
        }
        v
    }

    /// `|c| + Σ_k √(cos_k² + sin_k²)`, an upper bound on the sup norm that is
    /// exact with at most one harmonic.
    fn amplitude_bound(&self) -> f64 {
        let n = self.cos.len().max(self.sin.len());
        let mut s = self.constant.abs();
        for k in 0..n {
            let c = self.cos.get(k).copied().unwrap_or(0.0);
            let d = self.sin.get(k).copied().unwrap_or(0.0);
            s += c.hypot(d);
        }
        s
    }

    /// Bound on the derivative in `y`.
    fn lipschitz_bound(&self) -> f64 {
        let n = self.cos.len().max(self.sin.len());
        let mut s = 0.0;
        for k in 0..n {
            let c = self.cos.get(k).copied().unwrap_or(0.0);
            let d = self.sin.get(k).copied().unwrap_or(0.0);
            s += std::f64::consts::TAU * (k + 1) as f64 * (c.abs() + d.abs());
        }
        s
    }

    fn scaled_sum(&self, scale: f64, other: &TrigPoly, shift: f64) -> TrigPoly {
        let n = self.cos.len().max(other.cos.len());
        let m = self.sin.len().max(other.sin.len());
        let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
        TrigPoly {
            constant: scale * self.constant + other.constant + shift,
            cos: (0..n).map(|k| scale * at(&self.cos, k) + at(&other.cos, k)).collect(),
            sin: (0..m).map(|k| scale * at(&self.sin, k) + at(&other.sin, k)).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.cos.iter().chain(&self.sin).all(|v| v.is_finite())
    }

    /// Sup of `|·|` over the circle: the smaller of the amplitude bound and
    /// the grid maximum plus continuity slack.
    fn sup_abs(&self, slack: f64) -> f64 {
        let grid = (0..CIRCLE_GRID)
            .into_par_iter()
            .map(|j| self.eval(j as f64 / CIRCLE_GRID as f64).abs())
            .reduce(|| 0.0, f64::max);
        let modulus = (0.5 * self.lipschitz_bound() / CIRCLE_GRID as f64).max(slack);
        self.amplitude_bound().min(grid + modulus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolMap {
    pub a: f64,
    pub b: f64,
}

/// Fiber maps `ψ_y(x) = a(y)·x + b(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Fiber {
    /// Coefficients as trigonometric polynomials of the circle point.
    Trig { a: TrigPoly, b: TrigPoly },
    /// One affine map per symbol, chosen by the current symbol.
    Symbolic { maps: Vec<SymbolMap> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewModel {
    #[serde(default)]
    pub label: String,
    pub base: SkewBase,
    pub fiber: Fiber,
    #[serde(default)]
    pub x0: f64,
    /// Extra modulus-of-continuity slack for suprema over the circle grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuity_slack: Option<f64>,
    #[serde(skip)]
    stationary: Vec<f64>,
}

const STATIONARY_TOLERANCE: f64 = 1e-9;

fn stationary_vector(p: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = p.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for (i, row) in p.iter().enumerate() {
            for (j, pij) in row.iter().enumerate() {
                next[j] += v[i] * pij;
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if diff < 1e-15 {
            return Some(v);
        }
    }
    None
}

impl SkewModel {
    pub fn new(label: impl Into<String>, base: SkewBase, fiber: Fiber, x0: f64) -> Result<Self> {
        let mut m = Self { label: label.into(), base, fiber, x0, continuity_slack: None, stationary: Vec::new() };
        m.validate()?;
        Ok(m)
    }

    /// `ψ_y(x) = a(y)x + b(y)` over the rotation by `alpha`.
    pub fn rotation(label: impl Into<String>, alpha: f64, a: TrigPoly, b: TrigPoly, x0: f64) -> Result<Self> {
        Self::new(label, SkewBase::Rotation { alpha }, Fiber::Trig { a, b }, x0)
    }

    /// The Markov shift with every row equal to the IFS probabilities, whose
    /// process is the chaos game of `ifs`. Requires affine maps.
    pub fn iid_from_ifs(ifs: &IfsModel) -> Result<Self> {
        let maps = ifs
            .maps()
            .iter()
            .map(|m| {
                m.affine_coefficients()
                    .map(|(a, b)| SymbolMap { a, b })
                    .ok_or_else(|| Error::InvalidModel("i.i.d. skew reduction needs affine maps".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let p = ifs.probabilities().to_vec();
        let base = SkewBase::MarkovShift { transition: vec![p.clone(); p.len()], initial: Some(p) };
        Self::new(format!("iid {}", ifs.label()), base, Fiber::Symbolic { maps }, ifs.x0())
    }

    pub fn with_continuity_slack(mut self, slack: f64) -> Result<Self> {
        self.continuity_slack = Some(slack);
        self.validate()?;
        Ok(self)
    }

    /// Checks parameter ranges and computes the Markov stationary vector.
    /// Must be called after deserializing.
    pub fn validate(&mut self) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(Error::InvalidModel(format!("x0 = {} is not finite", self.x0)));
        }
        if let Some(s) = self.continuity_slack {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidModel(format!("continuity slack {s} must be nonnegative")));
            }
        }
        match (&self.base, &self.fiber) {
            (SkewBase::Rotation { alpha }, Fiber::Trig { a, b }) => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::InvalidModel(format!("rotation alpha must lie in (0, 1), got {alpha}")));
                }
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::InvalidModel("fiber coefficients must be finite".into()));
                }
                self.stationary.clear();
            }
            (SkewBase::MarkovShift { transition, initial }, Fiber::Symbolic { maps }) => {
                let n = transition.len();
                if n == 0 || transition.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidModel("transition matrix must be square and nonempty".into()));
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                        return Err(Error::InvalidModel(format!(
                            "transition row {i} has a negative or non-finite entry"
                        )));
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidModel(format!("transition row {i} sums to {s}, not 1")));
                    }
                }
                if maps.len() != n {
                    return Err(Error::InvalidModel(format!(
                        "{} fiber maps for an alphabet of {n} symbols",
                        maps.len()
                    )));
                }
                if maps.iter().any(|m| !(m.a.is_finite() && m.b.is_finite())) {
                    return Err(Error::InvalidModel("fiber coefficients must be finite".into()));
                }
                let pi = match initial {
                    Some(v) => {
                        if v.len() != n || v.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                            return Err(Error::InvalidModel("initial vector must be a probability vector".into()));
                        }
                        let s: f64 = v.iter().sum();
                        if (s - 1.0).abs() > 1e-9 {
                            return Err(Error::InvalidModel(format!("initial vector sums to {s}, not 1")));
                        }
                        for j in 0..n {
                            let pj: f64 = (0..n).map(|i| v[i] * transition[i][j]).sum();
                            if (pj - v[j]).abs() > STATIONARY_TOLERANCE {
                                return Err(Error::InvalidModel(format!(
                                    "initial vector is not stationary at symbol {j}: {pj} vs {}",
                                    v[j]
                                )));
                            }
                        }
                        v.clone()
                    }
                    None => stationary_vector(transition).ok_or_else(|| {
                        Error::InvalidModel("stationary vector did not converge; give it as `initial`".into())
                    })?,
                };
                self.stationary = pi;
            }
            _ => {
                return Err(Error::InvalidModel(
                    "rotation bases take trig fibers and Markov bases take symbolic fibers".into(),
                ))
            }
        }
        Ok(())
    }

    pub fn base_space(&self) -> BaseSpace {
        match &self.base {
            SkewBase::Rotation { .. } => BaseSpace::Circle,
            SkewBase::MarkovShift { transition, .. } => BaseSpace::Symbols(transition.len()),
        }
    }

    /// `ψ_y(x)`; for Markov bases `y` is the current symbol.
    #[inline]
    pub fn fiber_map(&self, y: f64, x: f64) -> f64 {
        match &self.fiber {
            Fiber::Trig { a, b } => a.eval(y) * x + b.eval(y),
            Fiber::Symbolic { maps } => {
                let m = maps[y as usize];
                m.a * x + m.b
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BaseSpace {
    /// `[0, 1)` with arcs as conditioning classes.
    Circle,
    /// Symbols `0..n`, coordinate stored as `f64`.
    Symbols(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkewCertificate {
    pub rho: f64,
    #[serde(rename = "A")]
    pub displacement: f64,
    /// `A/(1 − ρ)`: the stationary marginal lives in `B(x0, radius)`.
    pub support_radius: f64,
    pub x0: f64,
}

impl SkewCertificate {
    /// Steps after which a process started at `x_start` is within
    /// `support_radius + 1e-9` of `x0`.
    pub fn absorbing_time(&self, x_start: f64) -> usize {
        let excess = (x_start - self.x0).abs() - self.support_radius;
        if excess <= 1e-9 {
            return 0;
        }
        if self.rho == 0.0 {
            return 1;
        }
        ((1e-9 / excess).ln() / self.rho.ln()).ceil() as usize
    }
}

/// Uniform fiber contraction and displacement constants.
pub fn certify_skew(model: &SkewModel) -> Result<SkewCertificate> {
    let x0 = model.x0;
    let (rho, displacement) = match &model.fiber {
        Fiber::Trig { a, b } => {
            let slack = model.continuity_slack.unwrap_or(0.0);
            // ψ_y(x0) − x0 = (a(y) − 1)·x0 + b(y)
            let d = a.scaled_sum(x0, b, -x0);
            (a.sup_abs(slack), d.sup_abs(slack))
        }
        Fiber::Symbolic { maps } => {
            // symbols without stationary mass never occur
            let active: Vec<&SymbolMap> = match &model.base {
                SkewBase::MarkovShift { .. } => {
                    maps.iter().zip(&model.stationary).filter(|(_, &p)| p > 0.0).map(|(m, _)| m).collect()
                }
                SkewBase::Rotation { .. } => maps.iter().collect(),
            };
            (
                active.iter().map(|m| m.a.abs()).fold(0.0, f64::max),
                active.iter().map(|m| ((m.a - 1.0) * x0 + m.b).abs()).fold(0.0, f64::max),
            )
        }
    };
    if !(rho < 1.0) {
        return Err(Error::NotFiberContracting(rho));
    }
    Ok(SkewCertificate { rho, displacement, support_radius: displacement / (1.0 - rho), x0 })
}

/// Samples of `(S^k Y, X_k)`.
#[derive(Debug, Clone, Serialize)]
pub struct FiberEnsemble {
    pub base: BaseSpace,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    /// Conditioning classes used by default, `⌈n^{1/3}⌉`.
    pub bins: usize,
}

impl FiberEnsemble {
    pub fn new(base: BaseSpace, y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if y.is_empty() || y.len() != x.len() {
            return Err(Error::InvalidInput("ensemble needs equally many nonzero base and fiber points".into()));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite fiber point {v}")));
        }
        let ok = match base {
            BaseSpace::Circle => y.iter().all(|v| (0.0..1.0).contains(v)),
            BaseSpace::Symbols(n) => y.iter().all(|v| v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < n),
        };
        if !ok {
            return Err(Error::InvalidInput("base coordinate outside the base space".into()));
        }
        let bins = default_bins(y.len());
        Ok(Self { base, y, x, bins })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("y,x\n");
        for (y, x) in self.y.iter().zip(&self.x) {
            out.push_str(&format!("{y:?},{x:?}\n"));
        }
        out
    }
}

pub(crate) fn default_bins(n: usize) -> usize {
    ((n as f64).cbrt().ceil() as usize).max(1)
}

/// Stepper for one realization: draws `y_0` from the invariant base measure.
pub(crate) struct Realization<'a> {
    model: &'a SkewModel,
    pub y: f64,
    pub x: f64,
}

impl<'a> Realization<'a> {
    pub fn start(model: &'a SkewModel, x_start: f64, rng: &mut impl Rng) -> Self {
        let y = match &model.base {
            SkewBase::Rotation { .. } => rng.gen::<f64>(),
            SkewBase::MarkovShift { .. } => draw(&model.stationary, rng.gen::<f64>()) as f64,
        };
        Self { model, y, x: x_start }
    }

    #[inline]
    pub fn step(&mut self, rng: &mut impl Rng) {
        self.x = self.model.fiber_map(self.y, self.x);
        self.y = match &self.model.base {
            SkewBase::Rotation { alpha } => {
                let y = self.y + alpha;
                if y >= 1.0 {
                    y - 1.0
                } else {
                    y
                }
            }
            SkewBase::MarkovShift { transition, .. } => draw(&transition[self.y as usize], rng.gen::<f64>()) as f64,
        };
    }
}

fn draw(probs: &[f64], u: f64) -> usize {
    let mut c = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            c += p;
            last = i;
            if u < c {
                return i;
            }
        }
    }
    last
}

/// `n_realizations` independent draws of `(S^k Y, X_k)` from `X_0 = x_start`.
/// Realization `i` uses random stream `i`.
pub fn simulate_skew(
    model: &SkewModel,
    x_start: f64,
    k: usize,
    n_realizations: usize,
    seed: u64,
) -> Result<FiberEnsemble> {
    if n_realizations == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    if !x_start.is_finite() {
        return Err(Error::InvalidInput(format!("start point {x_start} is not finite")));
    }
    let pairs: Vec<(f64, f64)> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(seed, i);
            let mut r = Realization::start(model, x_start, &mut rng);
            for _ in 0..k {
                r.step(&mut rng);
            }
            (r.y, r.x)
        })
        .collect();
    let (y, x) = pairs.into_iter().unzip();
    FiberEnsemble::new(model.base_space(), y, x)
}

fn class_of(base: BaseSpace, bins: usize, y: f64) -> usize {
    match base {
        BaseSpace::Circle => ((y * bins as f64) as usize).min(bins - 1),
        BaseSpace::Symbols(n) => {
            let g = bins.min(n);
            (y as usize) * g / n
        }
    }
}

/// `C_q` between canonical measures, exact for every `q > 0`.
pub(crate) fn transport_cost(m0: &DiscreteMeasure, m1: &DiscreteMeasure, q: f64) -> Result<f64> {
    if q >= 1.0 {
        Ok(monotone_cost(m0, m1, q))
    } else {
        Ok(wq_exact_flow(m0, m1, q)?.cost)
    }
}

fn weighted(xs: &[f64], w: f64) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(xs.iter().map(|&x| (x, w)))
}

/// Binned estimate of the fiberwise distance `W^ν_q`: the base is split into
/// `bins` classes (arcs of the circle, or groups of symbols), conditional
/// laws are compared with exact 1D transport and the costs aggregated with
/// the empirical class masses, giving `(Σ w_b W_b^q)^{1/q}` for `q >= 1` and
/// `Σ w_b W_b` below.
///
/// When the two ensembles put different masses `u_b`, `v_b` on a class, the
/// common part `min(u_b, v_b)` is transported within the class and the
/// leftovers are transported jointly, so the result is the cost of a genuine
/// coupling of the x-marginals and never falls below their plain `W_q`.
pub fn fiber_wasserstein_estimate(e0: &FiberEnsemble, e1: &FiberEnsemble, q: f64, bins: Option<usize>) -> Result<f64> {
    if e0.base != e1.base {
        return Err(Error::InvalidInput("ensembles live over different bases".into()));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidExponent(format!("transport exponent must be positive, got {q}")));
    }
    let bins = bins.unwrap_or_else(|| default_bins(e0.len().min(e1.len())));
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be at least 1".into()));
    }
    let classes = match e0.base {
        BaseSpace::Circle => bins,
        BaseSpace::Symbols(n) => bins.min(n),
    };
    let split = |e: &FiberEnsemble| {
        let mut out = vec![Vec::new(); classes];
        for (y, x) in e.y.iter().zip(&e.x) {
            out[class_of(e.base, bins, *y)].push(*x);
        }
        out
    };
    let (c0, c1) = (split(e0), split(e1));
    let (n0, n1) = (e0.len() as f64, e1.len() as f64);
    for (b, (a, c)) in c0.iter().zip(&c1).enumerate() {
        if a.is_empty() != c.is_empty() {
            return Err(Error::EmptyConditional { bin: b });
        }
    }
    let per_class: Vec<(f64, f64)> = c0
        .par_iter()
        .zip(&c1)
        .filter(|(a, _)| !a.is_empty())
        .map(|(a, c)| {
            let (u, v) = (a.len() as f64 / n0, c.len() as f64 / n1);
            let cost = transport_cost(&weighted(a, 1.0)?, &weighted(c, 1.0)?, q)?;
            Ok((u.min(v), cost))
        })
        .collect::<Result<_>>()?;
    let mut total: f64 = per_class.iter().map(|(w, c)| w * c).sum();

    let mut left0 = Vec::new();
    let mut left1 = Vec::new();
    for (a, c) in c0.iter().zip(&c1) {
        if a.is_empty() {
            continue;
        }
        let (u, v) = (a.len() as f64 / n0, c.len() as f64 / n1);
        if u > v {
            left0.extend(a.iter().map(|&x| (x, (u - v) / a.len() as f64)));
        } else if v > u {
            left1.extend(c.iter().map(|&x| (x, (v - u) / c.len() as f64)));
        }
    }
    let rest: f64 = left0.iter().map(|p| p.1).sum();
    if rest > 0.0 && !left1.is_empty() {
        let cost = transport_cost(&DiscreteMeasure::new(left0)?, &DiscreteMeasure::new(left1)?, q)?;
        total += rest * cost;
    }
    Ok(cost_to_distance(total, q))
}

/// Plain `W_q` between the x-marginals of two ensembles.
pub fn marginal_wasserstein(e0: &FiberEnsemble, e1: &FiberEnsemble, q: f64) -> Result<f64> {
    let w0 = 1.0 / e0.len() as f64;
    let w1 = 1.0 / e1.len() as f64;
    Ok(cost_to_distance(transport_cost(&weighted(&e0.x, w0)?, &weighted(&e1.x, w1)?, q)?, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::certify_contraction;

    pub(crate) fn cosine_model() -> SkewModel {
        let b = TrigPoly { constant: 0.0, cos: vec![1.0], sin: vec![] };
        SkewModel::rotation("cos", GOLDEN_ALPHA, TrigPoly::constant(0.5), b, 0.0).unwrap()
    }

    #[test]
    fn cosine_fiber_certificate() {
        let c = certify_skew(&cosine_model()).unwrap();
        assert_eq!(c.rho, 0.5);
        assert_eq!(c.displacement, 1.0);
        assert_eq!(c.support_radius, 2.0);
    }

    #[test]
    fn constant_fiber_collapses() {
        let m = SkewModel::rotation("c", 0.3, TrigPoly::constant(0.25), TrigPoly::default(), 0.0).unwrap();
        let c = certify_skew(&m).unwrap();
        assert_eq!((c.rho, c.displacement, c.support_radius), (0.25, 0.0, 0.0));
        let e = simulate_skew(&m, 3.0, 4, 50, 1).unwrap();
        assert!(e.x.iter().all(|&x| x == 3.0 * 0.25f64.powi(4)));
    }

    #[test]
    fn grid_supremum_with_two_harmonics() {
        // the amplitude bound 2 is not attained; the grid value is
        let a = TrigPoly { constant: 0.0, cos: vec![0.4, 0.4], sin: vec![] };
        let m = SkewModel::rotation("two", 0.3, a, TrigPoly::default(), 0.0).unwrap();
        let c = certify_skew(&m).unwrap();
        assert!(c.rho >= 0.8 && c.rho < 0.8 + 1e-4, "{}", c.rho);
    }

    #[test]
    fn expanding_fiber_is_rejected() {
        let m = SkewModel::rotation("x", 0.3, TrigPoly::constant(1.2), TrigPoly::default(), 0.0).unwrap();
        assert!(matches!(certify_skew(&m), Err(Error::NotFiberContracting(_))));
    }

    #[test]
    fn iid_constants_dominate_averaged_ones() {
        let sym = IfsModel::affine("sym", &[(0.5, -1.0, 0.5), (-0.5, 1.0, 0.5)], 0.0).unwrap();
        let c = certify_skew(&SkewModel::iid_from_ifs(&sym).unwrap()).unwrap();
        let ic = certify_contraction(&sym, 1.0, 0.0).unwrap();
        assert_eq!((c.rho, c.displacement), (ic.rho, ic.displacement));

        let skewed = IfsModel::affine("sk", &[(0.2, 0.0, 0.5), (0.6, 1.0, 0.5)], 0.0).unwrap();
        let c = certify_skew(&SkewModel::iid_from_ifs(&skewed).unwrap()).unwrap();
        let ic = certify_contraction(&skewed, 1.0, 0.0).unwrap();
        assert!(c.rho >= ic.rho && c.displacement >= ic.displacement);
    }

    #[test]
    fn markov_validation() {
        let fiber = Fiber::Symbolic { maps: vec![SymbolMap { a: 0.5, b: 0.0 }; 2] };
        let bad_row = SkewBase::MarkovShift { transition: vec![vec![0.5, 0.4], vec![0.5, 0.5]], initial: None };
        assert!(SkewModel::new("m", bad_row, fiber.clone(), 0.0).is_err());
        let nonstationary =
            SkewBase::MarkovShift { transition: vec![vec![0.9, 0.1], vec![0.5, 0.5]], initial: Some(vec![0.5, 0.5]) };
        assert!(SkewModel::new("m", nonstationary, fiber.clone(), 0.0).is_err());
        let ok = SkewBase::MarkovShift { transition: vec![vec![0.9, 0.1], vec![0.5, 0.5]], initial: None };
        let m = SkewModel::new("m", ok, fiber, 0.0).unwrap();
        assert!((m.stationary[0] - 5.0 / 6.0).abs() < 1e-12);
        let mismatched = SkewModel::new("m", SkewBase::Rotation { alpha: 0.3 }, Fiber::Symbolic { maps: vec![] }, 0.0);
        assert!(mismatched.is_err());
    }

    #[test]
    fn ensembles_stay_in_certified_ball() {
        let m = cosine_model();
        let c = certify_skew(&m).unwrap();
        let start = 40.0;
        let k = c.absorbing_time(start);
        let e = simulate_skew(&m, start, k, 2000, 3).unwrap();
        assert!(e.x.iter().all(|x| x.abs() <= c.support_radius + 1e-9));
        assert!(e.y.iter().all(|y| (0.0..1.0).contains(y)));
    }

    #[test]
    fn simulation_is_reproducible() {
        let m = cosine_model();
        let a = simulate_skew(&m, 0.0, 7, 300, 11).unwrap();
        let b = simulate_skew(&m, 0.0, 7, 300, 11).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn fiberwise_estimator_basics() {
        let m = cosine_model();
        let e0 = simulate_skew(&m, 0.0, 3, 4000, 1).unwrap();
        let e1 = simulate_skew(&m, 1.0, 30, 4000, 2).unwrap();
        assert_eq!(fiber_wasserstein_estimate(&e0, &e0, 1.0, None).unwrap(), 0.0);
        for q in [1.0, 2.0] {
            let plain = marginal_wasserstein(&e0, &e1, q).unwrap();
            let single = fiber_wasserstein_estimate(&e0, &e1, q, Some(1)).unwrap();
            assert!((plain - single).abs() <= 1e-12 * (1.0 + plain));
            for bins in [2, 5, 16, 40] {
                let f = fiber_wasserstein_estimate(&e0, &e1, q, Some(bins)).unwrap();
                assert!(plain <= f + 1e-9, "bins {bins}: {plain} > {f}");
            }
        }
    }

    #[test]
    fn one_sided_bin_is_reported() {
        let e0 = FiberEnsemble::new(BaseSpace::Circle, vec![0.1, 0.2], vec![0.0, 1.0]).unwrap();
        let e1 = FiberEnsemble::new(BaseSpace::Circle, vec![0.1, 0.7], vec![0.0, 1.0]).unwrap();
        assert!(matches!(fiber_wasserstein_estimate(&e0, &e1, 1.0, Some(2)), Err(Error::EmptyConditional { bin: 1 })));
        assert!(fiber_wasserstein_estimate(&e0, &e1, 1.0, Some(1)).is_ok());
    }

    #[test]
    fn concave_exponent_uses_flow() {
        let e0 = FiberEnsemble::new(BaseSpace::Circle, vec![0.1, 0.6, 0.3], vec![0.0, 1.0, 2.0]).unwrap();
        let e1 = FiberEnsemble::new(BaseSpace::Circle, vec![0.2, 0.9, 0.4], vec![1.0, 2.0, 3.0]).unwrap();
        let plain = marginal_wasserstein(&e0, &e1, 0.5).unwrap();
        // shifting by one costs 1 per atom; the flow moves one atom by 3 instead
        assert!((plain - 3f64.sqrt() / 3.0).abs() < 1e-12);
        let f = fiber_wasserstein_estimate(&e0, &e1, 0.5, Some(2)).unwrap();
        assert!(plain <= f + 1e-9);
    }
}
