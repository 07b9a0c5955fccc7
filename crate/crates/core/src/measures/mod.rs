//! Finitely supported probability measures on the real line.
//!
//! A [`DiscreteMeasure`] is the common carrier for stationary-measure
//! approximations, pushed-forward measures and empirical measures. Most
//! constructors return the canonical form: positions strictly increasing,
//! bitwise-equal positions merged, weights positive and summing to one.

mod quantize;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use quantize::quantize;

/// Tolerance on the total mass of a canonical measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A finitely supported probability measure on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    positions: Vec<f64>,
    weights: Vec<f64>,
    canonical: bool,
}

/// Exponent and reference point of a moment `∫ |x - x0|^q dm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub q: f64,
    pub x0: f64,
}

impl MomentSpec {
    pub fn new(q: f64, x0: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidExponent(format!("moment exponent must be positive, got {q}")));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidInput(format!("reference point must be finite, got {x0}")));
        }
        Ok(Self { q, x0 })
    }
}

impl DiscreteMeasure {
    /// Builds the canonical measure proportional to the given atoms.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::raw(atoms)?.canonicalize()
    }

    /// Builds a measure without sorting or merging. Weights must be finite and
    /// nonnegative with positive total; they are not renormalized.
    pub fn raw(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (positions, weights): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        if positions.is_empty() {
            return Err(Error::InvalidMeasure("empty atom list".into()));
        }
        let mut total = 0.0;
        for (x, w) in positions.iter().zip(&weights) {
            if !x.is_finite() {
                return Err(Error::InvalidMeasure(format!("non-finite position {x}")));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("weight {w} at {x} is not a nonnegative number")));
            }
            total += w;
        }
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        Ok(Self { positions, weights, canonical: false })
    }

    pub fn dirac(x: f64) -> Self {
        assert!(x.is_finite(), "dirac position must be finite");
        Self { positions: vec![x], weights: vec![1.0], canonical: true }
    }

    /// Equal weights on `n` evenly spaced points from `lo` to `hi` inclusive.
    pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo.is_finite() && hi.is_finite()) || (n > 1 && !(hi > lo)) {
            return Err(Error::InvalidInput(format!("bad grid [{lo}, {hi}] with {n} points")));
        }
        if n == 1 {
            return Ok(Self::dirac(lo));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let positions = (0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect();
        Ok(Self { positions, weights: vec![1.0 / n as f64; n], canonical: true })
    }

    /// Trusted constructor for sorted, strictly increasing positions with
    /// positive weights summing to one.
    pub(crate) fn from_sorted_unchecked(positions: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(positions.len(), weights.len());
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        Self { positions, weights, canonical: true }
    }

    /// Sorted positions, merged duplicates and exact renormalization.
    pub fn canonicalize(&self) -> Result<Self> {
        if self.canonical {
            return Ok(self.clone());
        }
        let mut atoms: Vec<(f64, f64)> =
            self.positions.iter().copied().zip(self.weights.iter().copied()).filter(|&(_, w)| w > 0.0).collect();
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(merge_sorted_atoms(atoms.into_iter()))
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|x| x)
    }

    /// `∫ |x - x0|^q dm`.
    pub fn moment(&self, spec: &MomentSpec) -> f64 {
        self.iter().map(|(x, w)| w * (x - spec.x0).abs().powf(spec.q)).sum()
    }

    pub fn support_min(&self) -> f64 {
        self.positions.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn support_max(&self) -> f64 {
        self.positions.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest distance from `x0` to an atom.
    pub fn support_radius(&self, x0: f64) -> f64 {
        self.positions.iter().map(|x| (x - x0).abs()).fold(0.0, f64::max)
    }

    /// Mass of the closed interval `[lo, hi]`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.iter().filter(|&(x, _)| x >= lo && x <= hi).map(|(_, w)| w).sum()
    }

    /// Push-forward by `f`, canonicalized.
    pub fn push_forward(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::raw(self.iter().map(|(x, w)| (f(x), w)))?.canonicalize()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("position,weight\n");
        for (x, w) in self.iter() {
            let _ = writeln!(out, "{x:?},{w:?}");
        }
        out
    }

    /// Parses the `position,weight` CSV format. The result is canonical only if
    /// the file already was.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("position,weight") => {}
            other => return Err(Error::InvalidInput(format!("expected header `position,weight`, found {other:?}"))),
        }
        let mut atoms = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let mut fields = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.map(str::trim)
                    .ok_or_else(|| Error::InvalidInput(format!("line {}: missing field", lineno + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("line {}: {e}", lineno + 2)))
            };
            let x = parse(fields.next())?;
            let w = parse(fields.next())?;
            if fields.next().is_some() {
                return Err(Error::InvalidInput(format!("line {}: too many fields", lineno + 2)));
            }
            atoms.push((x, w));
        }
        let m = Self::raw(atoms)?;
        Ok(m.mark_canonical_if_valid())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("finite doubles always serialize")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    fn mark_canonical_if_valid(mut self) -> Self {
        let sorted = self.positions.windows(2).all(|w| w[0] < w[1]);
        let positive = self.weights.iter().all(|&w| w > 0.0);
        let unit = (self.total_mass() - 1.0).abs() <= MASS_TOLERANCE;
        self.canonical = sorted && positive && unit;
        self
    }
}

/// Merges bitwise-equal neighbours of a position-sorted atom stream and
/// renormalizes the total mass to one.
pub(crate) fn merge_sorted_atoms(atoms: impl Iterator<Item = (f64, f64)>) -> DiscreteMeasure {
    let (lower, _) = atoms.size_hint();
    let mut positions: Vec<f64> = Vec::with_capacity(lower);
    let mut weights: Vec<f64> = Vec::with_capacity(lower);
    for (x, w) in atoms {
        if w <= 0.0 {
            continue;
        }
        match positions.last() {
            Some(&last) if last == x => *weights.last_mut().unwrap() += w,
            _ => {
                positions.push(x);
                weights.push(w);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if total != 1.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    DiscreteMeasure::from_sorted_unchecked(positions, weights)
}

impl Serialize for DiscreteMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(|(x, w)| [x, w]))
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        DiscreteMeasure::raw(pairs.into_iter().map(|[x, w]| (x, w)))
            .map(DiscreteMeasure::mark_canonical_if_valid)
            .map_err(serde::de::Error::custom)
    }
}

pub fn canonicalize(m: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    m.canonicalize()
}

pub fn moment(m: &DiscreteMeasure, spec: &MomentSpec) -> f64 {
    m.moment(spec)
}

/// Empirical measure `(1/n) Σ δ_{x_k}` in canonical form.
pub fn empirical_from_samples(xs: &[f64]) -> Result<DiscreteMeasure> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("empirical measure of an empty sample".into()));
    }
    if let Some(bad) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite sample {bad}")));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let w = 1.0 / xs.len() as f64;
    Ok(merge_sorted_atoms(sorted.into_iter().map(|x| (x, w))))
}
