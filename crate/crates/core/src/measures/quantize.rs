//! Support compression with an exactly measured Wasserstein error.
//!
//! Bins are contiguous runs of atoms. Starting from a single bin, the bin
//! whose split (at its mass median) reduces the transport cost the most is
//! split next, until `max_atoms` bins exist. Each bin is replaced by one atom
//! at its conditional `W_q` barycenter. The bin sequence for `k + 1` atoms
//! refines the one for `k`, so the error is nonincreasing in `k`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{merge_sorted_atoms, DiscreteMeasure, MomentSpec};
use crate::error::{Error, Result};
use crate::transport::{self, DEFAULT_FLOW_ATOM_CAP};

/// Compresses `m` to at most `max_atoms` atoms.
///
/// Returns the compressed measure and its `W_q` distance to `m`. For `q >= 1`
/// the distance is exact (monotone coupling). For `q < 1` it is exact when the
/// instance fits the min-cost-flow cap, and otherwise the cost of the bin
/// assignment coupling, which upper-bounds the exact distance.
pub fn quantize(m: &DiscreteMeasure, max_atoms: usize, spec: &MomentSpec) -> Result<(DiscreteMeasure, f64)> {
    if max_atoms == 0 {
        return Err(Error::InvalidInput("max_atoms must be at least 1".into()));
    }
    let m = m.canonicalize()?;
    if m.len() <= max_atoms {
        return Ok((m, 0.0));
    }
    let q = spec.q;
    let bins = split_bins(m.positions(), m.weights(), max_atoms, q);

    let out = merge_sorted_atoms(bins.iter().map(|b| (b.center, b.mass)));
    let error = if q >= 1.0 {
        transport::wq_1d_monotone(&m, &out, q)?.wasserstein()
    } else if m.len() + out.len() <= DEFAULT_FLOW_ATOM_CAP {
        transport::wq_exact_flow(&m, &out, q)?.wasserstein()
    } else {
        bins.iter().map(|b| b.cost).sum::<f64>()
    };
    Ok((out, error))
}

#[derive(Debug, Clone, Copy)]
struct Bin {
    lo: usize,
    hi: usize,
    mass: f64,
    center: f64,
    cost: f64,
}

struct Candidate {
    gain: f64,
    bin: Bin,
    left: Bin,
    right: Bin,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Largest gain first; ties go to the leftmost bin.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then_with(|| other.bin.lo.cmp(&self.bin.lo))
    }
}

fn split_bins(xs: &[f64], ws: &[f64], max_atoms: usize, q: f64) -> Vec<Bin> {
    let root = make_bin(xs, ws, 0, xs.len(), q, None);
    let mut done: Vec<Bin> = Vec::with_capacity(max_atoms);
    let mut heap = BinaryHeap::new();
    let mut count = 1;
    push_or_finish(&mut heap, &mut done, xs, ws, root, q);
    while count < max_atoms {
        let Some(c) = heap.pop() else { break };
        count += 1;
        push_or_finish(&mut heap, &mut done, xs, ws, c.left, q);
        push_or_finish(&mut heap, &mut done, xs, ws, c.right, q);
    }
    done.extend(heap.into_iter().map(|c| c.bin));
    done.sort_by_key(|b| b.lo);
    done
}

fn push_or_finish(heap: &mut BinaryHeap<Candidate>, done: &mut Vec<Bin>, xs: &[f64], ws: &[f64], bin: Bin, q: f64) {
    if bin.hi - bin.lo < 2 {
        done.push(bin);
        return;
    }
    let s = split_index(ws, bin.lo, bin.hi, bin.mass);
    let parent = (q < 1.0).then_some(bin.center);
    let left = make_bin(xs, ws, bin.lo, s, q, parent);
    let right = make_bin(xs, ws, s, bin.hi, q, parent);
    let gain = bin.cost - left.cost - right.cost;
    heap.push(Candidate { gain, bin, left, right });
}

/// Index `s` in `(lo, hi)` whose prefix mass is closest to half the bin mass.
fn split_index(ws: &[f64], lo: usize, hi: usize, mass: f64) -> usize {
    let half = 0.5 * mass;
    let mut acc = 0.0;
    for s in lo + 1..hi {
        let before = acc;
        acc += ws[s - 1];
        if acc >= half {
            if s > lo + 1 && (half - before) < (acc - half) {
                return s - 1;
            }
            return s;
        }
    }
    hi - 1
}

fn bin_cost(xs: &[f64], ws: &[f64], c: f64, q: f64) -> f64 {
    if q == 1.0 {
        xs.iter().zip(ws).map(|(x, w)| w * (x - c).abs()).sum()
    } else if q == 2.0 {
        xs.iter().zip(ws).map(|(x, w)| w * (x - c) * (x - c)).sum()
    } else {
        xs.iter().zip(ws).map(|(x, w)| w * (x - c).abs().powf(q)).sum()
    }
}

/// Weighted median; when the half-mass point falls exactly between two atoms
/// the midpoint of the median interval is returned.
fn weighted_median(xs: &[f64], ws: &[f64], mass: f64) -> f64 {
    let half = 0.5 * mass;
    let mut acc = 0.0;
    for i in 0..xs.len() {
        acc += ws[i];
        if acc >= half {
            if (acc - half).abs() <= 1e-12 * mass && i + 1 < xs.len() {
                return 0.5 * (xs[i] + xs[i + 1]);
            }
            return xs[i];
        }
    }
    xs[xs.len() - 1]
}

fn golden_section_center(xs: &[f64], ws: &[f64], q: f64) -> f64 {
    let (mut a, mut b) = (xs[0], xs[xs.len() - 1]);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = bin_cost(xs, ws, c, q);
    let mut fd = bin_cost(xs, ws, d, q);
    for _ in 0..200 {
        if (b - a) <= 1e-14 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = bin_cost(xs, ws, c, q);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = bin_cost(xs, ws, d, q);
        }
    }
    0.5 * (a + b)
}

fn make_bin(xs: &[f64], ws: &[f64], lo: usize, hi: usize, q: f64, parent_center: Option<f64>) -> Bin {
    let (bx, bw) = (&xs[lo..hi], &ws[lo..hi]);
    let mass: f64 = bw.iter().sum();
    if hi - lo == 1 {
        return Bin { lo, hi, mass, center: bx[0], cost: 0.0 };
    }
    let center = if q == 2.0 {
        (bx.iter().zip(bw).map(|(x, w)| x * w).sum::<f64>() / mass).clamp(bx[0], bx[bx.len() - 1])
    } else if q > 1.0 {
        golden_section_center(bx, bw, q)
    } else {
        weighted_median(bx, bw, mass)
    };
    let cost = bin_cost(bx, bw, center, q);
    // Below q = 1 the median is not optimal; keeping the parent's atom when it
    // is cheaper makes every split non-worsening.
    match parent_center {
        Some(pc) => {
            let parent_cost = bin_cost(bx, bw, pc, q);
            if parent_cost < cost {
                Bin { lo, hi, mass, center: pc, cost: parent_cost }
            } else {
                Bin { lo, hi, mass, center, cost }
            }
        }
        None => Bin { lo, hi, mass, center, cost },
    }
}
