//! Exact optimal transport between discrete measures on the line, and the
//! pointed map distance used to compare two IFS.

mod flow;

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{IfsModel, Map1D};
use crate::measures::DiscreteMeasure;

/// Default cap on the combined atom count accepted by [`wq_exact_flow`].
pub const DEFAULT_FLOW_ATOM_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// Kantorovich potentials with `f_i + g_j <= c_ij`, tight on the plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPotentials {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

/// A coupling between two discrete measures together with its `C_q` cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub entries: Vec<PlanEntry>,
    pub cost: f64,
    pub q: f64,
    /// Optimality certificate, present for plans from the flow solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duals: Option<DualPotentials>,
}

impl TransportPlan {
    /// `W_q = C_q^{min(1, 1/q)}`.
    pub fn wasserstein(&self) -> f64 {
        cost_to_distance(self.cost, self.q)
    }

    /// Checks that row and column sums reproduce the given marginals.
    pub fn marginal_error(&self, source: &[f64], target: &[f64]) -> f64 {
        let mut rows = vec![0.0; source.len()];
        let mut cols = vec![0.0; target.len()];
        for e in &self.entries {
            rows[e.source] += e.mass;
            cols[e.target] += e.mass;
        }
        let r = rows.iter().zip(source).map(|(a, b)| (a - b).abs());
        let c = cols.iter().zip(target).map(|(a, b)| (a - b).abs());
        r.chain(c).fold(0.0, f64::max)
    }

    /// Recomputes `Σ mass·|x_i − y_j|^q` from the atom positions.
    pub fn recompute_cost(&self, xs: &[f64], ys: &[f64]) -> f64 {
        self.entries.iter().map(|e| e.mass * (xs[e.source] - ys[e.target]).abs().powf(self.q)).sum()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("i,j,mass\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{:?}", e.source, e.target, e.mass);
        }
        out
    }
}

pub fn cost_to_distance(cost: f64, q: f64) -> f64 {
    if q >= 1.0 {
        cost.powf(1.0 / q)
    } else {
        cost
    }
}

fn require_canonical(m: &DiscreteMeasure, which: &str) -> Result<()> {
    if m.is_canonical() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{which} measure must be in canonical form")))
    }
}

#[inline]
fn pow_cost(d: f64, q: f64) -> f64 {
    if q == 1.0 {
        d
    } else if q == 2.0 {
        d * d
    } else {
        d.powf(q)
    }
}

/// Walks the quantile coupling of two sorted weight sequences, calling
/// `emit(i, j, mass)` for each positive piece. Masses are differences of the
/// running cumulative sums, and the final level is pinned to one.
fn quantile_merge(w0: &[f64], w1: &[f64], mut emit: impl FnMut(usize, usize, f64)) {
    let (n0, n1) = (w0.len(), w1.len());
    let (mut i, mut j) = (0usize, 0usize);
    let (mut c0, mut c1) = (w0[0].min(1.0), w1[0].min(1.0));
    let mut level = 0.0f64;
    loop {
        let last_i = i + 1 == n0;
        let last_j = j + 1 == n1;
        let a = if last_i { 1.0 } else { c0 };
        let b = if last_j { 1.0 } else { c1 };
        let next = a.min(b);
        if next > level {
            emit(i, j, next - level);
            level = next;
        }
        let adv_i = a <= b && !last_i;
        let adv_j = b <= a && !last_j;
        if !adv_i && !adv_j {
            if last_i && last_j {
                break;
            }
            // a == b == 1 with one side exhausted by rounding
            if !last_i {
                i += 1;
                c0 = (c0 + w0[i]).min(1.0);
            } else {
                j += 1;
                c1 = (c1 + w1[j]).min(1.0);
            }
            continue;
        }
        if adv_i {
            i += 1;
            c0 = (c0 + w0[i]).min(1.0);
        }
        if adv_j {
            j += 1;
            c1 = (c1 + w1[j]).min(1.0);
        }
    }
}

/// Optimal coupling on the line for convex costs `|x − y|^q`, `q >= 1`.
pub fn wq_1d_monotone(m0: &DiscreteMeasure, m1: &DiscreteMeasure, q: f64) -> Result<TransportPlan> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::UnsupportedExponent(q));
    }
    require_canonical(m0, "source")?;
    require_canonical(m1, "target")?;
    let (xs, ys) = (m0.positions(), m1.positions());
    let mut entries = Vec::with_capacity(m0.len() + m1.len());
    let mut cost = 0.0;
    quantile_merge(m0.weights(), m1.weights(), |i, j, mass| {
        cost += mass * pow_cost((xs[i] - ys[j]).abs(), q);
        entries.push(PlanEntry { source: i, target: j, mass });
    });
    Ok(TransportPlan { entries, cost, q, duals: None })
}

/// `C_q` of the monotone coupling without materializing the plan.
pub(crate) fn monotone_cost(m0: &DiscreteMeasure, m1: &DiscreteMeasure, q: f64) -> f64 {
    let (xs, ys) = (m0.positions(), m1.positions());
    let mut cost = 0.0;
    quantile_merge(m0.weights(), m1.weights(), |i, j, mass| {
        cost += mass * pow_cost((xs[i] - ys[j]).abs(), q);
    });
    cost
}

/// Exact optimum of the transport linear program by min-cost flow, for any
/// `q > 0` including concave costs.
pub fn wq_exact_flow(m0: &DiscreteMeasure, m1: &DiscreteMeasure, q: f64) -> Result<TransportPlan> {
    wq_exact_flow_with_cap(m0, m1, q, DEFAULT_FLOW_ATOM_CAP)
}

pub fn wq_exact_flow_with_cap(m0: &DiscreteMeasure, m1: &DiscreteMeasure, q: f64, cap: usize) -> Result<TransportPlan> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidExponent(format!("transport exponent must be positive, got {q}")));
    }
    let (xs, ys) = (m0.positions(), m1.positions());
    transport_with_cost(m0, m1, q, cap, |i, j| pow_cost((xs[i] - ys[j]).abs(), q))
}

/// Min-cost-flow transport between two canonical measures under an arbitrary
/// cost matrix. The returned plan records `q` only for the exponent relation.
pub fn transport_with_cost(
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
    q: f64,
    cap: usize,
    cost: impl Fn(usize, usize) -> f64,
) -> Result<TransportPlan> {
    require_canonical(m0, "source")?;
    require_canonical(m1, "target")?;
    let atoms = m0.len() + m1.len();
    if atoms > cap {
        return Err(Error::InstanceTooLarge { atoms, cap });
    }
    Ok(solve_weights(m0.weights(), m1.weights(), q, cost))
}

fn solve_weights(a: &[f64], b: &[f64], q: f64, cost: impl Fn(usize, usize) -> f64) -> TransportPlan {
    let m = b.len();
    let matrix: Vec<f64> = (0..a.len() * m).map(|k| cost(k / m, k % m)).collect();
    let sol = flow::min_cost_transport(a, b, &matrix);
    TransportPlan {
        entries: sol.entries.into_iter().map(|(source, target, mass)| PlanEntry { source, target, mass }).collect(),
        cost: sol.cost,
        q,
        duals: Some(DualPotentials { source: sol.source_duals, target: sol.sink_duals }),
    }
}

/// Exact `W_q` between canonical measures: monotone for `q >= 1`, min-cost
/// flow otherwise.
pub fn wasserstein(m0: &DiscreteMeasure, m1: &DiscreteMeasure, q: f64) -> Result<f64> {
    if q >= 1.0 {
        require_canonical(m0, "source")?;
        require_canonical(m1, "target")?;
        Ok(cost_to_distance(monotone_cost(m0, m1, q), q))
    } else {
        Ok(wq_exact_flow(m0, m1, q)?.wasserstein())
    }
}

/// Dual lower bound `|∫f dm0 − ∫f dm1| / L <= W_1(m0, m1)` for a test function
/// given by its values on the union of the supports.
pub fn kantorovich_lower_bound(
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
    f_values: &[(f64, f64)],
    lip_constant: f64,
) -> Result<f64> {
    if !(lip_constant > 0.0 && lip_constant.is_finite()) {
        return Err(Error::InvalidInput(format!("Lipschitz constant must be positive, got {lip_constant}")));
    }
    let mut table: Vec<(f64, f64)> = f_values.to_vec();
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    // On the line, checking neighbours is enough for the pairwise condition.
    for w in table.windows(2) {
        let (dx, df) = (w[1].0 - w[0].0, (w[1].1 - w[0].1).abs());
        if df > lip_constant * dx * (1.0 + 1e-12) + 1e-15 {
            let observed = if dx > 0.0 { df / dx } else { f64::INFINITY };
            return Err(Error::InconsistentTestFunction { declared: lip_constant, observed });
        }
    }
    let lookup = |x: f64| -> Result<f64> {
        table
            .binary_search_by(|probe| probe.0.total_cmp(&x))
            .map(|k| table[k].1)
            .map_err(|_| Error::InvalidInput(format!("test function has no value at atom {x}")))
    };
    let mut i0 = 0.0;
    for (x, w) in m0.iter() {
        i0 += w * lookup(x)?;
    }
    let mut i1 = 0.0;
    for (x, w) in m1.iter() {
        i1 += w * lookup(x)?;
    }
    Ok((i0 - i1).abs() / lip_constant)
}

/// `sup_x |φ(x) − ψ(x)| / (1 + |x − x0|)` for `φ(x) = a0·x + b0`, `ψ(x) = a1·x + b1`.
///
/// With `y = x − x0` the ratio is `|Δa·y + (Δa·x0 + Δb)| / (1 + |y|)`, a
/// monotone function of `y` on each half-line moving between its value at
/// `y = 0` and its limit `|Δa|` at infinity, so the supremum is the larger of
/// the two.
pub fn map_distance_affine(a0: f64, b0: f64, a1: f64, b1: f64, x0: f64) -> f64 {
    let da = a0 - a1;
    let db = b0 - b1;
    da.abs().max((da * x0 + db).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapDistance {
    pub value: f64,
    /// Closed form (affine pair) rather than a numerical lower estimate.
    pub exact: bool,
}

/// Pointed map distance `d_{x0}(φ, ψ)`. Non-affine pairs are evaluated on the
/// geometric grid `x0 ± 2^k`, `k = −20..=40`, refined by golden section around
/// the best grid cell; the result is a lower estimate of the supremum.
pub fn map_distance(phi: &Map1D, psi: &Map1D, x0: f64) -> Result<MapDistance> {
    if let (Some((a0, b0)), Some((a1, b1))) = (phi.affine_coefficients(), psi.affine_coefficients()) {
        return Ok(MapDistance { value: map_distance_affine(a0, b0, a1, b1, x0), exact: true });
    }
    let ratio = |x: f64| (phi.apply(x) - psi.apply(x)).abs() / (1.0 + (x - x0).abs());
    let mut grid: Vec<f64> = vec![x0];
    for k in -20..=40 {
        let s = 2f64.powi(k);
        grid.push(x0 - s);
        grid.push(x0 + s);
    }
    grid.sort_by(f64::total_cmp);
    let values: Vec<f64> = grid.iter().map(|&x| ratio(x)).collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::UnsupportedMapKind(format!("map difference is not finite at x = {}", grid[k])));
    }
    let (best, mut value) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    for (lo, hi) in [(best.saturating_sub(1), best), (best, (best + 1).min(grid.len() - 1))] {
        if lo == hi {
            continue;
        }
        value = value.max(golden_max(&ratio, grid[lo], grid[hi]));
    }
    Ok(MapDistance { value, exact: false })
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc > fd {
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
    fc.max(fd)
}

/// Optimal coupling of two IFS under the pointed map distance.
#[derive(Debug, Clone, Serialize)]
pub struct IfsDistanceReport {
    /// Coupling of the two index distributions.
    pub coupling: TransportPlan,
    /// `d_{x0}(φ_i, ψ_j)`, row-major by index of the first IFS.
    pub map_distances: Vec<Vec<f64>>,
    pub cost: f64,
    pub distance: f64,
    pub q: f64,
    pub x0: f64,
    /// All map distances in closed form.
    pub exact: bool,
    /// Either model is a truncation of a countable family.
    pub truncated: bool,
}

/// `W_{x0,q}` between two finite IFS, by min-cost flow over index pairs.
pub fn ifs_distance(ifs0: &IfsModel, ifs1: &IfsModel, q: f64, x0: f64) -> Result<IfsDistanceReport> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidExponent(format!("exponent must be positive, got {q}")));
    }
    let (n0, n1) = (ifs0.len(), ifs1.len());
    if n0 + n1 > DEFAULT_FLOW_ATOM_CAP {
        return Err(Error::InstanceTooLarge { atoms: n0 + n1, cap: DEFAULT_FLOW_ATOM_CAP });
    }
    let mut exact = true;
    let mut map_distances = vec![vec![0.0; n1]; n0];
    for (i, phi) in ifs0.maps().iter().enumerate() {
        for (j, psi) in ifs1.maps().iter().enumerate() {
            let d = map_distance(phi, psi, x0)?;
            exact &= d.exact;
            map_distances[i][j] = d.value;
        }
    }
    let coupling =
        solve_weights(ifs0.probabilities(), ifs1.probabilities(), q, |i, j| pow_cost(map_distances[i][j], q));
    let cost = coupling.cost;
    Ok(IfsDistanceReport {
        distance: cost_to_distance(cost, q),
        coupling,
        map_distances,
        cost,
        q,
        x0,
        exact,
        truncated: ifs0.truncation().is_some() || ifs1.truncation().is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::IfsModel;
    use crate::response::bernoulli_ifs;

    fn m(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.iter().copied()).unwrap()
    }

    #[test]
    fn monotone_examples() {
        let p = wq_1d_monotone(&DiscreteMeasure::dirac(0.0), &DiscreteMeasure::dirac(1.0), 1.0).unwrap();
        assert_eq!(p.wasserstein(), 1.0);

        let p = wq_1d_monotone(&DiscreteMeasure::dirac(0.0), &m(&[(0.0, 0.5), (1.0, 0.5)]), 2.0).unwrap();
        assert!((p.cost - 0.5).abs() < 1e-15);
        assert!((p.wasserstein() - 0.5f64.sqrt()).abs() < 1e-12);

        let a = m(&[(0.0, 0.2), (0.3, 0.3), (2.0, 0.5)]);
        for q in [1.0, 1.5, 3.0] {
            assert_eq!(wq_1d_monotone(&a, &a, q).unwrap().cost, 0.0);
        }
    }

    #[test]
    fn monotone_rejects_concave_exponent() {
        let d = DiscreteMeasure::dirac(0.0);
        assert!(matches!(wq_1d_monotone(&d, &d, 0.5), Err(Error::UnsupportedExponent(_))));
    }

    #[test]
    fn monotone_tie_advances_both() {
        let a = m(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = m(&[(0.0, 0.5), (2.0, 0.5)]);
        let p = wq_1d_monotone(&a, &b, 1.0).unwrap();
        assert_eq!(p.entries.len(), 2);
        assert_eq!((p.entries[1].source, p.entries[1].target), (1, 1));
    }

    #[test]
    fn flow_examples() {
        let p = wq_exact_flow(&DiscreteMeasure::dirac(0.0), &DiscreteMeasure::dirac(1.0), 0.5).unwrap();
        assert_eq!(p.cost, 1.0);
        assert_eq!(p.wasserstein(), 1.0);

        // LP vertices for 2x2 with these marginals: the mass t moved 0 -> 1 is
        // in [0, 1/4]... enumerate the one-parameter family of couplings.
        let a = m(&[(0.0, 0.25), (1.0, 0.75)]);
        let b = m(&[(0.0, 0.75), (1.0, 0.25)]);
        let brute = (0..=1000)
            .map(|k| 0.25 * k as f64 / 1000.0)
            .map(|t| {
                // t: mass 0->1; then 0->0 = ¼−t, 1->0 = ¾−(¼−t) = ½+t, 1->1 = ¼−t
                t + (0.5 + t)
            })
            .fold(f64::INFINITY, f64::min);
        let p = wq_exact_flow(&a, &b, 1.0).unwrap();
        assert!((p.cost - 0.5).abs() < 1e-15);
        assert!((brute - 0.5).abs() < 1e-15);
    }

    #[test]
    fn flow_respects_cap() {
        let big = DiscreteMeasure::uniform_grid(0.0, 1.0, 1500).unwrap();
        assert!(matches!(wq_exact_flow(&big, &big, 1.0), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn plan_csv_has_header() {
        let p = wq_1d_monotone(&DiscreteMeasure::dirac(0.0), &DiscreteMeasure::dirac(1.0), 1.0).unwrap();
        assert_eq!(p.to_csv_string(), "i,j,mass\n0,0,1.0\n");
    }

    #[test]
    fn kantorovich_examples() {
        let (d0, d1) = (DiscreteMeasure::dirac(0.0), DiscreteMeasure::dirac(1.0));
        let id = [(0.0, 0.0), (1.0, 1.0)];
        assert_eq!(kantorovich_lower_bound(&d0, &d1, &id, 1.0).unwrap(), 1.0);
        let constant = [(0.0, 3.0), (1.0, 3.0)];
        assert_eq!(kantorovich_lower_bound(&d0, &d1, &constant, 1.0).unwrap(), 0.0);

        let grid = DiscreteMeasure::uniform_grid(0.0, 1.0, 1001).unwrap();
        let values: Vec<(f64, f64)> = grid.positions().iter().map(|&x| (x, x.abs())).collect();
        let lb = kantorovich_lower_bound(&grid, &d0, &values, 1.0).unwrap();
        let w1 = wq_1d_monotone(&grid, &d0, 1.0).unwrap().wasserstein();
        assert!((lb - 0.5).abs() < 1e-12);
        assert!((lb - w1).abs() < 1e-12);
    }

    #[test]
    fn kantorovich_rejects_inconsistent_constant() {
        let (d0, d1) = (DiscreteMeasure::dirac(0.0), DiscreteMeasure::dirac(1.0));
        let steep = [(0.0, 0.0), (1.0, 2.0)];
        assert!(matches!(kantorovich_lower_bound(&d0, &d1, &steep, 1.0), Err(Error::InconsistentTestFunction { .. })));
    }

    #[test]
    fn affine_map_distance_examples_match_grid_search() {
        let grid_sup = |a0: f64, b0: f64, a1: f64, b1: f64, x0: f64| {
            (0..=200_000)
                .map(|k| -1e6 + 2e6 * k as f64 / 200_000.0)
                .chain((0..=20_000).map(|k| -10.0 + 20.0 * k as f64 / 20_000.0))
                .map(|x| ((a0 * x + b0) - (a1 * x + b1)).abs() / (1.0 + (x - x0).abs()))
                .fold(0.0, f64::max)
        };
        assert_eq!(map_distance_affine(0.3, 1.0, 0.3, 1.0, 0.0), 0.0);
        let d = map_distance_affine(0.5, 0.0, 0.6, 0.0, 0.0);
        assert!((d - 0.1).abs() < 1e-15);
        assert!((grid_sup(0.5, 0.0, 0.6, 0.0, 0.0) - 0.1).abs() < 1e-6);
        let d = map_distance_affine(1.0, 0.0, 1.0, 0.3, 0.0);
        assert!((d - 0.3).abs() < 1e-15);
        assert!((grid_sup(1.0, 0.0, 1.0, 0.3, 0.0) - 0.3).abs() < 1e-12);
        // off-origin reference point
        for (a0, b0, a1, b1, x0) in
            [(0.2, 1.0, -0.4, 0.5, 3.0), (0.9, -2.0, 0.1, 4.0, -1.5), (0.5, 0.1, 0.5, -0.2, 7.0)]
        {
            let d = map_distance_affine(a0, b0, a1, b1, x0);
            let g = grid_sup(a0, b0, a1, b1, x0);
            assert!(g <= d + 1e-12 && d - g < 1e-4, "{d} vs {g}");
        }
    }

    #[test]
    fn numeric_map_distance_matches_closed_form_for_affine_callables() {
        let phi = Map1D::user("half", |x| 0.5 * x, 0.5);
        let psi = Map1D::user("shifted", |x| 0.5 * x + 0.2, 0.5);
        let d = map_distance(&phi, &psi, 0.0).unwrap();
        assert!(!d.exact);
        assert!((d.value - 0.2).abs() < 1e-9);
    }

    #[test]
    fn ifs_distance_examples() {
        let b = bernoulli_ifs(0.6).unwrap();
        assert_eq!(ifs_distance(&b, &b, 1.0, 0.0).unwrap().distance, 0.0);

        for (l0, l1) in [(0.6, 0.61), (0.3, 0.9), (0.55, 0.5)] {
            let r = ifs_distance(&bernoulli_ifs(l0).unwrap(), &bernoulli_ifs(l1).unwrap(), 1.0, 0.0).unwrap();
            assert!(r.distance <= (l0 - l1).abs() + 1e-15);
        }

        let f = IfsModel::affine("f", &[(0.5, 0.0, 1.0)], 0.0).unwrap();
        let g = IfsModel::affine("g", &[(0.5, 0.2, 1.0)], 0.0).unwrap();
        for q in [0.5, 1.0, 2.0, 3.0] {
            let r = ifs_distance(&f, &g, q, 0.0).unwrap();
            // W = C^{min(1,1/q)} with C = 0.2^q
            let expect = if q >= 1.0 { 0.2 } else { 0.2f64.powf(q) };
            assert!((r.distance - expect).abs() < 1e-12, "q={q}: {}", r.distance);
        }
    }
}
