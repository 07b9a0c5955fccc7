//! Dense successive-shortest-paths solver for the transportation problem.
//!
//! Supplies `a`, demands `b`, arbitrary real costs. Every source–sink arc is
//! uncapacitated; residual backward arcs carry the current flow. Dijkstra runs
//! on reduced costs `c_ij + π_i − π_j`, which stay nonnegative up to rounding
//! (clamped at zero). Masses are plain doubles; residuals at or below
//! [`MASS_EPS`] count as exhausted.

pub(crate) const MASS_EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
pub(crate) struct FlowSolution {
    /// `(source, sink, mass)` with positive mass, ordered by source then sink.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Dual variables: `f_i + g_j <= c_ij` with equality on used arcs.
    pub source_duals: Vec<f64>,
    pub sink_duals: Vec<f64>,
}

pub(crate) fn min_cost_transport(a: &[f64], b: &[f64], cost: &[f64]) -> FlowSolution {
    let (n, m) = (a.len(), b.len());
    assert_eq!(cost.len(), n * m);
    let nodes = n + m;
    let mut flow = vec![0.0f64; n * m];
    let mut supply: Vec<f64> = a.to_vec();
    let mut demand: Vec<f64> = b.to_vec();
    let mut pot = vec![0.0f64; nodes];
    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    loop {
        if !supply.iter().any(|&s| s > MASS_EPS) || !demand.iter().any(|&d| d > MASS_EPS) {
            break;
        }
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        for i in 0..n {
            if supply[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n {
                let j = u - n;
                if demand[j] > MASS_EPS {
                    target = u;
                    break;
                }
                for i in 0..n {
                    if flow[i * m + j] > MASS_EPS && !done[i] {
                        let rc = (-cost[i * m + j] + pot[u] - pot[i]).max(0.0);
                        let nd = best + rc;
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            } else {
                let i = u;
                for j in 0..m {
                    let v = n + j;
                    if !done[v] {
                        let rc = (cost[i * m + j] + pot[i] - pot[v]).max(0.0);
                        let nd = best + rc;
                        if nd < dist[v] {
                            dist[v] = nd;
                            prev[v] = i;
                        }
                    }
                }
            }
        }
        if target == usize::MAX {
            break;
        }
        let dt = dist[target];
        for v in 0..nodes {
            pot[v] += if done[v] { dist[v] } else { dt };
        }

        // Walk back to the originating source to find the bottleneck.
        let mut delta = demand[target - n];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                // v is a source reached through a backward arc from sink u.
                delta = delta.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        delta = delta.min(supply[v]);

        let source = v;
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                let f = &mut flow[v * m + (u - n)];
                *f -= delta;
                if *f <= MASS_EPS {
                    *f = 0.0;
                }
            } else {
                flow[u * m + (v - n)] += delta;
            }
            v = u;
        }
        supply[source] -= delta;
        demand[target - n] -= delta;
    }

    let mut entries = Vec::new();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0.0 {
                entries.push((i, j, f));
                total += f * cost[i * m + j];
            }
        }
    }
    FlowSolution {
        entries,
        cost: total,
        source_duals: pot[..n].iter().map(|p| -p).collect(),
        sink_duals: pot[n..].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_crossing() {
        // ¼δ0+¾δ1 -> ¾δ0+¼δ1 at unit distance: move ½ across.
        let sol = min_cost_transport(&[0.25, 0.75], &[0.75, 0.25], &[0.0, 1.0, 1.0, 0.0]);
        assert!((sol.cost - 0.5).abs() < 1e-15);
    }

    #[test]
    fn classic_assignment_instance() {
        // 3x3 assignment with uniform masses; optimum picks the permutation of
        // least total cost, found here by enumeration.
        let c = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let best = perms
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| c[i * 3 + j]).sum::<f64>() / 3.0)
            .fold(f64::INFINITY, f64::min);
        let w = [1.0 / 3.0; 3];
        let sol = min_cost_transport(&w, &w, &c);
        assert!((sol.cost - best).abs() < 1e-12);
    }

    #[test]
    fn duals_certify_optimality() {
        let a = [0.1, 0.4, 0.2, 0.3];
        let b = [0.5, 0.25, 0.25];
        let xs: [f64; 4] = [0.0, 1.0, 2.5, 4.0];
        let ys = [0.5, 2.0, 3.0];
        let cost: Vec<f64> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x - y).abs().powf(0.5))).collect();
        let sol = min_cost_transport(&a, &b, &cost);
        let dual: f64 = a.iter().zip(&sol.source_duals).map(|(w, f)| w * f).sum::<f64>()
            + b.iter().zip(&sol.sink_duals).map(|(w, g)| w * g).sum::<f64>();
        assert!((dual - sol.cost).abs() < 1e-12);
        for i in 0..4 {
            for j in 0..3 {
                assert!(sol.source_duals[i] + sol.sink_duals[j] <= cost[i * 3 + j] + 1e-12);
            }
        }
    }
}
