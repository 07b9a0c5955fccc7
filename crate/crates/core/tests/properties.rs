use ifslab::ifs::{apply_dual_transfer, certify_contraction, reduce_exponent, IfsModel};
use ifslab::measures::{quantize, DiscreteMeasure, MomentSpec};
use ifslab::skew::{fiber_wasserstein_estimate, marginal_wasserstein, BaseSpace, FiberEnsemble};
use ifslab::transport::{kantorovich_lower_bound, wasserstein, wq_1d_monotone, wq_exact_flow};
use proptest::prelude::*;

/// `∫_0^1 |F0⁻¹(u) − F1⁻¹(u)|^q du` by walking both CDFs.
fn quantile_cost(m0: &DiscreteMeasure, m1: &DiscreteMeasure, q: f64) -> f64 {
    let (x0, w0) = (m0.positions(), m0.weights());
    let (x1, w1) = (m1.positions(), m1.weights());
    let (mut i, mut j) = (0, 0);
    let (mut c0, mut c1) = (w0[0], w1[0]);
    let mut u = 0.0;
    let mut cost = 0.0;
    loop {
        let next = c0.min(c1);
        cost += (next - u) * (x0[i] - x1[j]).abs().powf(q);
        u = next;
        if i + 1 == x0.len() && j + 1 == x1.len() {
            break;
        }
        if c0 <= c1 && i + 1 < x0.len() {
            i += 1;
            c0 += w0[i];
        } else if j + 1 < x1.len() {
            j += 1;
            c1 += w1[j];
        } else {
            i += 1;
            c0 += w0[i];
        }
    }
    cost
}

fn measure(max: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..=max).prop_map(|a| DiscreteMeasure::new(a).unwrap())
}

fn lattice_measure(max: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((-8i32..8, 0.01f64..1.0), 1..=max)
        .prop_map(|a| DiscreteMeasure::new(a.into_iter().map(|(k, w)| (k as f64 / 4.0, w))).unwrap())
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0), 1.0f64..4.0]
}

/// Affine IFS with random slopes in (−1.2, 1.2) that certify at `q`.
fn certified_ifs() -> impl Strategy<Value = (IfsModel, f64)> {
    (
        prop::collection::vec((-1.2f64..1.2, -2.0f64..2.0, 0.05f64..1.0), 1..5),
        prop_oneof![Just(0.5), Just(1.0), Just(2.0)],
    )
        .prop_filter_map("not contracting on average", |(maps, q)| {
            let total: f64 = maps.iter().map(|m| m.2).sum();
            let maps: Vec<(f64, f64, f64)> = maps.iter().map(|&(a, b, p)| (a, b, p / total)).collect();
            let ifs = IfsModel::affine("random", &maps, 0.0).ok()?;
            certify_contraction(&ifs, q, 0.0).ok()?;
            Some((ifs, q))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn monotone_flow_and_quantile_costs_agree(m0 in measure(25), m1 in lattice_measure(25), q in exponent()) {
        let mono = wq_1d_monotone(&m0, &m1, q).unwrap().cost;
        let flow = wq_exact_flow(&m0, &m1, q).unwrap().cost;
        let oracle = quantile_cost(&m0, &m1, q);
        prop_assert!((mono - oracle).abs() <= 1e-9 * (1.0 + oracle), "{mono} vs {oracle}");
        prop_assert!((flow - oracle).abs() <= 1e-9 * (1.0 + oracle), "{flow} vs {oracle}");
    }

    #[test]
    fn flow_plan_is_feasible_and_dual_certified(m0 in measure(15), m1 in measure(15), q in prop_oneof![Just(0.5), Just(1.0), Just(2.0)]) {
        let plan = wq_exact_flow(&m0, &m1, q).unwrap();
        prop_assert!(plan.marginal_error(m0.weights(), m1.weights()) <= 1e-12);
        prop_assert!((plan.recompute_cost(m0.positions(), m1.positions()) - plan.cost).abs() <= 1e-12 * (1.0 + plan.cost));
        let duals = plan.duals.as_ref().unwrap();
        let mut dual_value = 0.0;
        for (i, (x, a)) in m0.iter().enumerate() {
            dual_value += a * duals.source[i];
            for (j, (y, _)) in m1.iter().enumerate() {
                prop_assert!(duals.source[i] + duals.target[j] <= (x - y).abs().powf(q) + 1e-9);
            }
        }
        dual_value += m1.weights().iter().zip(&duals.target).map(|(b, g)| b * g).sum::<f64>();
        prop_assert!((dual_value - plan.cost).abs() <= 1e-9 * (1.0 + plan.cost));
    }

    #[test]
    fn wasserstein_is_a_metric(a in measure(12), b in measure(12), c in lattice_measure(12), q in prop_oneof![Just(0.5), Just(1.0), Just(2.0), Just(3.0)]) {
        prop_assert_eq!(wasserstein(&a, &a, q).unwrap(), 0.0);
        let ab = wasserstein(&a, &b, q).unwrap();
        let ba = wasserstein(&b, &a, q).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        let ac = wasserstein(&a, &c, q).unwrap();
        let cb = wasserstein(&c, &b, q).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn kantorovich_bound_is_below_w1(m0 in measure(15), m1 in measure(15), slope in -3.0f64..3.0, shift in -2.0f64..2.0) {
        // f(x) = |slope·x − shift| is Lipschitz with constant |slope|
        prop_assume!(slope.abs() > 1e-3);
        let f = |x: f64| (slope * x - shift).abs();
        let values: Vec<(f64, f64)> = m0.positions().iter().chain(m1.positions()).map(|&x| (x, f(x))).collect();
        let mut values = values;
        values.sort_by(|a, b| a.0.total_cmp(&b.0));
        values.dedup_by(|a, b| a.0 == b.0);
        let lower = kantorovich_lower_bound(&m0, &m1, &values, slope.abs()).unwrap();
        prop_assert!(lower <= wasserstein(&m0, &m1, 1.0).unwrap() + 1e-12);
    }

    #[test]
    fn dual_transfer_contracts((ifs, q) in certified_ifs(), m0 in measure(10), m1 in measure(10)) {
        let cert = certify_contraction(&ifs, q, 0.0).unwrap();
        let before = wasserstein(&m0, &m1, q).unwrap();
        let after = wasserstein(&apply_dual_transfer(&ifs, &m0), &apply_dual_transfer(&ifs, &m1), q).unwrap();
        prop_assert!(after <= cert.rho_bar() * before + 1e-9, "{after} > {} · {before}", cert.rho_bar());
    }

    #[test]
    fn reduced_certificate_dominates((ifs, q) in certified_ifs(), frac in 0.05f64..0.95) {
        let cert = certify_contraction(&ifs, q, 0.0).unwrap();
        let q2 = q * frac;
        let reduced = reduce_exponent(&cert, q2).unwrap();
        let direct = certify_contraction(&ifs, q2, 0.0).unwrap();
        prop_assert!(direct.rho <= reduced.rho * (1.0 + 1e-12));
        prop_assert!(direct.displacement <= reduced.displacement * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn canonicalize_is_idempotent(raw in prop::collection::vec((-3i32..3, 0.0f64..1.0), 1..30)) {
        let atoms: Vec<(f64, f64)> = raw.into_iter().map(|(k, w)| (k as f64 * 0.5, w)).collect();
        prop_assume!(atoms.iter().map(|a| a.1).sum::<f64>() > 1e-3);
        let m = DiscreteMeasure::raw(atoms).unwrap();
        let c = m.canonicalize().unwrap();
        prop_assert!(c.is_canonical());
        prop_assert_eq!(c.canonicalize().unwrap(), c);
    }

    #[test]
    fn quantization_error_is_exact_and_monotone(m in measure(60), q in prop_oneof![Just(0.5), Just(1.0), Just(2.0)]) {
        let spec = MomentSpec::new(q, 0.0).unwrap();
        let mut last = f64::INFINITY;
        for k in [1, 2, 3, 5, 8, 13, 21, 34, 55] {
            let (c, err) = quantize(&m, k, &spec).unwrap();
            prop_assert!(c.len() <= k);
            prop_assert!(err <= last + 1e-12, "error rose from {last} to {err} at k = {k}");
            prop_assert!((wasserstein(&m, &c, q).unwrap() - err).abs() <= 1e-9 * (1.0 + err));
            last = err;
        }
    }

    #[test]
    fn moment_is_transport_cost_to_dirac(m in measure(20), q in prop_oneof![Just(0.5), Just(1.0), Just(2.5)], x0 in -3.0f64..3.0) {
        let spec = MomentSpec::new(q, x0).unwrap();
        let w = wasserstein(&DiscreteMeasure::dirac(x0), &m, q).unwrap();
        let cost = w.powf(q.max(1.0));
        prop_assert!((m.moment(&spec) - cost).abs() <= 1e-9 * (1.0 + cost));
    }

    #[test]
    fn fiberwise_dominates_marginal(points in prop::collection::vec((0.0f64..1.0, -3.0f64..3.0, -3.0f64..3.0), 2..80), q in prop_oneof![Just(1.0), Just(2.0)], bins in 1usize..6) {
        let y: Vec<f64> = points.iter().map(|p| p.0).collect();
        let e0 = FiberEnsemble::new(BaseSpace::Circle, y.clone(), points.iter().map(|p| p.1).collect()).unwrap();
        let e1 = FiberEnsemble::new(BaseSpace::Circle, y, points.iter().map(|p| p.2).collect()).unwrap();
        let marginal = marginal_wasserstein(&e0, &e1, q).unwrap();
        let fiberwise = fiber_wasserstein_estimate(&e0, &e1, q, Some(bins)).unwrap();
        prop_assert!(marginal <= fiberwise + 1e-9, "{marginal} > {fiberwise}");
    }
}
