use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{Experiment, ModelConfig, SolverParams, Source};
use super::Check;
use crate::chaos::{ergodicity_experiment, mixing_depth, rao_blackwell_survival, sample_stationary, ErgodicityOptions};
use crate::error::{Error, Result};
use crate::ifs::{ap_model, certify_contraction, find_exponent, IfsModel};
use crate::measures::DiscreteMeasure;
use crate::response::{
    bernoulli_mean_derivative, bernoulli_second_moment_derivative, closeness_check, lipschitz_experiment,
    response_rows_csv, BernoulliSolveCache, TestFunction,
};
use crate::rng::chain_rng;
use crate::skew::{iid_reduction_check, skew_convergence_experiment, SkewExperimentOptions};
use crate::stationary::{exp_moment_product, solve_stationary, tail_upper_bound, SolveReport};
use crate::transport::{wq_1d_monotone, wq_exact_flow};
use crate::verdict::Verdict;

/// `(x, y, yerr)` rows of one plot series.
pub type Series = Vec<(f64, f64, f64)>;

/// Tables, plot series, checks and result values of one experiment.
#[derive(Debug, Clone, Default)]
pub struct KindOutput {
    pub checks: Vec<Check>,
    pub results: Value,
    /// `(file name, csv)`.
    pub tables: Vec<(String, String)>,
    pub plots: Vec<(String, Series)>,
}

/// Bias allowed for stationary samples drawn by forward chains.
const SAMPLE_BIAS: f64 = 1e-12;

fn build(model: &Source<ModelConfig>) -> Result<IfsModel> {
    model.inline()?.build()
}

pub(crate) fn solve_results(r: &SolveReport) -> Value {
    json!({
        "iterations": r.iterations,
        "contraction_term": r.contraction_term,
        "quantization_term": r.quantization_term,
        "total_error_bound": r.total_error_bound,
        "certificate": r.certificate,
        "max_atoms": r.max_atoms,
        "target_error": r.target_error,
        "converged": r.converged,
        "atoms": r.measure.len(),
        "mean": r.measure.mean(),
    })
}

fn ledger_plot(r: &SolveReport) -> Series {
    r.history.iter().map(|h| (h.iteration as f64, h.total, 0.0)).collect()
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    crate::chaos::ls_slope(x, y)
}

/// Runs one experiment. Errors are returned unchanged for the caller to map
/// onto exit codes and verdicts.
pub fn run_experiment(exp: &Experiment, seed: u64) -> Result<KindOutput> {
    match exp {
        Experiment::Solve { model, q, solver } => run_solve(&build(model)?, *q, solver),
        Experiment::Certify { model, q, x0 } => run_certify(&build(model)?, *q, *x0),
        Experiment::Ergodicity { model, n_grid, chains, x_start, burn_in, reference, slope_range } => {
            let ifs = build(model)?;
            let cert = certify_contraction(&ifs, 1.0, ifs.x0())?;
            // a stalled solve still carries a valid ledger; the experiment
            // rejects it if it is too coarse for the measured errors
            let r = match solve_stationary(&ifs, &cert, &reference.options()) {
                Err(Error::TargetUnreachable(r)) => *r,
                other => other?,
            };
            let opts = ErgodicityOptions {
                n_grid: n_grid.clone(),
                chains: *chains,
                seed,
                x_start: *x_start,
                burn_in: *burn_in,
            };
            let t = ergodicity_experiment(&ifs, &r, &opts)?;
            let ok = t.slope >= slope_range[0] && t.slope <= slope_range[1];
            let mut out = KindOutput::default();
            out.checks.push(Check::new("slope_in_range", Verdict::from_bool(ok), t.slope, slope_range[1], 0.0));
            out.results = json!({ "slope": t.slope, "slope_range": slope_range, "reference_ledger": t.reference_ledger, "rows": t.rows });
            out.tables.push(("ergodicity.csv".into(), t.to_csv_string()));
            out.plots
                .push(("ergodicity".into(), t.rows.iter().map(|r| (r.n as f64, r.mean_error, r.std_error)).collect()));
            Ok(out)
        }
        Experiment::ExpMoment { a, p, b_values, terms, samples } => {
            run_exp_moment(*a, *p, b_values, *terms, *samples, seed)
        }
        Experiment::Tail { a, p, samples, t_max, fit_range, slope_tolerance } => {
            run_tail(*a, *p, *samples, *t_max, *fit_range, *slope_tolerance, seed)
        }
        Experiment::Lipschitz { lambdas, h, qs, solver } => {
            let mut out = KindOutput::default();
            let mut all = Vec::new();
            for &q in qs {
                let rows = lipschitz_experiment(lambdas, *h, q, &solver.options())?;
                for r in &rows {
                    out.checks.push(Check::new(
                        format!("lipschitz q={q:?} lambda={:?}", r.lambda),
                        r.verdict,
                        r.measured_wq,
                        r.paper_bound,
                        r.ledger_slack,
                    ));
                }
                out.plots.push((
                    format!("lipschitz_q{q:?}"),
                    rows.iter().map(|r| (r.lambda, r.measured_wq, r.ledger_slack)).collect(),
                ));
                all.extend(rows);
            }
            out.tables.push(("lipschitz.csv".into(), response_rows_csv(&all)));
            out.results = json!({ "rows": all });
            Ok(out)
        }
        Experiment::Closeness { model0, model1, q, x0, solver } => {
            let r = closeness_check(&build(model0)?, &build(model1)?, *q, *x0, &solver.options())?;
            let mut out = KindOutput::default();
            out.checks.push(Check::new("closeness", r.verdict, r.measured_wq, r.bound, r.ledger_slack));
            out.tables.push((
                "closeness.csv".into(),
                format!(
                    "q,x0,ifs_distance,rho0,measured_moment,moment_upper,constant,bound,measured_wq,ledger_slack,verdict\n{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}\n",
                    r.q, r.x0, r.ifs_distance, r.rho0, r.measured_moment, r.moment_upper, r.constant, r.bound, r.measured_wq, r.ledger_slack, r.verdict
                ),
            ));
            out.plots.push(("closeness".into(), vec![(r.ifs_distance, r.measured_wq, r.ledger_slack)]));
            out.results = serde_json::to_value(&r)?;
            Ok(out)
        }
        Experiment::Response { lambdas, functions, h_schedule, q, solver } => {
            run_response(lambdas, functions, h_schedule, *q, solver)
        }
        Experiment::SkewConverge {
            model,
            q,
            k_grid,
            realizations,
            x_start,
            slope_tolerance,
            margin,
            batches,
            bins,
            iid_check,
        } => {
            let mut m = model.inline()?.clone();
            m.validate()?;
            let opts = SkewExperimentOptions {
                x_start: *x_start,
                slope_tolerance: *slope_tolerance,
                margin: *margin,
                batches: *batches,
                bins: *bins,
                ..SkewExperimentOptions::new(*q, k_grid.clone(), *realizations, seed)
            };
            let t = skew_convergence_experiment(&m, &opts)?;
            let mut out = KindOutput::default();
            for r in &t.rows {
                out.checks.push(Check::new(format!("level k={}", r.k), r.verdict, r.wq, r.bound, r.slack));
            }
            out.checks.push(Check::new("slope", t.slope_verdict, t.slope, t.slope_bound, 0.0));
            out.tables.push(("skew_convergence.csv".into(), t.to_csv_string()));
            out.plots.push(("skew_wq".into(), t.rows.iter().map(|r| (r.k as f64, r.wq, r.std_error)).collect()));
            out.plots.push(("skew_bound".into(), t.rows.iter().map(|r| (r.k as f64, r.bound, 0.0)).collect()));
            let mut results = serde_json::to_value(&t)?;
            if let Some(c) = iid_check {
                let ifs = build(&c.model)?;
                let r = iid_reduction_check(&ifs, c.x_start, c.k, c.realizations, seed)?;
                out.checks.push(Check::new("iid_reduction", r.verdict, r.w1, 2.0 * r.noise, 0.0));
                out.tables.push((
                    "iid_reduction.csv".into(),
                    format!(
                        "k,realizations,w1,noise,verdict\n{},{},{:?},{:?},{}\n",
                        r.k, r.realizations, r.w1, r.noise, r.verdict
                    ),
                ));
                results["iid_reduction"] = serde_json::to_value(&r)?;
            }
            out.results = results;
            Ok(out)
        }
        Experiment::TransportSelftest { pairs, max_atoms, qs } => run_transport_selftest(*pairs, *max_atoms, qs, seed),
    }
}

fn run_solve(ifs: &IfsModel, q: f64, solver: &SolverParams) -> Result<KindOutput> {
    let cert = certify_contraction(ifs, q, ifs.x0())?;
    let r = solve_stationary(ifs, &cert, &solver.options())?;
    let mut out = KindOutput::default();
    out.checks.push(Check::new(
        "ledger_within_target",
        Verdict::from_bool(r.total_error_bound <= r.target_error),
        r.total_error_bound,
        r.target_error,
        0.0,
    ));
    out.results = solve_results(&r);
    out.tables.push(("measure.csv".into(), r.measure.to_csv_string()));
    out.tables.push(("ledger.csv".into(), r.history_csv()));
    out.plots.push(("ledger".into(), ledger_plot(&r)));
    let mut acc = 0.0;
    let cdf = r.measure.iter().map(|(x, w)| {
        acc += w;
        (x, acc, r.total_error_bound)
    });
    out.plots.push(("cdf".into(), cdf.collect()));
    Ok(out)
}

fn run_certify(ifs: &IfsModel, q: Option<f64>, x0: Option<f64>) -> Result<KindOutput> {
    let x0 = x0.unwrap_or(ifs.x0());
    let q = match q {
        Some(q) => q,
        None => find_exponent(ifs).map(|(q, _)| q).ok_or_else(|| {
            Error::CannotCertify(format!("no exponent q > 0 with Σ p_i Lip_i^q < 1 for {}", ifs.label()))
        })?,
    };
    let cert = certify_contraction(ifs, q, x0)?;
    let mut out = KindOutput::default();
    out.checks.push(Check::new("contracting", Verdict::from_bool(cert.rho < 1.0), cert.rho, 1.0, 0.0));
    out.results = json!({
        "certificate": cert,
        "rho_bar": cert.rho_bar(),
        "moment_bound": cert.moment_bound(),
        "dirac_distance_bound": cert.dirac_distance_bound(),
        "invariant_interval": ifs.invariant_interval(),
    });
    let scan: Vec<(f64, f64, f64)> = (1..=60)
        .map(|i| {
            let s = i as f64 * 0.05;
            let f: f64 = ifs.active().map(|(m, p)| p * m.lipschitz().powf(s)).sum();
            (s, f, 0.0)
        })
        .collect();
    let mut csv = String::from("q,contraction_sum\n");
    for (s, f, _) in &scan {
        csv.push_str(&format!("{s:?},{f:?}\n"));
    }
    out.tables.push(("exponent_scan.csv".into(), csv));
    out.plots.push(("exponent_scan".into(), scan));
    Ok(out)
}

/// Stationary samples of the `(a, p)` model by forward chains from 0.
fn ap_samples(a: f64, p: f64, n: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
    let ifs = ap_model(a, p)?;
    let cert = certify_contraction(&ifs, 1.0, 0.0)?;
    let depth = mixing_depth(&cert, SAMPLE_BIAS)?;
    let s = sample_stationary(&ifs, &cert, n, depth, seed)?;
    Ok((s.samples, s.bias_bound))
}

fn run_exp_moment(a: f64, p: f64, b_values: &[f64], terms: usize, n: usize, seed: u64) -> Result<KindOutput> {
    let reports = b_values.iter().map(|&b| exp_moment_product(a, p, b, terms)).collect::<Result<Vec<_>>>()?;
    let (samples, bias) = ap_samples(a, p, n, seed)?;
    let mut out = KindOutput::default();
    let mut csv = String::from("b,product,truncation_bound,monte_carlo,std_error,uniform_bound,verdict\n");
    let mut plot = Vec::new();
    let mut rows = Vec::new();
    for r in &reports {
        let values: Vec<f64> = samples.iter().map(|x| (r.b * x).exp()).collect();
        let (mc, se) = crate::chaos::mean_and_se(&values);
        let bound = 3.0 * se + r.truncation_bound;
        let check = Check::new(
            format!("product b={:?}", r.b),
            Verdict::from_bool((mc - r.product_value).abs() <= bound),
            (mc - r.product_value).abs(),
            bound,
            0.0,
        );
        csv.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?},{}\n",
            r.b, r.product_value, r.truncation_bound, mc, se, r.uniform_bound, check.verdict
        ));
        plot.push((r.b, mc, 3.0 * se));
        rows.push(json!({ "report": r, "monte_carlo": mc, "std_error": se }));
        out.checks.push(check);
    }
    out.tables.push(("exp_moment.csv".into(), csv));
    out.plots.push(("exp_moment".into(), plot));
    out.plots.push((
        "exp_moment_product".into(),
        reports.iter().map(|r| (r.b, r.product_value, r.truncation_bound)).collect(),
    ));
    out.results = json!({ "a": a, "p": p, "samples": n, "sample_bias_w1": bias, "rows": rows });
    Ok(out)
}

fn run_tail(a: f64, p: f64, n: usize, t_max: usize, fit: [usize; 2], tol: f64, seed: u64) -> Result<KindOutput> {
    if !(fit[0] >= 1 && fit[0] < fit[1] && fit[1] <= t_max) {
        return Err(Error::InvalidParameter(format!("fit range {fit:?} must be increasing within [1, {t_max}]")));
    }
    let (samples, bias) = ap_samples(a, p, n, seed)?;
    let mut out = KindOutput::default();
    let mut csv = String::from("t,survival,std_error,upper_bound,verdict\n");
    let mut plot = Vec::new();
    let (mut ft, mut fy) = (Vec::new(), Vec::new());
    for t in 1..=t_max {
        let tf = t as f64;
        let (s, se) = rao_blackwell_survival(&samples, a, p, tf);
        let upper = tail_upper_bound(a, p, tf)?;
        let v = Verdict::from_bool(s <= upper);
        out.checks.push(Check::new(format!("upper t={t}"), v, s, upper, 0.0));
        csv.push_str(&format!("{t},{s:?},{se:?},{upper:?},{v}\n"));
        plot.push((tf, s, se));
        if (fit[0]..=fit[1]).contains(&t) {
            ft.push(tf);
            fy.push(s.ln());
        }
    }
    let fitted = slope(&ft, &fy);
    let target = (1.0 - p).ln();
    let dev = (fitted - target).abs();
    out.checks.push(Check::new("slope", Verdict::from_bool(dev <= tol * target.abs()), dev, tol * target.abs(), 0.0));
    out.tables.push(("tail.csv".into(), csv));
    out.plots.push(("tail".into(), plot));
    out.results = json!({ "a": a, "p": p, "samples": n, "sample_bias_w1": bias, "slope": fitted, "log_one_minus_p": target, "fit_range": fit });
    Ok(out)
}

fn run_response(
    lambdas: &[f64],
    functions: &[String],
    hs: &[f64],
    q: f64,
    solver: &SolverParams,
) -> Result<KindOutput> {
    let mut cache = BernoulliSolveCache::new(q, solver.options())?;
    let mut out = KindOutput::default();
    let mut csv = String::from("function,lambda,h,estimate,error_bar,exact\n");
    let mut reports = Vec::new();
    for name in functions {
        let (f, exact): (TestFunction, fn(f64) -> f64) = match name.as_str() {
            "x" => (TestFunction::identity(), bernoulli_mean_derivative),
            "x^2" => (TestFunction::square(), bernoulli_second_moment_derivative),
            other => return Err(Error::InvalidInput(format!("unknown test function `{other}`; use x or x^2"))),
        };
        let mut plot = Vec::new();
        for &lambda in lambdas {
            let r = cache.finite_difference(&f, lambda, hs)?;
            let d = exact(lambda);
            for row in &r.rows {
                csv.push_str(&format!("{name},{lambda:?},{:?},{:?},{:?},{d:?}\n", row.h, row.estimate, row.error_bar));
            }
            let dev = (r.estimate - d).abs();
            let v = if r.status == crate::response::DerivativeStatus::Inconsistent {
                Verdict::Fail
            } else {
                Verdict::from_bool(dev <= r.error_bar)
            };
            out.checks.push(Check::new(format!("derivative f={name} lambda={lambda:?}"), v, dev, r.error_bar, 0.0));
            plot.push((lambda, r.estimate, r.error_bar));
            reports.push(json!({ "report": r, "exact": d }));
        }
        let series = if name == "x" { "response_x".to_string() } else { "response_x2".to_string() };
        out.plots.push((series, plot));
    }
    out.tables.push(("derivative.csv".into(), csv));
    out.results = json!({ "q": q, "reports": reports });
    Ok(out)
}

fn random_measure(rng: &mut impl Rng, max_atoms: usize) -> Result<DiscreteMeasure> {
    let n = rng.gen_range(1..=max_atoms);
    // a coarse lattice half of the time, so that ties and shared atoms occur
    let lattice = rng.gen_bool(0.5);
    let atoms: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let x = if lattice { (x * 8.0).round() / 8.0 } else { x };
            (x, rng.gen_range(0.01..1.0))
        })
        .collect();
    DiscreteMeasure::new(atoms)
}

fn run_transport_selftest(pairs: usize, max_atoms: usize, qs: &[f64], seed: u64) -> Result<KindOutput> {
    if pairs == 0 || max_atoms == 0 || qs.iter().any(|&q| !(q >= 1.0)) {
        return Err(Error::InvalidParameter("need pairs >= 1, max_atoms >= 1 and every q >= 1".into()));
    }
    // (pair, q, atoms0, atoms1, monotone, flow)
    type Row = (usize, f64, usize, usize, f64, f64);
    let rows: Vec<Vec<Row>> = (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(seed, i);
            let m0 = random_measure(&mut rng, max_atoms)?;
            let m1 = random_measure(&mut rng, max_atoms)?;
            qs.iter()
                .map(|&q| {
                    let mono = wq_1d_monotone(&m0, &m1, q)?.cost;
                    let flow = wq_exact_flow(&m0, &m1, q)?.cost;
                    Ok((i as usize, q, m0.len(), m1.len(), mono, flow))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = KindOutput::default();
    let mut csv = String::from("pair,q,atoms0,atoms1,monotone_cost,flow_cost,normalized_gap\n");
    let mut worst = vec![0.0f64; qs.len()];
    let mut plot = Vec::new();
    for pair in &rows {
        for (j, &(i, q, n0, n1, mono, flow)) in pair.iter().enumerate() {
            let gap = (mono - flow).abs() / (1.0 + mono);
            worst[j] = worst[j].max(gap);
            csv.push_str(&format!("{i},{q:?},{n0},{n1},{mono:?},{flow:?},{gap:?}\n"));
            plot.push((mono, flow, 0.0));
        }
    }
    for (j, &q) in qs.iter().enumerate() {
        out.checks.push(Check::new(
            format!("monotone=flow q={q:?}"),
            Verdict::from_bool(worst[j] <= 1e-9),
            worst[j],
            1e-9,
            0.0,
        ));
    }
    out.tables.push(("transport_selftest.csv".into(), csv));
    out.plots.push(("transport_selftest".into(), plot));
    out.results = json!({ "pairs": pairs, "max_atoms": max_atoms, "qs": qs, "max_normalized_gap": worst });
    Ok(out)
}
