//! Experiment runner behind the `ifslab` binary.
//!
//! A run reads an [`ExperimentSpec`], inlines its model files, fills in the
//! seed and writes `spec.json`, kind-specific CSV tables, `plotdata_*.csv`
//! files and `summary.json` into the output directory. Verdicts come from the
//! library checks unchanged.

mod config;
mod run;
mod validate;

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::Error;
use crate::verdict::Verdict;

pub use config::{
    AffineMapConfig, AffineModelConfig, Experiment, ExperimentSpec, FamilyConfig, IidCheckConfig, ModelConfig,
    SolverParams, Source, KINDS,
};
pub use run::{run_experiment, KindOutput};
pub use validate::{validate_config, validate_str, Diagnostic};

/// Exit code of a run with no FAIL verdict.
pub const EXIT_OK: i32 = 0;
/// Exit code of a run with at least one FAIL verdict.
pub const EXIT_FAIL: i32 = 1;
/// Exit code for an invalid spec.
pub const EXIT_INVALID: i32 = 2;

/// One inequality or predicate checked by a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
}

impl Check {
    pub fn inequality(name: impl Into<String>, measured: f64, bound: f64, slack: f64) -> Self {
        Self { name: name.into(), verdict: Verdict::for_inequality(measured, bound, slack), measured, bound, slack }
    }

    pub fn new(name: impl Into<String>, verdict: Verdict, measured: f64, bound: f64, slack: f64) -> Self {
        Self { name: name.into(), verdict, measured, bound, slack }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub kind: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub results: Value,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Summary {
    pub fn exit_code(&self) -> i32 {
        if self.verdict == Verdict::Fail {
            EXIT_FAIL
        } else {
            EXIT_OK
        }
    }
}

/// Rejected spec, reported as JSON on stdout with exit code 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecError {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl SpecError {
    fn new(message: impl Into<String>, path: Option<String>) -> Self {
        Self { error: "invalid-spec", message: message.into(), path }
    }

    fn from_error(e: Error) -> Self {
        match e {
            Error::Io { path, source } => Self::new(format!("cannot read {path}: {source}"), Some(path)),
            other => Self::new(other.to_string(), None),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

/// Settings given on the command line; they take precedence over the spec.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub atoms: Option<usize>,
    pub target_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub summary: Summary,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code()
    }
}

/// Errors that mean the spec itself is unusable, as opposed to a check that
/// could not be carried out.
fn is_spec_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidInput(_)
            | Error::InvalidModel(_)
            | Error::InvalidParameter(_)
            | Error::InvalidExponent(_)
            | Error::InvalidMeasure(_)
            | Error::UnsupportedExponent(_)
            | Error::UnsupportedMapKind(_)
            | Error::EmptyConditional { .. }
            | Error::Io { .. }
            | Error::Json(_)
    )
}

/// Verdict for a run stopped by a library error: approximation limits are
/// inconclusive, failed hypotheses are failures.
fn error_verdict(e: &Error) -> Verdict {
    match e {
        Error::ReferenceTooCoarse { .. } | Error::TargetUnreachable(_) | Error::InstanceTooLarge { .. } => {
            Verdict::Inconclusive
        }
        _ => Verdict::Fail,
    }
}

/// Parses, resolves and runs the spec at `path`.
pub fn run_spec_file(path: &Path, overrides: &RunOverrides) -> Result<RunOutcome, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        SpecError::new(format!("cannot read {}: {e}", path.display()), Some(path.display().to_string()))
    })?;
    let spec = ExperimentSpec::from_json_str(&text).map_err(SpecError::from_error)?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    run_spec(spec, base_dir, overrides)
}

/// Runs a parsed spec whose model paths are relative to `base_dir`.
pub fn run_spec(mut spec: ExperimentSpec, base_dir: &Path, overrides: &RunOverrides) -> Result<RunOutcome, SpecError> {
    spec.resolve_models(base_dir).map_err(SpecError::from_error)?;
    spec.override_solver(overrides.atoms, overrides.target_error);
    let seed = overrides.seed.or(spec.seed).unwrap_or_else(rand::random);
    spec.seed = Some(seed);
    let out_dir = match (&overrides.out_dir, &spec.out_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => base_dir.join(d),
        (None, None) => PathBuf::from(format!("ifslab-out/{}-{seed}", spec.experiment.kind())),
    };
    if overrides.out_dir.is_some() || spec.out_dir.is_none() {
        spec.out_dir = Some(out_dir.display().to_string());
    }

    let (verdict, output, error) = match run_experiment(&spec.experiment, seed) {
        Ok(out) => {
            let v = out.checks.iter().fold(Verdict::Pass, |acc, c| acc.combine(c.verdict));
            (v, out, None)
        }
        Err(e) if is_spec_error(&e) => return Err(SpecError::from_error(e)),
        Err(e) => {
            let v = error_verdict(&e);
            let mut out = KindOutput::default();
            if let Error::TargetUnreachable(r) = &e {
                out.results = run::solve_results(r);
            }
            out.checks.push(Check::new("run", v, f64::NAN, f64::NAN, f64::NAN));
            (v, out, Some(e.to_string()))
        }
    };

    let io = |p: &Path, e: std::io::Error| {
        SpecError::new(format!("cannot write {}: {e}", p.display()), Some(p.display().to_string()))
    };
    std::fs::create_dir_all(&out_dir).map_err(|e| io(&out_dir, e))?;
    let mut files = vec!["spec.json".to_string()];
    let write = |name: &str, contents: &str| -> Result<(), SpecError> {
        let p = out_dir.join(name);
        std::fs::write(&p, contents).map_err(|e| io(&p, e))
    };
    write("spec.json", &(spec.to_json_string() + "\n"))?;
    for (name, csv) in &output.tables {
        write(name, csv)?;
        files.push(name.clone());
    }
    for (name, rows) in &output.plots {
        let file = format!("plotdata_{name}.csv");
        write(&file, &plot_csv(rows))?;
        files.push(file);
    }
    files.push("summary.json".into());
    let summary = Summary {
        kind: spec.experiment.kind().into(),
        seed,
        verdict,
        checks: output.checks,
        results: output.results,
        files,
        error,
    };
    write("summary.json", &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    Ok(RunOutcome { out_dir, summary })
}

fn plot_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("x,y,yerr\n");
    for (x, y, e) in rows {
        out.push_str(&format!("{x:?},{y:?},{e:?}\n"));
    }
    out
}

/// Small built-in specs exercising transport, the solver and skew
/// certification.
pub fn selftest_specs() -> Vec<ExperimentSpec> {
    let specs = [
        r#"{"kind": "transport-selftest", "pairs": 100, "max_atoms": 30}"#,
        r#"{"kind": "solve", "model": {"family": "bernoulli", "lambda": 0.5}, "solver": {"atoms": 1024, "target_error": 2e-3}}"#,
        r#"{"kind": "certify", "model": {"maps": [{"a": 0.5, "b": 0, "p": 0.5}, {"a": -0.9, "b": 1, "p": 0.5}]}}"#,
        r#"{"kind": "skew-converge", "model": {"base": {"kind": "rotation"}, "fiber": {"kind": "trig", "a": {"constant": 0.5}, "b": {"cos": [1.0]}}}, "k_grid": [1, 2, 3, 4, 5, 6], "realizations": 2000}"#,
    ];
    specs.iter().map(|s| ExperimentSpec::from_json_str(s).expect("built-in spec parses")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_mapping() {
        assert!(is_spec_error(&Error::InvalidModel("x".into())));
        assert!(!is_spec_error(&Error::NotFiberContracting(1.2)));
        assert_eq!(error_verdict(&Error::ReferenceTooCoarse { ledger: 1.0, smallest: 1.0 }), Verdict::Inconclusive);
        assert_eq!(error_verdict(&Error::NotContractingAtThisExponent { q: 1.0, rho: 1.5 }), Verdict::Fail);
    }

    #[test]
    fn missing_model_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::from_json_str(r#"{"kind": "solve", "model": "nowhere.json"}"#).unwrap();
        let err = run_spec(spec, dir.path(), &RunOverrides::default()).unwrap_err();
        assert!(err.path.unwrap().ends_with("nowhere.json"));
        assert_eq!(err.error, "invalid-spec");
    }

    #[test]
    fn solve_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::from_json_str(
            r#"{"kind": "solve", "model": {"family": "bernoulli", "lambda": 0.5}, "solver": {"atoms": 1024, "target_error": 2e-3}}"#,
        )
        .unwrap();
        let o = RunOverrides { out_dir: Some(dir.path().join("out")), seed: Some(1), ..Default::default() };
        let out = run_spec(spec, dir.path(), &o).unwrap();
        assert_eq!(out.exit_code(), EXIT_OK);
        let ledger = out.summary.results["total_error_bound"].as_f64().unwrap();
        assert!(ledger <= 2e-3);
        for f in &out.summary.files {
            assert!(out.out_dir.join(f).exists(), "{f}");
        }
        let recorded = std::fs::read_to_string(out.out_dir.join("spec.json")).unwrap();
        assert_eq!(ExperimentSpec::from_json_str(&recorded).unwrap().seed, Some(1));
    }

    #[test]
    fn unreachable_target_is_inconclusive() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::from_json_str(
            r#"{"kind": "solve", "model": {"family": "bernoulli", "lambda": 0.9}, "solver": {"atoms": 4, "target_error": 1e-9}}"#,
        )
        .unwrap();
        let o = RunOverrides { out_dir: Some(dir.path().to_path_buf()), seed: Some(1), ..Default::default() };
        let out = run_spec(spec, dir.path(), &o).unwrap();
        assert_eq!(out.summary.verdict, Verdict::Inconclusive);
        assert_eq!(out.exit_code(), EXIT_OK);
        assert!(out.summary.error.is_some());
    }

    #[test]
    fn builtin_selftest_specs_parse() {
        assert_eq!(selftest_specs().len(), 4);
    }
}
