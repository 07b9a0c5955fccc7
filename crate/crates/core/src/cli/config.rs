use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::{ap_model, heavy_tail_ifs, IfsModel, TailLaw};
use crate::response::bernoulli_ifs;
use crate::skew::SkewModel;
use crate::stationary::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMapConfig {
    #[serde(default = "affine_kind")]
    pub kind: String,
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

fn affine_kind() -> String {
    "affine".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineModelConfig {
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub x0: f64,
    pub maps: Vec<AffineMapConfig>,
}

/// Parametric families built in code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilyConfig {
    Bernoulli { lambda: f64 },
    Ap { a: f64, p: f64 },
    HeavyTail { a: f64, p0: f64, tail: TailLaw, n_max: usize },
}

/// An IFS model file: a list of affine maps, or a named family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Family(FamilyConfig),
    Affine(AffineModelConfig),
}

impl ModelConfig {
    pub fn build(&self) -> Result<IfsModel> {
        match self {
            ModelConfig::Family(FamilyConfig::Bernoulli { lambda }) => bernoulli_ifs(*lambda),
            ModelConfig::Family(FamilyConfig::Ap { a, p }) => ap_model(*a, *p),
            ModelConfig::Family(FamilyConfig::HeavyTail { a, p0, tail, n_max }) => {
                heavy_tail_ifs(*a, *p0, tail, *n_max)
            }
            ModelConfig::Affine(c) => {
                if let Some(m) = c.maps.iter().find(|m| m.kind != "affine") {
                    return Err(Error::InvalidModel(format!("map kind `{}` is not supported in model files", m.kind)));
                }
                let maps: Vec<(f64, f64, f64)> = c.maps.iter().map(|m| (m.a, m.b, m.p)).collect();
                IfsModel::affine(c.label.clone(), &maps, c.x0)
            }
        }
    }
}

/// A model given inline or as a path relative to the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(String),
    Inline(T),
}

impl<T: for<'de> Deserialize<'de> + Clone> Source<T> {
    /// Reads path sources and returns the inline form.
    pub fn resolve(&self, base_dir: &Path) -> Result<Source<T>> {
        match self {
            Source::Inline(_) => Ok(self.clone()),
            Source::Path(p) => {
                let path = base_dir.join(p);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let value: T =
                    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
                Ok(Source::Inline(value))
            }
        }
    }

    pub fn inline(&self) -> Result<&T> {
        match self {
            Source::Inline(v) => Ok(v),
            Source::Path(p) => Err(Error::InvalidInput(format!("model path {p} was not resolved"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub atoms: usize,
    pub target_error: f64,
    pub max_iterations: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { atoms: d.max_atoms, target_error: d.target_error, max_iterations: d.max_iterations }
    }
}

impl SolverParams {
    pub fn options(&self) -> SolverOptions {
        SolverOptions { max_atoms: self.atoms, target_error: self.target_error, max_iterations: self.max_iterations }
    }
}

fn one() -> f64 {
    1.0
}
fn reference_solver() -> SolverParams {
    SolverParams { atoms: 8192, target_error: 2e-5, ..SolverParams::default() }
}
fn ergodicity_slope() -> [f64; 2] {
    [-0.6, -0.4]
}
fn product_terms() -> usize {
    64
}
fn million() -> usize {
    1_000_000
}
fn t_max() -> usize {
    30
}
fn tail_fit() -> [usize; 2] {
    [10, 25]
}
fn five_percent() -> f64 {
    0.05
}
fn skew_margin() -> usize {
    50
}
fn ten() -> usize {
    10
}
fn selftest_pairs() -> usize {
    500
}
fn selftest_atoms() -> usize {
    50
}
fn selftest_qs() -> Vec<f64> {
    vec![1.0, 1.5, 2.0, 3.0]
}
fn default_functions() -> Vec<String> {
    vec!["x".into(), "x^2".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidCheckConfig {
    pub model: Source<ModelConfig>,
    pub k: usize,
    pub realizations: usize,
    #[serde(default)]
    pub x_start: f64,
}

/// Kind-specific experiment parameters.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Solve {
        model: Source<ModelConfig>,
        #[serde(default = "one")]
        q: f64,
        #[serde(default)]
        solver: SolverParams,
    },
    /// Certifies at `q`, or searches for an exponent when `q` is absent.
    Certify {
        model: Source<ModelConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<f64>,
    },
    Ergodicity {
        model: Source<ModelConfig>,
        n_grid: Vec<usize>,
        chains: usize,
        #[serde(default)]
        x_start: f64,
        #[serde(default)]
        burn_in: usize,
        #[serde(default = "reference_solver")]
        reference: SolverParams,
        #[serde(default = "ergodicity_slope")]
        slope_range: [f64; 2],
    },
    ExpMoment {
        a: f64,
        p: f64,
        b_values: Vec<f64>,
        #[serde(default = "product_terms")]
        terms: usize,
        #[serde(default = "million")]
        samples: usize,
    },
    Tail {
        a: f64,
        p: f64,
        #[serde(default = "million")]
        samples: usize,
        #[serde(default = "t_max")]
        t_max: usize,
        #[serde(default = "tail_fit")]
        fit_range: [usize; 2],
        #[serde(default = "five_percent")]
        slope_tolerance: f64,
    },
    Lipschitz {
        lambdas: Vec<f64>,
        h: f64,
        qs: Vec<f64>,
        #[serde(default)]
        solver: SolverParams,
    },
    Closeness {
        model0: Source<ModelConfig>,
        model1: Source<ModelConfig>,
        q: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        solver: SolverParams,
    },
    Response {
        lambdas: Vec<f64>,
        #[serde(default = "default_functions")]
        functions: Vec<String>,
        h_schedule: Vec<f64>,
        #[serde(default = "one")]
        q: f64,
        #[serde(default)]
        solver: SolverParams,
    },
    SkewConverge {
        model: Source<SkewModel>,
        #[serde(default = "one")]
        q: f64,
        k_grid: Vec<usize>,
        realizations: usize,
        #[serde(default)]
        x_start: f64,
        #[serde(default = "five_percent")]
        slope_tolerance: f64,
        #[serde(default = "skew_margin")]
        margin: usize,
        #[serde(default = "ten")]
        batches: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bins: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        iid_check: Option<IidCheckConfig>,
    },
    TransportSelftest {
        #[serde(default = "selftest_pairs")]
        pairs: usize,
        #[serde(default = "selftest_atoms")]
        max_atoms: usize,
        #[serde(default = "selftest_qs")]
        qs: Vec<f64>,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Solve { .. } => "solve",
            Experiment::Certify { .. } => "certify",
            Experiment::Ergodicity { .. } => "ergodicity",
            Experiment::ExpMoment { .. } => "exp-moment",
            Experiment::Tail { .. } => "tail",
            Experiment::Lipschitz { .. } => "lipschitz",
            Experiment::Closeness { .. } => "closeness",
            Experiment::Response { .. } => "response",
            Experiment::SkewConverge { .. } => "skew-converge",
            Experiment::TransportSelftest { .. } => "transport-selftest",
        }
    }
}

pub const KINDS: [&str; 10] = [
    "solve",
    "certify",
    "ergodicity",
    "exp-moment",
    "tail",
    "lipschitz",
    "closeness",
    "response",
    "skew-converge",
    "transport-selftest",
];

/// An experiment with its seed and output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl ExperimentSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Inlines every model file, reading paths relative to `base_dir`.
    pub fn resolve_models(&mut self, base_dir: &Path) -> Result<()> {
        match &mut self.experiment {
            Experiment::Solve { model, .. }
            | Experiment::Certify { model, .. }
            | Experiment::Ergodicity { model, .. } => {
                *model = model.resolve(base_dir)?;
            }
            Experiment::Closeness { model0, model1, .. } => {
                *model0 = model0.resolve(base_dir)?;
                *model1 = model1.resolve(base_dir)?;
            }
            Experiment::SkewConverge { model, iid_check, .. } => {
                *model = model.resolve(base_dir)?;
                if let Some(c) = iid_check {
                    c.model = c.model.resolve(base_dir)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Applies command-line overrides of the solver settings.
    pub fn override_solver(&mut self, atoms: Option<usize>, target_error: Option<f64>) {
        let apply = |s: &mut SolverParams| {
            if let Some(a) = atoms {
                s.atoms = a;
            }
            if let Some(t) = target_error {
                s.target_error = t;
            }
        };
        match &mut self.experiment {
            Experiment::Solve { solver, .. }
            | Experiment::Lipschitz { solver, .. }
            | Experiment::Closeness { solver, .. }
            | Experiment::Response { solver, .. } => apply(solver),
            Experiment::Ergodicity { reference, .. } => apply(reference),
            _ => {}
        }
    }
}
