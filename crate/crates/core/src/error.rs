use thiserror::Error;

use crate::stationary::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exponent q = {0} is not supported by the monotone solver (requires q >= 1)")]
    UnsupportedExponent(f64),

    #[error("transport instance too large: {atoms} atoms exceeds the cap of {cap}")]
    InstanceTooLarge { atoms: usize, cap: usize },

    #[error("test function violates its declared Lipschitz constant {declared} (observed slope {observed})")]
    InconsistentTestFunction { declared: f64, observed: f64 },

    #[error("map distance not evaluable: {0}")]
    UnsupportedMapKind(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("not contracting at exponent q = {q}: rho = {rho} >= 1")]
    NotContractingAtThisExponent { q: f64, rho: f64 },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("target error unreachable: best bound {:.3e} after {} iterations", .0.total_error_bound, .0.iterations)]
    TargetUnreachable(Box<SolveReport>),

    #[error("drift hypothesis fails at {} support point(s), first at x = {:?}", .witnesses.len(), .witnesses.first())]
    HypothesisFailed { witnesses: Vec<f64> },

    #[error("exponential moment diverges: b = {b} >= log(1/(1-p)) = {limit}")]
    DivergentMoment { b: f64, limit: f64 },

    #[error("reference ledger {ledger:.3e} exceeds 10% of the smallest measured error {smallest:.3e}")]
    ReferenceTooCoarse { ledger: f64, smallest: f64 },

    #[error("no certified invariant interval: {0}")]
    NoInvariantDomain(String),

    #[error("cannot certify contraction: {0}")]
    CannotCertify(String),

    #[error("skew product does not contract fibers: rho = {0} >= 1")]
    NotFiberContracting(f64),

    #[error("bin {bin} has mass in one ensemble only; reduce the bin count")]
    EmptyConditional { bin: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
