use thiserror::Error;

use crate::filtration::AtomId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("depth {depth} outside the supported range 1..={max}")]
    DepthOutOfRange { depth: usize, max: usize },
    #[error("regularity parameter {0} outside (0, 1/2]")]
    DeltaOutOfRange(f64),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("rejection sampling budget of {0} draws exceeded")]
    RejectionBudget(usize),
    #[error("malformed filtration: {0}")]
    MalformedFiltration(String),
    #[error("atom {0} does not belong to the filtration")]
    UnknownAtom(AtomId),
    #[error("atom set is not a partition of the filtration's interval")]
    ForeignPartition,
    #[error("objects live on different filtrations")]
    FiltrationMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exponent p = {0} outside (1, 2]")]
    ExponentOutOfRange(f64),
    #[error("multiplier at level {level} is not constant on atom {atom}")]
    NotPredictable { level: usize, atom: AtomId },
    #[error("multiplier at level {level} has norm {norm} > 1 on atom {atom}")]
    MultiplierTooLarge { level: usize, atom: AtomId, norm: f64 },
    #[error("multiplier level {0} outside 1..=depth")]
    MultiplierLevel(usize),
    #[error("operator norm {0} exceeds 1 (construction bug)")]
    NormCheck(f64),
    #[error("operator matrix with {0} entries exceeds the desk-scale limit")]
    TooLarge(usize),
    #[error("point outside Ω_p: {0}")]
    OutsideDomain(String),
    #[error("invalid split configuration: {0}")]
    InvalidConfig(String),
    #[error("weights are not dyadic rationals with denominator at most 2^16")]
    NonDyadic,
    #[error("candidate is not in K^p_{{1/2}}: {0}")]
    NotInBaseClass(String),
    #[error("no rescaling constant up to {0} makes the candidate pass")]
    NoRescaleConstant(f64),
    #[error("candidate claims delta {claimed} but the filtration only has {actual}")]
    DeltaExceeds { claimed: f64, actual: f64 },
    #[error("non-positive argument: {0}")]
    NonPositive(&'static str),
    #[error("candidate does not have the C_p(x3 + x4) - h shape")]
    NotShaped,
    #[error("candidate failed certification: {0}")]
    CertificationFailed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
