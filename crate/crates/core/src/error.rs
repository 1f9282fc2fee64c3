use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("record {record}: expected {expected} endpoints, found {found}")]
    MixedEndpoints {
        record: usize,
        expected: usize,
        found: usize,
    },

    #[error("unknown group label `{0}`")]
    UnknownGroup(String),

    #[error("invalid outcome value `{0}` (expected 0 or 1)")]
    InvalidOutcome(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("{k} endpoints exceed the configured limit of {limit}")]
    TooManyEndpoints { k: usize, limit: usize },

    #[error("endpoint subset is empty or out of range for k = {k}")]
    BadSubset { k: usize },

    #[error("support enumeration exceeds the cap of {cap} vectors")]
    SupportTooLarge { cap: u64 },

    #[error("statistic {0:?} is not in the support")]
    NotInSupport(Vec<u32>),

    #[error("power objective requires alternative masses on the distribution")]
    MissingAlternative,

    #[error("objective `{0}` has no linear form")]
    NonLinearObjective(String),

    #[error("correlation {rho} is infeasible for the given rates; feasible range is [{lo}, {hi}]")]
    InfeasibleCorrelation { rho: f64, lo: f64, hi: f64 },

    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    #[error("invalid alpha `{0}`: expected a decimal in [0, 1]")]
    InvalidAlpha(String),

    #[error("unsupported consonance mode: {0}")]
    UnsupportedConsonance(String),

    #[error("invalid method spec: {0}")]
    InvalidMethod(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
