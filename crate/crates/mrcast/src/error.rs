use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// Some symbol carries target mass where the proposal prior has none,
    /// so the importance ratio would be infinite.
    #[error("support violation: {0}")]
    SupportViolation(String),

    /// All importance ratios in a proposal list are zero; no index can be
    /// selected. This is a configuration fault, not a resampling trigger.
    #[error("degenerate weights: every proposal has zero target mass (normalizer = 0)")]
    DegenerateWeights,

    #[error("block {block} has zero mass under {context}")]
    ZeroBlockMass { block: usize, context: String },

    #[error("index {index} out of range [1..{n}]")]
    IndexOutOfRange { index: usize, n: usize },

    #[error(
        "rejection cap {cap} exceeded while collecting {needed} samples from block {block} \
         (block mass may be too small for the configured counts)"
    )]
    RejectionCapExceeded { cap: u64, needed: usize, block: usize },

    #[error("enumeration infeasible: {summands} summands exceeds ceiling {ceiling}")]
    InfeasibleEnumeration { summands: u128, ceiling: u128 },

    #[error("decoder targets disagree on the block marginal: {0}")]
    BlockTargetMismatch(String),

    #[error("reports describe different runs: {0}")]
    MismatchedScenario(String),

    #[error("invalid scenario ({rule}): {detail}")]
    InvalidScenario { rule: String, detail: String },

    #[error("degenerate configuration: {0}")]
    DegenerateConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_scenario(rule: &str, detail: impl Into<String>) -> Self {
        Error::InvalidScenario {
            rule: rule.to_string(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
