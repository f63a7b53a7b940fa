use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scale exceeded for {what}: {size} > cap {cap}")]
    ScaleExceeded {
        what: &'static str,
        size: u128,
        cap: u128,
    },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("level {level} out of range for depth-{depth} address space")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("arity mismatch: expected {expected} variables, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
    #[error("missing block structure: {0}")]
    MissingBlockStructure(String),
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: usize, right: usize },
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("infeasible parameters at k = {k}: {reason}")]
    Infeasible { k: usize, reason: String },
    #[error("precision insufficient: {0}")]
    PrecisionInsufficient(String),
    #[error("infeasible toy parameters: {0}")]
    InfeasibleToyParams(String),
    #[error("q_a = {value} for block {block} lies outside [0, 1 - lambda]")]
    InvalidQa { block: usize, value: String },
    #[error("structural mismatch: {0}")]
    StructuralMismatch(String),
    #[error("restriction is not bad: canonical tree depth {depth} < s = {s}")]
    NotBad { depth: usize, s: usize },
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("canonical tree recursion exceeded depth cap {cap}")]
    DepthCapExceeded { cap: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
