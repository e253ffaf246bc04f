use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("support too large for exact transport ({cells} cells > cap {cap}); use Monte-Carlo")]
    UseMonteCarlo { cells: usize, cap: usize },
    #[error("cylinder depth {len} exceeds cap {cap}; use the sampler")]
    UseSampler { len: usize, cap: usize },
    #[error("not a subsequence: image of letter {0}")]
    NotSubsequence(usize),
    #[error("tail budget violated at level {level}: |t| = {len} > {budget}")]
    TailBudget { level: usize, len: usize, budget: String },
    #[error("disjointness violated: {0:?} is a prefix of {1:?}")]
    NotDisjoint(Vec<usize>, Vec<usize>),
    #[error("search budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("tail not found: {reason}")]
    TailNotFound { reason: String, best: Vec<usize> },
    #[error("CIFS condition ({condition}) fails for {word:?} at θ = {x}: {value} vs bound {bound}")]
    CifsCondition { condition: String, word: Vec<usize>, x: f64, value: f64, bound: f64 },
    #[error("window exhausted")]
    WindowExhausted,
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("missing outputs: {0}")]
    MissingOutputs(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
