use thiserror::Error;

#[derive(Debug, Error)]
pub enum GclabError {
    #[error("point {re}+{im}i lies outside the open unit disk")]
    OutsideDisk { re: f64, im: f64 },

    #[error("group ball exceeds the configured cap of {cap} elements")]
    BallTooLarge { cap: usize },

    #[error("domain reduction did not terminate after {0} steps")]
    ReductionDiverged(usize),

    #[error("degenerate chart triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("basis rank {found} is below the required dimension {required}")]
    RankDeficient { found: usize, required: usize },

    #[error("all basis differentials vanish at the probe point")]
    BasePoint,

    #[error("operation requires kappa = {required}, basis has kappa = {found}")]
    KappaUnsupported { required: u32, found: u32 },

    #[error("zero search inconclusive: {0}")]
    Inconclusive(String),

    #[error("singular weighted Gram matrix")]
    SingularGram,

    #[error("exponential overflow: max |u| = {0}")]
    Overflow(f64),

    #[error("linear solver failure: {0}")]
    Factorization(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient records: need {need}, got {got}")]
    InsufficientRecords { need: usize, got: usize },

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GclabError> = std::result::Result<T, E>;
