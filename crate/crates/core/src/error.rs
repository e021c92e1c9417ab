use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a metric: {reason} at ({i}, {j}, {k})")]
    NotAMetric {
        reason: &'static str,
        i: usize,
        j: usize,
        k: usize,
    },

    #[error("trajectory does not cover coordinates {need_from}..={need_to} (covers {have_from}..={have_to})")]
    InsufficientWindow {
        need_from: i64,
        need_to: i64,
        have_from: i64,
        have_to: i64,
    },

    #[error("product of {left} and {right} points exceeds the cap of {cap}")]
    SizeOverflow { left: usize, right: usize, cap: usize },

    #[error("no chain of length {length} from {from} to {to}")]
    NoChain { from: usize, to: usize, length: usize },

    #[error("bad horizon: {0}")]
    BadHorizon(String),

    #[error("chain graph is not mixing (strongly connected: {strongly_connected}, period: {period})")]
    NotMixing { strongly_connected: bool, period: usize },

    #[error("segment {segment}: gap {gap} before it is below the spacing constant {required}")]
    InsufficientSpacing {
        segment: usize,
        gap: i64,
        required: i64,
    },

    #[error("segment {segment}: source does not cover the margin window {from}..={to}")]
    InsufficientMargin { segment: usize, from: i64, to: i64 },

    #[error("segment {segment}: source is not a chain at coordinate {coordinate}")]
    NotAChain { segment: usize, coordinate: i64 },

    #[error("component {component}: weight rounds to zero blocks at scale {scale}")]
    DegenerateWeights { component: usize, scale: usize },

    #[error("cylinder depth mismatch: requested {requested}, available {available}")]
    DepthMismatch { requested: usize, available: usize },

    #[error("empty set")]
    EmptySet,

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("solver hit its iteration cap of {0}")]
    SolverIterationCap(usize),

    #[error("problem dimension {size} exceeds the cap of {cap}")]
    DimensionCap { size: usize, cap: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
