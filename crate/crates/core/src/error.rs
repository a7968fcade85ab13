use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for a graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),

    #[error("graph has no observed dyads")]
    NoObservedDyads,

    #[error("graph has no missing dyads")]
    NoMissingDyads,

    #[error("graph has {0} missing dyads; this estimator needs a fully observed network")]
    HasMissingDyads(usize),

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown term `{name}` at position {pos}")]
    UnknownTerm { name: String, pos: usize },

    #[error("unknown argument `{key}` for term `{term}`")]
    UnknownArgument { term: String, key: String },

    #[error("invalid argument for term `{term}`: {msg}")]
    InvalidTermArgument { term: String, msg: String },

    #[error("model dimension {0} < 2: at least two statistics are required")]
    ModelDimension(usize),

    #[error("attribute `{0}` not found on the network")]
    MissingAttribute(String),

    #[error("term `{term}` cannot be used on {} networks", if *.directed { "directed" } else { "undirected" })]
    Directedness { term: String, directed: bool },

    #[error("term `{term}` has no levels left to model")]
    EmptyLevels { term: String },

    #[error("level `{level}` not observed for attribute `{attr}`")]
    UnknownLevel { attr: String, level: String },

    #[error("expected {expected} offset coefficients, got {got}")]
    OffsetCount { expected: usize, got: usize },

    #[error("offset coefficients must be finite; use an extreme finite value instead")]
    NonFiniteOffset,

    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch { what: String, expected: usize, got: usize },

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("complete separation: coefficient `{coordinate}` diverges")]
    Separation { coordinate: String },

    #[error("rank-deficient design; collinear terms: {}", .terms.join(", "))]
    RankDeficient { terms: Vec<String> },

    #[error("exact enumeration over {dyads} dyads exceeds the limit of {limit}")]
    TooLarge { dyads: usize, limit: usize },

    #[error("singular simulated statistic covariance")]
    SingularCovariance,

    #[error("no proposals accepted {0}; retune the proposal scale")]
    ZeroAcceptance(String),

    #[error("invalid setting: {0}")]
    InvalidSetting(String),

    #[error("parse error in {source_name} line {line}: {msg}")]
    Input { source_name: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category used by the command-line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::NodeOutOfRange { .. } | Error::SelfLoop(_) | Error::Input { .. } => "input",
            Error::Syntax { .. }
            | Error::UnknownTerm { .. }
            | Error::UnknownArgument { .. }
            | Error::InvalidTermArgument { .. } => "parse",
            Error::ModelDimension(_)
            | Error::MissingAttribute(_)
            | Error::Directedness { .. }
            | Error::EmptyLevels { .. }
            | Error::UnknownLevel { .. }
            | Error::OffsetCount { .. }
            | Error::NonFiniteOffset => "model",
            Error::DimensionMismatch { .. } => "dimension",
            Error::NoObservedDyads | Error::NoMissingDyads | Error::HasMissingDyads(_) => "data",
            Error::NotPositiveDefinite(_) | Error::NonFinite(_) | Error::SingularCovariance => {
                "numeric"
            }
            Error::Separation { .. } | Error::RankDeficient { .. } => "estimation",
            Error::TooLarge { .. } | Error::InvalidSetting(_) => "settings",
            Error::ZeroAcceptance(_) => "sampler",
            Error::Io(_) => "io",
        }
    }
}
