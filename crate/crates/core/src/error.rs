use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty document")]
    EmptyDocument,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no embeddable tokens")]
    NoEmbeddableTokens,
    #[error("word not in vocabulary: {0}")]
    OutOfVocabulary(String),
    #[error("infeasible marginals: supplies sum to {supply}, demands sum to {demand}")]
    InfeasibleMarginals { supply: f64, demand: f64 },
    #[error("negative cost {value} at ({row}, {col})")]
    NegativeCost { row: usize, col: usize, value: f64 },
    #[error("invalid transport input: {0}")]
    InvalidTransport(String),
    #[error("transport solver did not converge after {0} pivots")]
    SolverStalled(usize),
    #[error("no document vector for id {0}")]
    MissingDocVector(String),
    #[error("strategy {strategy} requires {input}")]
    MissingPrerequisite {
        strategy: &'static str,
        input: &'static str,
    },
    #[error("representation kind mismatch: {0} vs {1}")]
    KindMismatch(&'static str, &'static str),
    #[error("no reference survived representation")]
    NoRepresentableRefs,
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("no vertical index for coarse label {0}")]
    MissingVertical(String),
    #[error("cluster {0} has no coarse label")]
    UnlabeledCluster(usize),
    #[error("length mismatch: {0} predictions vs {1} gold labels")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
