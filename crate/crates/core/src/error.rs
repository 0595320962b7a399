use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("duplicate evaluation point at positions {0} and {1}")]
    DuplicatePoint(usize, usize),

    #[error("not enough results to decode: have {have}, need {need}")]
    NotEnoughResults { have: usize, need: usize },

    #[error("infeasible code: {0}")]
    InfeasibleCode(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("infeasible tiling: {0}")]
    InfeasibleTiling(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing decoded layers: {0:?}")]
    MissingLayers(Vec<usize>),

    #[error("search budget of {0} candidates exceeded")]
    BudgetExceeded(usize),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
