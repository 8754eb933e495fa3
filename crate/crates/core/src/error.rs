use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("requested {k} components but at most {max} are available")]
    KTooLarge { k: usize, max: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("covariance matrix is numerically singular (condition number {condition:e})")]
    SingularSigma { condition: f64 },

    #[error("residual variance {tau_sq:e} of row {row} is at or below the floor")]
    DegenerateTau { row: usize, tau_sq: f64 },

    #[error("loadings are rank deficient when asset {row} is removed (lambda_K = {lambda:e})")]
    RankDeficientLoadings { row: usize, lambda: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("population and direct precision disagree (max abs diff {diff:e})")]
    GroundTruthMismatch { diff: f64 },

    #[error("portfolio direction cannot be budget-normalized (sum {sum:e})")]
    DegenerateDirection { sum: f64 },

    #[error("portfolio wiped out: 1 + portfolio return = {growth:e}")]
    PortfolioWipedOut { growth: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("missing value at line {line}, column {column} ({name})")]
    MissingValue {
        line: usize,
        column: usize,
        name: String,
    },

    #[error("dates are not strictly increasing at line {line} ({date})")]
    NonMonotoneDates { line: usize, date: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes and error records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::Usage(_) | Error::ConfigParse { .. } => ErrorClass::Usage,
            Error::NonFinite { .. }
            | Error::NotSymmetric { .. }
            | Error::KTooLarge { .. }
            | Error::SingularSigma { .. }
            | Error::DegenerateTau { .. }
            | Error::RankDeficientLoadings { .. }
            | Error::NotPositiveDefinite(_)
            | Error::GroundTruthMismatch { .. }
            | Error::DegenerateDirection { .. }
            | Error::PortfolioWipedOut { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    /// Short machine-readable name of the innermost error.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::NonFinite { .. } => "NonFinite",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::SingularSigma { .. } => "SingularSigma",
            Error::DegenerateTau { .. } => "DegenerateTau",
            Error::RankDeficientLoadings { .. } => "RankDeficientLoadings",
            Error::NotPositiveDefinite(_) => "NotPositiveDefinite",
            Error::InvalidParams(_) => "InvalidParams",
            Error::GroundTruthMismatch { .. } => "GroundTruthMismatch",
            Error::DegenerateDirection { .. } => "DegenerateDirection",
            Error::PortfolioWipedOut { .. } => "PortfolioWipedOut",
            Error::Parse { .. } => "ParseError",
            Error::MissingValue { .. } => "MissingValue",
            Error::NonMonotoneDates { .. } => "NonMonotoneDates",
            Error::Usage(_) => "UsageError",
            Error::ConfigParse { .. } => "ConfigParseError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }
}
