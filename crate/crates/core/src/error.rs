use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A row in an input file could not be interpreted.
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("symptom level {0} is outside 0..=10")]
    InvalidLevel(i64),

    #[error("duplicate survey for patient {patient_id} on {date}")]
    DuplicateSurvey { patient_id: String, date: NaiveDate },

    #[error("survey references unknown patient {0}")]
    UnknownPatient(String),

    #[error("patient {patient_id} has two surveys on {date}; consecutive surveys must be at least one day apart")]
    SameDaySurveys { patient_id: String, date: NaiveDate },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("feature vector has {found} values, model expects {expected}")]
    SchemaMismatch { expected: usize, found: usize },

    #[error("model was saved without node cover counts; retrain it (covers are recorded by default) before computing SHAP values")]
    MissingCovers,

    #[error("unsupported model format version {0}")]
    FormatVersion(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of internal consistency rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
