use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown question type {0:?}")]
    UnknownQuestionType(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("abstract {pmid} unavailable: {reason}")]
    AbstractUnavailable { pmid: String, reason: String },

    #[error("abstract {pmid} has an empty body")]
    EmptyAbstract { pmid: String },

    #[error("question {question_id}: {source}")]
    Question {
        question_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot balance yes/no pairs: no \"{}\" examples", missing.as_str())]
    CannotBalance { missing: crate::YesNo },

    #[error("pair {pair_id} has no answer span inside any window")]
    Unanswerable { pair_id: String },

    #[error("token index {index} is not a passage token")]
    NotPassageToken { index: usize },

    #[error("invalid span: start {start} > end {end}")]
    InvalidSpan { start: usize, end: usize },

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no valid positions in mask")]
    EmptyMask,

    #[error("gold position {position} has zero probability")]
    ZeroProbabilityGold { position: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss at stage {stage}, epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        stage: usize,
        epoch: usize,
        batch: usize,
    },

    #[error("{0}")]
    Empty(&'static str),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_question(self, question_id: &str) -> Self {
        Error::Question {
            question_id: question_id.to_string(),
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
