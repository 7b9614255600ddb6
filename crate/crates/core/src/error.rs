use std::path::PathBuf;

/// Errors raised by the phonemix core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("syllable {syllable:?} at note {note_index} is not in the lexicon")]
    MissingLexiconEntry { syllable: String, note_index: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Schema { line: Option<usize>, message: String },

    #[error("tier {0:?} not found")]
    MissingTier(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("missing annotation: {0}")]
    MissingAnnotation(String),

    #[error("waveform too short: {len} samples, need at least {window}")]
    TooShort { len: usize, window: usize },

    #[error("unknown {kind} token {token:?}")]
    Vocabulary { kind: &'static str, token: String },

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("optimizer state error: {0}")]
    State(String),

    #[error("unsupported audio: {0}")]
    Audio(String),

    #[error("{path}: {source}")]
    AtPath {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn schema(message: impl Into<String>) -> Self {
        Error::Schema {
            line: None,
            message: message.into(),
        }
    }

    pub fn schema_at(line: usize, message: impl Into<String>) -> Self {
        Error::Schema {
            line: Some(line),
            message: message.into(),
        }
    }

    /// Attaches a file path to the error.
    pub fn at_path(self, path: impl Into<PathBuf>) -> Self {
        Error::AtPath {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True when the error stems from user input rather than an internal fault.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::State(_) => false,
            Error::AtPath { source, .. } => source.is_user_error(),
            _ => true,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
