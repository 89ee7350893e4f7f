use std::path::PathBuf;

use thiserror::Error;

use crate::glyph::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid glyph: {0}")]
    InvalidGlyph(ValidationReport),

    #[error("glyph has {len} commands, more than the limit of {max}")]
    TooLong { len: usize, max: usize },

    #[error("path data parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("elliptical arc command at byte {offset} is not supported")]
    ArcUnsupported { offset: usize },

    #[error("degenerate font metrics: {0}")]
    DegenerateMetrics(String),

    #[error("image is {got}x{got_height}, expected {expected}x{expected}")]
    ResolutionMismatch {
        expected: usize,
        got: usize,
        got_height: usize,
    },

    #[error("invalid mixture parameters: {0}")]
    InvalidParams(String),

    #[error("font {font_id}: missing glyph classes {classes:?}")]
    MissingGlyph {
        font_id: String,
        classes: Vec<usize>,
    },

    #[error("need at least 2 fonts to split, found {0}")]
    TooFewFonts(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("manifest hash mismatch for {0}")]
    HashMismatch(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error beneath any added context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
