use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed syllable `{token}`: {reason}")]
    MalformedSyllable { token: String, reason: &'static str },

    #[error("invalid tone {tone} for {language}")]
    InvalidTone { language: &'static str, tone: u8 },

    #[error("alignment {path}: {reason}")]
    Alignment { path: PathBuf, reason: String },

    #[error(
        "{mismatched} of {total} utterances have transcript/alignment count mismatches \
         ({rate:.1}% > {threshold:.1}%); the alignment files probably belong to another corpus"
    )]
    MismatchRate {
        mismatched: usize,
        total: usize,
        rate: f64,
        threshold: f64,
    },

    #[error("audio {path}: {reason}")]
    Audio { path: PathBuf, reason: String },

    #[error("audio too short: {samples} samples, need at least {required}")]
    AudioTooShort { samples: usize, required: usize },

    #[error("{what}: expected dimension {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("encoder `{model}` exposes {available} layers, {requested} requested")]
    MissingLayers {
        model: String,
        available: usize,
        requested: usize,
    },

    #[error("encoder adapter: {0}")]
    Adapter(String),

    #[error("split: {0}")]
    Split(String),

    #[error("class `{class}` has no items on the {side} side")]
    ClassMissing { class: String, side: &'static str },

    #[error("probe: {0}")]
    Probe(String),

    #[error("report: {0}")]
    Report(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
