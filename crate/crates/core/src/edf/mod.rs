//! EDF and EDF+ ingestion: header and record parsing, TAL annotations,
//! label mapping and conversion into subjects.
//!
//! Every parser takes a [`ParseMode`]. Strict mode rejects anything outside
//! the EDF/EDF+ byte layout; lenient mode substitutes documented defaults and
//! reports each substitution as a warning string.

mod convert;
mod header;
mod mapping;
mod signal;
mod tal;
pub mod writer;

use std::path::PathBuf;

use crate::store::StoreError;

pub use convert::{
    convert_directory, convert_edf_to_subject, sanitize_label, ConversionReport, ConvertOptions,
    ConvertedSubject, SkippedFile,
};
pub use header::{parse_edf_header, parse_start, EdfHeader, EdfSignalHeader, ANNOTATION_LABEL};
pub use mapping::{map_annotations, EventSetRule, LabelMapping, HYPNOGRAM_SET, UNMATCHED_SET};
pub use signal::{digital_to_physical, Calibration, EdfFile};
pub use tal::{parse_tal_records, TalAnnotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

impl std::str::FromStr for ParseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(ParseMode::Strict),
            "lenient" => Ok(ParseMode::Lenient),
            other => Err(format!("unknown parse mode {other:?} (strict or lenient)")),
        }
    }
}

impl std::fmt::Display for ParseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseMode::Strict => "strict",
            ParseMode::Lenient => "lenient",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EdfError {
    #[error("header truncated: need {needed} bytes, {available} available")]
    TruncatedHeader { needed: usize, available: usize },
    #[error("field {field}: {value:?} is not a number")]
    MalformedNumericField { field: String, value: String },
    #[error("field {field}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("header_bytes field {declared:?} does not match the expected {expected}")]
    InconsistentHeaderBytes { declared: String, expected: usize },
    #[error("signal {signal:?} has digital_min equal to digital_max")]
    ZeroDigitalRange { signal: String },
    #[error("data records truncated: {reason}")]
    TruncatedRecord { reason: String },
    #[error("malformed TAL at byte {offset}: {reason}")]
    MalformedTal { offset: usize, reason: String },
    #[error("signal index {index} out of range for {n_signals} signals")]
    NoSuchSignal { index: usize, n_signals: usize },
    #[error("signal {index} is an annotation channel")]
    AnnotationChannel { index: usize },
    #[error("discontinuous EDF+D recordings are not supported")]
    UnsupportedDiscontinuous,
    #[error("signal labels {first:?} and {second:?} both sanitize to {sanitized:?}")]
    DuplicateLabel {
        first: String,
        second: String,
        sanitized: String,
    },
    #[error("invalid label mapping: {0}")]
    InvalidMapping(String),
    #[error("no .edf files in {}", .0.display())]
    EmptySourceDirectory(PathBuf),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<EdfError>,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl EdfError {
    /// True for I/O and destination problems rather than defects in the
    /// source data.
    pub fn is_environmental(&self) -> bool {
        match self {
            EdfError::Io { .. } | EdfError::EmptySourceDirectory(_) => true,
            EdfError::Store(e) => e.is_environmental(),
            EdfError::File { source, .. } => source.is_environmental(),
            _ => false,
        }
    }
}
