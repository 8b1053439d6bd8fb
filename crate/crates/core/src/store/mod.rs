//! On-disk layout. Every dataset, series, subject and sample array is a
//! directory; metadata and annotations are plain JSON files and sample values
//! are stored either as a raw array file or as a directory of compressed
//! chunks:
//!
//! ```text
//! <dataset>/metadata.json
//! <dataset>/<series>/metadata.json
//! <dataset>/<series>/<subject>/metadata.json
//! <dataset>/<series>/<subject>/annotations/<set>.json
//! <dataset>/<series>/<subject>/<array>/attributes.json
//! <dataset>/<series>/<subject>/<array>/data.npy      (raw)
//! <dataset>/<series>/<subject>/<array>/data.zarr/    (chunked)
//! ```

mod array_ref;
pub mod chunked;
mod json;
pub mod npy;
mod reader;
mod stats;
mod writer;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::model::{IssueCode, ValidationIssue, ValueType};

pub use array_ref::{CodecKind, StoredArrayRef};
pub use chunked::{encode_chunked_array, ChunkedEncoding, ChunkedMeta};
pub use npy::{decode_raw_array, encode_raw_array};
pub use reader::{
    list_dataset, read_dataset, read_dataset_with_warnings, ArraySummary, DatasetSummary,
    ReadOptions, SeriesSummary, SubjectSummary,
};
pub use stats::{IoSnapshot, IoStats};
pub use writer::{write_dataset, DatasetWriter, SubjectWriteReport, WriteOptions, WriteReport};

pub const METADATA_FILE: &str = "metadata.json";
pub const ATTRIBUTES_FILE: &str = "attributes.json";
pub const ANNOTATIONS_DIR: &str = "annotations";
pub const RAW_FILE: &str = "data.npy";
pub const CHUNKED_DIR: &str = "data.zarr";

pub const DEFAULT_ZSTD_LEVEL: i32 = 9;
const DEFAULT_CHUNK_BYTES: usize = 1 << 20;

/// Errors from encoding or decoding array payloads.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("missing raw array magic")]
    BadMagic,
    #[error("malformed array header: {0}")]
    MalformedHeader(String),
    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),
    #[error("unsupported shape {0}; arrays must be 1-D")]
    UnsupportedShape(String),
    #[error("payload truncated: header declares {expected} bytes, {available} available")]
    TruncatedPayload { expected: u64, available: u64 },
    #[error("value {value} is not representable as {value_type}")]
    Unrepresentable { value: f64, value_type: ValueType },
    #[error("zstd level {0} outside [-7, 22]")]
    InvalidZstdLevel(i64),
    #[error("chunk length {0} must be at least 1")]
    InvalidChunkLen(u64),
    #[error("unsupported compressor {0:?}")]
    UnsupportedCompressor(String),
    #[error("chunk {index} is corrupt: {reason}")]
    CorruptChunk { index: u64, reason: String },
    #[error("{0}")]
    Io(String),
}

impl CodecError {
    pub fn code(&self) -> IssueCode {
        match self {
            CodecError::BadMagic => IssueCode::BadMagic,
            CodecError::MalformedHeader(_) => IssueCode::MalformedHeader,
            CodecError::UnsupportedDtype(_) => IssueCode::UnsupportedDtype,
            CodecError::UnsupportedShape(_) => IssueCode::UnsupportedShape,
            CodecError::TruncatedPayload { .. } => IssueCode::TruncatedPayload,
            CodecError::Unrepresentable { .. } => IssueCode::ValueTypeMismatch,
            CodecError::InvalidZstdLevel(_) => IssueCode::InvalidZstdLevel,
            CodecError::InvalidChunkLen(_) => IssueCode::InvalidChunkLen,
            CodecError::UnsupportedCompressor(_) => IssueCode::UnsupportedCompressor,
            CodecError::CorruptChunk { .. } => IssueCode::CorruptChunk,
            CodecError::Io(_) => IssueCode::IoFailure,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("dataset failed validation: {}", summarize(.0))]
    Validation(Vec<ValidationIssue>),
    #[error("dataset could not be read: {}", summarize(.0))]
    Read(Vec<ValidationIssue>),
    #[error("{} is not a Sleeplab-format dataset (no {METADATA_FILE})", .0.display())]
    NotSlfDataset(PathBuf),
    #[error("destination {} already exists", .0.display())]
    DestinationExists(PathBuf),
    #[error("invalid array codec: {0}")]
    InvalidCodec(CodecError),
    #[error("window [{start}, {start} + {len}) is outside an array of {n_samples} samples")]
    OutOfRange {
        start: u64,
        len: u64,
        n_samples: u64,
    },
    #[error("{}: {source}", path.display())]
    Codec { path: PathBuf, source: CodecError },
    #[error("{}: {message}", path.display())]
    Layout {
        path: PathBuf,
        code: IssueCode,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn summarize(issues: &[ValidationIssue]) -> String {
    let errors: Vec<_> = issues.iter().filter(|i| i.is_error()).collect();
    match errors.as_slice() {
        [] => "no errors".to_string(),
        [one] => one.to_string(),
        [first, rest @ ..] => format!("{first} (and {} more)", rest.len()),
    }
}

impl StoreError {
    /// Issues carried by validation and aggregated read failures.
    pub fn issues(&self) -> &[ValidationIssue] {
        match self {
            StoreError::Validation(v) | StoreError::Read(v) => v,
            _ => &[],
        }
    }

    /// True for failures of the environment (missing paths, I/O) rather
    /// than of the data itself.
    pub fn is_environmental(&self) -> bool {
        matches!(
            self,
            StoreError::NotSlfDataset(_) | StoreError::DestinationExists(_) | StoreError::Io { .. }
        )
    }

    fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> StoreError {
        let path = path.into();
        move |source| StoreError::Io { path, source }
    }
}

/// How sample arrays are encoded on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrayCodecSpec {
    #[default]
    Raw,
    ChunkedZstd {
        #[serde(default = "default_level")]
        zstd_level: i32,
        /// Samples per chunk; defaults to about 1 MiB of payload.
        #[serde(default)]
        chunk_len: Option<usize>,
    },
}

fn default_level() -> i32 {
    DEFAULT_ZSTD_LEVEL
}

impl ArrayCodecSpec {
    pub fn chunked_zstd(zstd_level: i32, chunk_len: Option<usize>) -> Result<Self, CodecError> {
        let spec = ArrayCodecSpec::ChunkedZstd {
            zstd_level,
            chunk_len,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), CodecError> {
        if let ArrayCodecSpec::ChunkedZstd {
            zstd_level,
            chunk_len,
        } = *self
        {
            chunked::check_zstd_level(zstd_level as i64)?;
            if chunk_len == Some(0) {
                return Err(CodecError::InvalidChunkLen(0));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> CodecKind {
        match self {
            ArrayCodecSpec::Raw => CodecKind::Raw,
            ArrayCodecSpec::ChunkedZstd { .. } => CodecKind::ChunkedZstd,
        }
    }

    /// Human label: `-` for raw, `zstd level N` for chunked.
    pub fn compression_label(&self) -> String {
        match self {
            ArrayCodecSpec::Raw => "-".to_string(),
            ArrayCodecSpec::ChunkedZstd { zstd_level, .. } => format!("zstd level {zstd_level}"),
        }
    }
}

/// Default samples per chunk: `max(1, 2^20 / item_size)`.
pub fn default_chunk_len(value_type: ValueType) -> usize {
    (DEFAULT_CHUNK_BYTES / value_type.item_size()).max(1)
}
