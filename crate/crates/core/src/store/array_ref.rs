use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{ArrayAttributes, IssueCode, Samples, ValueType};

use super::chunked::{decode_chunk, ChunkedMeta, ZARRAY_FILE};
use super::npy::{read_header, NpyHeader};
use super::stats::{CountingReader, IoStats};
use super::{CodecError, StoreError, CHUNKED_DIR, RAW_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    Raw,
    ChunkedZstd,
}

#[derive(Debug, Clone, Copy)]
enum Layout {
    Raw(NpyHeader),
    Chunked(ChunkedMeta),
}

#[derive(Debug)]
struct Inner {
    dir: PathBuf,
    attributes: ArrayAttributes,
    layout: Layout,
    stats: Arc<IoStats>,
}

/// Handle to one sample array directory on disk. Opening reads only the
/// array's preamble or `.zarray`; values are read on demand.
///
/// Cheap to clone and safe to read from several threads at once.
#[derive(Debug, Clone)]
pub struct StoredArrayRef {
    inner: Arc<Inner>,
}

impl StoredArrayRef {
    /// Opens the data store inside `dir`, which must hold exactly one of
    /// `data.npy` or `data.zarr/`. `stats` becomes the session counter used
    /// by [`StoredArrayRef::read_all`].
    pub fn open(
        dir: &Path,
        attributes: ArrayAttributes,
        stats: Arc<IoStats>,
    ) -> Result<Self, StoreError> {
        let raw_path = dir.join(RAW_FILE);
        let chunked_path = dir.join(CHUNKED_DIR);
        let layout = match (raw_path.is_file(), chunked_path.is_dir()) {
            (true, true) => {
                return Err(StoreError::Layout {
                    path: dir.to_path_buf(),
                    code: IssueCode::AmbiguousArrayStore,
                    message: format!("both {RAW_FILE} and {CHUNKED_DIR}/ are present"),
                })
            }
            (false, false) => {
                return Err(StoreError::Layout {
                    path: dir.to_path_buf(),
                    code: IssueCode::MissingFile,
                    message: format!("neither {RAW_FILE} nor {CHUNKED_DIR}/ is present"),
                })
            }
            (true, false) => Layout::Raw(open_raw(&raw_path, &stats)?),
            (false, true) => {
                let path = chunked_path.join(ZARRAY_FILE);
                let text = stats.read_file(&path).map_err(|source| StoreError::Io {
                    path: path.clone(),
                    source,
                })?;
                let meta = ChunkedMeta::parse(&text)
                    .map_err(|source| StoreError::Codec { path, source })?;
                Layout::Chunked(meta)
            }
        };
        Ok(StoredArrayRef {
            inner: Arc::new(Inner {
                dir: dir.to_path_buf(),
                attributes,
                layout,
                stats,
            }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.inner.dir
    }

    pub fn attributes(&self) -> &ArrayAttributes {
        &self.inner.attributes
    }

    pub fn kind(&self) -> CodecKind {
        match self.inner.layout {
            Layout::Raw(_) => CodecKind::Raw,
            Layout::Chunked(_) => CodecKind::ChunkedZstd,
        }
    }

    /// Session counters this handle was opened with.
    pub fn stats(&self) -> &IoStats {
        &self.inner.stats
    }

    /// Element count declared by the stored data (not by attributes.json).
    pub fn stored_len(&self) -> u64 {
        match self.inner.layout {
            Layout::Raw(h) => h.len,
            Layout::Chunked(m) => m.len,
        }
    }

    pub fn stored_value_type(&self) -> ValueType {
        match self.inner.layout {
            Layout::Raw(h) => h.value_type,
            Layout::Chunked(m) => m.value_type,
        }
    }

    /// Chunk geometry, for chunked arrays.
    pub fn chunked_meta(&self) -> Option<ChunkedMeta> {
        match self.inner.layout {
            Layout::Chunked(m) => Some(m),
            Layout::Raw(_) => None,
        }
    }

    pub fn read_all(&self) -> Result<Samples, StoreError> {
        self.read_window(0, self.stored_len(), self.stats())
    }

    /// Reads samples `[start, start + len)`. Raw arrays read only the
    /// window's payload bytes; chunked arrays read only overlapping chunks.
    pub fn read_window(
        &self,
        start: u64,
        len: u64,
        stats: &IoStats,
    ) -> Result<Samples, StoreError> {
        let n_samples = self.stored_len();
        let end =
            start
                .checked_add(len)
                .filter(|&e| e <= n_samples)
                .ok_or(StoreError::OutOfRange {
                    start,
                    len,
                    n_samples,
                })?;
        let value_type = self.stored_value_type();
        if len == 0 {
            return Ok(Samples::empty(value_type));
        }
        let item = value_type.item_size() as u64;
        match self.inner.layout {
            Layout::Raw(header) => {
                let path = self.inner.dir.join(RAW_FILE);
                let io = |source| StoreError::Io {
                    path: path.clone(),
                    source,
                };
                let mut f = stats.open(&path).map_err(io)?;
                f.seek(SeekFrom::Start(header.payload_offset + start * item))
                    .map_err(io)?;
                let mut buf = vec![0u8; (len * item) as usize];
                f.read_exact(&mut buf).map_err(|e| {
                    if e.kind() == std::io::ErrorKind::UnexpectedEof {
                        StoreError::Codec {
                            path: path.clone(),
                            source: CodecError::TruncatedPayload {
                                expected: header.payload_len(),
                                available: 0,
                            },
                        }
                    } else {
                        io(e)
                    }
                })?;
                stats.add_bytes(buf.len() as u64);
                Ok(Samples::from_le_bytes(value_type, &buf))
            }
            Layout::Chunked(meta) => {
                let first = start / meta.chunk_len;
                let last = (end - 1) / meta.chunk_len;
                let mut out = Vec::with_capacity((len * item) as usize);
                let dir = self.inner.dir.join(CHUNKED_DIR);
                for index in first..=last {
                    let path = dir.join(index.to_string());
                    let chunk_start = index * meta.chunk_len;
                    let lo = start.max(chunk_start) - chunk_start;
                    let hi = end.min(chunk_start + meta.chunk_len) - chunk_start;
                    let range = (lo * item) as usize..(hi * item) as usize;
                    match stats.read_file(&path) {
                        Ok(data) => {
                            let decoded = decode_chunk(&meta, index, &data).map_err(|source| {
                                StoreError::Codec {
                                    path: path.clone(),
                                    source,
                                }
                            })?;
                            out.extend_from_slice(&decoded[range]);
                        }
                        // absent chunks hold the fill value
                        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                            out.resize(out.len() + range.len(), 0);
                        }
                        Err(source) => return Err(StoreError::Io { path, source }),
                    }
                }
                Ok(Samples::from_le_bytes(value_type, &out))
            }
        }
    }
}

fn open_raw(path: &Path, stats: &IoStats) -> Result<NpyHeader, StoreError> {
    let io = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let f = stats.open(path).map_err(io)?;
    let file_len = f.metadata().map_err(io)?.len();
    let mut reader = CountingReader { inner: f, stats };
    let header = read_header(&mut reader).map_err(|source| StoreError::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    let available = file_len.saturating_sub(header.payload_offset);
    if available < header.payload_len() {
        return Err(StoreError::Codec {
            path: path.to_path_buf(),
            source: CodecError::TruncatedPayload {
                expected: header.payload_len(),
                available,
            },
        });
    }
    Ok(header)
}
