//! Chunked Zstandard codec laid out as a Zarr v2 array: a `.zarray` metadata
//! document plus one compressed chunk file per `chunk_len` samples.

use rayon::prelude::*;
use serde::Deserialize;

use crate::model::{Samples, ValueType};

use super::npy::convert_exact;
use super::CodecError;

pub const ZARRAY_FILE: &str = ".zarray";
pub const MIN_ZSTD_LEVEL: i32 = -7;
pub const MAX_ZSTD_LEVEL: i32 = 22;

pub fn check_zstd_level(level: i64) -> Result<i32, CodecError> {
    if (MIN_ZSTD_LEVEL as i64..=MAX_ZSTD_LEVEL as i64).contains(&level) {
        Ok(level as i32)
    } else {
        Err(CodecError::InvalidZstdLevel(level))
    }
}

/// Parsed `.zarray` document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkedMeta {
    pub value_type: ValueType,
    pub len: u64,
    pub chunk_len: u64,
    /// `None` for uncompressed chunks written by other tools.
    pub zstd_level: Option<i32>,
}

impl ChunkedMeta {
    pub fn n_chunks(&self) -> u64 {
        self.len.div_ceil(self.chunk_len)
    }

    pub fn chunk_bytes(&self) -> usize {
        self.chunk_len as usize * self.value_type.item_size()
    }

    /// Deterministic `.zarray` text; newline-terminated, two-space indent.
    pub fn to_json(&self) -> String {
        let compressor = match self.zstd_level {
            Some(level) => format!("{{\"id\": \"zstd\", \"level\": {level}}}"),
            None => "null".to_string(),
        };
        format!(
            "{{\n  \"zarr_format\": 2,\n  \"shape\": [{}],\n  \"chunks\": [{}],\n  \"dtype\": \"{}\",\n  \"compressor\": {compressor},\n  \"fill_value\": 0,\n  \"order\": \"C\",\n  \"filters\": null\n}}\n",
            self.len,
            self.chunk_len,
            self.value_type.dtype_str(),
        )
    }

    pub fn parse(text: &[u8]) -> Result<Self, CodecError> {
        #[derive(Deserialize)]
        struct Compressor {
            id: String,
            level: Option<i64>,
        }
        #[derive(Deserialize)]
        struct Raw {
            zarr_format: u32,
            shape: Vec<u64>,
            chunks: Vec<u64>,
            dtype: String,
            compressor: Option<Compressor>,
            order: Option<String>,
            filters: Option<Vec<serde_json::Value>>,
        }
        let raw: Raw =
            serde_json::from_slice(text).map_err(|e| CodecError::MalformedHeader(e.to_string()))?;
        if raw.zarr_format != 2 {
            return Err(CodecError::MalformedHeader(format!(
                "zarr_format {} is not 2",
                raw.zarr_format
            )));
        }
        let value_type = ValueType::from_dtype_str(&raw.dtype)
            .ok_or_else(|| CodecError::UnsupportedDtype(raw.dtype.clone()))?;
        let (len, chunk_len) = match (raw.shape.as_slice(), raw.chunks.as_slice()) {
            ([n], [c]) => (*n, *c),
            _ => return Err(CodecError::UnsupportedShape(format!("{:?}", raw.shape))),
        };
        if chunk_len == 0 {
            return Err(CodecError::InvalidChunkLen(0));
        }
        if raw.filters.is_some_and(|f| !f.is_empty()) {
            return Err(CodecError::UnsupportedCompressor("filters".into()));
        }
        if raw.order.as_deref().is_some_and(|o| o != "C" && o != "F") {
            return Err(CodecError::MalformedHeader("order must be C or F".into()));
        }
        let zstd_level = match raw.compressor {
            None => None,
            Some(c) if c.id == "zstd" => Some(check_zstd_level(c.level.unwrap_or(0))?),
            Some(c) => return Err(CodecError::UnsupportedCompressor(c.id)),
        };
        Ok(ChunkedMeta {
            value_type,
            len,
            chunk_len,
            zstd_level,
        })
    }
}

/// Output of [`encode_chunked_array`]: the metadata document and the chunk
/// payloads in index order (chunk `i` is stored under the file name `i`).
#[derive(Debug, Clone)]
pub struct ChunkedEncoding {
    pub meta: ChunkedMeta,
    pub zarray: Vec<u8>,
    pub chunks: Vec<Vec<u8>>,
}

impl ChunkedEncoding {
    /// `(file name, bytes)` pairs, metadata first.
    pub fn files(&self) -> impl Iterator<Item = (String, &[u8])> {
        std::iter::once((ZARRAY_FILE.to_string(), self.zarray.as_slice())).chain(
            self.chunks
                .iter()
                .enumerate()
                .map(|(i, c)| (i.to_string(), c.as_slice())),
        )
    }

    pub fn compressed_size(&self) -> u64 {
        self.chunks.iter().map(|c| c.len() as u64).sum()
    }
}

/// Splits `values` into `chunk_len`-sample chunks, zero-pads the last one, and
/// compresses each into its own Zstandard frame.
pub fn encode_chunked_array(
    values: &Samples,
    value_type: ValueType,
    chunk_len: usize,
    zstd_level: i32,
) -> Result<ChunkedEncoding, CodecError> {
    if chunk_len == 0 {
        return Err(CodecError::InvalidChunkLen(0));
    }
    let zstd_level = check_zstd_level(zstd_level as i64)?;
    let converted;
    let values = if values.value_type() == value_type {
        values
    } else {
        converted = convert_exact(values, value_type)?;
        &converted
    };
    let meta = ChunkedMeta {
        value_type,
        len: values.len() as u64,
        chunk_len: chunk_len as u64,
        zstd_level: Some(zstd_level),
    };
    let mut payload = values.to_le_bytes();
    let chunk_bytes = meta.chunk_bytes();
    payload.resize(meta.n_chunks() as usize * chunk_bytes, 0);
    let chunks = payload
        .par_chunks(chunk_bytes)
        .map(|c| zstd::bulk::compress(c, zstd_level).map_err(|e| CodecError::Io(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ChunkedEncoding {
        zarray: meta.to_json().into_bytes(),
        meta,
        chunks,
    })
}

/// Decodes one chunk file to its full, padded little-endian payload.
pub fn decode_chunk(meta: &ChunkedMeta, index: u64, data: &[u8]) -> Result<Vec<u8>, CodecError> {
    let expected = meta.chunk_bytes();
    let corrupt = |reason: String| CodecError::CorruptChunk { index, reason };
    let raw = match meta.zstd_level {
        Some(_) => zstd::bulk::decompress(data, expected).map_err(|e| corrupt(e.to_string()))?,
        None => data.to_vec(),
    };
    if raw.len() != expected {
        return Err(corrupt(format!(
            "decoded {} bytes, expected {expected}",
            raw.len()
        )));
    }
    Ok(raw)
}

/// Decodes a whole array from its metadata and chunk payloads. A missing
/// chunk reads as the fill value.
pub fn decode_chunked_array(
    meta: &ChunkedMeta,
    chunks: &[Option<Vec<u8>>],
) -> Result<Samples, CodecError> {
    let chunk_bytes = meta.chunk_bytes();
    let total = meta.len as usize * meta.value_type.item_size();
    let mut out = Vec::with_capacity(meta.n_chunks() as usize * chunk_bytes);
    for i in 0..meta.n_chunks() {
        match chunks.get(i as usize).and_then(Option::as_ref) {
            Some(data) => out.extend_from_slice(&decode_chunk(meta, i, data)?),
            None => out.resize(out.len() + chunk_bytes, 0),
        }
    }
    out.truncate(total);
    Ok(Samples::from_le_bytes(meta.value_type, &out))
}
