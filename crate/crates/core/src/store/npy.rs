//! Raw array codec: NPY v1.0 layout restricted to 1-D little-endian arrays.

use std::io::Read;

use crate::model::{Samples, ValueType};

use super::CodecError;

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
/// Preamble (magic, version, length, header text) is padded to this multiple.
const ALIGN: usize = 64;

/// Parsed preamble of a raw array file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NpyHeader {
    pub value_type: ValueType,
    pub len: u64,
    /// Offset of the first payload byte.
    pub payload_offset: u64,
}

impl NpyHeader {
    pub fn payload_len(&self) -> u64 {
        self.len * self.value_type.item_size() as u64
    }
}

fn header_text(value_type: ValueType, len: u64) -> String {
    format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({len},), }}",
        value_type.dtype_str()
    )
}

/// Bytes of the preamble for an array of `len` elements.
pub fn encode_header(value_type: ValueType, len: u64) -> Vec<u8> {
    let mut text = header_text(value_type, len);
    let unpadded = MAGIC.len() + 2 + 2 + text.len() + 1;
    let total = unpadded.div_ceil(ALIGN) * ALIGN;
    text.extend(std::iter::repeat_n(' ', total - unpadded));
    text.push('\n');
    let header_len = u16::try_from(text.len()).expect("1-D header fits in u16");

    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out
}

/// Encodes `values` as `value_type`. A value-type change is allowed only when
/// every element converts exactly.
pub fn encode_raw_array(values: &Samples, value_type: ValueType) -> Result<Vec<u8>, CodecError> {
    let converted;
    let values = if values.value_type() == value_type {
        values
    } else {
        converted = convert_exact(values, value_type)?;
        &converted
    };
    let mut out = encode_header(value_type, values.len() as u64);
    out.extend_from_slice(&values.to_le_bytes());
    Ok(out)
}

/// Inverse of [`encode_raw_array`].
pub fn decode_raw_array(bytes: &[u8]) -> Result<(Samples, ValueType), CodecError> {
    let mut cursor = bytes;
    let header = read_header(&mut cursor)?;
    let payload = &bytes[header.payload_offset as usize..];
    let need = header.payload_len();
    if (payload.len() as u64) < need {
        return Err(CodecError::TruncatedPayload {
            expected: need,
            available: payload.len() as u64,
        });
    }
    let values = Samples::from_le_bytes(header.value_type, &payload[..need as usize]);
    Ok((values, header.value_type))
}

/// Reads and parses the preamble, leaving `reader` at the first payload byte.
pub fn read_header(reader: &mut impl Read) -> Result<NpyHeader, CodecError> {
    let mut fixed = [0u8; 8];
    read_full(reader, &mut fixed)?;
    if &fixed[..6] != MAGIC {
        return Err(CodecError::BadMagic);
    }
    let (len_bytes, prefix) = match fixed[6] {
        1 => (2, 10),
        2 | 3 => (4, 12),
        v => {
            return Err(CodecError::MalformedHeader(format!(
                "unsupported format version {v}.{}",
                fixed[7]
            )))
        }
    };
    let mut len_buf = [0u8; 4];
    read_full(reader, &mut len_buf[..len_bytes])?;
    let header_len = u32::from_le_bytes(len_buf) as usize;
    let mut text = vec![0u8; header_len];
    read_full(reader, &mut text)?;
    let text = std::str::from_utf8(&text)
        .map_err(|_| CodecError::MalformedHeader("header is not text".into()))?;
    let (value_type, len) = parse_header_text(text)?;
    Ok(NpyHeader {
        value_type,
        len,
        payload_offset: (prefix + header_len) as u64,
    })
}

fn read_full(reader: &mut impl Read, buf: &mut [u8]) -> Result<(), CodecError> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CodecError::MalformedHeader("file ends inside the header".into())
        } else {
            CodecError::Io(e.to_string())
        }
    })
}

/// Value following `'key':` in the header dictionary, up to the next
/// top-level comma or closing brace.
fn dict_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let quoted = [format!("'{key}'"), format!("\"{key}\"")];
    let start = quoted
        .iter()
        .find_map(|q| text.find(q.as_str()).map(|i| i + q.len()))?;
    let rest = text[start..].trim_start().strip_prefix(':')?.trim_start();
    let mut depth = 0usize;
    for (i, c) in rest.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            ',' | '}' if depth == 0 => return Some(rest[..i].trim()),
            _ => {}
        }
    }
    None
}

fn parse_header_text(text: &str) -> Result<(ValueType, u64), CodecError> {
    let malformed = |what: &str| CodecError::MalformedHeader(format!("{what} in {text:?}"));
    let descr = dict_value(text, "descr").ok_or_else(|| malformed("missing descr"))?;
    let descr = descr.trim_matches(|c| c == '\'' || c == '"');
    // '|i2'-style markers never occur for multi-byte types; '=' is native order.
    let value_type = ValueType::from_dtype_str(descr)
        .ok_or_else(|| CodecError::UnsupportedDtype(descr.to_string()))?;

    let shape = dict_value(text, "shape").ok_or_else(|| malformed("missing shape"))?;
    let inner = shape
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| malformed("shape is not a tuple"))?;
    let dims = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().map_err(|_| malformed("bad shape entry")))
        .collect::<Result<Vec<_>, _>>()?;
    match dims.as_slice() {
        [n] => Ok((value_type, *n)),
        _ => Err(CodecError::UnsupportedShape(shape.to_string())),
    }
}

/// Converts to `target`, failing on any element that does not convert exactly.
pub fn convert_exact(values: &Samples, target: ValueType) -> Result<Samples, CodecError> {
    let src = values.to_f64_vec();
    let bad = |x: f64| CodecError::Unrepresentable {
        value: x,
        value_type: target,
    };
    Ok(match target {
        ValueType::Float64 => Samples::Float64(src),
        ValueType::Float32 => Samples::Float32(
            src.into_iter()
                .map(|x| {
                    let y = x as f32;
                    if (y as f64) == x || x.is_nan() {
                        Ok(y)
                    } else {
                        Err(bad(x))
                    }
                })
                .collect::<Result<_, _>>()?,
        ),
        ValueType::Int16 => Samples::Int16(
            src.into_iter()
                .map(|x| {
                    if x.fract() == 0.0 && (i16::MIN as f64..=i16::MAX as f64).contains(&x) {
                        Ok(x as i16)
                    } else {
                        Err(bad(x))
                    }
                })
                .collect::<Result<_, _>>()?,
        ),
        ValueType::Int32 => Samples::Int32(
            src.into_iter()
                .map(|x| {
                    if x.fract() == 0.0 && (i32::MIN as f64..=i32::MAX as f64).contains(&x) {
                        Ok(x as i32)
                    } else {
                        Err(bad(x))
                    }
                })
                .collect::<Result<_, _>>()?,
        ),
    })
}
