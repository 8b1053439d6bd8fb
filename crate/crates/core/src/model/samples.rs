use std::fmt;

use serde::{Deserialize, Serialize};

/// Element type of a sample array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Float32,
    Float64,
    Int16,
    Int32,
}

impl ValueType {
    pub const ALL: [ValueType; 4] = [
        ValueType::Float32,
        ValueType::Float64,
        ValueType::Int16,
        ValueType::Int32,
    ];

    pub fn item_size(self) -> usize {
        match self {
            ValueType::Float32 | ValueType::Int32 => 4,
            ValueType::Float64 => 8,
            ValueType::Int16 => 2,
        }
    }

    /// Little-endian NumPy type string, shared by the raw and chunked codecs.
    pub fn dtype_str(self) -> &'static str {
        match self {
            ValueType::Float32 => "<f4",
            ValueType::Float64 => "<f8",
            ValueType::Int16 => "<i2",
            ValueType::Int32 => "<i4",
        }
    }

    pub fn from_dtype_str(s: &str) -> Option<Self> {
        ValueType::ALL.into_iter().find(|v| v.dtype_str() == s)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Float32 => "float32",
            ValueType::Float64 => "float64",
            ValueType::Int16 => "int16",
            ValueType::Int32 => "int32",
        }
    }

    pub fn is_integer(self) -> bool {
        matches!(self, ValueType::Int16 | ValueType::Int32)
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ValueType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValueType::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown value type {s:?}"))
    }
}

/// Primitive element that can live in a sample array.
pub trait Element: Copy + Send + Sync + 'static {
    const VALUE_TYPE: ValueType;
    const SIZE: usize;

    fn write_le(self, out: &mut Vec<u8>);
    /// `bytes` has exactly `Self::SIZE` bytes.
    fn read_le(bytes: &[u8]) -> Self;
    fn to_f64(self) -> f64;
}

macro_rules! impl_element {
    ($t:ty, $vt:expr) => {
        impl Element for $t {
            const VALUE_TYPE: ValueType = $vt;
            const SIZE: usize = std::mem::size_of::<$t>();

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            fn read_le(bytes: &[u8]) -> Self {
                let mut buf = [0u8; std::mem::size_of::<$t>()];
                buf.copy_from_slice(bytes);
                <$t>::from_le_bytes(buf)
            }

            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_element!(f32, ValueType::Float32);
impl_element!(f64, ValueType::Float64);
impl_element!(i16, ValueType::Int16);
impl_element!(i32, ValueType::Int32);

/// Materialized 1-D sample values.
///
/// Equality is bitwise for floating-point variants so NaN payloads and
/// signed zeros count as round-trip differences.
#[derive(Debug, Clone)]
pub enum Samples {
    Float32(Vec<f32>),
    Float64(Vec<f64>),
    Int16(Vec<i16>),
    Int32(Vec<i32>),
}

macro_rules! dispatch {
    ($self:expr, $v:ident => $body:expr) => {
        match $self {
            Samples::Float32($v) => $body,
            Samples::Float64($v) => $body,
            Samples::Int16($v) => $body,
            Samples::Int32($v) => $body,
        }
    };
}

impl Samples {
    pub fn empty(value_type: ValueType) -> Self {
        match value_type {
            ValueType::Float32 => Samples::Float32(Vec::new()),
            ValueType::Float64 => Samples::Float64(Vec::new()),
            ValueType::Int16 => Samples::Int16(Vec::new()),
            ValueType::Int32 => Samples::Int32(Vec::new()),
        }
    }

    pub fn value_type(&self) -> ValueType {
        match self {
            Samples::Float32(_) => ValueType::Float32,
            Samples::Float64(_) => ValueType::Float64,
            Samples::Int16(_) => ValueType::Int16,
            Samples::Int32(_) => ValueType::Int32,
        }
    }

    pub fn len(&self) -> usize {
        dispatch!(self, v => v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Little-endian bytes of every element, no header.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * self.value_type().item_size());
        dispatch!(self, v => v.iter().for_each(|x| x.write_le(&mut out)));
        out
    }

    /// Decodes little-endian bytes; `bytes.len()` must be a multiple of the item size.
    pub fn from_le_bytes(value_type: ValueType, bytes: &[u8]) -> Self {
        fn decode<T: Element>(bytes: &[u8]) -> Vec<T> {
            bytes.chunks_exact(T::SIZE).map(T::read_le).collect()
        }
        match value_type {
            ValueType::Float32 => Samples::Float32(decode(bytes)),
            ValueType::Float64 => Samples::Float64(decode(bytes)),
            ValueType::Int16 => Samples::Int16(decode(bytes)),
            ValueType::Int32 => Samples::Int32(decode(bytes)),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        dispatch!(self, v => v.iter().map(|x| x.to_f64()).collect())
    }

    /// Arithmetic mean accumulated in f64, in index order. `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let sum: f64 = dispatch!(self, v => v.iter().map(|x| x.to_f64()).sum());
        Some(sum / self.len() as f64)
    }

    pub fn slice(&self, start: usize, end: usize) -> Samples {
        match self {
            Samples::Float32(v) => Samples::Float32(v[start..end].to_vec()),
            Samples::Float64(v) => Samples::Float64(v[start..end].to_vec()),
            Samples::Int16(v) => Samples::Int16(v[start..end].to_vec()),
            Samples::Int32(v) => Samples::Int32(v[start..end].to_vec()),
        }
    }

    /// Appends `other`; panics on a value-type mismatch.
    pub fn extend(&mut self, other: &Samples) {
        match (self, other) {
            (Samples::Float32(a), Samples::Float32(b)) => a.extend_from_slice(b),
            (Samples::Float64(a), Samples::Float64(b)) => a.extend_from_slice(b),
            (Samples::Int16(a), Samples::Int16(b)) => a.extend_from_slice(b),
            (Samples::Int32(a), Samples::Int32(b)) => a.extend_from_slice(b),
            (a, b) => panic!(
                "cannot extend {} samples with {}",
                a.value_type(),
                b.value_type()
            ),
        }
    }

    /// Returns true when any element is NaN or infinite.
    pub fn has_non_finite(&self) -> bool {
        match self {
            Samples::Float32(v) => v.iter().any(|x| !x.is_finite()),
            Samples::Float64(v) => v.iter().any(|x| !x.is_finite()),
            _ => false,
        }
    }
}

impl PartialEq for Samples {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Samples::Float32(a), Samples::Float32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Samples::Float64(a), Samples::Float64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Samples::Int16(a), Samples::Int16(b)) => a == b,
            (Samples::Int32(a), Samples::Int32(b)) => a == b,
            _ => false,
        }
    }
}

impl From<Vec<f32>> for Samples {
    fn from(v: Vec<f32>) -> Self {
        Samples::Float32(v)
    }
}

impl From<Vec<f64>> for Samples {
    fn from(v: Vec<f64>) -> Self {
        Samples::Float64(v)
    }
}

impl From<Vec<i16>> for Samples {
    fn from(v: Vec<i16>) -> Self {
        Samples::Int16(v)
    }
}

impl From<Vec<i32>> for Samples {
    fn from(v: Vec<i32>) -> Self {
        Samples::Int32(v)
    }
}
