use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Pretty JSON with two-space indentation and a trailing newline.
pub(crate) fn to_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("model types always serialize");
    out.push(b'\n');
    out
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> std::io::Result<u64> {
    std::fs::write(path, bytes)?;
    Ok(bytes.len() as u64)
}

pub(crate) fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, String> {
    serde_json::from_slice(bytes).map_err(|e| e.to_string())
}
