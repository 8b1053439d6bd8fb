//! Time-stamped annotation lists: `+onset[\x15duration]\x14text\x14...\x14\x00`.

use serde::Serialize;

use super::{EdfError, ParseMode};

const DURATION_MARK: u8 = 0x15;
const TEXT_END: u8 = 0x14;
const TAL_END: u8 = 0x00;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TalAnnotation {
    pub onset_sec: f64,
    pub duration_sec: Option<f64>,
    pub texts: Vec<String>,
}

/// Parses the TALs in an annotation channel. Zero padding between TALs is
/// skipped. TALs whose texts are all empty (time-keeping entries) are left
/// out.
pub fn parse_tal_records(
    bytes: &[u8],
    mode: ParseMode,
) -> Result<(Vec<TalAnnotation>, Vec<String>), EdfError> {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes[pos] == TAL_END {
            pos += 1;
            continue;
        }
        let start = pos;
        match parse_one(bytes, start, mode, &mut warnings) {
            Ok((tal, next)) => {
                pos = next;
                if !tal.texts.is_empty() {
                    out.push(tal);
                }
            }
            Err(reason) => {
                if mode == ParseMode::Strict {
                    return Err(EdfError::MalformedTal {
                        offset: start,
                        reason,
                    });
                }
                warnings.push(format!("TAL at byte {start} skipped: {reason}"));
                pos = bytes[start..]
                    .iter()
                    .position(|&b| b == TAL_END)
                    .map_or(bytes.len(), |i| start + i + 1);
            }
        }
    }
    Ok((out, warnings))
}

fn parse_one(
    bytes: &[u8],
    start: usize,
    mode: ParseMode,
    warnings: &mut Vec<String>,
) -> Result<(TalAnnotation, usize), String> {
    let head_end = bytes[start..]
        .iter()
        .position(|&b| b == TEXT_END || b == TAL_END)
        .map(|i| start + i)
        .ok_or("unterminated onset")?;
    if bytes[head_end] != TEXT_END {
        return Err("TAL ends before its first 0x14".into());
    }
    let head = &bytes[start..head_end];
    let (onset_raw, duration_raw) = match head.iter().position(|&b| b == DURATION_MARK) {
        Some(i) => (&head[..i], Some(&head[i + 1..])),
        None => (head, None),
    };
    let onset_sec = parse_onset(onset_raw, mode, warnings)?;
    let duration_sec = duration_raw
        .map(|d| {
            parse_number(d)
                .filter(|v| *v >= 0.0)
                .ok_or_else(|| format!("duration {:?} is not a non-negative number", lossy(d)))
        })
        .transpose()?;

    let mut texts = Vec::new();
    let mut pos = head_end + 1;
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == TEXT_END || b == TAL_END)
            .map(|i| pos + i)
            .ok_or("unterminated annotation text")?;
        if bytes[end] == TAL_END {
            return Err("annotation text not followed by 0x14".into());
        }
        let raw = &bytes[pos..end];
        if !raw.is_empty() {
            texts.push(decode_text(raw, mode, warnings)?);
        }
        pos = end + 1;
        match bytes.get(pos) {
            Some(&TAL_END) => {
                return Ok((
                    TalAnnotation {
                        onset_sec,
                        duration_sec,
                        texts,
                    },
                    pos + 1,
                ))
            }
            Some(_) => continue,
            None => return Err("TAL not terminated by 0x00".into()),
        }
    }
}

fn lossy(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// Unsigned decimal: digits with an optional fraction.
fn parse_number(b: &[u8]) -> Option<f64> {
    let s = std::str::from_utf8(b).ok()?;
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits = |p: &str| p.bytes().all(|c| c.is_ascii_digit());
    if int.is_empty() || !digits(int) || !digits(frac) || (s.ends_with('.')) {
        return None;
    }
    s.parse().ok()
}

fn parse_onset(b: &[u8], mode: ParseMode, warnings: &mut Vec<String>) -> Result<f64, String> {
    let malformed = || format!("onset {:?} is not a signed number", lossy(b));
    match b.first() {
        Some(b'+') => parse_number(&b[1..]).ok_or_else(malformed),
        Some(b'-') => parse_number(&b[1..]).map(|v| -v).ok_or_else(malformed),
        _ if mode == ParseMode::Lenient => {
            let v = parse_number(b).ok_or_else(malformed)?;
            warnings.push(format!("onset {:?} has no sign", lossy(b)));
            Ok(v)
        }
        _ => Err(malformed()),
    }
}

fn decode_text(raw: &[u8], mode: ParseMode, warnings: &mut Vec<String>) -> Result<String, String> {
    match std::str::from_utf8(raw) {
        Ok(s) => Ok(s.to_string()),
        Err(_) if mode == ParseMode::Lenient => {
            let s = lossy(raw);
            warnings.push(format!("annotation text {s:?} is not valid UTF-8"));
            Ok(s)
        }
        Err(e) => Err(format!("annotation text is not valid UTF-8: {e}")),
    }
}
