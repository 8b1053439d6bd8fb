//! Fixed-width ASCII header of EDF and EDF+ files.

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::Serialize;

use super::{EdfError, ParseMode};

pub const FIXED_HEADER_LEN: usize = 256;
pub const SIGNAL_HEADER_LEN: usize = 256;
pub const ANNOTATION_LABEL: &str = "EDF Annotations";

/// Start date used by EDF+ when the real date is unknown.
fn clipping_date() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(1985, 1, 1)
        .unwrap()
        .and_time(NaiveTime::MIN)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdfSignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub reserved: String,
    pub is_annotation_channel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_datetime: NaiveDateTime,
    pub header_bytes: usize,
    /// `EDF+C` / `EDF+D` for EDF+ files, usually blank otherwise.
    pub reserved: String,
    /// `-1` when the writer did not know the record count.
    pub n_records: i64,
    pub record_duration_sec: f64,
    pub n_signals: usize,
    pub signals: Vec<EdfSignalHeader>,
}

impl EdfHeader {
    pub fn is_edf_plus(&self) -> bool {
        self.reserved.starts_with("EDF+")
    }

    pub fn is_discontinuous(&self) -> bool {
        self.reserved.starts_with("EDF+D")
    }

    /// Bytes of one data record.
    pub fn record_len(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record * 2).sum()
    }

    /// Byte offset of each signal inside a data record.
    pub fn signal_offsets(&self) -> Vec<usize> {
        self.signals
            .iter()
            .scan(0, |acc, s| {
                let at = *acc;
                *acc += s.samples_per_record * 2;
                Some(at)
            })
            .collect()
    }
}

/// Trimmed ASCII text of `bytes[start..start + len]`.
fn text(bytes: &[u8], start: usize, len: usize) -> String {
    String::from_utf8_lossy(&bytes[start..start + len])
        .trim()
        .to_string()
}

struct FieldParser<'a> {
    mode: ParseMode,
    warnings: &'a mut Vec<String>,
}

impl FieldParser<'_> {
    fn number<T>(&mut self, field: &str, raw: &str, default: Option<T>) -> Result<T, EdfError>
    where
        T: std::str::FromStr + std::fmt::Display + Copy,
    {
        if let Ok(v) = raw.parse::<T>() {
            return Ok(v);
        }
        let malformed = || EdfError::MalformedNumericField {
            field: field.to_string(),
            value: raw.to_string(),
        };
        if self.mode == ParseMode::Strict {
            return Err(malformed());
        }
        // decimal commas are a common exporter defect
        if let Ok(v) = raw.replace(',', ".").parse::<T>() {
            self.warnings
                .push(format!("{field}: read {raw:?} with a decimal comma as {v}"));
            return Ok(v);
        }
        match default {
            Some(d) => {
                self.warnings
                    .push(format!("{field}: malformed value {raw:?}, using {d}"));
                Ok(d)
            }
            None => Err(malformed()),
        }
    }
}

fn century(yy: u32) -> i32 {
    if yy >= 85 {
        1900 + yy as i32
    } else {
        2000 + yy as i32
    }
}

/// Parses `dd.mm.yy` and `hh.mm.ss`, resolving the two-digit year with the
/// 1985 pivot.
pub fn parse_start(date: &str, time: &str) -> Option<NaiveDateTime> {
    let nums = |s: &str| -> Option<Vec<u32>> {
        let parts: Vec<_> = s.split('.').collect();
        if parts.len() != 3 || parts.iter().any(|p| p.len() != 2) {
            return None;
        }
        parts.iter().map(|p| p.parse().ok()).collect()
    };
    let d = nums(date)?;
    let t = nums(time)?;
    let date = NaiveDate::from_ymd_opt(century(d[2]), d[1], d[0])?;
    let time = NaiveTime::from_hms_opt(t[0], t[1], t[2])?;
    Some(date.and_time(time))
}

/// Parses the 256-byte fixed header and the per-signal headers.
///
/// Lenient mode substitutes defaults for malformed fields and records a
/// warning for each: `n_records` -1, record duration 1 s, digital range
/// -32768..32767, physical range equal to the digital range, start date
/// 01.01.85 00.00.00.
pub fn parse_edf_header(
    bytes: &[u8],
    mode: ParseMode,
) -> Result<(EdfHeader, Vec<String>), EdfError> {
    if bytes.len() < FIXED_HEADER_LEN {
        return Err(EdfError::TruncatedHeader {
            needed: FIXED_HEADER_LEN,
            available: bytes.len(),
        });
    }
    let mut warnings = Vec::new();
    let mut p = FieldParser {
        mode,
        warnings: &mut warnings,
    };

    let version = text(bytes, 0, 8);
    let patient_id = text(bytes, 8, 80);
    let recording_id = text(bytes, 88, 80);
    let date = text(bytes, 168, 8);
    let time = text(bytes, 176, 8);
    let header_bytes_raw = text(bytes, 184, 8);
    let reserved = text(bytes, 192, 44);
    let n_records: i64 = p.number("n_records", &text(bytes, 236, 8), Some(-1))?;
    let mut record_duration_sec: f64 =
        p.number("record_duration", &text(bytes, 244, 8), Some(1.0))?;
    let header_bytes_field: Option<usize> = header_bytes_raw.parse().ok();
    let n_signals: usize = match text(bytes, 252, 4).parse() {
        Ok(n) => n,
        Err(_) => match (mode, header_bytes_field) {
            (ParseMode::Lenient, Some(hb))
                if hb > FIXED_HEADER_LEN && hb % SIGNAL_HEADER_LEN == 0 =>
            {
                let n = hb / SIGNAL_HEADER_LEN - 1;
                p.warnings.push(format!(
                    "n_signals: malformed, derived {n} from header_bytes"
                ));
                n
            }
            _ => {
                return Err(EdfError::MalformedNumericField {
                    field: "n_signals".into(),
                    value: text(bytes, 252, 4),
                })
            }
        },
    };
    if n_signals == 0 {
        return Err(EdfError::InvalidField {
            field: "n_signals".into(),
            reason: "must be at least 1".into(),
        });
    }
    if n_records < -1 {
        return Err(EdfError::InvalidField {
            field: "n_records".into(),
            reason: format!("{n_records} is negative"),
        });
    }

    let expected_header = FIXED_HEADER_LEN + SIGNAL_HEADER_LEN * n_signals;
    match header_bytes_field {
        Some(hb) if hb == expected_header => {}
        _ if mode == ParseMode::Strict => {
            return Err(EdfError::InconsistentHeaderBytes {
                declared: header_bytes_raw,
                expected: expected_header,
            })
        }
        _ => p.warnings.push(format!(
            "header_bytes: declared {header_bytes_raw:?}, using {expected_header}"
        )),
    }
    if bytes.len() < expected_header {
        return Err(EdfError::TruncatedHeader {
            needed: expected_header,
            available: bytes.len(),
        });
    }

    let start_datetime = match parse_start(&date, &time) {
        Some(dt) => dt,
        None if mode == ParseMode::Strict => {
            return Err(EdfError::InvalidField {
                field: "start".into(),
                reason: format!("{date:?} {time:?} is not dd.mm.yy hh.mm.ss"),
            })
        }
        None => {
            p.warnings.push(format!(
                "start: malformed {date:?} {time:?}, using 01.01.85 00.00.00"
            ));
            clipping_date()
        }
    };

    let ns = n_signals;
    let base = FIXED_HEADER_LEN;
    // Per-signal fields are stored field-major: all labels, then all
    // transducers, and so on.
    let widths = [16usize, 80, 8, 8, 8, 8, 8, 80, 8, 32];
    let mut field_starts = [0usize; 10];
    let mut acc = base;
    for (i, w) in widths.iter().enumerate() {
        field_starts[i] = acc;
        acc += w * ns;
    }
    let field = |f: usize, i: usize| text(bytes, field_starts[f] + widths[f] * i, widths[f]);

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let label = field(0, i);
        let is_annotation_channel = label == ANNOTATION_LABEL;
        let name = |f: &str| format!("signal {i} ({label}) {f}");
        let mut digital_min: i64 = p.number(&name("digital_min"), &field(5, i), Some(-32768))?;
        let mut digital_max: i64 = p.number(&name("digital_max"), &field(6, i), Some(32767))?;
        for (what, v) in [
            ("digital_min", &mut digital_min),
            ("digital_max", &mut digital_max),
        ] {
            if !(-32768..=32767).contains(v) {
                if mode == ParseMode::Strict {
                    return Err(EdfError::InvalidField {
                        field: name(what),
                        reason: format!("{v} outside the 16-bit range"),
                    });
                }
                let clamped = (*v).clamp(-32768, 32767);
                p.warnings
                    .push(format!("{}: {v} clamped to {clamped}", name(what)));
                *v = clamped;
            }
        }
        let digital_min = digital_min as i32;
        let digital_max = digital_max as i32;
        let physical_min: f64 = p.number(
            &name("physical_min"),
            &field(3, i),
            Some(digital_min as f64),
        )?;
        let physical_max: f64 = p.number(
            &name("physical_max"),
            &field(4, i),
            Some(digital_max as f64),
        )?;
        let spr: i64 = p.number(&name("samples_per_record"), &field(8, i), None)?;
        if spr < 1 {
            return Err(EdfError::InvalidField {
                field: name("samples_per_record"),
                reason: format!("{spr} is not positive"),
            });
        }
        if !is_annotation_channel && digital_min == digital_max {
            if mode == ParseMode::Strict {
                return Err(EdfError::ZeroDigitalRange { signal: label });
            }
            p.warnings.push(format!(
                "{}: zero digital range, using gain 1 and offset physical_min",
                name("digital_range")
            ));
        }
        signals.push(EdfSignalHeader {
            transducer: field(1, i),
            physical_dimension: field(2, i),
            physical_min,
            physical_max,
            digital_min,
            digital_max,
            prefiltering: field(7, i),
            samples_per_record: spr as usize,
            reserved: field(9, i),
            is_annotation_channel,
            label,
        });
    }

    let annotations_only = signals.iter().all(|s| s.is_annotation_channel);
    if record_duration_sec.is_nan()
        || (record_duration_sec <= 0.0 && !(annotations_only && record_duration_sec == 0.0))
    {
        if mode == ParseMode::Strict {
            return Err(EdfError::InvalidField {
                field: "record_duration".into(),
                reason: format!("{record_duration_sec} is not positive"),
            });
        }
        warnings.push(format!(
            "record_duration: {record_duration_sec} is not positive, using 1"
        ));
        record_duration_sec = 1.0;
    }

    Ok((
        EdfHeader {
            version,
            patient_id,
            recording_id,
            start_datetime,
            header_bytes: expected_header,
            reserved,
            n_records,
            record_duration_sec,
            n_signals,
            signals,
        },
        warnings,
    ))
}
