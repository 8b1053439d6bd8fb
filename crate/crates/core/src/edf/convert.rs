use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{SampleArray, Scalar, Subject, SubjectMetadata, FORMAT_VERSION};
use crate::store::{ArrayCodecSpec, DatasetWriter, StoreError, WriteOptions};

use super::header::EdfHeader;
use super::mapping::{map_annotations, LabelMapping};
use super::signal::EdfFile;
use super::tal::parse_tal_records;
use super::{EdfError, ParseMode};

const RESERVED_ARRAY_NAMES: &[&str] = &["annotations", "metadata.json"];

/// Lower-cases, replaces every non-alphanumeric character with `_` and
/// collapses runs of `_`. `"EEG Fpz-Cz"` becomes `"eeg_fpz_cz"`.
pub fn sanitize_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for c in label.trim().chars().flat_map(char::to_lowercase) {
        let c = if c.is_alphanumeric() { c } else { '_' };
        if !(c == '_' && out.ends_with('_')) {
            out.push(c);
        }
    }
    out
}

/// Array names for the data signals. Collisions (and reserved names) get
/// `_2`, `_3`, ... suffixes in lenient mode and fail in strict mode.
fn array_names(
    labels: &[&str],
    mode: ParseMode,
    warnings: &mut Vec<String>,
) -> Result<Vec<String>, EdfError> {
    let mut taken: HashMap<String, &str> = RESERVED_ARRAY_NAMES
        .iter()
        .map(|n| (n.to_string(), *n))
        .collect();
    let mut names = Vec::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        let mut base = sanitize_label(label);
        if base.is_empty() {
            base = format!("signal_{i}");
        }
        let mut name = base.clone();
        if let Some(first) = taken.get(&name) {
            if mode == ParseMode::Strict {
                return Err(EdfError::DuplicateLabel {
                    first: first.to_string(),
                    second: label.to_string(),
                    sanitized: base,
                });
            }
            let mut k = 2;
            while taken.contains_key(&name) {
                name = format!("{base}_{k}");
                k += 1;
            }
            warnings.push(format!("signal {label:?} renamed to {name:?}"));
        }
        taken.insert(name.clone(), label);
        names.push(name);
    }
    Ok(names)
}

/// Sex and age from an EDF+ patient field `code sex birthdate name`, when
/// well-formed.
fn patient_info(header: &EdfHeader) -> (Option<String>, Option<f64>) {
    if !header.is_edf_plus() {
        return (None, None);
    }
    let parts: Vec<&str> = header.patient_id.split_whitespace().collect();
    let sex = parts
        .get(1)
        .filter(|s| matches!(**s, "F" | "M"))
        .map(|s| s.to_string());
    let age = parts
        .get(2)
        .and_then(|b| NaiveDate::parse_from_str(b, "%d-%b-%Y").ok())
        .and_then(|birth| full_years(birth, header.start_datetime))
        .map(|y| y as f64);
    (sex, age)
}

fn full_years(birth: NaiveDate, at: NaiveDateTime) -> Option<i32> {
    let at = at.date();
    let mut years = at.year() - birth.year();
    if (at.month(), at.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    (years >= 0).then_some(years)
}

#[derive(Debug, Clone)]
pub struct ConvertedSubject {
    pub subject: Subject,
    pub warnings: Vec<String>,
    /// Records dropped from the end of the file.
    pub dropped_records: usize,
}

/// Reads an EDF/EDF+C file into a subject: one float32 array per data
/// signal, named by [`sanitize_label`], plus annotation sets from the
/// annotation channels.
pub fn convert_edf_to_subject(
    path: &Path,
    subject_id: &str,
    mode: ParseMode,
    mapping: &LabelMapping,
) -> Result<ConvertedSubject, EdfError> {
    let edf = EdfFile::open(path, mode)?;
    convert_file(&edf, subject_id, mapping)
}

pub(crate) fn convert_file(
    edf: &EdfFile,
    subject_id: &str,
    mapping: &LabelMapping,
) -> Result<ConvertedSubject, EdfError> {
    let header = edf.header();
    if header.is_discontinuous() {
        return Err(EdfError::UnsupportedDiscontinuous);
    }
    let mode = edf.mode();
    let mut warnings = edf.warnings().to_vec();
    let dropped_records = match header.n_records {
        n if n >= 0 => n as usize - edf.n_records(),
        _ => 0,
    };

    let data: Vec<usize> = (0..header.signals.len())
        .filter(|&i| !header.signals[i].is_annotation_channel)
        .collect();
    let labels: Vec<&str> = data
        .iter()
        .map(|&i| header.signals[i].label.as_str())
        .collect();
    let names = array_names(&labels, mode, &mut warnings)?;

    let (sex, age) = patient_info(header);
    let mut metadata = SubjectMetadata::new(subject_id);
    metadata.recording_start = Some(header.start_datetime);
    metadata.sex = sex;
    metadata.age = age;
    metadata.extra.insert(
        "edf_patient_id".into(),
        Scalar::from(header.patient_id.as_str()),
    );
    metadata.extra.insert(
        "edf_recording_id".into(),
        Scalar::from(header.recording_id.as_str()),
    );
    let mut subject = Subject::new(metadata);

    for (&index, name) in data.iter().zip(names) {
        let (values, rate) = edf.read_signal_physical(index)?;
        let mut array = SampleArray::new(name, rate, values);
        let dim = &header.signals[index].physical_dimension;
        if !dim.is_empty() {
            array = array.with_unit(dim.as_str());
        }
        subject = subject.with_array(array);
    }

    let mut tals = Vec::new();
    for index in edf.annotation_channels() {
        let (mut t, w) = parse_tal_records(&edf.annotation_bytes(index)?, mode)?;
        tals.append(&mut t);
        warnings.extend(w);
    }
    let (sets, w) = map_annotations(&tals, mapping);
    warnings.extend(w);
    for set in sets {
        subject = subject.with_annotations(set);
    }

    Ok(ConvertedSubject {
        subject,
        warnings,
        dropped_records,
    })
}

#[derive(Debug, Clone)]
pub struct ConvertOptions {
    pub codec: ArrayCodecSpec,
    pub mode: ParseMode,
    pub mapping: LabelMapping,
    /// Worker threads; `None` uses one per core.
    pub workers: Option<usize>,
    pub overwrite: bool,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions {
            codec: ArrayCodecSpec::Raw,
            mode: ParseMode::Strict,
            mapping: LabelMapping::default(),
            workers: None,
            overwrite: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedFile {
    pub file: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionReport {
    pub converted: usize,
    pub skipped: Vec<SkippedFile>,
    /// Prefixed with the source file name.
    pub warnings: Vec<String>,
    pub elapsed_sec: f64,
    pub workers: usize,
    pub bytes_written: u64,
}

fn edf_files(src_dir: &Path) -> Result<Vec<PathBuf>, EdfError> {
    let io = |source| EdfError::Io {
        path: src_dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(src_dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_edf = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("edf"));
        if is_edf && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(EdfError::EmptySourceDirectory(src_dir.to_path_buf()));
    }
    Ok(files)
}

enum Outcome {
    Converted { warnings: Vec<String>, bytes: u64 },
    Skipped(String),
}

/// Converts every `*.edf` file in `src_dir` into a subject of
/// `dest_root/dataset_name/series_name`, named by the file stem. Files are
/// processed in parallel. In strict mode the first failing file aborts the
/// run; in lenient mode it is skipped and reported.
pub fn convert_directory(
    src_dir: &Path,
    dataset_name: &str,
    series_name: &str,
    dest_root: &Path,
    opts: &ConvertOptions,
) -> Result<ConversionReport, EdfError> {
    let started = Instant::now();
    opts.mapping.check()?;
    let files = edf_files(src_dir)?;
    let write_opts = WriteOptions {
        codec: opts.codec,
        overwrite: opts.overwrite,
    };
    let dataset_dir = dest_root.join(dataset_name);
    if dataset_dir.exists()
        && !opts.overwrite
        && !dataset_dir.join(crate::store::METADATA_FILE).is_file()
    {
        return Err(StoreError::DestinationExists(dataset_dir).into());
    }
    let created = if dataset_dir.exists() {
        let series_dir = dataset_dir.join(series_name);
        (!series_dir.exists()).then_some(series_dir)
    } else {
        Some(dataset_dir.clone())
    };
    let writer =
        DatasetWriter::open_or_create(dest_root, dataset_name, FORMAT_VERSION, write_opts)?;
    let mut bytes_written = writer.add_series(series_name)?;

    let workers = opts
        .workers
        .unwrap_or_else(rayon::current_num_threads)
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EdfError::Io {
            path: src_dir.to_path_buf(),
            source: std::io::Error::other(e),
        })?;

    let convert_one = |path: &PathBuf| -> Result<Outcome, EdfError> {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let attempt = convert_edf_to_subject(path, &stem, opts.mode, &opts.mapping)
            .and_then(|c| Ok((writer.write_subject(series_name, &c.subject)?, c)));
        match attempt {
            Ok((report, c)) => Ok(Outcome::Converted {
                warnings: c.warnings,
                bytes: report.bytes_written,
            }),
            Err(e) if opts.mode == ParseMode::Lenient && !e.is_environmental() => {
                Ok(Outcome::Skipped(e.to_string()))
            }
            Err(e) => Err(EdfError::File {
                path: path.clone(),
                source: Box::new(e),
            }),
        }
    };
    let outcomes: Vec<Outcome> =
        match pool.install(|| files.par_iter().map(convert_one).collect::<Result<_, _>>()) {
            Ok(o) => o,
            Err(e) => {
                // leave no partial output behind
                if let Some(dir) = created {
                    let _ = std::fs::remove_dir_all(dir);
                }
                return Err(e);
            }
        };

    let mut report = ConversionReport {
        converted: 0,
        skipped: Vec::new(),
        warnings: Vec::new(),
        elapsed_sec: 0.0,
        workers,
        bytes_written: 0,
    };
    for (path, outcome) in files.iter().zip(outcomes) {
        let file = path
            .file_name()
            .map_or_else(String::new, |f| f.to_string_lossy().into_owned());
        match outcome {
            Outcome::Converted { warnings, bytes } => {
                report.converted += 1;
                bytes_written += bytes;
                report
                    .warnings
                    .extend(warnings.into_iter().map(|w| format!("{file}: {w}")));
            }
            Outcome::Skipped(reason) => report.skipped.push(SkippedFile {
                file: path.clone(),
                reason,
            }),
        }
    }
    report.bytes_written = bytes_written;
    report.elapsed_sec = started.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize() {
        assert_eq!(sanitize_label("EEG Fpz-Cz"), "eeg_fpz_cz");
        assert_eq!(sanitize_label("  Resp  oro-nasal "), "resp_oro_nasal");
        assert_eq!(sanitize_label("EMG--submental"), "emg_submental");
        assert_eq!(sanitize_label("../x"), "_x");
    }

    #[test]
    fn collisions() {
        let mut w = Vec::new();
        let names = array_names(
            &["EEG A", "eeg-a", "Annotations", ""],
            ParseMode::Lenient,
            &mut w,
        )
        .unwrap();
        assert_eq!(names, ["eeg_a", "eeg_a_2", "annotations_2", "signal_3"]);
        assert_eq!(w.len(), 2);
        assert!(matches!(
            array_names(&["EEG A", "eeg-a"], ParseMode::Strict, &mut w),
            Err(EdfError::DuplicateLabel { .. })
        ));
    }

    #[test]
    fn age_from_birthdate() {
        let at = NaiveDate::from_ymd_opt(2002, 3, 2)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let birth = |s| NaiveDate::parse_from_str(s, "%d-%b-%Y").unwrap();
        assert_eq!(full_years(birth("02-MAY-1951"), at), Some(50));
        assert_eq!(full_years(birth("02-MAR-1951"), at), Some(51));
        assert_eq!(full_years(birth("03-MAR-2002"), at), None);
    }
}
