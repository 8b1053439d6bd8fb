use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::model::{validate_dataset, validate_subject, Dataset, Subject, ValidationIssue};

use super::chunked::encode_chunked_array;
use super::json::{to_pretty, write_file};
use super::npy::encode_raw_array;
use super::{
    default_chunk_len, ArrayCodecSpec, StoreError, ANNOTATIONS_DIR, ATTRIBUTES_FILE, CHUNKED_DIR,
    METADATA_FILE, RAW_FILE,
};

#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    pub codec: ArrayCodecSpec,
    /// Replace existing dataset, series or subject directories.
    pub overwrite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct WriteReport {
    pub datasets: u64,
    pub series: u64,
    pub subjects: u64,
    pub arrays: u64,
    pub annotation_sets: u64,
    pub bytes_written: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SubjectWriteReport {
    pub arrays: u64,
    pub annotation_sets: u64,
    pub bytes_written: u64,
}

#[derive(Serialize)]
struct DatasetMetadataOut<'a> {
    name: &'a str,
    format_version: &'a str,
}

#[derive(Serialize)]
struct SeriesMetadataOut<'a> {
    name: &'a str,
}

/// Validates `dataset` and writes it to `root/<dataset.name>`.
pub fn write_dataset(
    dataset: &Dataset,
    root: &Path,
    opts: WriteOptions,
) -> Result<WriteReport, StoreError> {
    let issues = validate_dataset(dataset);
    if issues.iter().any(ValidationIssue::is_error) {
        return Err(StoreError::Validation(issues));
    }
    let writer = DatasetWriter::create(root, &dataset.name, &dataset.format_version, opts)?;
    let mut report = WriteReport {
        datasets: 1,
        bytes_written: writer.metadata_bytes,
        ..Default::default()
    };
    for series in dataset.series.values() {
        report.bytes_written += writer.add_series(&series.name)?;
        report.series += 1;
        for subject in series.subjects.values() {
            let r = writer.write_subject(&series.name, subject)?;
            report.subjects += 1;
            report.arrays += r.arrays;
            report.annotation_sets += r.annotation_sets;
            report.bytes_written += r.bytes_written;
        }
    }
    Ok(report)
}

/// Incremental writer for one dataset directory. Subjects are written to a
/// hidden temporary directory and renamed into place, so a subject directory
/// is either complete or absent. Distinct subjects may be written from
/// several threads at once.
#[derive(Debug)]
pub struct DatasetWriter {
    dir: PathBuf,
    opts: WriteOptions,
    metadata_bytes: u64,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl DatasetWriter {
    /// Creates `root/<name>` with its metadata file. Fails if the directory
    /// exists unless `opts.overwrite` is set, in which case it is replaced.
    pub fn create(
        root: &Path,
        name: &str,
        format_version: &str,
        opts: WriteOptions,
    ) -> Result<Self, StoreError> {
        opts.codec.check().map_err(StoreError::InvalidCodec)?;
        let dir = root.join(name);
        if dir.exists() {
            if !opts.overwrite {
                return Err(StoreError::DestinationExists(dir));
            }
            std::fs::remove_dir_all(&dir).map_err(StoreError::io(&dir))?;
        }
        std::fs::create_dir(&dir).map_err(StoreError::io(&dir))?;
        let path = dir.join(METADATA_FILE);
        let metadata_bytes = write_file(
            &path,
            &to_pretty(&DatasetMetadataOut {
                name,
                format_version,
            }),
        )
        .map_err(StoreError::io(&path))?;
        Ok(DatasetWriter {
            dir,
            opts,
            metadata_bytes,
        })
    }

    /// Opens an existing dataset directory for adding series, or creates it.
    pub fn open_or_create(
        root: &Path,
        name: &str,
        format_version: &str,
        opts: WriteOptions,
    ) -> Result<Self, StoreError> {
        let dir = root.join(name);
        if dir.join(METADATA_FILE).is_file() {
            opts.codec.check().map_err(StoreError::InvalidCodec)?;
            return Ok(DatasetWriter {
                dir,
                opts,
                metadata_bytes: 0,
            });
        }
        Self::create(
            root,
            name,
            format_version,
            WriteOptions {
                overwrite: true,
                ..opts
            },
        )
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Creates the series directory; returns bytes written.
    pub fn add_series(&self, name: &str) -> Result<u64, StoreError> {
        let dir = self.dir.join(name);
        if dir.exists() {
            if !self.opts.overwrite {
                return Err(StoreError::DestinationExists(dir));
            }
            std::fs::remove_dir_all(&dir).map_err(StoreError::io(&dir))?;
        }
        std::fs::create_dir(&dir).map_err(StoreError::io(&dir))?;
        let path = dir.join(METADATA_FILE);
        write_file(&path, &to_pretty(&SeriesMetadataOut { name })).map_err(StoreError::io(&path))
    }

    /// Validates and writes one subject into an existing series directory.
    pub fn write_subject(
        &self,
        series: &str,
        subject: &Subject,
    ) -> Result<SubjectWriteReport, StoreError> {
        let issues = validate_subject(subject);
        if issues.iter().any(ValidationIssue::is_error) {
            return Err(StoreError::Validation(issues));
        }
        let series_dir = self.dir.join(series);
        let final_dir = series_dir.join(subject.id());
        if final_dir.exists() && !self.opts.overwrite {
            return Err(StoreError::DestinationExists(final_dir));
        }
        let tmp = series_dir.join(format!(
            ".tmp-{}-{}-{}",
            subject.id(),
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir(&tmp).map_err(StoreError::io(&tmp))?;
        let result = write_subject_files(&tmp, subject, self.opts.codec);
        let report = match result {
            Ok(r) => r,
            Err(e) => {
                let _ = std::fs::remove_dir_all(&tmp);
                return Err(e);
            }
        };
        if final_dir.exists() {
            std::fs::remove_dir_all(&final_dir).map_err(StoreError::io(&final_dir))?;
        }
        std::fs::rename(&tmp, &final_dir).map_err(|e| {
            let _ = std::fs::remove_dir_all(&tmp);
            StoreError::io(&final_dir)(e)
        })?;
        Ok(report)
    }
}

fn write_subject_files(
    dir: &Path,
    subject: &Subject,
    codec: ArrayCodecSpec,
) -> Result<SubjectWriteReport, StoreError> {
    let mut report = SubjectWriteReport::default();
    let put = |path: PathBuf, bytes: &[u8]| write_file(&path, bytes).map_err(StoreError::io(&path));

    report.bytes_written += put(dir.join(METADATA_FILE), &to_pretty(&subject.metadata))?;

    for array in subject.sample_arrays.values() {
        let attrs = &array.attributes;
        let array_dir = dir.join(&attrs.name);
        std::fs::create_dir(&array_dir).map_err(StoreError::io(&array_dir))?;
        report.bytes_written += put(array_dir.join(ATTRIBUTES_FILE), &to_pretty(attrs))?;
        let values = array.values()?;
        match codec {
            ArrayCodecSpec::Raw => {
                let path = array_dir.join(RAW_FILE);
                let bytes = encode_raw_array(&values, attrs.value_type).map_err(|source| {
                    StoreError::Codec {
                        path: path.clone(),
                        source,
                    }
                })?;
                report.bytes_written += put(path, &bytes)?;
            }
            ArrayCodecSpec::ChunkedZstd {
                zstd_level,
                chunk_len,
            } => {
                let chunk_dir = array_dir.join(CHUNKED_DIR);
                let chunk_len = chunk_len.unwrap_or_else(|| default_chunk_len(attrs.value_type));
                let enc = encode_chunked_array(&values, attrs.value_type, chunk_len, zstd_level)
                    .map_err(|source| StoreError::Codec {
                        path: chunk_dir.clone(),
                        source,
                    })?;
                std::fs::create_dir(&chunk_dir).map_err(StoreError::io(&chunk_dir))?;
                for (name, bytes) in enc.files() {
                    report.bytes_written += put(chunk_dir.join(name), bytes)?;
                }
            }
        }
        report.arrays += 1;
    }

    if !subject.annotations.is_empty() {
        let ann_dir = dir.join(ANNOTATIONS_DIR);
        std::fs::create_dir(&ann_dir).map_err(StoreError::io(&ann_dir))?;
        for set in subject.annotations.values() {
            report.bytes_written +=
                put(ann_dir.join(format!("{}.json", set.name)), &to_pretty(set))?;
            report.annotation_sets += 1;
        }
    }
    Ok(report)
}
