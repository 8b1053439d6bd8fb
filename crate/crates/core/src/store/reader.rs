use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::model::{
    validate_dataset, AnnotationSet, ArrayAttributes, ArrayData, Dataset, IssueCode, SampleArray,
    Series, Subject, SubjectMetadata, ValidationIssue, ValueType,
};

use super::array_ref::StoredArrayRef;
use super::json::parse;
use super::stats::IoStats;
use super::{StoreError, ANNOTATIONS_DIR, ATTRIBUTES_FILE, METADATA_FILE};

#[derive(Debug, Clone)]
pub struct ReadOptions {
    pub series_filter: Option<BTreeSet<String>>,
    pub subject_filter: Option<BTreeSet<String>>,
    /// Leave sample values on disk until they are accessed.
    pub lazy_arrays: bool,
    pub stats: Arc<IoStats>,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            series_filter: None,
            subject_filter: None,
            lazy_arrays: true,
            stats: Arc::new(IoStats::new()),
        }
    }
}

impl ReadOptions {
    pub fn eager() -> Self {
        ReadOptions {
            lazy_arrays: false,
            ..Default::default()
        }
    }

    pub fn with_subjects<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.subject_filter = Some(ids.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_series<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.series_filter = Some(names.into_iter().map(Into::into).collect());
        self
    }
}

#[derive(Deserialize)]
struct DatasetMetadataIn {
    name: String,
    format_version: String,
}

#[derive(Deserialize)]
struct SeriesMetadataIn {
    name: String,
}

/// Reads the dataset rooted at `root` (the directory holding the dataset's
/// `metadata.json`). Series, subjects and arrays are visited in name order.
pub fn read_dataset(root: &Path, opts: &ReadOptions) -> Result<Dataset, StoreError> {
    read_dataset_with_warnings(root, opts).map(|(d, _)| d)
}

/// Like [`read_dataset`], also returning non-fatal issues.
pub fn read_dataset_with_warnings(
    root: &Path,
    opts: &ReadOptions,
) -> Result<(Dataset, Vec<ValidationIssue>), StoreError> {
    let mut ctx = Ctx::new(root, &opts.stats)?;
    let meta: Option<DatasetMetadataIn> = ctx.read_json(&root.join(METADATA_FILE));
    let mut dataset = Dataset::new(String::new());
    if let Some(meta) = meta {
        dataset.name = meta.name;
        dataset.format_version = meta.format_version;
    }

    for (key, series_dir) in ctx.subdirs(root) {
        if opts
            .series_filter
            .as_ref()
            .is_some_and(|f| !f.contains(&key))
        {
            continue;
        }
        let meta_path = series_dir.join(METADATA_FILE);
        let name = if meta_path.is_file() {
            ctx.read_json::<SeriesMetadataIn>(&meta_path)
                .map(|m| m.name)
                .unwrap_or_else(|| key.clone())
        } else {
            ctx.issues.push(ValidationIssue::warning(
                ctx.rel(&meta_path),
                IssueCode::MissingSeriesMetadata,
                "series has no metadata file; using the directory name",
            ));
            key.clone()
        };
        let mut series = Series::new(name);
        for (skey, subject_dir) in ctx.subdirs(&series_dir) {
            if opts
                .subject_filter
                .as_ref()
                .is_some_and(|f| !f.contains(&skey))
            {
                continue;
            }
            if let Some(subject) = ctx.read_subject(&subject_dir, opts) {
                series.subjects.insert(skey, subject);
            }
        }
        dataset.series.insert(key, series);
    }

    let mut issues = ctx.issues;
    if issues.iter().any(ValidationIssue::is_error) {
        return Err(StoreError::Read(issues));
    }
    let mut validation = validate_dataset(&dataset);
    for issue in &mut validation {
        if let Some(file) = locate_file(&dataset, &issue.path) {
            issue.message = format!("{} (in {file})", issue.message);
        }
    }
    issues.extend(validation);
    if issues.iter().any(ValidationIssue::is_error) {
        return Err(StoreError::Validation(issues));
    }
    Ok((dataset, issues))
}

/// File that stores the field a validation path points at.
fn locate_file(dataset: &Dataset, path: &str) -> Option<String> {
    let parts: Vec<&str> = path.split('/').collect();
    match parts.as_slice() {
        ["name"] => Some(METADATA_FILE.to_string()),
        [series] => Some(format!("{series}/{METADATA_FILE}")),
        [series, second] => {
            let s = dataset.series.get(*series)?;
            if s.subjects.contains_key(*second) {
                Some(format!("{series}/{second}/{METADATA_FILE}"))
            } else {
                Some(format!("{series}/{METADATA_FILE}"))
            }
        }
        [series, subj, third, rest @ ..] => {
            let subject = dataset.series.get(*series)?.subjects.get(*subj)?;
            if *third == ANNOTATIONS_DIR {
                rest.first()
                    .map(|set| format!("{series}/{subj}/{ANNOTATIONS_DIR}/{set}.json"))
            } else if subject.sample_arrays.contains_key(*third) {
                Some(format!("{series}/{subj}/{third}/{ATTRIBUTES_FILE}"))
            } else {
                Some(format!("{series}/{subj}/{METADATA_FILE}"))
            }
        }
        _ => None,
    }
}

struct Ctx<'a> {
    root: PathBuf,
    stats: &'a Arc<IoStats>,
    issues: Vec<ValidationIssue>,
}

impl<'a> Ctx<'a> {
    fn new(root: &Path, stats: &'a Arc<IoStats>) -> Result<Self, StoreError> {
        if !root.join(METADATA_FILE).is_file() {
            return Err(StoreError::NotSlfDataset(root.to_path_buf()));
        }
        Ok(Ctx {
            root: root.to_path_buf(),
            stats,
            issues: Vec::new(),
        })
    }

    fn rel(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }

    fn error(&mut self, path: &Path, code: IssueCode, message: impl Into<String>) {
        let issue = ValidationIssue::error(self.rel(path), code, message);
        self.issues.push(issue);
    }

    fn store_error(&mut self, path: &Path, err: StoreError) {
        let (path, code, message) = match err {
            StoreError::Codec { path, source } => (path, source.code(), source.to_string()),
            StoreError::Layout {
                path,
                code,
                message,
            } => (path, code, message),
            StoreError::Io { path, source } => (path, IssueCode::IoFailure, source.to_string()),
            other => (path.to_path_buf(), IssueCode::IoFailure, other.to_string()),
        };
        self.error(&path, code, message);
    }

    fn read_json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Option<T> {
        match self.stats.read_file(path) {
            Ok(bytes) => match parse(&bytes) {
                Ok(v) => Some(v),
                Err(msg) => {
                    self.error(path, IssueCode::MalformedJson, msg);
                    None
                }
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                self.error(path, IssueCode::MissingFile, "file not found");
                None
            }
            Err(e) => {
                self.error(path, IssueCode::IoFailure, e.to_string());
                None
            }
        }
    }

    /// Visible subdirectories in name order. Dot-prefixed entries (including
    /// in-progress subject writes) are skipped.
    fn subdirs(&mut self, dir: &Path) -> Vec<(String, PathBuf)> {
        self.entries(dir)
            .into_iter()
            .filter(|(_, p)| p.is_dir())
            .collect()
    }

    fn entries(&mut self, dir: &Path) -> Vec<(String, PathBuf)> {
        let rd = match std::fs::read_dir(dir) {
            Ok(rd) => rd,
            Err(e) => {
                self.error(dir, IssueCode::IoFailure, e.to_string());
                return Vec::new();
            }
        };
        let mut out: Vec<_> = rd
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                (!name.starts_with('.')).then(|| (name, e.path()))
            })
            .collect();
        out.sort();
        out
    }

    fn read_subject(&mut self, dir: &Path, opts: &ReadOptions) -> Option<Subject> {
        let metadata: SubjectMetadata = self.read_json(&dir.join(METADATA_FILE))?;
        let mut subject = Subject::new(metadata);
        for (key, array_dir) in self.subdirs(dir) {
            if key == ANNOTATIONS_DIR {
                continue;
            }
            if let Some(array) = self.read_array(&array_dir, opts) {
                subject.sample_arrays.insert(key, array);
            }
        }
        let ann_dir = dir.join(ANNOTATIONS_DIR);
        if ann_dir.is_dir() {
            for (file, path) in self.entries(&ann_dir) {
                let Some(stem) = file.strip_suffix(".json") else {
                    continue;
                };
                if let Some(set) = self.read_json::<AnnotationSet>(&path) {
                    subject.annotations.insert(stem.to_string(), set);
                }
            }
        }
        Some(subject)
    }

    fn read_array(&mut self, dir: &Path, opts: &ReadOptions) -> Option<SampleArray> {
        let attrs_path = dir.join(ATTRIBUTES_FILE);
        let attributes: ArrayAttributes = self.read_json(&attrs_path)?;
        let stored = match StoredArrayRef::open(dir, attributes.clone(), Arc::clone(&opts.stats)) {
            Ok(r) => r,
            Err(e) => {
                self.store_error(dir, e);
                return None;
            }
        };
        if stored.stored_len() != attributes.n_samples {
            self.error(
                dir,
                IssueCode::ShapeMismatch,
                format!(
                    "stored data holds {} samples, {ATTRIBUTES_FILE} declares {}",
                    stored.stored_len(),
                    attributes.n_samples
                ),
            );
            return None;
        }
        if stored.stored_value_type() != attributes.value_type {
            self.error(
                dir,
                IssueCode::ValueTypeMismatch,
                format!(
                    "stored data is {}, {ATTRIBUTES_FILE} declares {}",
                    stored.stored_value_type(),
                    attributes.value_type
                ),
            );
            return None;
        }
        let data = if opts.lazy_arrays {
            ArrayData::Stored(stored)
        } else {
            match stored.read_all() {
                Ok(values) => ArrayData::Memory(Arc::new(values)),
                Err(e) => {
                    self.store_error(dir, e);
                    return None;
                }
            }
        };
        Some(SampleArray { attributes, data })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArraySummary {
    pub name: String,
    pub sampling_rate: f64,
    pub n_samples: u64,
    pub value_type: ValueType,
    pub unit: Option<String>,
    pub duration_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectSummary {
    pub subject_id: String,
    pub arrays: Vec<ArraySummary>,
    pub annotation_sets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub name: String,
    pub subjects: Vec<SubjectSummary>,
}

/// Structure of a dataset without its sample values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub name: String,
    pub format_version: String,
    pub series: Vec<SeriesSummary>,
}

impl DatasetSummary {
    /// Summary of an in-memory dataset, in the same name order used on disk.
    pub fn from_dataset(dataset: &Dataset) -> Self {
        fn sorted<T>(m: &IndexMap<String, T>) -> Vec<(&String, &T)> {
            let mut v: Vec<_> = m.iter().collect();
            v.sort_by(|a, b| a.0.cmp(b.0));
            v
        }
        DatasetSummary {
            name: dataset.name.clone(),
            format_version: dataset.format_version.clone(),
            series: sorted(&dataset.series)
                .into_iter()
                .map(|(_, s)| SeriesSummary {
                    name: s.name.clone(),
                    subjects: sorted(&s.subjects)
                        .into_iter()
                        .map(|(_, subj)| SubjectSummary {
                            subject_id: subj.metadata.subject_id.clone(),
                            arrays: sorted(&subj.sample_arrays)
                                .into_iter()
                                .map(|(_, a)| ArraySummary::from_attributes(&a.attributes))
                                .collect(),
                            annotation_sets: sorted(&subj.annotations)
                                .into_iter()
                                .map(|(k, _)| k.clone())
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn n_subjects(&self) -> usize {
        self.series.iter().map(|s| s.subjects.len()).sum()
    }
}

impl ArraySummary {
    fn from_attributes(a: &ArrayAttributes) -> Self {
        ArraySummary {
            name: a.name.clone(),
            sampling_rate: a.sampling_rate,
            n_samples: a.n_samples,
            value_type: a.value_type,
            unit: a.unit.clone(),
            duration_sec: a.n_samples as f64 / a.sampling_rate,
        }
    }
}

/// Summarizes a dataset from its JSON files alone; no array data is opened.
pub fn list_dataset(root: &Path, stats: &Arc<IoStats>) -> Result<DatasetSummary, StoreError> {
    let mut ctx = Ctx::new(root, stats)?;
    let meta: Option<DatasetMetadataIn> = ctx.read_json(&root.join(METADATA_FILE));
    let mut summary = DatasetSummary {
        name: String::new(),
        format_version: String::new(),
        series: Vec::new(),
    };
    if let Some(meta) = meta {
        summary.name = meta.name;
        summary.format_version = meta.format_version;
    }
    for (key, series_dir) in ctx.subdirs(root) {
        let meta_path = series_dir.join(METADATA_FILE);
        let name = if meta_path.is_file() {
            ctx.read_json::<SeriesMetadataIn>(&meta_path)
                .map_or(key, |m| m.name)
        } else {
            key
        };
        let mut series = SeriesSummary {
            name,
            subjects: Vec::new(),
        };
        for (_, subject_dir) in ctx.subdirs(&series_dir) {
            let Some(meta) = ctx.read_json::<SubjectMetadata>(&subject_dir.join(METADATA_FILE))
            else {
                continue;
            };
            let mut subject = SubjectSummary {
                subject_id: meta.subject_id,
                arrays: Vec::new(),
                annotation_sets: Vec::new(),
            };
            for (akey, array_dir) in ctx.subdirs(&subject_dir) {
                if akey == ANNOTATIONS_DIR {
                    continue;
                }
                if let Some(attrs) =
                    ctx.read_json::<ArrayAttributes>(&array_dir.join(ATTRIBUTES_FILE))
                {
                    subject.arrays.push(ArraySummary::from_attributes(&attrs));
                }
            }
            let ann_dir = subject_dir.join(ANNOTATIONS_DIR);
            if ann_dir.is_dir() {
                subject.annotation_sets = ctx
                    .entries(&ann_dir)
                    .into_iter()
                    .filter_map(|(f, _)| f.strip_suffix(".json").map(str::to_string))
                    .collect();
            }
            series.subjects.push(subject);
        }
        summary.series.push(series);
    }
    if ctx.issues.iter().any(ValidationIssue::is_error) {
        return Err(StoreError::Read(ctx.issues));
    }
    Ok(summary)
}
