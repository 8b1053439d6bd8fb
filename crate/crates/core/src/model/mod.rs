//! In-memory data model: a dataset holds series, a series holds subjects, and
//! each subject carries metadata, sample arrays, and annotation sets.
//!
//! Values are plain data with public fields. Invariants are not enforced at
//! construction; [`validate_dataset`] reports every violation, and the store
//! refuses to write or return a dataset that has errors.

mod samples;
mod stage;
mod validate;

use std::sync::Arc;

use chrono::NaiveDateTime;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use samples::{Element, Samples, ValueType};
pub use stage::{
    is_rk_collapsed_stage, parse_sleep_stage, SleepStageLabel, UnknownStageLabel, STAGE_ALIASES,
};
pub use validate::{
    validate_dataset, validate_dataset_with, validate_subject, IssueCode, NameTypeRegistry,
    Severity, ValidationIssue,
};

use crate::store::{StoreError, StoredArrayRef};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub format_version: String,
    pub series: IndexMap<String, Series>,
}

impl Dataset {
    pub fn new(name: impl Into<String>) -> Self {
        Dataset {
            name: name.into(),
            format_version: FORMAT_VERSION.to_string(),
            series: IndexMap::new(),
        }
    }

    pub fn with_series(mut self, series: Series) -> Self {
        self.series.insert(series.name.clone(), series);
        self
    }

    pub fn subjects(&self) -> impl Iterator<Item = (&Series, &Subject)> {
        self.series
            .values()
            .flat_map(|s| s.subjects.values().map(move |subj| (s, subj)))
    }

    /// Copy of the dataset with every lazily stored array loaded into memory.
    pub fn materialize(&self) -> Result<Dataset, StoreError> {
        let mut out = self.clone();
        for series in out.series.values_mut() {
            for subject in series.subjects.values_mut() {
                for array in subject.sample_arrays.values_mut() {
                    if let ArrayData::Stored(r) = &array.data {
                        array.data = ArrayData::Memory(Arc::new(r.read_all()?));
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub subjects: IndexMap<String, Subject>,
}

impl Series {
    pub fn new(name: impl Into<String>) -> Self {
        Series {
            name: name.into(),
            subjects: IndexMap::new(),
        }
    }

    pub fn with_subject(mut self, subject: Subject) -> Self {
        self.subjects
            .insert(subject.metadata.subject_id.clone(), subject);
        self
    }
}

/// Scalar value allowed in the open-ended `extra` maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_string())
    }
}

impl From<String> for Scalar {
    fn from(s: String) -> Self {
        Scalar::Text(s)
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMetadata {
    pub subject_id: String,
    pub recording_start: Option<NaiveDateTime>,
    /// Years.
    pub age: Option<f64>,
    pub sex: Option<String>,
    #[serde(default)]
    pub extra: IndexMap<String, Scalar>,
}

impl SubjectMetadata {
    pub fn new(subject_id: impl Into<String>) -> Self {
        SubjectMetadata {
            subject_id: subject_id.into(),
            recording_start: None,
            age: None,
            sex: None,
            extra: IndexMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub metadata: SubjectMetadata,
    pub sample_arrays: IndexMap<String, SampleArray>,
    pub annotations: IndexMap<String, AnnotationSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("subject {0:?} has no sample arrays")]
pub struct EmptySubject(pub String);

impl Subject {
    pub fn new(metadata: SubjectMetadata) -> Self {
        Subject {
            metadata,
            sample_arrays: IndexMap::new(),
            annotations: IndexMap::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.metadata.subject_id
    }

    pub fn with_array(mut self, array: SampleArray) -> Self {
        self.sample_arrays
            .insert(array.attributes.name.clone(), array);
        self
    }

    pub fn with_annotations(mut self, set: AnnotationSet) -> Self {
        self.annotations.insert(set.name.clone(), set);
        self
    }

    /// Longest array extent in seconds, counting each array's start offset.
    pub fn recording_span(&self) -> Result<f64, EmptySubject> {
        recording_span(self)
    }
}

/// Max over arrays of `start_offset + n_samples / sampling_rate`.
pub fn recording_span(subject: &Subject) -> Result<f64, EmptySubject> {
    subject
        .sample_arrays
        .values()
        .map(|a| a.attributes.span_sec())
        .reduce(f64::max)
        .ok_or_else(|| EmptySubject(subject.metadata.subject_id.clone()))
}

fn default_offset() -> f64 {
    0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayAttributes {
    pub name: String,
    /// Hz.
    pub sampling_rate: f64,
    pub unit: Option<String>,
    pub value_type: ValueType,
    pub n_samples: u64,
    /// Seconds relative to the subject's recording start.
    #[serde(default = "default_offset")]
    pub start_offset: f64,
}

impl ArrayAttributes {
    pub fn span_sec(&self) -> f64 {
        self.start_offset + self.n_samples as f64 / self.sampling_rate
    }
}

/// Where the values of a sample array live.
#[derive(Debug, Clone)]
pub enum ArrayData {
    Memory(Arc<Samples>),
    /// Values stay on disk until accessed.
    Stored(StoredArrayRef),
}

#[derive(Debug, Clone)]
pub struct SampleArray {
    pub attributes: ArrayAttributes,
    pub data: ArrayData,
}

impl SampleArray {
    /// In-memory array whose `n_samples` and `value_type` follow `values`.
    pub fn new(name: impl Into<String>, sampling_rate: f64, values: impl Into<Samples>) -> Self {
        let values = values.into();
        SampleArray {
            attributes: ArrayAttributes {
                name: name.into(),
                sampling_rate,
                unit: None,
                value_type: values.value_type(),
                n_samples: values.len() as u64,
                start_offset: 0.0,
            },
            data: ArrayData::Memory(Arc::new(values)),
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.attributes.unit = Some(unit.into());
        self
    }

    pub fn with_start_offset(mut self, offset: f64) -> Self {
        self.attributes.start_offset = offset;
        self
    }

    pub fn name(&self) -> &str {
        &self.attributes.name
    }

    pub fn is_loaded(&self) -> bool {
        matches!(self.data, ArrayData::Memory(_))
    }

    /// All values, reading from disk when the array is stored lazily.
    pub fn values(&self) -> Result<Arc<Samples>, StoreError> {
        match &self.data {
            ArrayData::Memory(v) => Ok(Arc::clone(v)),
            ArrayData::Stored(r) => Ok(Arc::new(r.read_all()?)),
        }
    }

    /// Samples `[start, start + len)`.
    pub fn read_window(&self, start: u64, len: u64) -> Result<Samples, StoreError> {
        match &self.data {
            ArrayData::Memory(v) => {
                let end = start
                    .checked_add(len)
                    .filter(|&e| e <= v.len() as u64)
                    .ok_or(StoreError::OutOfRange {
                        start,
                        len,
                        n_samples: v.len() as u64,
                    })?;
                Ok(v.slice(start as usize, end as usize))
            }
            ArrayData::Stored(r) => r.read_window(start, len, r.stats()),
        }
    }
}

/// Attributes must match, and values must be bitwise equal. Stored arrays are
/// read from disk for the comparison; a read failure compares unequal.
impl PartialEq for SampleArray {
    fn eq(&self, other: &Self) -> bool {
        if self.attributes != other.attributes {
            return false;
        }
        match (&self.data, &other.data) {
            (ArrayData::Memory(a), ArrayData::Memory(b)) => a == b,
            _ => match (self.values(), other.values()) {
                (Ok(a), Ok(b)) => a == b,
                _ => false,
            },
        }
    }
}

/// Vocabulary an annotation set's names are checked against. Known types are
/// resolved through a [`NameTypeRegistry`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NameType(pub String);

impl NameType {
    pub const FREE_TEXT: &'static str = "free_text";
    pub const AASM_SLEEP_STAGE: &'static str = "aasm_sleep_stage";

    pub fn free_text() -> Self {
        NameType(Self::FREE_TEXT.to_string())
    }

    pub fn aasm_sleep_stage() -> Self {
        NameType(Self::AASM_SLEEP_STAGE.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub name: String,
    /// Seconds from the recording start.
    pub start_sec: f64,
    pub duration_sec: f64,
    #[serde(default)]
    pub extra: Option<IndexMap<String, Scalar>>,
}

impl Annotation {
    pub fn new(name: impl Into<String>, start_sec: f64, duration_sec: f64) -> Self {
        Annotation {
            name: name.into(),
            start_sec,
            duration_sec,
            extra: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub name: String,
    pub scorer: Option<String>,
    pub name_type: NameType,
    pub annotations: Vec<Annotation>,
}

impl AnnotationSet {
    pub fn new(name: impl Into<String>, name_type: NameType) -> Self {
        AnnotationSet {
            name: name.into(),
            scorer: None,
            name_type,
            annotations: Vec::new(),
        }
    }
}
