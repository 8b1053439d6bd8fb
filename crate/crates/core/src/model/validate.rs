use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{
    recording_span, AnnotationSet, ArrayData, Dataset, SampleArray, Scalar, SleepStageLabel,
    Subject,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "ERROR",
            Severity::Warning => "WARNING",
        })
    }
}

/// Closed set of issue codes reported by model validation and by the store
/// when reading files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueCode {
    // model invariants
    EmptyName,
    InvalidPathComponent,
    ReservedName,
    KeyMismatch,
    DuplicateName,
    NonpositiveSamplingRate,
    NonFiniteValue,
    LengthMismatch,
    ValueTypeMismatch,
    AgeOutOfRange,
    SuspiciousAge,
    NegativeAnnotationStart,
    NegativeAnnotationDuration,
    InvalidAnnotationName,
    UnknownNameType,
    AnnotationPastEnd,
    // on-disk structure
    NotSlfDataset,
    MissingFile,
    MalformedJson,
    MissingSeriesMetadata,
    AmbiguousArrayStore,
    BadMagic,
    MalformedHeader,
    UnsupportedDtype,
    UnsupportedShape,
    TruncatedPayload,
    ShapeMismatch,
    InvalidZstdLevel,
    InvalidChunkLen,
    UnsupportedCompressor,
    CorruptChunk,
    IoFailure,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        use IssueCode::*;
        match self {
            EmptyName => "empty_name",
            InvalidPathComponent => "invalid_path_component",
            ReservedName => "reserved_name",
            KeyMismatch => "key_mismatch",
            DuplicateName => "duplicate_name",
            NonpositiveSamplingRate => "nonpositive_sampling_rate",
            NonFiniteValue => "non_finite_value",
            LengthMismatch => "length_mismatch",
            ValueTypeMismatch => "value_type_mismatch",
            AgeOutOfRange => "age_out_of_range",
            SuspiciousAge => "suspicious_age",
            NegativeAnnotationStart => "negative_annotation_start",
            NegativeAnnotationDuration => "negative_annotation_duration",
            InvalidAnnotationName => "invalid_annotation_name",
            UnknownNameType => "unknown_name_type",
            AnnotationPastEnd => "annotation_past_end",
            NotSlfDataset => "not_slf_dataset",
            MissingFile => "missing_file",
            MalformedJson => "malformed_json",
            MissingSeriesMetadata => "missing_series_metadata",
            AmbiguousArrayStore => "ambiguous_array_store",
            BadMagic => "bad_magic",
            MalformedHeader => "malformed_header",
            UnsupportedDtype => "unsupported_dtype",
            UnsupportedShape => "unsupported_shape",
            TruncatedPayload => "truncated_payload",
            ShapeMismatch => "shape_mismatch",
            InvalidZstdLevel => "invalid_zstd_level",
            InvalidChunkLen => "invalid_chunk_len",
            UnsupportedCompressor => "unsupported_compressor",
            CorruptChunk => "corrupt_chunk",
            IoFailure => "io_failure",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    /// Slash-joined locator, e.g. `series_a/subj_01/eeg_c3/sampling_rate`.
    pub path: String,
    pub severity: Severity,
    pub code: IssueCode,
    pub message: String,
}

impl ValidationIssue {
    pub fn error(path: impl Into<String>, code: IssueCode, message: impl Into<String>) -> Self {
        ValidationIssue {
            path: path.into(),
            severity: Severity::Error,
            code,
            message: message.into(),
        }
    }

    pub fn warning(path: impl Into<String>, code: IssueCode, message: impl Into<String>) -> Self {
        ValidationIssue {
            path: path.into(),
            severity: Severity::Warning,
            code,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.severity, self.path, self.code, self.message
        )
    }
}

pub type NamePredicate = fn(&str) -> bool;

/// Annotation name types and the predicate each one applies to names.
#[derive(Clone)]
pub struct NameTypeRegistry {
    predicates: HashMap<String, NamePredicate>,
}

impl NameTypeRegistry {
    pub fn empty() -> Self {
        NameTypeRegistry {
            predicates: HashMap::new(),
        }
    }

    pub fn register(&mut self, name_type: impl Into<String>, predicate: NamePredicate) {
        self.predicates.insert(name_type.into(), predicate);
    }

    pub fn predicate(&self, name_type: &str) -> Option<NamePredicate> {
        self.predicates.get(name_type).copied()
    }
}

impl Default for NameTypeRegistry {
    fn default() -> Self {
        let mut r = NameTypeRegistry::empty();
        r.register(super::NameType::FREE_TEXT, |_| true);
        r.register(super::NameType::AASM_SLEEP_STAGE, |name| {
            SleepStageLabel::from_canonical(name).is_some()
        });
        r
    }
}

impl fmt::Debug for NameTypeRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut keys: Vec<_> = self.predicates.keys().collect();
        keys.sort();
        f.debug_struct("NameTypeRegistry")
            .field("types", &keys)
            .finish()
    }
}

/// Names that would collide with fixed files inside a subject directory.
const RESERVED_SUBJECT_ENTRIES: &[&str] = &["annotations", "metadata.json"];

const AGE_MAX: f64 = 150.0;
const AGE_SUSPICIOUS: f64 = 120.0;
/// Slack for annotation ends compared against the recording span.
const SPAN_EPS: f64 = 1e-9;

/// Every invariant violation in `dataset`, depth-first in insertion order.
pub fn validate_dataset(dataset: &Dataset) -> Vec<ValidationIssue> {
    validate_dataset_with(dataset, &NameTypeRegistry::default())
}

pub fn validate_dataset_with(
    dataset: &Dataset,
    registry: &NameTypeRegistry,
) -> Vec<ValidationIssue> {
    let mut v = Validator {
        issues: Vec::new(),
        registry,
    };
    v.dataset(dataset);
    v.issues
}

/// Issues for one subject on its own; paths are relative to the subject.
pub fn validate_subject(subject: &Subject) -> Vec<ValidationIssue> {
    let registry = NameTypeRegistry::default();
    let mut v = Validator {
        issues: Vec::new(),
        registry: &registry,
    };
    v.subject("", subject);
    v.issues
}

fn join(prefix: &str, leaf: &str) -> String {
    if prefix.is_empty() {
        leaf.to_string()
    } else {
        format!("{prefix}/{leaf}")
    }
}

struct Validator<'a> {
    issues: Vec<ValidationIssue>,
    registry: &'a NameTypeRegistry,
}

impl Validator<'_> {
    fn error(&mut self, path: String, code: IssueCode, message: String) {
        self.issues
            .push(ValidationIssue::error(path, code, message));
    }

    fn warning(&mut self, path: String, code: IssueCode, message: String) {
        self.issues
            .push(ValidationIssue::warning(path, code, message));
    }

    /// Name used as a directory or file name.
    fn component(&mut self, path: String, what: &str, name: &str) {
        if name.is_empty() {
            self.error(path, IssueCode::EmptyName, format!("{what} name is empty"));
        } else if name == "."
            || name == ".."
            || name.starts_with('.')
            || name.contains(['/', '\\', '\0'])
        {
            self.error(
                path,
                IssueCode::InvalidPathComponent,
                format!("{what} name {name:?} is not usable as a path component"),
            );
        }
    }

    fn keyed<'v, T>(
        &mut self,
        prefix: &str,
        what: &str,
        map: &'v IndexMap<String, T>,
        name_of: impl Fn(&'v T) -> &'v str,
    ) {
        let mut seen = HashSet::new();
        for (key, value) in map {
            let name = name_of(value);
            if key != name {
                self.error(
                    join(prefix, key),
                    IssueCode::KeyMismatch,
                    format!("{what} stored under key {key:?} is named {name:?}"),
                );
            }
            if !seen.insert(name) {
                self.error(
                    join(prefix, key),
                    IssueCode::DuplicateName,
                    format!("more than one {what} is named {name:?}"),
                );
            }
        }
    }

    fn finite(&mut self, path: String, what: &str, x: f64) -> bool {
        if x.is_finite() {
            return true;
        }
        self.error(path, IssueCode::NonFiniteValue, format!("{what} is {x}"));
        false
    }

    fn extra(&mut self, prefix: &str, extra: &IndexMap<String, Scalar>) {
        for (k, v) in extra {
            if let Scalar::Float(x) = v {
                self.finite(join(prefix, &format!("extra/{k}")), "extra value", *x);
            }
        }
    }

    fn dataset(&mut self, d: &Dataset) {
        self.component("name".into(), "dataset", &d.name);
        self.keyed("", "series", &d.series, |s| s.name.as_str());
        for (key, series) in &d.series {
            self.component(join(key, "name"), "series", &series.name);
            self.keyed(key, "subject", &series.subjects, |s| {
                s.metadata.subject_id.as_str()
            });
            for (skey, subject) in &series.subjects {
                self.subject(&join(key, skey), subject);
            }
        }
    }

    fn subject(&mut self, prefix: &str, s: &Subject) {
        let m = &s.metadata;
        self.component(join(prefix, "subject_id"), "subject", &m.subject_id);
        if let Some(age) = m.age {
            let path = join(prefix, "age");
            if self.finite(path.clone(), "age", age) {
                if !(0.0..=AGE_MAX).contains(&age) {
                    self.error(
                        path,
                        IssueCode::AgeOutOfRange,
                        format!("age {age} outside [0, {AGE_MAX}]"),
                    );
                } else if age > AGE_SUSPICIOUS {
                    self.warning(
                        path,
                        IssueCode::SuspiciousAge,
                        format!("age {age} exceeds {AGE_SUSPICIOUS}"),
                    );
                }
            }
        }
        self.extra(prefix, &m.extra);

        self.keyed(prefix, "sample array", &s.sample_arrays, |a| {
            a.attributes.name.as_str()
        });
        for (key, array) in &s.sample_arrays {
            self.array(&join(prefix, key), array);
        }

        let ann_prefix = join(prefix, "annotations");
        self.keyed(&ann_prefix, "annotation set", &s.annotations, |a| {
            a.name.as_str()
        });
        let rates_ok = s
            .sample_arrays
            .values()
            .all(|a| a.attributes.sampling_rate > 0.0);
        let span = recording_span(s).ok().filter(|x| rates_ok && x.is_finite());
        for (key, set) in &s.annotations {
            self.annotation_set(&join(&ann_prefix, key), set, span);
        }
    }

    fn array(&mut self, prefix: &str, a: &SampleArray) {
        let attrs = &a.attributes;
        let name_path = join(prefix, "name");
        self.component(name_path.clone(), "sample array", &attrs.name);
        if RESERVED_SUBJECT_ENTRIES.contains(&attrs.name.as_str()) {
            self.error(
                name_path,
                IssueCode::ReservedName,
                format!("sample array name {:?} is reserved", attrs.name),
            );
        }
        let rate_path = join(prefix, "sampling_rate");
        if self.finite(rate_path.clone(), "sampling_rate", attrs.sampling_rate)
            && attrs.sampling_rate <= 0.0
        {
            self.error(
                rate_path,
                IssueCode::NonpositiveSamplingRate,
                format!("sampling_rate {} is not positive", attrs.sampling_rate),
            );
        }
        self.finite(
            join(prefix, "start_offset"),
            "start_offset",
            attrs.start_offset,
        );

        let (len, value_type) = match &a.data {
            ArrayData::Memory(v) => (v.len() as u64, v.value_type()),
            ArrayData::Stored(r) => (r.stored_len(), r.stored_value_type()),
        };
        if len != attrs.n_samples {
            self.error(
                join(prefix, "n_samples"),
                IssueCode::LengthMismatch,
                format!("n_samples is {} but values hold {len}", attrs.n_samples),
            );
        }
        if value_type != attrs.value_type {
            self.error(
                join(prefix, "value_type"),
                IssueCode::ValueTypeMismatch,
                format!(
                    "value_type is {} but values are {value_type}",
                    attrs.value_type
                ),
            );
        }
    }

    fn annotation_set(&mut self, prefix: &str, set: &AnnotationSet, span: Option<f64>) {
        self.component(join(prefix, "name"), "annotation set", &set.name);
        let predicate = self.registry.predicate(set.name_type.as_str());
        if predicate.is_none() {
            self.error(
                join(prefix, "name_type"),
                IssueCode::UnknownNameType,
                format!("unregistered name_type {:?}", set.name_type.as_str()),
            );
        }
        for (i, ann) in set.annotations.iter().enumerate() {
            let p = join(prefix, &i.to_string());
            if let Some(pred) = predicate {
                if !pred(&ann.name) {
                    self.error(
                        join(&p, "name"),
                        IssueCode::InvalidAnnotationName,
                        format!(
                            "{:?} is not a valid {} name",
                            ann.name,
                            set.name_type.as_str()
                        ),
                    );
                }
            }
            let start_ok = self.finite(join(&p, "start_sec"), "start_sec", ann.start_sec);
            if start_ok && ann.start_sec < 0.0 {
                self.error(
                    join(&p, "start_sec"),
                    IssueCode::NegativeAnnotationStart,
                    format!("start_sec {} is negative", ann.start_sec),
                );
            }
            let dur_ok = self.finite(join(&p, "duration_sec"), "duration_sec", ann.duration_sec);
            if dur_ok && ann.duration_sec < 0.0 {
                self.error(
                    join(&p, "duration_sec"),
                    IssueCode::NegativeAnnotationDuration,
                    format!("duration_sec {} is negative", ann.duration_sec),
                );
            }
            if let (true, true, Some(span)) = (start_ok, dur_ok, span) {
                let end = ann.start_sec + ann.duration_sec;
                if end > span + SPAN_EPS {
                    self.warning(
                        p.clone(),
                        IssueCode::AnnotationPastEnd,
                        format!("annotation ends at {end} s, recording spans {span} s"),
                    );
                }
            }
            if let Some(extra) = &ann.extra {
                self.extra(&p, extra);
            }
        }
    }
}
