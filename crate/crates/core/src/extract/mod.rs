//! Subset extraction: select series, subjects, arrays and annotation sets
//! from a stored dataset, optionally rename, decimate by an integer factor
//! or change the value type, and write the result as a new dataset.

mod dsp;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{SampleArray, Samples, Subject, ValueType};
use crate::store::{
    read_dataset, ArrayCodecSpec, DatasetWriter, ReadOptions, StoreError, WriteOptions,
};

pub use dsp::{cast_values, decimate, design_lowpass_fir, CastError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySelection {
    pub source_name: String,
    #[serde(default)]
    pub new_name: Option<String>,
    /// Must divide the source rate by an integer.
    #[serde(default)]
    pub target_sampling_rate: Option<f64>,
    #[serde(default)]
    pub target_value_type: Option<ValueType>,
}

impl ArraySelection {
    pub fn new(source_name: impl Into<String>) -> Self {
        ArraySelection {
            source_name: source_name.into(),
            new_name: None,
            target_sampling_rate: None,
            target_value_type: None,
        }
    }

    pub fn output_name(&self) -> &str {
        self.new_name.as_deref().unwrap_or(&self.source_name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    #[serde(default)]
    pub series_filter: Option<BTreeSet<String>>,
    #[serde(default)]
    pub subject_filter: Option<BTreeSet<String>>,
    pub selections: Vec<ArraySelection>,
    /// Annotation sets to copy; all when absent.
    #[serde(default)]
    pub annotation_sets: Option<BTreeSet<String>>,
    #[serde(default)]
    pub output_codec: ArrayCodecSpec,
    /// Name of the written dataset; the source name when absent.
    #[serde(default)]
    pub dataset_name: Option<String>,
    #[serde(default)]
    pub overwrite: bool,
}

impl ExtractConfig {
    pub fn new(selections: Vec<ArraySelection>) -> Self {
        ExtractConfig {
            series_filter: None,
            subject_filter: None,
            selections,
            annotation_sets: None,
            output_codec: ArrayCodecSpec::Raw,
            dataset_name: None,
            overwrite: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExtractError> {
        let config: ExtractConfig =
            serde_json::from_str(text).map_err(|e| ExtractError::InvalidConfig(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<(), ExtractError> {
        if self.selections.is_empty() {
            return Err(ExtractError::InvalidConfig("selections is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.selections {
            if !seen.insert(s.output_name()) {
                return Err(ExtractError::InvalidConfig(format!(
                    "output array name {:?} selected twice",
                    s.output_name()
                )));
            }
            if let Some(rate) = s.target_sampling_rate {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(ExtractError::InvalidConfig(format!(
                        "target_sampling_rate {rate} for {:?} is not positive",
                        s.source_name
                    )));
                }
            }
        }
        self.output_codec
            .check()
            .map_err(|e| ExtractError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),
    #[error(
        "{path}: source rate {source_rate} Hz is not an integer multiple of the target {target_rate} Hz"
    )]
    NonIntegerFactor {
        path: String,
        source_rate: f64,
        target_rate: f64,
    },
    #[error("no subject has any of the selected arrays")]
    NothingSelected,
    #[error("{path}: {source}")]
    Cast { path: String, source: CastError },
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ExtractError {
    pub fn is_environmental(&self) -> bool {
        matches!(self, ExtractError::Store(e) if e.is_environmental())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayFactor {
    /// `series/subject/array` of the written array.
    pub path: String,
    pub factor: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExtractionReport {
    pub subjects: usize,
    pub arrays: usize,
    pub factors: Vec<ArrayFactor>,
    pub warnings: Vec<String>,
    pub bytes_written: u64,
}

/// Decimation factor `source / target`, or an error unless it is a positive
/// integer (within 1e-9 relative).
pub fn decimation_factor(source: f64, target: f64) -> Option<usize> {
    let ratio = source / target;
    let factor = ratio.round();
    (factor >= 1.0 && (ratio - factor).abs() <= 1e-9 * ratio).then_some(factor as usize)
}

struct Plan<'a> {
    series: &'a str,
    subject: &'a Subject,
    arrays: Vec<(&'a ArraySelection, &'a SampleArray, usize)>,
}

fn transform(
    path: &str,
    sel: &ArraySelection,
    array: &SampleArray,
    factor: usize,
) -> Result<SampleArray, ExtractError> {
    let src = &array.attributes;
    let target_type = sel.target_value_type.unwrap_or(src.value_type);
    let values = array.values()?;
    let cast = |s: &Samples| {
        cast_values(s, target_type).map_err(|source| ExtractError::Cast {
            path: path.to_string(),
            source,
        })
    };
    let out: Samples = if factor == 1 {
        cast(&values)?
    } else {
        cast(&Samples::Float64(decimate(&values.to_f64_vec(), factor)))?
    };
    let mut attributes = src.clone();
    attributes.name = sel.output_name().to_string();
    attributes.sampling_rate = sel.target_sampling_rate.unwrap_or(src.sampling_rate);
    attributes.value_type = target_type;
    attributes.n_samples = out.len() as u64;
    let mut result = SampleArray::new(attributes.name.clone(), attributes.sampling_rate, out);
    result.attributes = attributes;
    Ok(result)
}

/// Extracts from the dataset at `src` (the dataset directory) into
/// `dest_root/<name>`. Every resampling factor is checked before anything is
/// written. The source tree is only read.
pub fn extract(
    src: &Path,
    config: &ExtractConfig,
    dest_root: &Path,
) -> Result<ExtractionReport, ExtractError> {
    config.check()?;
    let opts = ReadOptions {
        series_filter: config.series_filter.clone(),
        subject_filter: config.subject_filter.clone(),
        ..Default::default()
    };
    let source = read_dataset(src, &opts)?;
    let mut warnings = Vec::new();

    let mut plans = Vec::new();
    for (series, subject) in source.subjects() {
        let mut arrays = Vec::new();
        for sel in &config.selections {
            let path = format!("{}/{}/{}", series.name, subject.id(), sel.source_name);
            let Some(array) = subject.sample_arrays.get(&sel.source_name) else {
                warnings.push(format!("{path}: selected array not present"));
                continue;
            };
            let rate = array.attributes.sampling_rate;
            let factor = match sel.target_sampling_rate {
                None => 1,
                Some(target) => {
                    decimation_factor(rate, target).ok_or(ExtractError::NonIntegerFactor {
                        path,
                        source_rate: rate,
                        target_rate: target,
                    })?
                }
            };
            arrays.push((sel, array, factor));
        }
        if arrays.is_empty() {
            warnings.push(format!(
                "{}/{}: no selected arrays, subject skipped",
                series.name,
                subject.id()
            ));
            continue;
        }
        plans.push(Plan {
            series: &series.name,
            subject,
            arrays,
        });
    }
    if plans.is_empty() {
        return Err(ExtractError::NothingSelected);
    }

    let name = config.dataset_name.as_deref().unwrap_or(&source.name);
    let writer = DatasetWriter::create(
        dest_root,
        name,
        &source.format_version,
        WriteOptions {
            codec: config.output_codec,
            overwrite: config.overwrite,
        },
    )?;
    let mut report = ExtractionReport {
        warnings,
        ..Default::default()
    };
    let mut series_done = BTreeSet::new();
    for plan in &plans {
        if series_done.insert(plan.series) {
            report.bytes_written += writer.add_series(plan.series)?;
        }
    }

    let factors = Mutex::new(Vec::new());
    let written: Vec<(usize, u64)> = plans
        .par_iter()
        .map(|plan| -> Result<(usize, u64), ExtractError> {
            let mut subject = Subject::new(plan.subject.metadata.clone());
            for (sel, array, factor) in &plan.arrays {
                let path = format!("{}/{}/{}", plan.series, subject.id(), sel.output_name());
                subject = subject.with_array(transform(&path, sel, array, *factor)?);
                factors.lock().unwrap().push(ArrayFactor {
                    path,
                    factor: *factor,
                });
            }
            for set in plan.subject.annotations.values() {
                if config
                    .annotation_sets
                    .as_ref()
                    .is_none_or(|keep| keep.contains(&set.name))
                {
                    subject = subject.with_annotations(set.clone());
                }
            }
            let r = writer.write_subject(plan.series, &subject)?;
            Ok((r.arrays as usize, r.bytes_written))
        })
        .collect::<Result<_, _>>()?;

    report.subjects = written.len();
    for (arrays, bytes) in written {
        report.arrays += arrays;
        report.bytes_written += bytes;
    }
    let mut factors = factors.into_inner().unwrap();
    factors.sort_by(|a, b| a.path.cmp(&b.path));
    report.factors = factors;
    Ok(report)
}
