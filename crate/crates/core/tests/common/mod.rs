//! Random valid datasets and a bitwise comparison, shared by integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
pub mod edf_oracle;

use sleeplab::model::{NameType, Scalar};
use sleeplab::{
    Annotation, AnnotationSet, Dataset, SampleArray, Samples, Series, Subject, SubjectMetadata,
};

pub const MAX_LEN: usize = 100_000;

fn name(rng: &mut impl Rng, prefix: &str) -> String {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-";
    let n = rng.gen_range(1..10);
    let tail: String = (0..n)
        .map(|_| *CHARS.choose(rng).unwrap() as char)
        .collect();
    format!("{prefix}{tail}")
}

fn text(rng: &mut impl Rng) -> String {
    const WORDS: &[&str] = &[
        "apnea",
        "Arousal",
        "ÄÖ",
        "spindle",
        "点",
        "lights off",
        "\"q\"",
        "a\\b",
    ];
    let n = rng.gen_range(1..4);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Length between 0 and `max_len`, log-uniform with the end points over-weighted.
pub fn length(rng: &mut impl Rng, max_len: usize) -> usize {
    match rng.gen_range(0..20) {
        0 => 0,
        1 => max_len,
        2 => 1,
        _ => (rng.gen_range(0.0..(max_len as f64).ln())).exp() as usize,
    }
}

/// Values of every bit pattern, including NaN payloads, infinities and -0.
pub fn samples(rng: &mut impl Rng, len: usize) -> Samples {
    match rng.gen_range(0..4) {
        0 => Samples::Float32((0..len).map(|_| f32::from_bits(rng.next_u32())).collect()),
        1 => Samples::Float64((0..len).map(|_| f64::from_bits(rng.next_u64())).collect()),
        2 => Samples::Int16((0..len).map(|_| rng.gen()).collect()),
        _ => Samples::Int32((0..len).map(|_| rng.gen()).collect()),
    }
}

fn scalar(rng: &mut impl Rng) -> Scalar {
    match rng.gen_range(0..5) {
        0 => Scalar::Null,
        1 => Scalar::Bool(rng.gen()),
        2 => Scalar::Int(rng.gen()),
        3 => Scalar::Float(rng.gen_range(-1e6..1e6)),
        _ => Scalar::Text(text(rng)),
    }
}

fn metadata(rng: &mut impl Rng, id: String) -> SubjectMetadata {
    let mut m = SubjectMetadata::new(id);
    if rng.gen_bool(0.5) {
        let day = NaiveDate::from_ymd_opt(
            rng.gen_range(1985..2030),
            rng.gen_range(1..13),
            rng.gen_range(1..29),
        );
        m.recording_start = day.unwrap().and_hms_opt(
            rng.gen_range(0..24),
            rng.gen_range(0..60),
            rng.gen_range(0..60),
        );
    }
    if rng.gen_bool(0.5) {
        m.age = Some(rng.gen_range(0.0..110.0));
    }
    if rng.gen_bool(0.5) {
        m.sex = Some(["F", "M", "other"].choose(rng).unwrap().to_string());
    }
    for i in 0..rng.gen_range(0..3) {
        m.extra
            .insert(format!("k{i}_{}", name(rng, "")), scalar(rng));
    }
    m
}

fn annotation_set(rng: &mut impl Rng, set_name: String, span: f64) -> AnnotationSet {
    let stages = rng.gen_bool(0.5);
    let mut set = AnnotationSet::new(
        set_name,
        if stages {
            NameType::aasm_sleep_stage()
        } else {
            NameType::free_text()
        },
    );
    if rng.gen_bool(0.5) {
        set.scorer = Some(text(rng));
    }
    for _ in 0..rng.gen_range(0..20) {
        let label = if stages {
            ["W", "N1", "N2", "N3", "R"]
                .choose(rng)
                .unwrap()
                .to_string()
        } else {
            text(rng)
        };
        let mut a = Annotation::new(
            label,
            rng.gen_range(0.0..span.max(1.0)),
            rng.gen_range(0.0..60.0),
        );
        if rng.gen_bool(0.2) {
            a.extra = Some([("score".to_string(), scalar(rng))].into_iter().collect());
        }
        set.annotations.push(a);
    }
    set
}

fn subject(rng: &mut impl Rng, id: String, max_len: usize) -> Subject {
    let mut s = Subject::new(metadata(rng, id));
    for i in 0..rng.gen_range(1..4) {
        let rate = *[
            0.5,
            1.0,
            10.0,
            64.0,
            100.0,
            128.0,
            256.0,
            512.0,
            1e-3 * 333.0,
        ]
        .choose(rng)
        .unwrap();
        let len = length(rng, max_len);
        let values = samples(rng, len);
        let mut array = SampleArray::new(format!("a{i}{}", name(rng, "_")), rate, values);
        if rng.gen_bool(0.5) {
            array = array.with_unit(["uV", "mV", "%", "µV"].choose(rng).unwrap().to_string());
        }
        if rng.gen_bool(0.3) {
            array = array.with_start_offset(rng.gen_range(0.0..100.0));
        }
        s = s.with_array(array);
    }
    let span = s.recording_span().unwrap();
    for i in 0..rng.gen_range(0..3) {
        let set_name = format!("set{i}{}", name(rng, "_"));
        let set = annotation_set(rng, set_name, span);
        s = s.with_annotations(set);
    }
    s
}

/// Valid dataset with 1-3 series of 1-5 subjects, arrays of 0..=`max_len` samples.
pub fn random_dataset(rng: &mut impl Rng, max_len: usize) -> Dataset {
    let mut d = Dataset::new(name(rng, "ds_"));
    for i in 0..rng.gen_range(1..4) {
        let mut series = Series::new(format!("s{i}{}", name(rng, "_")));
        for j in 0..rng.gen_range(1..6) {
            let id = format!("subj{j}{}", name(rng, "_"));
            series = series.with_subject(subject(rng, id, max_len));
        }
        d = d.with_series(series);
    }
    d
}

/// Bitwise comparison of two datasets; NaN payloads must match as well.
/// Returns the first difference found.
pub fn bitwise_diff(a: &Dataset, b: &Dataset) -> Option<String> {
    if a.name != b.name || a.format_version != b.format_version {
        return Some("dataset header".into());
    }
    if a.series.len() != b.series.len() {
        return Some("series count".into());
    }
    for (key, sa) in &a.series {
        let Some(sb) = b.series.get(key) else {
            return Some(format!("series {key} missing"));
        };
        if sa.name != sb.name || sa.subjects.len() != sb.subjects.len() {
            return Some(format!("series {key}"));
        }
        for (id, xa) in &sa.subjects {
            let Some(xb) = sb.subjects.get(id) else {
                return Some(format!("{key}/{id} missing"));
            };
            let path = format!("{key}/{id}");
            if xa.metadata != xb.metadata {
                return Some(format!("{path} metadata"));
            }
            if xa.annotations.len() != xb.annotations.len()
                || xa
                    .annotations
                    .iter()
                    .any(|(k, v)| xb.annotations.get(k) != Some(v))
            {
                return Some(format!("{path} annotations"));
            }
            if xa.sample_arrays.len() != xb.sample_arrays.len() {
                return Some(format!("{path} array count"));
            }
            for (name, aa) in &xa.sample_arrays {
                let Some(ab) = xb.sample_arrays.get(name) else {
                    return Some(format!("{path}/{name} missing"));
                };
                if aa.attributes != ab.attributes {
                    return Some(format!("{path}/{name} attributes"));
                }
                let va = aa.values().unwrap();
                let vb = ab.values().unwrap();
                if va.value_type() != vb.value_type() || va.to_le_bytes() != vb.to_le_bytes() {
                    return Some(format!("{path}/{name} values"));
                }
            }
        }
    }
    None
}
