//! Sleeplab format: a validated, file-system based layout for
//! polysomnography datasets.
//!
//! - [`model`]: the dataset / series / subject hierarchy and its validation.
//! - [`store`]: reading and writing datasets, raw and chunked array codecs.
//! - [`edf`]: EDF and EDF+ parsing and conversion into subjects.
//! - [`extract`]: subset extraction with decimation and type conversion.

pub mod edf;
pub mod extract;
pub mod model;
pub mod store;

pub use model::{
    validate_dataset, Annotation, AnnotationSet, ArrayAttributes, Dataset, NameType, SampleArray,
    Samples, Series, Subject, SubjectMetadata, ValidationIssue, ValueType,
};
pub use store::{
    read_dataset, write_dataset, ArrayCodecSpec, ReadOptions, StoreError, WriteOptions,
};
