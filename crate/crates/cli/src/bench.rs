//! Size and read-speed benchmark over the three storage scenarios (raw,
//! zstd level 9, zstd level 22), on a seeded synthetic dataset or on a
//! directory of EDF files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sleeplab::edf::{self, ConvertOptions, EdfError, EdfFile, ParseMode};
use sleeplab::model::FORMAT_VERSION;
use sleeplab::store::{DatasetWriter, IoStats};
use sleeplab::{
    read_dataset, Annotation, AnnotationSet, ArrayCodecSpec, Dataset, NameType, ReadOptions,
    SampleArray, Series, StoreError, Subject, SubjectMetadata, WriteOptions,
};

/// Grid of the `int16_quantized` profile: values are `k / INT16_SCALE` for
/// integers `k` in the int16 range.
pub const INT16_SCALE: f64 = 64.0;

pub const CSV_HEADER: &str =
    "format,data_type,compression,size_bytes,conversion_time_s,read_time_s,read_speed_bps";

pub const CACHE_CAVEAT: &str = "note: wall times include operating-system file caching; \
     use --cold to read from a freshly copied, cache-dropped directory";

const EPOCH_SEC: f64 = 30.0;
const STAGE_CYCLE: [&str; 5] = ["W", "N1", "N2", "N3", "R"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    GaussianNoise,
    SinePlusNoise,
    Int16Quantized,
}

impl FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian_noise" => Ok(ChannelKind::GaussianNoise),
            "sine_plus_noise" => Ok(ChannelKind::SinePlusNoise),
            "int16_quantized" => Ok(ChannelKind::Int16Quantized),
            _ => Err(format!(
                "unknown channel kind {s:?} (gaussian_noise, sine_plus_noise, int16_quantized)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthChannel {
    pub name: String,
    pub sampling_rate: f64,
    pub kind: ChannelKind,
}

impl SynthChannel {
    pub fn new(name: impl Into<String>, sampling_rate: f64, kind: ChannelKind) -> Self {
        SynthChannel {
            name: name.into(),
            sampling_rate,
            kind,
        }
    }
}

/// Parses `name:rate:kind`.
impl FromStr for SynthChannel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [name, rate, kind] = parts.as_slice() else {
            return Err(format!("channel {s:?} is not name:rate:kind"));
        };
        let rate: f64 = rate
            .parse()
            .map_err(|_| format!("channel {s:?}: bad sampling rate {rate:?}"))?;
        Ok(SynthChannel::new(*name, rate, kind.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub duration_sec: f64,
    pub channels: Vec<SynthChannel>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn check(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::InvalidSpec(msg));
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive".into());
        }
        if !(self.duration_sec > 0.0 && self.duration_sec.is_finite()) {
            return bad(format!(
                "duration_sec {} is not positive",
                self.duration_sec
            ));
        }
        if self.channels.is_empty() {
            return bad("no channels".into());
        }
        for c in &self.channels {
            if !(c.sampling_rate > 0.0 && c.sampling_rate.is_finite()) {
                return bad(format!(
                    "channel {:?}: sampling rate {} is not positive",
                    c.name, c.sampling_rate
                ));
            }
        }
        Ok(())
    }

    /// Total bytes of sample values (all channels are float32).
    pub fn payload_bytes(&self) -> u64 {
        let per_subject: u64 = self
            .channels
            .iter()
            .map(|c| n_samples(self.duration_sec, c.sampling_rate) as u64 * 4)
            .sum();
        per_subject * self.n_subjects as u64
    }
}

fn n_samples(duration_sec: f64, rate: f64) -> usize {
    (duration_sec * rate).round() as usize
}

fn channel_values(spec: &SynthSpec, subject: usize, channel: usize) -> Vec<f32> {
    let c = &spec.channels[channel];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream((subject * spec.channels.len() + channel) as u64);
    let n = n_samples(spec.duration_sec, c.sampling_rate);
    let mut noise = || -> f64 { StandardNormal.sample(&mut rng) };
    match c.kind {
        ChannelKind::GaussianNoise => (0..n).map(|_| noise() as f32).collect(),
        ChannelKind::SinePlusNoise => (0..n)
            .map(|i| {
                let t = i as f64 / c.sampling_rate;
                ((2.0 * std::f64::consts::PI * t).sin() + 0.1 * noise()) as f32
            })
            .collect(),
        ChannelKind::Int16Quantized => (0..n)
            .map(|_| {
                let k = (noise() * INT16_SCALE)
                    .round()
                    .clamp(i16::MIN as f64, i16::MAX as f64);
                (k / INT16_SCALE) as f32
            })
            .collect(),
    }
}

fn hypnogram(duration_sec: f64) -> AnnotationSet {
    let mut set = AnnotationSet::new("hypnogram", NameType::aasm_sleep_stage());
    let epochs = (duration_sec / EPOCH_SEC).floor() as usize;
    set.annotations = (0..epochs)
        .map(|i| {
            Annotation::new(
                STAGE_CYCLE[i % STAGE_CYCLE.len()],
                i as f64 * EPOCH_SEC,
                EPOCH_SEC,
            )
        })
        .collect();
    set
}

pub const SYNTH_SERIES: &str = "synthetic";

pub fn subject_id(index: usize) -> String {
    format!("subj_{:04}", index + 1)
}

/// Deterministic dataset for `spec`: one series of `n_subjects` subjects,
/// each with one float32 array per channel and a 30 s hypnogram.
pub fn generate_synthetic_dataset(name: &str, spec: &SynthSpec) -> Dataset {
    let subjects: Vec<Subject> = (0..spec.n_subjects)
        .into_par_iter()
        .map(|s| {
            let mut subject = Subject::new(SubjectMetadata::new(subject_id(s)));
            for (i, c) in spec.channels.iter().enumerate() {
                subject = subject.with_array(SampleArray::new(
                    c.name.clone(),
                    c.sampling_rate,
                    channel_values(spec, s, i),
                ));
            }
            subject.with_annotations(hypnogram(spec.duration_sec))
        })
        .collect();
    let series = subjects
        .into_iter()
        .fold(Series::new(SYNTH_SERIES), Series::with_subject);
    Dataset::new(name).with_series(series)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfigRow {
    pub label: String,
    pub codec: ArrayCodecSpec,
}

impl BenchConfigRow {
    /// Raw, zstd level 9 and zstd level 22.
    pub fn defaults() -> Vec<BenchConfigRow> {
        let zstd = |level| BenchConfigRow {
            label: format!("slf-zstd{level}"),
            codec: ArrayCodecSpec::ChunkedZstd {
                zstd_level: level,
                chunk_len: None,
            },
        };
        vec![
            BenchConfigRow {
                label: "slf-raw".into(),
                codec: ArrayCodecSpec::Raw,
            },
            zstd(9),
            zstd(22),
        ]
    }
}

#[derive(Debug, Clone)]
pub enum BenchSource {
    Synthetic(SynthSpec),
    EdfDirectory(PathBuf),
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub source: BenchSource,
    pub work_dir: PathBuf,
    pub configs: Vec<BenchConfigRow>,
    pub workers: usize,
    pub cold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub format: String,
    pub data_type: String,
    pub compression: String,
    pub size_bytes: u64,
    /// Absent for the source EDF row.
    pub conversion_time_s: Option<f64>,
    pub read_time_s: f64,
    /// Bytes actually read during the read phase.
    pub bytes_read: u64,
    pub read_speed_bps: f64,
    /// Mean of every array, keyed `series/subject/array` (or `file/signal`).
    pub means: BTreeMap<String, f64>,
}

impl BenchRow {
    /// CSV fields; the table is rendered from the same strings.
    pub fn fields(&self) -> [String; 7] {
        [
            self.format.clone(),
            self.data_type.clone(),
            self.compression.clone(),
            self.size_bytes.to_string(),
            self.conversion_time_s
                .map_or_else(String::new, |t| format!("{t:.3}")),
            format!("{:.3}", self.read_time_s),
            format!("{:.0}", self.read_speed_bps),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub workers: usize,
    pub cold: bool,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for row in &self.rows {
            out.push_str(&row.fields().join(","));
            out.push('\n');
        }
        out
    }

    /// Aligned text table with the columns Format, Data type, Compression,
    /// Size, Conversion time and Read time (speed).
    pub fn to_table(&self) -> String {
        let header = [
            "Format",
            "Data type",
            "Compression",
            "Size (bytes)",
            "Conversion time (s)",
            "Read time (s) (speed B/s)",
        ];
        let rows: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                let [format, data_type, compression, size, conv, read, speed] = r.fields();
                let conv = if conv.is_empty() {
                    "-".to_string()
                } else {
                    conv
                };
                [
                    format,
                    data_type,
                    compression,
                    size,
                    conv,
                    format!("{read} ({speed})"),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: Vec<&str>| {
            let text: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i < 3 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", text.join("  ").trim_end());
        };
        line(&mut out, header.to_vec());
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, rule.iter().map(String::as_str).collect());
        for row in &rows {
            line(&mut out, row.iter().map(String::as_str).collect());
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Edf(#[from] EdfError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl BenchError {
    pub fn is_environmental(&self) -> bool {
        match self {
            BenchError::InvalidSpec(_) => false,
            BenchError::Store(e) => e.is_environmental(),
            BenchError::Edf(e) => e.is_environmental(),
            BenchError::Io { .. } => true,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Total size of all regular files under `root`.
pub fn directory_size(root: &Path) -> Result<u64, BenchError> {
    let mut total = 0;
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.map_err(|e| BenchError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() {
            total += entry
                .metadata()
                .map_err(|e| BenchError::Io {
                    path: entry.path().to_path_buf(),
                    source: e.into(),
                })?
                .len();
        }
    }
    Ok(total)
}

/// Copies `src` to `dst`, flushes every file and asks the kernel to drop it
/// from the page cache.
fn cold_copy(src: &Path, dst: &Path) -> Result<(), BenchError> {
    for entry in walkdir::WalkDir::new(src) {
        let entry = entry.map_err(|e| BenchError::Io {
            path: src.to_path_buf(),
            source: e.into(),
        })?;
        let rel = entry
            .path()
            .strip_prefix(src)
            .expect("walk stays under its root");
        let target = dst.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target).map_err(io_err(&target))?;
        } else {
            std::fs::copy(entry.path(), &target).map_err(io_err(&target))?;
            let f = std::fs::File::open(&target).map_err(io_err(&target))?;
            f.sync_all().map_err(io_err(&target))?;
            drop_cache(&f);
        }
    }
    Ok(())
}

#[cfg(target_os = "linux")]
fn drop_cache(f: &std::fs::File) {
    use std::os::unix::io::AsRawFd;
    // advisory; failure only means a warmer cache
    unsafe {
        libc::posix_fadvise(f.as_raw_fd(), 0, 0, libc::POSIX_FADV_DONTNEED);
    }
}

#[cfg(not(target_os = "linux"))]
fn drop_cache(_: &std::fs::File) {}

struct ReadPhase {
    seconds: f64,
    bytes_read: u64,
    means: BTreeMap<String, f64>,
}

/// Reads every array of the dataset at `root` and computes its mean.
fn read_slf(root: &Path, pool: &rayon::ThreadPool) -> Result<ReadPhase, BenchError> {
    let stats = Arc::new(IoStats::new());
    let started = Instant::now();
    let opts = ReadOptions {
        stats: Arc::clone(&stats),
        ..Default::default()
    };
    let dataset = read_dataset(root, &opts)?;
    let arrays: Vec<(String, &SampleArray)> = dataset
        .subjects()
        .flat_map(|(series, subject)| {
            subject
                .sample_arrays
                .values()
                .map(move |a| (format!("{}/{}/{}", series.name, subject.id(), a.name()), a))
        })
        .collect();
    let means: Vec<(String, Option<f64>)> = pool.install(|| {
        arrays
            .par_iter()
            .map(|(key, a)| Ok((key.clone(), a.values()?.mean())))
            .collect::<Result<_, StoreError>>()
    })?;
    Ok(ReadPhase {
        seconds: started.elapsed().as_secs_f64(),
        bytes_read: stats.bytes_read(),
        means: means
            .into_iter()
            .filter_map(|(k, m)| m.map(|m| (k, m)))
            .collect(),
    })
}

/// Reads every EDF file in `dir`, calibrating each signal and computing its mean.
fn read_edf(dir: &Path, pool: &rayon::ThreadPool) -> Result<ReadPhase, BenchError> {
    let files = edf_files(dir)?;
    let started = Instant::now();
    let per_file: Vec<(u64, Vec<(String, f64)>)> = pool.install(|| {
        files
            .par_iter()
            .map(|path| -> Result<_, BenchError> {
                let file = EdfFile::open(path, ParseMode::Lenient)?;
                let name = path
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                let mut means = Vec::new();
                for (i, sh) in file.header().signals.iter().enumerate() {
                    if sh.is_annotation_channel {
                        continue;
                    }
                    let (values, _) = file.read_signal_physical(i)?;
                    if !values.is_empty() {
                        let sum: f64 = values.iter().map(|&v| v as f64).sum();
                        means.push((format!("{name}/{}", sh.label), sum / values.len() as f64));
                    }
                }
                let size = std::fs::metadata(path).map_err(io_err(path))?.len();
                Ok((size, means))
            })
            .collect::<Result<_, _>>()
    })?;
    Ok(ReadPhase {
        seconds: started.elapsed().as_secs_f64(),
        bytes_read: per_file.iter().map(|(b, _)| b).sum(),
        means: per_file.into_iter().flat_map(|(_, m)| m).collect(),
    })
}

fn edf_files(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("edf"))
        {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(EdfError::EmptySourceDirectory(dir.to_path_buf()).into());
    }
    Ok(files)
}

fn measure_read(
    root: &Path,
    cold: bool,
    scratch: &Path,
    pool: &rayon::ThreadPool,
    read: fn(&Path, &rayon::ThreadPool) -> Result<ReadPhase, BenchError>,
) -> Result<ReadPhase, BenchError> {
    if !cold {
        return read(root, pool);
    }
    if scratch.exists() {
        std::fs::remove_dir_all(scratch).map_err(io_err(scratch))?;
    }
    cold_copy(root, scratch)?;
    let phase = read(scratch, pool);
    std::fs::remove_dir_all(scratch).map_err(io_err(scratch))?;
    phase
}

fn row(
    format: &str,
    data_type: &str,
    compression: String,
    size_bytes: u64,
    conversion_time_s: Option<f64>,
    read: ReadPhase,
) -> BenchRow {
    BenchRow {
        format: format.to_string(),
        data_type: data_type.to_string(),
        compression,
        size_bytes,
        conversion_time_s,
        read_time_s: read.seconds,
        bytes_read: read.bytes_read,
        read_speed_bps: read.bytes_read as f64 / read.seconds.max(f64::MIN_POSITIVE),
        means: read.means,
    }
}

const BENCH_DATASET: &str = "bench";

/// Runs every configuration in `opts.configs`. Each one writes its dataset
/// under `work_dir/<label>/`, replacing earlier output.
pub fn run_bench(opts: &BenchOptions) -> Result<BenchReport, BenchError> {
    let workers = opts.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Io {
            path: opts.work_dir.clone(),
            source: std::io::Error::other(e),
        })?;
    std::fs::create_dir_all(&opts.work_dir).map_err(io_err(&opts.work_dir))?;
    let scratch = opts.work_dir.join(".cold");
    let mut rows = Vec::new();

    let synthetic = match &opts.source {
        BenchSource::Synthetic(spec) => {
            spec.check()?;
            Some(pool.install(|| generate_synthetic_dataset(BENCH_DATASET, spec)))
        }
        BenchSource::EdfDirectory(dir) => {
            let read = measure_read(dir, opts.cold, &scratch, &pool, read_edf)?;
            let size = edf_files(dir)?
                .iter()
                .map(|p| std::fs::metadata(p).map(|m| m.len()).map_err(io_err(p)))
                .sum::<Result<u64, _>>()?;
            rows.push(row("edf", "int16", "-".into(), size, None, read));
            None
        }
    };

    for config in &opts.configs {
        let out = opts.work_dir.join(&config.label);
        if out.exists() {
            std::fs::remove_dir_all(&out).map_err(io_err(&out))?;
        }
        std::fs::create_dir_all(&out).map_err(io_err(&out))?;
        let started = Instant::now();
        match (&synthetic, &opts.source) {
            (Some(dataset), _) => write_parallel(dataset, &out, config.codec, &pool)?,
            (None, BenchSource::EdfDirectory(dir)) => {
                let convert = ConvertOptions {
                    codec: config.codec,
                    mode: ParseMode::Lenient,
                    workers: Some(workers),
                    ..Default::default()
                };
                edf::convert_directory(dir, BENCH_DATASET, "edf", &out, &convert)?;
            }
            (None, BenchSource::Synthetic(_)) => unreachable!(),
        }
        let conversion = started.elapsed().as_secs_f64();
        let root = out.join(BENCH_DATASET);
        let size = directory_size(&root)?;
        let read = measure_read(&root, opts.cold, &scratch, &pool, read_slf)?;
        rows.push(row(
            &config.label,
            "float32",
            config.codec.compression_label(),
            size,
            Some(conversion),
            read,
        ));
    }
    Ok(BenchReport {
        rows,
        workers,
        cold: opts.cold,
    })
}

fn write_parallel(
    dataset: &Dataset,
    out: &Path,
    codec: ArrayCodecSpec,
    pool: &rayon::ThreadPool,
) -> Result<(), BenchError> {
    let writer = DatasetWriter::create(
        out,
        &dataset.name,
        FORMAT_VERSION,
        WriteOptions {
            codec,
            overwrite: false,
        },
    )?;
    for series in dataset.series.values() {
        writer.add_series(&series.name)?;
        pool.install(|| {
            series
                .subjects
                .values()
                .collect::<Vec<_>>()
                .par_iter()
                .try_for_each(|s| writer.write_subject(&series.name, s).map(|_| ()))
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ChannelKind) -> SynthSpec {
        SynthSpec {
            n_subjects: 1,
            duration_sec: 10.0,
            channels: vec![SynthChannel::new("x", 64.0, kind)],
            seed: 5,
        }
    }

    #[test]
    fn one_channel_length() {
        let d = generate_synthetic_dataset("d", &spec(ChannelKind::GaussianNoise));
        let s = &d.series[SYNTH_SERIES].subjects["subj_0001"];
        assert_eq!(s.sample_arrays["x"].attributes.n_samples, 640);
        assert!(s.annotations["hypnogram"].annotations.is_empty());
    }

    #[test]
    fn deterministic() {
        for kind in [
            ChannelKind::GaussianNoise,
            ChannelKind::SinePlusNoise,
            ChannelKind::Int16Quantized,
        ] {
            let a = generate_synthetic_dataset("d", &spec(kind));
            let b = generate_synthetic_dataset("d", &spec(kind));
            let bits = |d: &Dataset| {
                d.series[0].subjects[0].sample_arrays[0]
                    .values()
                    .unwrap()
                    .to_le_bytes()
            };
            assert_eq!(bits(&a), bits(&b));
        }
    }

    #[test]
    fn quantized_values_lie_on_grid() {
        let d = generate_synthetic_dataset("d", &spec(ChannelKind::Int16Quantized));
        let values = d.series[0].subjects[0].sample_arrays[0]
            .values()
            .unwrap()
            .to_f64_vec();
        for v in values {
            let k = v * INT16_SCALE;
            assert_eq!(k, k.round());
            assert!((i16::MIN as f64..=i16::MAX as f64).contains(&k));
        }
    }

    #[test]
    fn hypnogram_cycles() {
        let set = hypnogram(185.0);
        let names: Vec<_> = set.annotations.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["W", "N1", "N2", "N3", "R", "W"]);
        assert_eq!(set.annotations[5].start_sec, 150.0);
    }

    #[test]
    fn channel_parsing() {
        let c: SynthChannel = "eeg:256:int16_quantized".parse().unwrap();
        assert_eq!(
            c,
            SynthChannel::new("eeg", 256.0, ChannelKind::Int16Quantized)
        );
        assert!("eeg:256".parse::<SynthChannel>().is_err());
        assert!("eeg:x:gaussian_noise".parse::<SynthChannel>().is_err());
        assert!("eeg:1:pink".parse::<SynthChannel>().is_err());
        let bad = SynthSpec {
            channels: vec![SynthChannel::new("x", 0.0, ChannelKind::GaussianNoise)],
            ..spec(ChannelKind::GaussianNoise)
        };
        assert!(bad.check().is_err());
    }
}
