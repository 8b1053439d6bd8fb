//! The `slf` command: validate, inspect, convert, extract and benchmark
//! Sleeplab-format datasets.
//!
//! Exit codes: 0 success, 1 the data or configuration is at fault, 2 the
//! environment is (missing paths, I/O failures, bad arguments).

pub mod bench;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sleeplab::edf::{convert_directory, ConvertOptions, EdfError, LabelMapping, ParseMode};
use sleeplab::extract::{extract, ExtractConfig, ExtractError};
use sleeplab::model::IssueCode;
use sleeplab::store::{list_dataset, read_dataset_with_warnings, DatasetSummary, IoStats};
use sleeplab::{ArrayCodecSpec, ReadOptions, StoreError, ValidationIssue};

use bench::{BenchConfigRow, BenchOptions, BenchSource, SynthChannel, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_ENVIRONMENT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "slf", version, about = "Sleeplab-format dataset tools")]
pub struct Cli {
    /// Print only errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print machine-readable JSON reports on standard output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset against every model and storage invariant.
    Validate {
        path: PathBuf,
        /// Skip decoding array payloads.
        #[arg(long)]
        shallow: bool,
    },
    /// Summarize a dataset from its metadata files.
    Info { path: PathBuf },
    /// Convert a directory of EDF/EDF+ files into a dataset.
    Convert(ConvertArgs),
    /// Write a subset of a dataset as a new dataset.
    Extract {
        /// JSON extraction config.
        config: PathBuf,
        /// Source dataset directory.
        src: PathBuf,
        /// Directory the new dataset is created in.
        dest: PathBuf,
    },
    /// Measure size, write and read time of the storage configurations.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CodecArg {
    Raw,
    Zstd,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub src_dir: PathBuf,
    pub dest_root: PathBuf,
    #[arg(long, default_value = "dataset")]
    pub dataset_name: String,
    #[arg(long, default_value = "series")]
    pub series_name: String,
    #[arg(long, value_enum, default_value_t = CodecArg::Raw)]
    pub codec: CodecArg,
    /// Zstandard level for --codec zstd.
    #[arg(long, default_value_t = 9, allow_negative_numbers = true,
          value_parser = clap::value_parser!(i32).range(-7..=22))]
    pub level: i32,
    /// Samples per chunk for --codec zstd (default about 1 MiB).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub chunk_len: Option<u64>,
    #[arg(long, default_value_t = ParseMode::Strict)]
    pub mode: ParseMode,
    /// JSON label mapping for annotations.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory for the benchmark datasets and the CSV.
    #[arg(long)]
    pub work_dir: PathBuf,
    /// Benchmark a directory of EDF files instead of synthetic data.
    #[arg(long)]
    pub edf_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub subjects: usize,
    #[arg(long, default_value_t = 3600.0)]
    pub duration: f64,
    /// Synthetic channel as name:rate:kind; repeatable.
    #[arg(long = "channel")]
    pub channels: Vec<SynthChannel>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    /// Read from a freshly copied directory with its page cache dropped.
    #[arg(long)]
    pub cold: bool,
    /// CSV output path (default <work-dir>/bench.csv).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also print the per-array means.
    #[arg(long)]
    pub means: bool,
}

fn default_channels() -> Vec<SynthChannel> {
    use bench::ChannelKind::*;
    vec![
        SynthChannel::new("eeg_c3", 256.0, Int16Quantized),
        SynthChannel::new("eeg_c4", 256.0, Int16Quantized),
        SynthChannel::new("airflow", 32.0, SinePlusNoise),
    ]
}

/// Output sinks and global flags shared by every command.
pub struct Ctx<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
    pub quiet: bool,
    pub json: bool,
}

impl Ctx<'_> {
    fn say(&mut self, text: impl AsRef<str>) {
        if !self.quiet && !self.json {
            let _ = writeln!(self.out, "{}", text.as_ref());
        }
    }

    fn warn(&mut self, text: impl AsRef<str>) {
        if !self.quiet {
            let _ = writeln!(self.err, "warning: {}", text.as_ref());
        }
    }

    fn fail(&mut self, code: i32, text: impl std::fmt::Display) -> i32 {
        let _ = writeln!(self.err, "error: {text}");
        code
    }

    fn emit_json(&mut self, value: &impl Serialize) {
        if self.json {
            let text = serde_json::to_string_pretty(value).expect("reports serialize");
            let _ = writeln!(self.out, "{text}");
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_ENVIRONMENT
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            code
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut ctx = Ctx {
        out,
        err,
        quiet: cli.quiet,
        json: cli.json,
    };
    match cli.command {
        Command::Validate { path, shallow } => cmd_validate(&mut ctx, &path, shallow),
        Command::Info { path } => cmd_info(&mut ctx, &path),
        Command::Convert(args) => cmd_convert(&mut ctx, &args),
        Command::Extract { config, src, dest } => cmd_extract(&mut ctx, &config, &src, &dest),
        Command::Bench(args) => cmd_bench(&mut ctx, &args),
    }
}

fn store_exit(e: &StoreError) -> i32 {
    if e.is_environmental() {
        EXIT_ENVIRONMENT
    } else {
        EXIT_DOMAIN
    }
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    valid: bool,
    issues: &'a [ValidationIssue],
}

/// Reads the dataset with full validation and, unless `shallow`, decodes
/// every array payload.
pub fn cmd_validate(ctx: &mut Ctx, path: &Path, shallow: bool) -> i32 {
    let issues = match read_dataset_with_warnings(path, &ReadOptions::default()) {
        Ok((dataset, mut issues)) => {
            if !shallow {
                for (series, subject) in dataset.subjects() {
                    for array in subject.sample_arrays.values() {
                        if let Err(e) = array.values() {
                            let code = match &e {
                                StoreError::Codec { source, .. } => source.code(),
                                _ => IssueCode::IoFailure,
                            };
                            issues.push(ValidationIssue::error(
                                format!("{}/{}/{}", series.name, subject.id(), array.name()),
                                code,
                                e.to_string(),
                            ));
                        }
                    }
                }
            }
            issues
        }
        Err(e @ (StoreError::Validation(_) | StoreError::Read(_))) => e.issues().to_vec(),
        Err(e) => return ctx.fail(store_exit(&e), e),
    };
    let valid = !issues.iter().any(ValidationIssue::is_error);
    ctx.emit_json(&ValidateReport {
        valid,
        issues: &issues,
    });
    if !ctx.json {
        for issue in &issues {
            if issue.is_error() || !ctx.quiet {
                let _ = writeln!(ctx.out, "{issue}");
            }
        }
    }
    if valid {
        ctx.say(format!("{}: valid", path.display()));
        EXIT_OK
    } else {
        let n = issues.iter().filter(|i| i.is_error()).count();
        ctx.fail(EXIT_DOMAIN, format!("{}: {n} error(s)", path.display()))
    }
}

/// Human-readable tree of `summary`.
pub fn render_summary(summary: &DatasetSummary) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let arrays: usize = summary
        .series
        .iter()
        .flat_map(|x| &x.subjects)
        .map(|x| x.arrays.len())
        .sum();
    let _ = writeln!(
        s,
        "dataset {} (format {}): {} series, {} subjects, {} arrays",
        summary.name,
        summary.format_version,
        summary.series.len(),
        summary.n_subjects(),
        arrays
    );
    for series in &summary.series {
        let _ = writeln!(
            s,
            "  series {} ({} subjects)",
            series.name,
            series.subjects.len()
        );
        for subject in &series.subjects {
            let _ = writeln!(s, "    subject {}", subject.subject_id);
            for a in &subject.arrays {
                let _ = writeln!(
                    s,
                    "      {}: {} Hz, {} samples, {} s, {}{}",
                    a.name,
                    a.sampling_rate,
                    a.n_samples,
                    a.duration_sec,
                    a.value_type,
                    a.unit
                        .as_deref()
                        .map(|u| format!(", {u}"))
                        .unwrap_or_default()
                );
            }
            if !subject.annotation_sets.is_empty() {
                let _ = writeln!(
                    s,
                    "      annotations: {}",
                    subject.annotation_sets.join(", ")
                );
            }
        }
    }
    s
}

pub fn cmd_info(ctx: &mut Ctx, path: &Path) -> i32 {
    let stats = Arc::new(IoStats::new());
    match list_dataset(path, &stats) {
        Ok(summary) => {
            ctx.emit_json(&summary);
            if !ctx.json && !ctx.quiet {
                let _ = write!(ctx.out, "{}", render_summary(&summary));
            }
            EXIT_OK
        }
        Err(e) => ctx.fail(store_exit(&e), e),
    }
}

fn edf_exit(e: &EdfError) -> i32 {
    if e.is_environmental() {
        EXIT_ENVIRONMENT
    } else {
        EXIT_DOMAIN
    }
}

pub fn cmd_convert(ctx: &mut Ctx, args: &ConvertArgs) -> i32 {
    let codec = match args.codec {
        CodecArg::Raw => ArrayCodecSpec::Raw,
        CodecArg::Zstd => ArrayCodecSpec::ChunkedZstd {
            zstd_level: args.level,
            chunk_len: args.chunk_len.map(|c| c as usize),
        },
    };
    let mapping = match &args.mapping {
        None => LabelMapping::default(),
        Some(p) => match std::fs::read_to_string(p) {
            Ok(text) => match LabelMapping::from_json(&text) {
                Ok(m) => m,
                Err(e) => return ctx.fail(EXIT_DOMAIN, format!("{}: {e}", p.display())),
            },
            Err(e) => return ctx.fail(EXIT_ENVIRONMENT, format!("{}: {e}", p.display())),
        },
    };
    let opts = ConvertOptions {
        codec,
        mode: args.mode,
        mapping,
        workers: Some(args.workers as usize),
        overwrite: args.overwrite,
    };
    match convert_directory(
        &args.src_dir,
        &args.dataset_name,
        &args.series_name,
        &args.dest_root,
        &opts,
    ) {
        Ok(report) => {
            ctx.emit_json(&report);
            for w in &report.warnings {
                ctx.warn(w);
            }
            for s in &report.skipped {
                let _ = writeln!(ctx.err, "skipped {}: {}", s.file.display(), s.reason);
            }
            ctx.say(format!(
                "converted {} file(s), skipped {}, {} bytes written",
                report.converted,
                report.skipped.len(),
                report.bytes_written
            ));
            ctx.say(format!(
                "conversion time: {:.3} s ({} worker(s))",
                report.elapsed_sec, report.workers
            ));
            EXIT_OK
        }
        Err(e) => ctx.fail(edf_exit(&e), e),
    }
}

fn extract_exit(e: &ExtractError) -> i32 {
    if e.is_environmental() {
        EXIT_ENVIRONMENT
    } else {
        EXIT_DOMAIN
    }
}

pub fn cmd_extract(ctx: &mut Ctx, config: &Path, src: &Path, dest: &Path) -> i32 {
    let text = match std::fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => return ctx.fail(EXIT_ENVIRONMENT, format!("{}: {e}", config.display())),
    };
    let config = match ExtractConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return ctx.fail(EXIT_DOMAIN, e),
    };
    match extract(src, &config, dest) {
        Ok(report) => {
            ctx.emit_json(&report);
            for w in &report.warnings {
                ctx.warn(w);
            }
            for f in report.factors.iter().filter(|f| f.factor > 1) {
                ctx.say(format!("{}: decimated by {}", f.path, f.factor));
            }
            ctx.say(format!(
                "extracted {} subject(s), {} array(s), {} bytes written",
                report.subjects, report.arrays, report.bytes_written
            ));
            EXIT_OK
        }
        Err(e) => ctx.fail(extract_exit(&e), e),
    }
}

pub fn cmd_bench(ctx: &mut Ctx, args: &BenchArgs) -> i32 {
    let source = match &args.edf_dir {
        Some(dir) => BenchSource::EdfDirectory(dir.clone()),
        None => BenchSource::Synthetic(SynthSpec {
            n_subjects: args.subjects,
            duration_sec: args.duration,
            channels: if args.channels.is_empty() {
                default_channels()
            } else {
                args.channels.clone()
            },
            seed: args.seed,
        }),
    };
    let opts = BenchOptions {
        source,
        work_dir: args.work_dir.clone(),
        configs: BenchConfigRow::defaults(),
        workers: args.workers as usize,
        cold: args.cold,
    };
    let report = match bench::run_bench(&opts) {
        Ok(r) => r,
        Err(e) => {
            let code = if e.is_environmental() {
                EXIT_ENVIRONMENT
            } else {
                EXIT_DOMAIN
            };
            return ctx.fail(code, e);
        }
    };
    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| args.work_dir.join("bench.csv"));
    if let Err(e) = std::fs::write(&csv_path, report.to_csv()) {
        return ctx.fail(EXIT_ENVIRONMENT, format!("{}: {e}", csv_path.display()));
    }
    ctx.emit_json(&report);
    ctx.say(report.to_table());
    if args.means {
        for row in &report.rows {
            for (key, mean) in &row.means {
                ctx.say(format!("{} {key} mean {mean}", row.format));
            }
        }
    }
    ctx.say(bench::CACHE_CAVEAT);
    ctx.say(format!(
        "{} worker(s); CSV written to {}",
        report.workers,
        csv_path.display()
    ));
    EXIT_OK
}
