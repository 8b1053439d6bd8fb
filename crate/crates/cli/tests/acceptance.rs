//! Acceptance suite: one check per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test -p slf-cli --test acceptance`; pass criterion numbers
//! after `--` to run a subset.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::edf_oracle::{brute_force_tals, formula, random_tal_stream, ulps_apart};
use common::{bitwise_diff, random_dataset};
use sleeplab::edf::writer::{EdfFixture, FixtureSignal};
use sleeplab::edf::{digital_to_physical, parse_tal_records, EdfFile, EdfSignalHeader, ParseMode};
use sleeplab::extract::{decimate, extract, ArraySelection, ExtractConfig};
use sleeplab::model::NameType;
use sleeplab::store::chunked::{decode_chunked_array, ChunkedMeta};
use sleeplab::store::{encode_chunked_array, encode_raw_array, IoStats, StoredArrayRef};
use sleeplab::{
    read_dataset, write_dataset, Annotation, AnnotationSet, ArrayCodecSpec, Dataset, ReadOptions,
    SampleArray, Samples, Series, Subject, SubjectMetadata, ValueType, WriteOptions,
};
use slf_cli::bench::{
    run_bench, BenchConfigRow, BenchOptions, BenchReport, BenchSource, ChannelKind, SynthChannel,
    SynthSpec, CSV_HEADER,
};

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

fn write(d: &Dataset, root: &Path, codec: ArrayCodecSpec) {
    write_dataset(
        d,
        root,
        WriteOptions {
            codec,
            overwrite: false,
        },
    )
    .unwrap();
}

// 1. Round trip.

fn round_trip() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut arrays = 0;
    for i in 0..200 {
        let d = random_dataset(&mut rng, common::MAX_LEN);
        arrays += d
            .subjects()
            .map(|(_, s)| s.sample_arrays.len())
            .sum::<usize>();
        let chunk_len = rng.gen_bool(0.5).then(|| rng.gen_range(1..50_000));
        for codec in [
            ArrayCodecSpec::Raw,
            ArrayCodecSpec::chunked_zstd(9, chunk_len).unwrap(),
        ] {
            let dir = tmp();
            write(&d, dir.path(), codec);
            let back = read_dataset(&dir.path().join(&d.name), &ReadOptions::default())
                .map_err(|e| format!("dataset {i}: {e}"))?;
            if let Some(diff) = bitwise_diff(&d, &back) {
                return Err(format!("dataset {i} under {codec:?}: {diff}"));
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s (target < 60 s)"))?;
    Ok(format!(
        "200 datasets, {arrays} arrays, both codecs bit-exact in {secs:.1} s"
    ))
}

// 2. Golden files.

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

const GOLDEN_ZARRAY: &str = r#"{
  "zarr_format": 2,
  "shape": [10],
  "chunks": [4],
  "dtype": "<f4",
  "compressor": {"id": "zstd", "level": 9},
  "fill_value": 0,
  "order": "C",
  "filters": null
}
"#;

fn ruzstd_decode(frame: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut decoder = ruzstd::StreamingDecoder::new(frame).unwrap();
    std::io::Read::read_to_end(&mut decoder, &mut out).unwrap();
    out
}

fn golden_files() -> Check {
    let npy = [
        (
            "numpy_f4.npy",
            Samples::Float32(vec![0.0, -1.5, 3.25, 1e-7]),
        ),
        (
            "numpy_f8.npy",
            Samples::Float64(vec![std::f64::consts::PI, -0.0, 1e300]),
        ),
        (
            "numpy_i2.npy",
            Samples::Int16(vec![1, -1, 32767, -32768, 0]),
        ),
        ("numpy_i4.npy", Samples::Int32(vec![i32::MAX, i32::MIN, 5])),
        ("numpy_empty_f4.npy", Samples::Float32(vec![])),
    ];
    for (file, values) in &npy {
        let golden = std::fs::read(fixture(file)).map_err(|e| format!("{file}: {e}"))?;
        let ours = encode_raw_array(values, values.value_type()).unwrap();
        ensure(ours == golden, || {
            format!("{file} differs from the numpy-written bytes")
        })?;
    }

    let values = Samples::Float32((1..=10).map(|i| i as f32 * 0.5).collect());
    let enc = encode_chunked_array(&values, ValueType::Float32, 4, 9).unwrap();
    ensure(enc.zarray == GOLDEN_ZARRAY.as_bytes(), || {
        format!(
            "metadata differs:\n{}",
            String::from_utf8_lossy(&enc.zarray)
        )
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut frames = 0;
    for vt in [
        ValueType::Float32,
        ValueType::Float64,
        ValueType::Int16,
        ValueType::Int32,
    ] {
        let n = rng.gen_range(1..5000);
        let values = match vt {
            ValueType::Float32 => Samples::Float32((0..n).map(|_| rng.gen()).collect()),
            ValueType::Float64 => Samples::Float64((0..n).map(|_| rng.gen()).collect()),
            ValueType::Int16 => Samples::Int16((0..n).map(|_| rng.gen_range(-50..50)).collect()),
            ValueType::Int32 => Samples::Int32((0..n).map(|_| rng.gen()).collect()),
        };
        let chunk_len = rng.gen_range(1..700);
        let level = rng.gen_range(-7..=22);
        let enc = encode_chunked_array(&values, vt, chunk_len, level).unwrap();
        let mut expected = values.to_le_bytes();
        expected.resize(enc.chunks.len() * chunk_len * vt.item_size(), 0);
        for (i, frame) in enc.chunks.iter().enumerate() {
            let span = chunk_len * vt.item_size();
            ensure(
                ruzstd_decode(frame) == expected[i * span..(i + 1) * span],
                || format!("{vt} chunk {i} at level {level} decodes differently"),
            )?;
            frames += 1;
        }
    }

    let dir = fixture("zarr_python_f4.zarr");
    let meta = ChunkedMeta::parse(&std::fs::read(dir.join(".zarray")).unwrap()).unwrap();
    let chunks: Vec<_> = (0..meta.n_chunks())
        .map(|i| std::fs::read(dir.join(i.to_string())).ok())
        .collect();
    let decoded = decode_chunked_array(&meta, &chunks).unwrap();
    let expected = Samples::Float32((0..2500).map(|i| i as f32 * 0.25 - 100.0).collect());
    ensure(decoded == expected, || {
        "zarr-python array decodes differently".into()
    })?;

    Ok(format!(
        "{} NPY goldens, .zarray golden, {frames} chunk frames via an independent decoder",
        npy.len()
    ))
}

// 3. Lazy reads.

fn open_array(root: &Path) -> StoredArrayRef {
    let dir = root.join("d/night/subj_01/eeg");
    let attrs =
        serde_json::from_slice(&std::fs::read(dir.join("attributes.json")).unwrap()).unwrap();
    StoredArrayRef::open(&dir, attrs, Arc::new(IoStats::new())).unwrap()
}

fn lazy_reads() -> Check {
    let values: Vec<f32> = (0..64 * 3600 * 8)
        .map(|i| ((i % 977) as f32).sqrt())
        .collect();
    let n = values.len() as u64;
    let d = Dataset::new("d").with_series(Series::new("night").with_subject(
        Subject::new(SubjectMetadata::new("subj_01")).with_array(SampleArray::new(
            "eeg",
            64.0,
            values.clone(),
        )),
    ));
    let dir = tmp();
    let (raw, chunked) = (dir.path().join("raw"), dir.path().join("chunked"));
    std::fs::create_dir(&raw).unwrap();
    std::fs::create_dir(&chunked).unwrap();
    write(&d, &raw, ArrayCodecSpec::Raw);
    write(
        &d,
        &chunked,
        ArrayCodecSpec::chunked_zstd(9, Some(1024)).unwrap(),
    );
    let raw_ref = open_array(&raw);
    let chunked_ref = open_array(&chunked);
    let chunk_len = chunked_ref.chunked_meta().unwrap().chunk_len;

    let stats = IoStats::new();
    let start = 4 * 3600 * 64;
    let w = raw_ref.read_window(start, 1920, &stats).unwrap();
    ensure(
        w == Samples::Float32(values[start as usize..start as usize + 1920].to_vec()),
        || "30 s window values".into(),
    )?;
    let window_bytes = stats.bytes_read();
    ensure(window_bytes <= 7808, || {
        format!("30 s window read {window_bytes} bytes > 7808")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let len = rng.gen_range(1..=30_000u64);
        let start = rng.gen_range(0..=n - len);
        let expected = Samples::Float32(values[start as usize..(start + len) as usize].to_vec());
        let stats = IoStats::new();
        ensure(
            chunked_ref.read_window(start, len, &stats).unwrap() == expected,
            || format!("window {i} values"),
        )?;
        let overlapping = (start + len - 1) / chunk_len - start / chunk_len + 1;
        ensure(stats.files_opened() == overlapping, || {
            format!(
                "window {i} [{start}, +{len}) opened {} chunk files, {overlapping} overlap",
                stats.files_opened()
            )
        })?;
        let stats = IoStats::new();
        ensure(
            raw_ref.read_window(start, len, &stats).unwrap() == expected,
            || format!("raw window {i} values"),
        )?;
        ensure(stats.bytes_read() <= len * 4 + 128, || {
            format!("raw window {i} read {} bytes", stats.bytes_read())
        })?;
    }
    Ok(format!(
        "30 s window read {window_bytes} bytes; 100 chunked windows opened only overlapping chunks"
    ))
}

// 4. Compression direction.

fn bench_sizes(spec: SynthSpec, configs: Vec<BenchConfigRow>) -> Result<BenchReport, String> {
    let dir = tmp();
    run_bench(&BenchOptions {
        source: BenchSource::Synthetic(spec),
        work_dir: dir.path().to_path_buf(),
        configs,
        workers: 1,
        cold: false,
    })
    .map_err(|e| e.to_string())
}

fn compression_direction() -> Check {
    let started = Instant::now();
    let quantized = SynthSpec {
        n_subjects: 4,
        duration_sec: 8200.0,
        channels: vec![
            SynthChannel::new("eeg_c3", 256.0, ChannelKind::Int16Quantized),
            SynthChannel::new("eeg_c4", 256.0, ChannelKind::Int16Quantized),
        ],
        seed: 4,
    };
    let payload = quantized.payload_bytes();
    ensure(payload >= 64 << 20, || {
        format!("only {payload} bytes of samples")
    })?;
    let q = bench_sizes(quantized, BenchConfigRow::defaults())?;
    let [raw, z9, z22] = [0, 1, 2].map(|i| q.rows[i].size_bytes);
    ensure(z22 <= z9 && z9 < raw, || {
        format!("sizes raw {raw}, zstd9 {z9}, zstd22 {z22} out of order")
    })?;
    let q_ratio = z9 as f64 / raw as f64;
    ensure(q_ratio <= 0.60, || {
        format!("int16_quantized zstd9/raw = {q_ratio:.3} > 0.60")
    })?;

    let gaussian = SynthSpec {
        n_subjects: 1,
        duration_sec: 16384.0,
        channels: vec![SynthChannel::new(
            "noise",
            256.0,
            ChannelKind::GaussianNoise,
        )],
        seed: 5,
    };
    let g = bench_sizes(gaussian, BenchConfigRow::defaults()[..2].to_vec())?;
    let g_ratio = g.rows[1].size_bytes as f64 / g.rows[0].size_bytes as f64;
    ensure(g_ratio >= 0.85, || {
        format!("gaussian zstd9/raw = {g_ratio:.3} < 0.85")
    })?;

    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 300.0, || {
        format!("took {secs:.0} s (target < 300 s)")
    })?;
    Ok(format!(
        "{} MiB int16_quantized: raw {raw}, zstd9 {z9} ({q_ratio:.3}), zstd22 {z22} ({:.3}); gaussian zstd9/raw {g_ratio:.3}; {secs:.0} s",
        payload >> 20,
        z22 as f64 / raw as f64
    ))
}

// 5. EDF correctness.

fn signal_header(pmin: f64, pmax: f64, dmin: i32, dmax: i32) -> EdfSignalHeader {
    EdfSignalHeader {
        label: "x".into(),
        transducer: String::new(),
        physical_dimension: String::new(),
        physical_min: pmin,
        physical_max: pmax,
        digital_min: dmin,
        digital_max: dmax,
        prefiltering: String::new(),
        samples_per_record: 1,
        reserved: String::new(),
        is_annotation_channel: false,
    }
}

fn edf_round_trips(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut fixtures = 0;
    for i in 0..100 {
        let n_records = rng.gen_range(1..6);
        let mut f = EdfFixture {
            record_duration_sec: [0.5, 1.0, 2.0, 30.0][rng.gen_range(0..4)],
            ..Default::default()
        };
        for s in 0..rng.gen_range(1..5) {
            let dmin = rng.gen_range(-32768..32000);
            let dmax = rng.gen_range(dmin + 1..=32767);
            let spr = rng.gen_range(1..40);
            let digital = (0..spr * n_records)
                .map(|_| rng.gen_range(dmin..=dmax) as i16)
                .collect();
            let tenths = rng.gen_range(-5000..0);
            let (pmin, pmax) = (tenths as f64 / 10.0, (tenths + 1000) as f64 / 10.0);
            f = f.with_signal(
                FixtureSignal::new(&format!("sig {s}"), spr, digital)
                    .calibrated(pmin, pmax, dmin, dmax),
            );
        }
        let mut expected = Vec::new();
        for k in 0..rng.gen_range(0..4) {
            let onset = rng.gen_range(0..1000) as f64 / 4.0;
            let duration = rng
                .gen_bool(0.5)
                .then(|| rng.gen_range(1..100) as f64 / 2.0);
            let text = format!("event {k}");
            f = f.with_annotation(onset, duration, &text);
            expected.push((onset, duration, text));
        }
        let edf = EdfFile::from_bytes(f.to_bytes(), ParseMode::Strict)
            .map_err(|e| format!("fixture {i}: {e}"))?;
        for (s, sig) in f.signals.iter().enumerate() {
            ensure(edf.digital_samples(s).unwrap() == sig.digital, || {
                format!("fixture {i} signal {s} digital values")
            })?;
            let sh = &edf.header().signals[s];
            ensure(
                (
                    sh.physical_min,
                    sh.physical_max,
                    sh.digital_min,
                    sh.digital_max,
                ) == (
                    sig.physical_min,
                    sig.physical_max,
                    sig.digital_min,
                    sig.digital_max,
                ),
                || format!("fixture {i} signal {s} calibration"),
            )?;
        }
        let mut found = Vec::new();
        for ch in edf.annotation_channels() {
            let (tals, _) =
                parse_tal_records(&edf.annotation_bytes(ch).unwrap(), ParseMode::Strict).unwrap();
            found.extend(
                tals.into_iter()
                    .map(|t| (t.onset_sec, t.duration_sec, t.texts.join("|"))),
            );
        }
        ensure(found == expected, || {
            format!("fixture {i} annotations {found:?} vs {expected:?}")
        })?;
        fixtures += 1;
    }
    Ok(fixtures)
}

fn edf_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xedf5);
    let fixtures = edf_round_trips(&mut rng)?;

    let mut worst = 0;
    for _ in 0..10_000 {
        let a = rng.gen_range(-32768..=32767);
        let mut b = rng.gen_range(-32768..=32767);
        if a == b {
            b = if a == 32767 { a - 1 } else { a + 1 };
        }
        let (dmin, dmax) = (a.min(b), a.max(b));
        let pmin: f64 = rng.gen_range(-1e4..1e4);
        let pmax = pmin + rng.gen_range(1e-3..1e4);
        let sh = signal_header(pmin, pmax, dmin, dmax);
        let d = rng.gen_range(dmin..=dmax);
        let ours = digital_to_physical(d, &sh).unwrap();
        let ulps = ulps_apart(ours, formula(d, pmin, pmax, dmin, dmax));
        worst = worst.max(ulps);
        ensure(ulps <= 1, || {
            format!("d={d} {sh:?}: {ulps} ulps from the formula")
        })?;
    }

    for i in 0..1000 {
        let stream = random_tal_stream(&mut rng);
        let (parsed, _) = parse_tal_records(&stream, ParseMode::Strict)
            .map_err(|e| format!("stream {i}: {e}"))?;
        ensure(parsed == brute_force_tals(&stream), || {
            format!("stream {i} parses differently")
        })?;
    }
    Ok(format!("{fixtures} fixtures round-trip; 10000 calibrations within {worst} ulp; 1000 TAL streams agree"))
}

// 6. Validation coverage.

fn base_dataset() -> Dataset {
    let mut series = Series::new("night");
    for id in ["subj_01", "subj_02", "subj_03"] {
        let mut hyp = AnnotationSet::new("hypnogram", NameType::aasm_sleep_stage());
        hyp.annotations = ["W", "N1", "N2", "N3"]
            .iter()
            .enumerate()
            .map(|(i, s)| Annotation::new(*s, i as f64 * 30.0, 30.0))
            .collect();
        let subject = Subject::new(SubjectMetadata::new(id))
            .with_array(SampleArray::new(
                "eeg",
                64.0,
                (0..64 * 120).map(|i| (i % 50) as f32).collect::<Vec<_>>(),
            ))
            .with_array(SampleArray::new("resp", 8.0, vec![7i16; 8 * 120]))
            .with_annotations(hyp);
        series = series.with_subject(subject);
    }
    Dataset::new("d").with_series(series)
}

fn edit_json(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    f(&mut v);
    std::fs::write(path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
}

fn copy_dir(src: &Path, dst: &Path) {
    std::fs::create_dir_all(dst).unwrap();
    for entry in std::fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let target = dst.join(entry.file_name());
        if entry.path().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

type Corruption = (&'static str, bool, &'static str, fn(&Path));

fn corruptions() -> Vec<Corruption> {
    // (description, chunked store, expected code, mutation of the subject directory)
    vec![
        (
            "negative sampling rate",
            false,
            "nonpositive_sampling_rate",
            |s| {
                edit_json(&s.join("eeg/attributes.json"), |v| {
                    v["sampling_rate"] = (-64.0).into()
                })
            },
        ),
        ("mismatched map key", false, "key_mismatch", |s| {
            std::fs::rename(s.join("eeg"), s.join("eeg_renamed")).unwrap()
        }),
        ("N4 sleep stage", false, "invalid_annotation_name", |s| {
            edit_json(&s.join("annotations/hypnogram.json"), |v| {
                v["annotations"][3]["name"] = "N4".into()
            })
        }),
        ("truncated data file", false, "truncated_payload", |s| {
            let p = s.join("eeg/data.npy");
            let len = std::fs::metadata(&p).unwrap().len();
            std::fs::OpenOptions::new()
                .write(true)
                .open(&p)
                .unwrap()
                .set_len(len - 10)
                .unwrap();
        }),
        ("shape/payload mismatch", false, "shape_mismatch", |s| {
            edit_json(&s.join("resp/attributes.json"), |v| {
                v["n_samples"] = 961.into()
            })
        }),
        ("bad magic", false, "bad_magic", |s| {
            let p = s.join("eeg/data.npy");
            let mut bytes = std::fs::read(&p).unwrap();
            bytes[1] = b'X';
            std::fs::write(p, bytes).unwrap();
        }),
        ("zstd level 23", true, "invalid_zstd_level", |s| {
            edit_json(&s.join("eeg/data.zarr/.zarray"), |v| {
                v["compressor"]["level"] = 23.into()
            })
        }),
        ("duplicate array name", false, "duplicate_name", |s| {
            copy_dir(&s.join("eeg"), &s.join("eeg_copy"))
        }),
        (
            "negative duration",
            false,
            "negative_annotation_duration",
            |s| {
                edit_json(&s.join("annotations/hypnogram.json"), |v| {
                    v["annotations"][1]["duration_sec"] = (-30.0).into()
                })
            },
        ),
        ("non-JSON metadata", false, "malformed_json", |s| {
            std::fs::write(s.join("metadata.json"), "subject_id = subj\n").unwrap()
        }),
        (
            "negative annotation start",
            false,
            "negative_annotation_start",
            |s| {
                edit_json(&s.join("annotations/hypnogram.json"), |v| {
                    v["annotations"][0]["start_sec"] = (-1.0).into()
                })
            },
        ),
        ("corrupt chunk", true, "corrupt_chunk", |s| {
            let p = s.join("eeg/data.zarr/0");
            let mut bytes = std::fs::read(&p).unwrap();
            bytes.truncate(bytes.len() / 2);
            std::fs::write(p, bytes).unwrap();
        }),
        ("unsupported dtype", false, "unsupported_dtype", |s| {
            let p = s.join("resp/data.npy");
            let mut bytes = std::fs::read(&p).unwrap();
            let at = bytes.windows(3).position(|w| w == b"<i2").unwrap();
            bytes[at + 1] = b'u';
            std::fs::write(&p, bytes).unwrap();
        }),
        ("missing attributes file", false, "missing_file", |s| {
            std::fs::remove_file(s.join("resp/attributes.json")).unwrap()
        }),
        ("value type mismatch", false, "value_type_mismatch", |s| {
            edit_json(&s.join("resp/attributes.json"), |v| {
                v["value_type"] = "int32".into()
            })
        }),
    ]
}

fn validate_cli(path: &Path) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = slf_cli::run_from_args(
        ["slf", "validate", path.to_str().unwrap()],
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8_lossy(&out).into_owned() + &String::from_utf8_lossy(&err),
    )
}

fn validation_coverage() -> Check {
    let d = base_dataset();
    let pristine = tmp();
    let raw = pristine.path().join("raw");
    let chunked = pristine.path().join("chunked");
    std::fs::create_dir(&raw).unwrap();
    std::fs::create_dir(&chunked).unwrap();
    write(&d, &raw, ArrayCodecSpec::Raw);
    write(
        &d,
        &chunked,
        ArrayCodecSpec::chunked_zstd(9, Some(1000)).unwrap(),
    );
    let (code, output) = validate_cli(&raw.join("d"));
    ensure(code == 0, || {
        format!("pristine dataset fails validation: {output}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let list = corruptions();
    for (what, use_chunked, expected, mutate) in &list {
        let dir = tmp();
        copy_dir(
            &if *use_chunked { &chunked } else { &raw }.join("d"),
            &dir.path().join("d"),
        );
        let subject = ["subj_01", "subj_02", "subj_03"][rng.gen_range(0..3)];
        mutate(&dir.path().join("d/night").join(subject));
        let (code, output) = validate_cli(&dir.path().join("d"));
        ensure(code == 1, || {
            format!("{what}: exit {code}, expected 1\n{output}")
        })?;
        let hit = output.lines().any(|l| {
            l.starts_with("ERROR ")
                && l.contains(subject)
                && l.split_whitespace().nth(2) == Some(*expected)
        });
        ensure(hit, || {
            format!("{what}: no ERROR line with code {expected} for {subject}\n{output}")
        })?;
    }
    let (code, _) = validate_cli(&pristine.path().join("missing"));
    ensure(code == 2, || {
        format!("nonexistent path exit {code}, expected 2")
    })?;
    Ok(format!(
        "{} seeded corruptions detected with their codes",
        list.len()
    ))
}

// 7. Extractor.

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn extractor() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = random_dataset(&mut rng, 20_000);
    let names: std::collections::BTreeSet<String> = d
        .subjects()
        .flat_map(|(_, s)| s.sample_arrays.keys().cloned())
        .collect();
    let dir = tmp();
    write(
        &d,
        dir.path(),
        ArrayCodecSpec::chunked_zstd(3, Some(999)).unwrap(),
    );
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    let config = ExtractConfig::new(names.iter().map(ArraySelection::new).collect());
    extract(&dir.path().join(&d.name), &config, &out).map_err(|e| e.to_string())?;
    let back =
        read_dataset(&out.join(&d.name), &ReadOptions::default()).map_err(|e| e.to_string())?;
    if let Some(diff) = bitwise_diff(&d, &back) {
        return Err(format!("identity extraction differs: {diff}"));
    }

    let fs = 256.0;
    let n = 256 * 60 + 17;
    let sine = |f: f64| -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
            .collect()
    };
    let subject = Subject::new(SubjectMetadata::new("x"))
        .with_array(SampleArray::new("dc", fs, vec![3.75f32; n]))
        .with_array(SampleArray::new("sig", fs, sine(3.0)));
    let src = Dataset::new("sig").with_series(Series::new("s").with_subject(subject));
    let dir = tmp();
    write(&src, dir.path(), ArrayCodecSpec::Raw);
    let mut worst_dc: f64 = 0.0;
    for factor in 1..=8usize {
        let mut dc = ArraySelection::new("dc");
        dc.target_sampling_rate = Some(fs / factor as f64);
        let mut same = ArraySelection::new("sig");
        same.target_sampling_rate = Some(fs);
        let mut config = ExtractConfig::new(vec![dc, same]);
        config.dataset_name = Some(format!("f{factor}"));
        extract(&dir.path().join("sig"), &config, dir.path()).map_err(|e| e.to_string())?;
        let got = read_dataset(
            &dir.path().join(format!("f{factor}")),
            &ReadOptions::eager(),
        )
        .unwrap();
        let arrays = &got.series["s"].subjects["x"].sample_arrays;
        let dc_out = arrays["dc"].values().unwrap().to_f64_vec();
        ensure(dc_out.len() == n.div_ceil(factor), || {
            format!("factor {factor}: {} samples", dc_out.len())
        })?;
        for v in dc_out {
            worst_dc = worst_dc.max((v - 3.75).abs());
        }
        let sig = arrays["sig"].values().unwrap();
        ensure(
            sig.to_le_bytes() == Samples::Float64(sine(3.0)).to_le_bytes(),
            || "identity factor not bit-exact".into(),
        )?;
    }
    ensure(worst_dc < 1e-6, || format!("DC error {worst_dc:e}"))?;

    let x: Vec<f64> = (0..64 * 60)
        .map(|i| (2.0 * std::f64::consts::PI * 24.0 * i as f64 / 64.0).sin())
        .collect();
    let ratio = rms(&decimate(&x, 4)) / rms(&x);
    ensure(ratio <= 0.1, || {
        format!("24 Hz at 64 Hz / 4: RMS ratio {ratio:.3}")
    })?;

    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s (target < 30 s)"))?;
    Ok(format!(
        "identity lossless ({} arrays); DC error {worst_dc:.1e}; stopband RMS ratio {ratio:.4} ({:.1} dB); {secs:.1} s",
        names.len(),
        20.0 * ratio.log10()
    ))
}

// 8. Benchmark harness.

fn eager_means(root: &Path) -> BTreeMap<String, f64> {
    let d = read_dataset(root, &ReadOptions::eager()).unwrap();
    let mut out = BTreeMap::new();
    for (series, subject) in d.subjects() {
        for a in subject.sample_arrays.values() {
            let values = a.values().unwrap().to_f64_vec();
            if values.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            for v in &values {
                sum += v;
            }
            out.insert(
                format!("{}/{}/{}", series.name, subject.id(), a.name()),
                sum / values.len() as f64,
            );
        }
    }
    out
}

fn bench_harness() -> Check {
    let spec = SynthSpec {
        n_subjects: 3,
        duration_sec: 900.0,
        channels: vec![
            SynthChannel::new("eeg", 256.0, ChannelKind::Int16Quantized),
            SynthChannel::new("airflow", 32.0, ChannelKind::SinePlusNoise),
        ],
        seed: 8,
    };
    let dir = tmp();
    let report = run_bench(&BenchOptions {
        source: BenchSource::Synthetic(spec.clone()),
        work_dir: dir.path().to_path_buf(),
        configs: BenchConfigRow::defaults(),
        workers: 1,
        cold: false,
    })
    .map_err(|e| e.to_string())?;

    let labels: Vec<_> = report.rows.iter().map(|r| r.format.as_str()).collect();
    ensure(labels == ["slf-raw", "slf-zstd9", "slf-zstd22"], || {
        format!("rows {labels:?}")
    })?;
    for row in &report.rows {
        let expected = eager_means(&dir.path().join(&row.format).join("bench"));
        ensure(expected.len() == 6 && row.means == expected, || {
            format!("{} means differ from an eager read", row.format)
        })?;
    }
    let raw = &report.rows[0];
    ensure(raw.bytes_read == raw.size_bytes, || {
        format!("raw read {} bytes of {}", raw.bytes_read, raw.size_bytes)
    })?;
    let sizes: Vec<u64> = report.rows.iter().map(|r| r.size_bytes).collect();
    ensure(sizes[2] <= sizes[1] && sizes[1] < sizes[0], || {
        format!("sizes {sizes:?} not monotone")
    })?;

    // table and CSV carry the same strings
    let csv = report.to_csv();
    let table = report.to_table();
    let mut csv_lines = csv.lines();
    ensure(csv_lines.next() == Some(CSV_HEADER), || "CSV header".into())?;
    for (line, row) in csv_lines.zip(table.lines().skip(2)) {
        let fields: Vec<&str> = line.split(',').collect();
        let expected_cells = [
            fields[0].to_string(),
            fields[1].to_string(),
            fields[2].to_string(),
            fields[3].to_string(),
            fields[4].to_string(),
            format!("{} ({})", fields[5], fields[6]),
        ];
        ensure(
            expected_cells.iter().all(|c| row.contains(c.as_str())),
            || format!("table row {row:?} vs CSV {line:?}"),
        )?;
    }

    // the command writes the same schema and prints the table and caveat
    let work = dir.path().join("cli");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = [
        "slf",
        "bench",
        "--work-dir",
        work.to_str().unwrap(),
        "--subjects",
        "1",
        "--duration",
        "120",
        "--channel",
        "eeg:128:int16_quantized",
        "--seed",
        "8",
    ];
    let code = slf_cli::run_from_args(args, &mut out, &mut err);
    ensure(code == 0, || {
        format!("bench exit {code}: {}", String::from_utf8_lossy(&err))
    })?;
    let stdout = String::from_utf8_lossy(&out);
    ensure(
        stdout.contains("Format") && stdout.contains("caching"),
        || format!("bench output:\n{stdout}"),
    )?;
    let written = std::fs::read_to_string(work.join("bench.csv")).unwrap();
    let lines: Vec<&str> = written.lines().collect();
    ensure(lines.len() == 4 && lines[0] == CSV_HEADER, || {
        format!("bench.csv:\n{written}")
    })?;

    Ok(format!(
        "3 rows, CSV schema fixed, means equal eager read, sizes {} >= {} >= {} bytes",
        sizes[0], sizes[1], sizes[2]
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "round trip", round_trip),
        (2, "golden files", golden_files),
        (3, "lazy reads", lazy_reads),
        (4, "compression direction", compression_direction),
        (5, "EDF correctness", edf_correctness),
        (6, "validation coverage", validation_coverage),
        (7, "extractor", extractor),
        (8, "benchmark harness", bench_harness),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let result = std::panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n} ({name}): PASS [{secs:.1} s] {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1} s] {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
