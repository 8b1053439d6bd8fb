//! Minimal EDF/EDF+C writer for test fixtures and benchmark sources.

use chrono::{NaiveDate, NaiveDateTime};

use super::header::{ANNOTATION_LABEL, FIXED_HEADER_LEN, SIGNAL_HEADER_LEN};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSignal {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub digital: Vec<i16>,
}

impl FixtureSignal {
    /// Signal with a ±32767 digital range mapped onto `physical_min..physical_max`.
    pub fn new(label: &str, samples_per_record: usize, digital: Vec<i16>) -> Self {
        FixtureSignal {
            label: label.to_string(),
            transducer: String::new(),
            physical_dimension: "uV".to_string(),
            physical_min: -32767.0,
            physical_max: 32767.0,
            digital_min: -32767,
            digital_max: 32767,
            prefiltering: String::new(),
            samples_per_record,
            digital,
        }
    }

    pub fn calibrated(mut self, pmin: f64, pmax: f64, dmin: i32, dmax: i32) -> Self {
        self.physical_min = pmin;
        self.physical_max = pmax;
        self.digital_min = dmin;
        self.digital_max = dmax;
        self
    }

    pub fn with_dimension(mut self, dim: &str) -> Self {
        self.physical_dimension = dim.to_string();
        self
    }
}

/// One annotation written into the EDF+ annotation channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureAnnotation {
    pub onset_sec: f64,
    pub duration_sec: Option<f64>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfFixture {
    pub patient_id: String,
    pub recording_id: String,
    pub start: NaiveDateTime,
    /// Written to the reserved field; `EDF+C` when annotations are present
    /// and this is left empty.
    pub reserved: String,
    pub record_duration_sec: f64,
    pub signals: Vec<FixtureSignal>,
    pub annotations: Vec<FixtureAnnotation>,
}

impl Default for EdfFixture {
    fn default() -> Self {
        EdfFixture {
            patient_id: "X X X X".into(),
            recording_id: "Startdate X X X X".into(),
            start: NaiveDate::from_ymd_opt(2001, 2, 3)
                .unwrap()
                .and_hms_opt(4, 5, 6)
                .unwrap(),
            reserved: String::new(),
            record_duration_sec: 1.0,
            signals: Vec::new(),
            annotations: Vec::new(),
        }
    }
}

/// Left-aligned, space-padded ASCII field. Longer values are cut.
fn field(out: &mut Vec<u8>, value: &str, width: usize) {
    let bytes = value.as_bytes();
    let n = bytes.len().min(width);
    out.extend_from_slice(&bytes[..n]);
    out.resize(out.len() + width - n, b' ');
}

/// Shortest decimal form of `v` that fits in 8 characters.
pub fn format_number(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 8 {
        return s;
    }
    (0..8)
        .rev()
        .map(|p| format!("{v:.p$}"))
        .find(|s| s.len() <= 8)
        .unwrap_or(s)
}

fn tal_number(v: f64) -> String {
    let s = format!("{}", v.abs());
    if v < 0.0 {
        format!("-{s}")
    } else {
        format!("+{s}")
    }
}

impl EdfFixture {
    pub fn with_signal(mut self, signal: FixtureSignal) -> Self {
        self.signals.push(signal);
        self
    }

    pub fn with_annotation(
        mut self,
        onset_sec: f64,
        duration_sec: Option<f64>,
        text: &str,
    ) -> Self {
        self.annotations.push(FixtureAnnotation {
            onset_sec,
            duration_sec,
            text: text.to_string(),
        });
        self
    }

    /// Records implied by the first data signal.
    pub fn n_records(&self) -> usize {
        self.signals
            .first()
            .map_or(1, |s| s.digital.len() / s.samples_per_record)
    }

    /// TAL bytes per record. Record 0 carries the time-keeping TAL and every
    /// annotation; later records carry only their time-keeping TAL.
    fn annotation_records(&self) -> Vec<Vec<u8>> {
        (0..self.n_records())
            .map(|r| {
                let mut tal = Vec::new();
                let onset = r as f64 * self.record_duration_sec;
                tal.extend_from_slice(tal_number(onset).as_bytes());
                tal.extend_from_slice(b"\x14\x14\x00");
                if r == 0 {
                    for a in &self.annotations {
                        tal.extend_from_slice(tal_number(a.onset_sec).as_bytes());
                        if let Some(d) = a.duration_sec {
                            tal.push(0x15);
                            tal.extend_from_slice(format!("{d}").as_bytes());
                        }
                        tal.push(0x14);
                        tal.extend_from_slice(a.text.as_bytes());
                        tal.extend_from_slice(b"\x14\x00");
                    }
                }
                tal
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n_records = self.n_records();
        let ann = (!self.annotations.is_empty() || self.reserved.starts_with("EDF+"))
            .then(|| self.annotation_records());
        let ann_spr = ann.as_ref().map(|recs| {
            recs.iter()
                .map(|r| r.len().div_ceil(2))
                .max()
                .unwrap_or(1)
                .max(1)
        });
        let ns = self.signals.len() + ann.is_some() as usize;
        let reserved = match (&ann, self.reserved.is_empty()) {
            (Some(_), true) => "EDF+C",
            _ => self.reserved.as_str(),
        };

        let mut out = Vec::new();
        field(&mut out, "0", 8);
        field(&mut out, &self.patient_id, 80);
        field(&mut out, &self.recording_id, 80);
        field(&mut out, &self.start.format("%d.%m.%y").to_string(), 8);
        field(&mut out, &self.start.format("%H.%M.%S").to_string(), 8);
        field(
            &mut out,
            &(FIXED_HEADER_LEN + SIGNAL_HEADER_LEN * ns).to_string(),
            8,
        );
        field(&mut out, reserved, 44);
        field(&mut out, &n_records.to_string(), 8);
        field(&mut out, &format_number(self.record_duration_sec), 8);
        field(&mut out, &ns.to_string(), 4);

        struct Row<'a> {
            label: &'a str,
            transducer: &'a str,
            dim: &'a str,
            pmin: String,
            pmax: String,
            dmin: String,
            dmax: String,
            prefilter: &'a str,
            spr: usize,
        }
        let mut rows: Vec<Row> = self
            .signals
            .iter()
            .map(|s| Row {
                label: &s.label,
                transducer: &s.transducer,
                dim: &s.physical_dimension,
                pmin: format_number(s.physical_min),
                pmax: format_number(s.physical_max),
                dmin: s.digital_min.to_string(),
                dmax: s.digital_max.to_string(),
                prefilter: &s.prefiltering,
                spr: s.samples_per_record,
            })
            .collect();
        if let Some(spr) = ann_spr {
            rows.push(Row {
                label: ANNOTATION_LABEL,
                transducer: "",
                dim: "",
                pmin: "-1".into(),
                pmax: "1".into(),
                dmin: "-32768".into(),
                dmax: "32767".into(),
                prefilter: "",
                spr,
            });
        }
        for r in &rows {
            field(&mut out, r.label, 16);
        }
        for r in &rows {
            field(&mut out, r.transducer, 80);
        }
        for r in &rows {
            field(&mut out, r.dim, 8);
        }
        for r in &rows {
            field(&mut out, &r.pmin, 8);
        }
        for r in &rows {
            field(&mut out, &r.pmax, 8);
        }
        for r in &rows {
            field(&mut out, &r.dmin, 8);
        }
        for r in &rows {
            field(&mut out, &r.dmax, 8);
        }
        for r in &rows {
            field(&mut out, r.prefilter, 80);
        }
        for r in &rows {
            field(&mut out, &r.spr.to_string(), 8);
        }
        for _ in &rows {
            field(&mut out, "", 32);
        }

        for rec in 0..n_records {
            for s in &self.signals {
                let spr = s.samples_per_record;
                for &d in &s.digital[rec * spr..(rec + 1) * spr] {
                    out.extend_from_slice(&d.to_le_bytes());
                }
            }
            if let (Some(recs), Some(spr)) = (&ann, ann_spr) {
                let mut bytes = recs[rec].clone();
                bytes.resize(spr * 2, 0);
                out.extend_from_slice(&bytes);
            }
        }
        out
    }

    pub fn write(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }
}
