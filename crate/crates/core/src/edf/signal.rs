use std::path::Path;

use super::header::{parse_edf_header, EdfHeader, EdfSignalHeader};
use super::{EdfError, ParseMode};

/// Maps a digital sample to physical units:
/// `(d - dmin) * (pmax - pmin) / (dmax - dmin) + pmin`.
///
/// The endpoints map exactly to `physical_min` and `physical_max`.
pub fn digital_to_physical(d: i32, sh: &EdfSignalHeader) -> Result<f64, EdfError> {
    Calibration::new(sh, ParseMode::Strict).map(|(c, _)| c.apply(d))
}

/// Per-signal affine calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    digital_min: i32,
    digital_max: i32,
    physical_min: f64,
    physical_max: f64,
    /// Zero digital range accepted in lenient mode: gain 1, offset
    /// `physical_min`.
    degenerate: bool,
}

impl Calibration {
    pub fn new(sh: &EdfSignalHeader, mode: ParseMode) -> Result<(Self, Option<String>), EdfError> {
        let degenerate = sh.digital_min == sh.digital_max;
        let mut warning = None;
        if degenerate {
            if mode == ParseMode::Strict {
                return Err(EdfError::ZeroDigitalRange {
                    signal: sh.label.clone(),
                });
            }
            warning = Some(format!(
                "signal {:?}: zero digital range, using gain 1 and offset {}",
                sh.label, sh.physical_min
            ));
        }
        Ok((
            Calibration {
                digital_min: sh.digital_min,
                digital_max: sh.digital_max,
                physical_min: sh.physical_min,
                physical_max: sh.physical_max,
                degenerate,
            },
            warning,
        ))
    }

    pub fn apply(&self, d: i32) -> f64 {
        if self.degenerate {
            return d as f64 + self.physical_min;
        }
        if d == self.digital_min {
            return self.physical_min;
        }
        if d == self.digital_max {
            return self.physical_max;
        }
        ((d - self.digital_min) as f64) * (self.physical_max - self.physical_min)
            / ((self.digital_max - self.digital_min) as f64)
            + self.physical_min
    }
}

/// A parsed EDF file held in memory.
#[derive(Debug, Clone)]
pub struct EdfFile {
    header: EdfHeader,
    bytes: Vec<u8>,
    n_records: usize,
    mode: ParseMode,
    warnings: Vec<String>,
}

impl EdfFile {
    pub fn open(path: &Path, mode: ParseMode) -> Result<Self, EdfError> {
        let bytes = std::fs::read(path).map_err(|source| EdfError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(bytes, mode)
    }

    /// Parses the header and checks the data record area. A trailing partial
    /// record is an error in strict mode and dropped with a warning in
    /// lenient mode.
    pub fn from_bytes(bytes: Vec<u8>, mode: ParseMode) -> Result<Self, EdfError> {
        let (header, mut warnings) = parse_edf_header(&bytes, mode)?;
        let record_len = header.record_len();
        let data_len = bytes.len() - header.header_bytes;
        let complete = data_len / record_len;
        let partial = data_len % record_len;

        let n_records = if header.n_records >= 0 {
            let declared = header.n_records as usize;
            if complete < declared {
                let reason = format!(
                    "header declares {declared} records of {record_len} bytes, \
                     {data_len} data bytes hold {complete}"
                );
                if mode == ParseMode::Strict {
                    return Err(EdfError::TruncatedRecord { reason });
                }
                warnings.push(format!("{reason}; dropping the incomplete records"));
                complete
            } else {
                if data_len > declared * record_len {
                    warnings.push(format!(
                        "{} bytes after the last declared record ignored",
                        data_len - declared * record_len
                    ));
                }
                declared
            }
        } else {
            if partial != 0 {
                let reason =
                    format!("{partial} bytes after the last complete record of {record_len} bytes");
                if mode == ParseMode::Strict {
                    return Err(EdfError::TruncatedRecord { reason });
                }
                warnings.push(format!("{reason}; dropping the partial record"));
            }
            complete
        };

        Ok(EdfFile {
            header,
            bytes,
            n_records,
            mode,
            warnings,
        })
    }

    pub fn header(&self) -> &EdfHeader {
        &self.header
    }

    /// Records actually available for reading.
    pub fn n_records(&self) -> usize {
        self.n_records
    }

    pub fn mode(&self) -> ParseMode {
        self.mode
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn signal(&self, index: usize) -> Result<&EdfSignalHeader, EdfError> {
        self.header
            .signals
            .get(index)
            .ok_or(EdfError::NoSuchSignal {
                index,
                n_signals: self.header.n_signals,
            })
    }

    /// Raw bytes of signal `index` in each data record.
    fn record_slices(&self, index: usize) -> Result<impl Iterator<Item = &[u8]>, EdfError> {
        let sh = self.signal(index)?;
        let offset = self.header.signal_offsets()[index];
        let width = sh.samples_per_record * 2;
        let record_len = self.header.record_len();
        let base = self.header.header_bytes;
        Ok((0..self.n_records).map(move |r| {
            let at = base + r * record_len + offset;
            &self.bytes[at..at + width]
        }))
    }

    /// Little-endian 16-bit samples of signal `index`, concatenated across
    /// records.
    pub fn digital_samples(&self, index: usize) -> Result<Vec<i16>, EdfError> {
        let mut out = Vec::with_capacity(self.n_records * self.signal(index)?.samples_per_record);
        for chunk in self.record_slices(index)? {
            out.extend(
                chunk
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]])),
            );
        }
        Ok(out)
    }

    /// Physical values of a data signal as float32, with its sampling rate.
    pub fn read_signal_physical(&self, index: usize) -> Result<(Vec<f32>, f64), EdfError> {
        let sh = self.signal(index)?;
        if sh.is_annotation_channel {
            return Err(EdfError::AnnotationChannel { index });
        }
        let (cal, _) = Calibration::new(sh, self.mode)?;
        let values = self
            .digital_samples(index)?
            .into_iter()
            .map(|d| cal.apply(d as i32) as f32)
            .collect();
        Ok((values, self.sampling_rate(index)?))
    }

    /// `samples_per_record / record_duration_sec`.
    pub fn sampling_rate(&self, index: usize) -> Result<f64, EdfError> {
        let sh = self.signal(index)?;
        Ok(sh.samples_per_record as f64 / self.header.record_duration_sec)
    }

    /// Bytes of an annotation channel concatenated across records.
    pub fn annotation_bytes(&self, index: usize) -> Result<Vec<u8>, EdfError> {
        let mut out = Vec::new();
        for chunk in self.record_slices(index)? {
            out.extend_from_slice(chunk);
        }
        Ok(out)
    }

    pub fn annotation_channels(&self) -> Vec<usize> {
        (0..self.header.signals.len())
            .filter(|&i| self.header.signals[i].is_annotation_channel)
            .collect()
    }
}
