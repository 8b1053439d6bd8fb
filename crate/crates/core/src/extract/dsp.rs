use crate::model::{Samples, ValueType};

/// Linear-phase low-pass for decimation by `factor`: `10 * factor + 1`
/// Hamming-windowed sinc taps, cutoff `0.45 / factor` cycles per sample,
/// normalized to unit DC gain. Taps are exactly symmetric.
pub fn design_lowpass_fir(factor: usize) -> Vec<f64> {
    let factor = factor.max(1);
    let len = 10 * factor + 1;
    let center = len / 2;
    let m = (len - 1) as f64;
    let fc = 0.45 / factor as f64;
    let tap = |k: usize| {
        let t = k as f64 - center as f64;
        let sinc = if t == 0.0 {
            2.0 * fc
        } else {
            (2.0 * std::f64::consts::PI * fc * t).sin() / (std::f64::consts::PI * t)
        };
        let window = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / m).cos();
        sinc * window
    };
    let mut taps = vec![0.0; len];
    for k in 0..=center {
        let v = tap(k);
        taps[k] = v;
        taps[len - 1 - k] = v;
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Index into an array of length `n` extended by mirroring about the first
/// and last samples without repeating them (`[c b | a b c d | c b]`).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Anti-aliased downsampling: filter with [`design_lowpass_fir`] centred on
/// each output sample, reflecting at both edges, and keep samples
/// `0, factor, 2 * factor, ...`. The output has `ceil(n / factor)` samples.
pub fn decimate(values: &[f64], factor: usize) -> Vec<f64> {
    if factor <= 1 || values.is_empty() {
        return values.to_vec();
    }
    let taps = design_lowpass_fir(factor);
    let center = (taps.len() / 2) as isize;
    let n = values.len();
    (0..n.div_ceil(factor))
        .map(|j| {
            let at = (j * factor) as isize;
            taps.iter()
                .enumerate()
                .map(|(k, h)| h * values[reflect(at + k as isize - center, n)])
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CastError {
    #[error("NaN at index {index} cannot be cast to {target}")]
    NanToInteger { index: usize, target: ValueType },
}

fn to_int<T>(
    values: &[f64],
    target: ValueType,
    conv: impl Fn(f64) -> T,
) -> Result<Vec<T>, CastError> {
    values
        .iter()
        .enumerate()
        .map(|(index, &v)| {
            if v.is_nan() {
                Err(CastError::NanToInteger { index, target })
            } else {
                // round() is half-away-from-zero; `as` saturates
                Ok(conv(v.round()))
            }
        })
        .collect()
}

/// Converts between value types. Floats round to nearest; float to integer
/// rounds half away from zero and saturates at the target range.
pub fn cast_values(values: &Samples, target: ValueType) -> Result<Samples, CastError> {
    if values.value_type() == target {
        return Ok(values.clone());
    }
    if !values.value_type().is_integer() && target.is_integer() {
        let f = values.to_f64_vec();
        return Ok(match target {
            ValueType::Int16 => Samples::Int16(to_int(&f, target, |v| v as i16)?),
            ValueType::Int32 => Samples::Int32(to_int(&f, target, |v| v as i32)?),
            _ => unreachable!(),
        });
    }
    let f = values.to_f64_vec();
    Ok(match target {
        ValueType::Float32 => Samples::Float32(f.iter().map(|&v| v as f32).collect()),
        ValueType::Float64 => Samples::Float64(f),
        // integer to integer saturates
        ValueType::Int16 => Samples::Int16(f.iter().map(|&v| v as i16).collect()),
        ValueType::Int32 => Samples::Int32(f.iter().map(|&v| v as i32).collect()),
    })
}
