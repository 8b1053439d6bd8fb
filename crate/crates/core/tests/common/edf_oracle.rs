//! Independent oracles for EDF calibration and annotation parsing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sleeplab::edf::TalAnnotation;

/// Affine formula evaluated literally.
pub fn formula(d: i32, pmin: f64, pmax: f64, dmin: i32, dmax: i32) -> f64 {
    (d as f64 - dmin as f64) * (pmax - pmin) / (dmax as f64 - dmin as f64) + pmin
}

pub fn ulps_apart(a: f64, b: f64) -> u64 {
    if a == b {
        return 0;
    }
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    };
    key(a).abs_diff(key(b))
}

/// Splits on the delimiter bytes and interprets the pieces directly.
pub fn brute_force_tals(bytes: &[u8]) -> Vec<TalAnnotation> {
    bytes
        .split(|&b| b == 0x00)
        .filter(|tal| !tal.is_empty())
        .filter_map(|tal| {
            let parts: Vec<&[u8]> = tal.split(|&b| b == 0x14).collect();
            let head: Vec<&[u8]> = parts[0].split(|&b| b == 0x15).collect();
            let num = |b: &[u8]| std::str::from_utf8(b).unwrap().parse::<f64>().unwrap();
            let texts: Vec<String> = parts[1..]
                .iter()
                .filter(|t| !t.is_empty())
                .map(|t| String::from_utf8(t.to_vec()).unwrap())
                .collect();
            (!texts.is_empty()).then(|| TalAnnotation {
                onset_sec: num(head[0]),
                duration_sec: head.get(1).map(|d| num(d)),
                texts,
            })
        })
        .collect()
}

fn random_number(rng: &mut ChaCha8Rng) -> String {
    let int = rng.gen_range(0..100_000u32);
    if rng.gen_bool(0.5) {
        let frac: String = (0..rng.gen_range(1..5))
            .map(|_| char::from(b'0' + rng.gen_range(0..10u8)))
            .collect();
        format!("{int}.{frac}")
    } else {
        int.to_string()
    }
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[char] = &[
        'a', 'Z', '3', ' ', '?', '-', 'é', 'ß', '睡', '\u{1}', '\u{7f}',
    ];
    (0..rng.gen_range(1..12))
        .map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())])
        .collect()
}

pub fn random_tal_stream(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = Vec::new();
    for _ in 0..rng.gen_range(0..8) {
        let sign = if rng.gen_bool(0.8) { '+' } else { '-' };
        out.extend_from_slice(format!("{sign}{}", random_number(rng)).as_bytes());
        if rng.gen_bool(0.5) {
            out.push(0x15);
            out.extend_from_slice(random_number(rng).as_bytes());
        }
        out.push(0x14);
        let n_texts = rng.gen_range(0..4);
        if n_texts == 0 {
            out.push(0x14);
        }
        for _ in 0..n_texts {
            out.extend_from_slice(random_text(rng).as_bytes());
            out.push(0x14);
        }
        out.push(0x00);
        out.resize(out.len() + rng.gen_range(0..4), 0x00);
    }
    out
}
