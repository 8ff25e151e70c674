use std::f64::consts::PI;

use super::{PolStream, C64};
use crate::error::{DspError, Result};

const MAX_FACTOR: usize = 64;
/// Filter half-length, in units of the slower of the two rates.
const HALF_TAPS: usize = 32;
const KAISER_BETA: f64 = 8.0;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Smallest `p/q` (both at most 64) equal to `ratio` within 1e-9 relative.
pub fn rational_approx(ratio: f64) -> Option<(usize, usize)> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return None;
    }
    (1..=MAX_FACTOR).find_map(|q| {
        let p = (ratio * q as f64).round();
        if p >= 1.0 && p <= MAX_FACTOR as f64 && (p / q as f64 - ratio).abs() <= 1e-9 * ratio {
            Some((p as usize, q))
        } else {
            None
        }
    })
}

/// Band-limited rational resampling (polyphase, Kaiser-windowed sinc) to `new_fs`.
/// Zero group delay: output sample `m` sits at time `m / new_fs`.
pub fn resample(stream: &PolStream, new_fs: f64) -> Result<PolStream> {
    if !(new_fs > 0.0 && new_fs.is_finite()) || !(stream.fs > 0.0) {
        return Err(DspError::Config(format!(
            "resampling rates must be positive, got {} -> {new_fs}",
            stream.fs
        )));
    }
    let (p, q) = rational_approx(new_fs / stream.fs).ok_or_else(|| {
        DspError::Config(format!(
            "ratio {new_fs}/{} is not a rational p/q with p, q <= {MAX_FACTOR}",
            stream.fs
        ))
    })?;
    if p == q {
        return Ok(stream.clone());
    }
    let up_rate = stream.fs * p as f64;
    let min_fs = stream.fs.min(new_fs);
    let fc = 0.45 * min_fs / up_rate;
    let half = (HALF_TAPS * p.max(q)) as i64;
    let kernel: Vec<f64> = (-half..=half)
        .map(|t| {
            let r = t as f64 / half as f64;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / bessel_i0(KAISER_BETA);
            2.0 * fc * sinc(2.0 * fc * t as f64) * w * p as f64
        })
        .collect();
    let n_in = stream.samples.len() as i64;
    let n_out = (stream.samples.len() * p).div_ceil(q);
    let (p, q) = (p as i64, q as i64);
    let samples = (0..n_out as i64)
        .map(|m| {
            let t = m * q;
            let k_lo = ((t - half) as f64 / p as f64).ceil().max(0.0) as i64;
            let k_hi = (((t + half) as f64 / p as f64).floor() as i64).min(n_in - 1);
            let mut acc = C64::new(0.0, 0.0);
            for k in k_lo..=k_hi {
                acc += stream.samples[k as usize] * kernel[(t - k * p + half) as usize];
            }
            acc
        })
        .collect();
    PolStream::new(samples, new_fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigcore::fft;

    fn tone(f: f64, fs: f64, n: usize) -> PolStream {
        let s = (0..n)
            .map(|i| C64::from_polar(1.0, 2.0 * PI * f * i as f64 / fs))
            .collect();
        PolStream::new(s, fs).unwrap()
    }

    #[test]
    fn identity_is_bit_exact() {
        let s = tone(1e9, 64e9, 100);
        assert_eq!(resample(&s, 64e9).unwrap(), s);
    }

    #[test]
    fn ratio_search() {
        assert_eq!(rational_approx(90.0 / 64.0), Some((45, 32)));
        assert_eq!(rational_approx(std::f64::consts::PI), None);
        let s = tone(1e9, 64e9, 100);
        assert!(matches!(resample(&s, 64e9 * std::f64::consts::E), Err(DspError::Config(_))));
    }

    #[test]
    fn tone_preserved_64_to_90() {
        let s = tone(8e9, 64e9, 4096);
        let out = resample(&s, 90e9).unwrap();
        assert_eq!(out.fs, 90e9);
        // 90 GSa/s and 8 GHz: 8/90 = 4/45, so a 4500-sample window holds 400 cycles.
        let seg = &out.samples[300..300 + 4500];
        let spec = fft(seg);
        let (k, peak) = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert_eq!(k, 400);
        let amp = peak.norm() / 4500.0;
        assert!((20.0 * amp.log10()).abs() <= 0.1, "amp {amp}");
    }

    #[test]
    fn down_and_up_correlates() {
        // In-band multi-tone signal (all components below 0.4 * 64 GHz).
        let fs = 90e9;
        let n = 9000;
        let freqs = [1.3e9, -4.7e9, 9.1e9, -17.9e9, 22.0e9];
        let x: Vec<C64> = (0..n)
            .map(|i| {
                freqs
                    .iter()
                    .enumerate()
                    .map(|(j, f)| C64::from_polar(1.0 / (1.0 + j as f64), 2.0 * PI * f * i as f64 / fs + j as f64))
                    .sum()
            })
            .collect();
        let s = PolStream::new(x, fs).unwrap();
        let down = resample(&s, 64e9).unwrap();
        let back = resample(&down, 90e9).unwrap();
        let a = &s.samples[500..n - 500];
        let b = &back.samples[500..n - 500];
        let num: C64 = a.iter().zip(b).map(|(u, v)| u * v.conj()).sum();
        let ea: f64 = a.iter().map(|v| v.norm_sqr()).sum();
        let eb: f64 = b.iter().map(|v| v.norm_sqr()).sum();
        let rho = num.norm() / (ea * eb).sqrt();
        assert!(rho >= 0.999, "rho {rho}");
    }
}
