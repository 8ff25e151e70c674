//! Sliding-window burst detection and coarse frequency offset from the
//! Preamble A tone lines.

use crate::error::{DspError, Result};
use crate::sigcore::{Dft, DspParams, DualPolBurst, C64};

/// Window step, in samples.
const HOP: usize = 16;
/// Half-width of the per-line peak search around the template position, in bins.
const PEAK_SEARCH: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Start sample of the window best aligned with Preamble A.
    pub index: usize,
    pub coarse_df: f64,
    /// Fraction of window energy carried by the four tone lines.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    pub window_symbols: usize,
    pub threshold: f64,
    /// Largest offset searched, Hz.
    pub max_offset_hz: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            window_symbols: 128,
            threshold: 0.3,
            max_offset_hz: 8e9,
        }
    }
}

/// Nominal tone lines in Hz: +/- R_s/2 (X) and +/- R_s/4 (Y).
pub fn tone_lines(rs: f64) -> [f64; 4] {
    [rs / 2.0, -rs / 2.0, rs / 4.0, -rs / 4.0]
}

struct WindowSpectrum {
    power: Vec<f64>,
    energy: f64,
}

fn window_spectrum(stream: &DualPolBurst, start: usize, len: usize, dft: &Dft) -> WindowSpectrum {
    let n = dft.len();
    let mut px = vec![C64::new(0.0, 0.0); n];
    let mut py = vec![C64::new(0.0, 0.0); n];
    px[..len].copy_from_slice(&stream.x[start..start + len]);
    py[..len].copy_from_slice(&stream.y[start..start + len]);
    let energy = px[..len].iter().chain(&py[..len]).map(|v| v.norm_sqr()).sum();
    dft.forward_in_place(&mut px).expect("sized by construction");
    dft.forward_in_place(&mut py).expect("sized by construction");
    let power = px.iter().zip(&py).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
    WindowSpectrum { power, energy }
}

fn bin_of(f: f64, fs: f64, n: usize) -> i64 {
    (f / fs * n as f64).round() as i64
}

fn at(power: &[f64], k: i64) -> f64 {
    power[k.rem_euclid(power.len() as i64) as usize]
}

/// Best template shift (bins) and its normalized line score.
fn best_shift(ws: &WindowSpectrum, lines: &[i64; 4], max_shift: i64, len: usize) -> (i64, f64) {
    if ws.energy <= 0.0 {
        return (0, 0.0);
    }
    let mut best = (0, f64::NEG_INFINITY);
    for s in -max_shift..=max_shift {
        let p: f64 = lines.iter().map(|&l| at(&ws.power, l + s)).sum();
        if p > best.1 {
            best = (s, p);
        }
    }
    (best.0, best.1 / (len as f64 * ws.energy))
}

/// Sub-bin peak position near `k` by parabolic interpolation on the power.
fn refine_peak(power: &[f64], k: i64) -> f64 {
    let kp = (k - PEAK_SEARCH..=k + PEAK_SEARCH)
        .max_by(|&a, &b| at(power, a).total_cmp(&at(power, b)))
        .unwrap_or(k);
    let (m, c, p) = (at(power, kp - 1), at(power, kp), at(power, kp + 1));
    let den = m - 2.0 * c + p;
    let frac = if den.abs() > 0.0 { 0.5 * (m - p) / den } else { 0.0 };
    kp as f64 + frac.clamp(-0.5, 0.5)
}

/// First burst at or after sample `from`.
pub fn detect_frame_from(
    stream: &DualPolBurst,
    params: &DspParams,
    cfg: &DetectConfig,
    from: usize,
) -> Result<Detection> {
    params.validate()?;
    let sps = params.sps()?;
    let fs = params.fs();
    let len = cfg.window_symbols * sps;
    let n = params.n_dft.max(len.next_power_of_two());
    let dft = Dft::new(n)?;
    let lines = tone_lines(params.rs).map(|f| bin_of(f, fs, n));
    let max_shift = bin_of(cfg.max_offset_hz, fs, n);
    if stream.len() < len {
        return Err(DspError::NoBurstFound);
    }
    let last = stream.len() - len;

    let mut start = from;
    let mut found: Option<(usize, i64, f64)> = None;
    while start <= last {
        let ws = window_spectrum(stream, start, len, &dft);
        let (shift, q) = best_shift(&ws, &lines, max_shift, len);
        match found {
            None if q >= cfg.threshold => found = Some((start, shift, q)),
            Some((_, _, best)) if q > best => found = Some((start, shift, q)),
            _ => {}
        }
        // Keep scanning one full window past the first crossing.
        if let Some((first, _, _)) = found {
            if start >= first + len {
                break;
            }
        }
        start += HOP;
    }
    let (index, shift, score) = found.ok_or(DspError::NoBurstFound)?;

    let ws = window_spectrum(stream, index, len, &dft);
    let peaks: Vec<f64> = lines.iter().map(|&l| refine_peak(&ws.power, l + shift)).collect();
    // Symmetric pairs: the midpoint of each pair is the offset.
    let mid_x = 0.5 * (peaks[0] + peaks[1]);
    let mid_y = 0.5 * (peaks[2] + peaks[3]);
    let coarse_df = 0.5 * (mid_x + mid_y) * fs / n as f64;
    Ok(Detection {
        index,
        coarse_df,
        score,
    })
}

/// Sliding-window detection of the first burst in `stream`.
pub fn detect_frame(stream: &DualPolBurst, params: &DspParams, window_symbols: usize) -> Result<Detection> {
    let cfg = DetectConfig {
        window_symbols,
        ..DetectConfig::default()
    };
    detect_frame_from(stream, params, &cfg, 0)
}
