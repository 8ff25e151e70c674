use std::f64::consts::PI;

use super::{DspParams, PolStream, C64};
use crate::error::{DspError, Result};

/// Default filter length in symbols.
pub const DEFAULT_SPAN: usize = 32;

/// Tukey taper applied to the truncated root-raised-cosine response.
const TUKEY_ALPHA: f64 = 0.5;

/// Root-raised-cosine filter on an integer sample grid.
///
/// Taps are normalized so that `sum(h^2) = sps`: shaping unit-power symbols
/// gives a unit-power waveform, and [`RrcFilter::matched`] (which scales by
/// `1/sps`) returns each symbol with unit gain at its center sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RrcFilter {
    taps: Vec<f64>,
    sps: usize,
    span: usize,
}

fn rrc_impulse(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let edge = 1.0 / (4.0 * beta);
    if (t.abs() - edge).abs() < 1e-9 {
        return beta / 2f64.sqrt()
            * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin()
                + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

fn tukey(n: usize, len: usize, alpha: f64) -> f64 {
    let m = (len - 1) as f64;
    let x = n as f64 / m;
    if x < alpha / 2.0 {
        0.5 * (1.0 + (PI * (2.0 * x / alpha - 1.0)).cos())
    } else if x > 1.0 - alpha / 2.0 {
        0.5 * (1.0 + (PI * (2.0 * x / alpha - 2.0 / alpha + 1.0)).cos())
    } else {
        1.0
    }
}

impl RrcFilter {
    /// `span` is the filter length in symbols (even, at least 16).
    pub fn design(params: &DspParams, span: usize) -> Result<Self> {
        params.validate()?;
        if span < 16 || !span.is_multiple_of(2) {
            return Err(DspError::Config(format!(
                "RRC span must be even and >= 16 symbols, got {span}"
            )));
        }
        let sps = params.sps()?;
        let len = span * sps + 1;
        let half = (span * sps / 2) as i64;
        let mut taps: Vec<f64> = (0..len)
            .map(|n| {
                let t = (n as i64 - half) as f64 / sps as f64;
                rrc_impulse(t, params.rolloff) * tukey(n, len, TUKEY_ALPHA)
            })
            .collect();
        let energy: f64 = taps.iter().map(|h| h * h).sum();
        let scale = (sps as f64 / energy).sqrt();
        taps.iter_mut().for_each(|h| *h *= scale);
        Ok(Self { taps, sps, span })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sps(&self) -> usize {
        self.sps
    }

    pub fn span(&self) -> usize {
        self.span
    }

    /// Offset of symbol 0's center in the output of [`RrcFilter::shape`].
    pub fn delay(&self) -> usize {
        self.span * self.sps / 2
    }

    /// Upsample and filter. Full convolution: the output has
    /// `symbols.len() * sps + span * sps` samples and symbol `m` is centered at
    /// sample `delay() + m * sps`.
    pub fn shape(&self, symbols: &[C64]) -> Vec<C64> {
        let out_len = symbols.len() * self.sps + self.span * self.sps;
        let mut out = vec![C64::new(0.0, 0.0); out_len];
        for (m, &s) in symbols.iter().enumerate() {
            let base = m * self.sps;
            for (j, &h) in self.taps.iter().enumerate() {
                out[base + j] += s * h;
            }
        }
        out
    }

    /// Matched filter in "same" mode: output sample `i` is aligned with input
    /// sample `i`, no group delay.
    pub fn matched(&self, x: &[C64]) -> Vec<C64> {
        let half = self.delay() as i64;
        let scale = 1.0 / self.sps as f64;
        let n = x.len() as i64;
        (0..n)
            .map(|i| {
                let lo = (i - half).max(0);
                let hi = (i + half).min(n - 1);
                let mut acc = C64::new(0.0, 0.0);
                for k in lo..=hi {
                    acc += x[k as usize] * self.taps[(k - i + half) as usize];
                }
                acc * scale
            })
            .collect()
    }
}

/// Pulse-shape a symbol sequence at `rs * k_os`.
pub fn rrc_shape(symbols: &[C64], params: &DspParams, span: usize) -> Result<PolStream> {
    let f = RrcFilter::design(params, span)?;
    PolStream::new(f.shape(symbols), params.fs())
}

pub fn matched_filter(samples: &[C64], filter: &RrcFilter) -> Vec<C64> {
    filter.matched(samples)
}
