//! Godard timing recovery: band-edge spectral correlation drives a delayed
//! proportional-integral loop that updates once per beat.

use std::collections::VecDeque;
use std::f64::consts::PI;

use super::LoopConfig;
use crate::error::{DspError, Result};
use crate::sigcore::{fft, DspParams, DualPolBurst, C64};

const INTERP_HALF: i64 = 24;
const KAISER_BETA: f64 = 8.0;
/// Samples (at 2 per symbol) fed to each TED spectrum.
const TED_LEN: usize = 256;
/// Largest drift from the initial phase before the loop is declared divergent.
const MAX_DRIFT: f64 = 2.0;

fn bessel_i0(x: f64) -> f64 {
    let (mut sum, mut term) = (1.0, 1.0);
    let q = x * x / 4.0;
    for k in 1..100 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser window samples over `r = |x| / INTERP_HALF` in `[0, 1]`.
const WINDOW_TABLE: usize = 8192;

/// Kaiser-windowed sinc interpolator on a uniform sample grid.
pub struct Interpolator {
    window: Vec<f64>,
}

impl Default for Interpolator {
    fn default() -> Self {
        let norm = 1.0 / bessel_i0(KAISER_BETA);
        let window = (0..=WINDOW_TABLE)
            .map(|i| {
                let r = i as f64 / WINDOW_TABLE as f64;
                bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) * norm
            })
            .collect();
        Self { window }
    }
}

impl Interpolator {
    fn kaiser(&self, r: f64) -> f64 {
        let u = r * WINDOW_TABLE as f64;
        let i = u.floor() as usize;
        if i >= WINDOW_TABLE {
            return self.window[WINDOW_TABLE];
        }
        let f = u - i as f64;
        self.window[i] * (1.0 - f) + self.window[i + 1] * f
    }

    /// Value of the band-limited signal `v` at fractional sample position `t`.
    pub fn at(&self, v: &[C64], t: f64) -> C64 {
        let base = t.floor() as i64;
        let frac = t - base as f64;
        if frac == 0.0 && base >= 0 && (base as usize) < v.len() {
            return v[base as usize];
        }
        // sin(pi (t - i)) alternates in sign with i.
        let s0 = (PI * frac).sin() / PI;
        let mut acc = C64::new(0.0, 0.0);
        for i in (base - INTERP_HALF + 1).max(0)..=(base + INTERP_HALF).min(v.len() as i64 - 1) {
            let x = t - i as f64;
            let r = x.abs() / INTERP_HALF as f64;
            if r >= 1.0 {
                continue;
            }
            let sign = if (base - i) % 2 == 0 { 1.0 } else { -1.0 };
            acc += v[i as usize] * (sign * s0 / x * self.kaiser(r));
        }
        acc
    }
}

/// Sum of `S(f) * conj(S(f - R_s))` over the bins near `+R_s/2` of a 2-SPS block.
fn band_edge_corr(block: &[C64], rolloff: f64) -> C64 {
    let n = block.len();
    let s = fft(block);
    let c = n / 4;
    let w = (rolloff * n as f64 / 4.0).ceil() as usize + 1;
    (c.saturating_sub(w)..=(c + w).min(n / 2 - 1))
        .map(|k| s[k] * s[k + n / 2].conj())
        .sum()
}

/// Godard error in symbols: how late the symbols sit relative to a 2-SPS
/// block whose sample 0 is meant to be a symbol center.
pub fn godard_ted(block: &[C64], rolloff: f64) -> f64 {
    -band_edge_corr(block, rolloff).arg() / (2.0 * PI)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingOutput {
    /// One sample per symbol: symbol `m` is taken at input position `k_os * (m + tau)`.
    pub symbols: DualPolBurst,
    /// Sampling phase used in each beat (unwrapped, symbols).
    pub tau_trajectory: Vec<f64>,
    /// Raw detector output per beat.
    pub ted: Vec<f64>,
}

/// Retime a matched-filtered stream at `k_os` samples per symbol.
pub fn timing_recover(
    burst: &DualPolBurst,
    params: &DspParams,
    tau_init: Option<f64>,
    cfg: &LoopConfig,
) -> Result<TimingOutput> {
    let k = params.k_os;
    let beat = cfg.beat_symbols;
    if beat == 0 {
        return Err(DspError::Config("beat_symbols must be positive".into()));
    }
    let n_sym = (burst.len() as f64 / k).floor() as usize;
    let interp = Interpolator::default();
    let tau0 = tau_init.unwrap_or(0.0);
    let mut tau = tau0;
    let mut integ = 0.0;
    let mut pending: VecDeque<f64> = VecDeque::new();
    let mut x = Vec::with_capacity(n_sym);
    let mut y = Vec::with_capacity(n_sym);
    let mut traj = Vec::new();
    let mut ted = Vec::new();

    for b0 in (0..n_sym).step_by(beat) {
        traj.push(tau);
        for m in b0..(b0 + beat).min(n_sym) {
            let t = k * (m as f64 + tau);
            x.push(interp.at(&burst.x, t));
            y.push(interp.at(&burst.y, t));
        }
        let start = k * (b0 as f64 + tau);
        if start + k / 2.0 * TED_LEN as f64 > burst.len() as f64 {
            ted.push(0.0);
            continue;
        }
        let grid = |v: &[C64]| -> Vec<C64> {
            (0..TED_LEN).map(|j| interp.at(v, start + j as f64 * k / 2.0)).collect()
        };
        let gx = grid(&burst.x);
        let gy = grid(&burst.y);
        let e = -(band_edge_corr(&gx, params.rolloff) + band_edge_corr(&gy, params.rolloff)).arg() / (2.0 * PI);
        ted.push(e);
        if cfg.tr_enabled {
            integ += e;
            pending.push_back(cfg.tr_kp * e + cfg.tr_ki * integ);
            if pending.len() > cfg.tr_delay_beats {
                tau += pending.pop_front().unwrap_or(0.0);
            }
            if !tau.is_finite() || (tau - tau0).abs() > MAX_DRIFT {
                return Err(DspError::ConvergenceFailure(format!(
                    "timing loop drifted to {tau:.3} symbols from {tau0:.3}"
                )));
            }
        }
    }
    Ok(TimingOutput {
        symbols: DualPolBurst::new(x, y, params.rs)?,
        tau_trajectory: traj,
        ted,
    })
}

/// Beats until `|tau_hat - tau_true|` (modulo one symbol) first drops below
/// `tol` and stays there.
pub fn beats_to_converge(traj: &[f64], tau_true: f64, tol: f64) -> Option<usize> {
    let err = |t: f64| super::spo::wrap_half(t - tau_true).abs();
    let last_bad = traj.iter().rposition(|&t| err(t) >= tol);
    match last_bad {
        None => Some(0),
        Some(i) if i + 1 < traj.len() => Some(i + 1),
        Some(_) => None,
    }
}
