//! Feed-forward sampling phase estimate from the spectral product of a
//! symmetric tone pair.

use std::f64::consts::PI;

use crate::error::{DspError, Result};
use crate::preambles::gen_preamble_a;
use crate::sigcore::{fft, fftshift, DspParams, DualPolBurst, RrcFilter, C64, DEFAULT_SPAN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pol {
    X,
    Y,
}

/// Wrap into (-0.5, 0.5].
pub fn wrap_half(x: f64) -> f64 {
    let r = x - x.round();
    if r <= -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// `S(-f0) * conj(S(+f0))` for the pair of `pol` (f0 = R_s/2 for X, R_s/4 for
/// Y), with DC-centered bin indexing `N/2 -/+ offset`.
pub fn spectral_product(block: &[C64], params: &DspParams, pol: Pol) -> Result<C64> {
    let n = block.len();
    let k = params.sps()?;
    let div = match pol {
        Pol::X => 2 * k,
        Pol::Y => 4 * k,
    };
    if n == 0 || !n.is_multiple_of(div) {
        return Err(DspError::InputShape(format!(
            "SPO block length {n} must be a multiple of {div}"
        )));
    }
    let s = fftshift(&fft(block));
    let c = n / 2;
    let off = n / div;
    Ok(s[c - off] * s[c + off].conj())
}

/// Product phase for a delay-free, symbol-aligned Preamble A block of `n` samples.
fn calibration_phase(params: &DspParams, n: usize, pol: Pol) -> Result<f64> {
    let rrc = RrcFilter::design(params, DEFAULT_SPAN)?;
    let a = gen_preamble_a();
    let k = params.sps()?;
    let seq = match pol {
        Pol::X => &a.x_symbols,
        Pol::Y => &a.y_symbols,
    };
    // Repeat the sequence so the block sits in a steady-state region.
    let long: Vec<C64> = seq.iter().cycle().take(seq.len() + 2 * DEFAULT_SPAN + n / k).copied().collect();
    let wave = rrc.shape(&long);
    // Symbol DEFAULT_SPAN (a multiple of 4) starts the block.
    let start = rrc.delay() + DEFAULT_SPAN * k;
    Ok(spectral_product(&wave[start..start + n], params, pol)?.arg())
}

/// Sampling phase in symbols, relative to the block's first sample: symbol
/// centers sit at `k_os * (m + tau)`.
pub fn estimate_spo(pre_a: &DualPolBurst, params: &DspParams, pol: Pol) -> Result<f64> {
    let samples = match pol {
        Pol::X => &pre_a.x,
        Pol::Y => &pre_a.y,
    };
    let prod = spectral_product(samples, params, pol)?;
    let energy: f64 = samples.iter().map(|v| v.norm_sqr()).sum();
    let n = samples.len() as f64;
    // A unit-power tone pair gives |prod| of order (n/2)^2.
    if !(prod.norm() > 1e-3 * energy * n / 4.0) {
        return Err(DspError::EstimationUnreliable(format!(
            "tone pair for {pol:?} below threshold"
        )));
    }
    let offset = calibration_phase(params, samples.len(), pol)?;
    let d = prod.arg() - offset;
    Ok(match pol {
        Pol::X => wrap_half(d / (2.0 * PI)),
        Pol::Y => wrap_half(d / PI),
    })
}
