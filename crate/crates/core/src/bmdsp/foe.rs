//! Fine frequency offset from the lag product of the periodic Preamble A.

use std::f64::consts::PI;

use crate::channel::derotate;
use crate::error::{DspError, Result};
use crate::preambles::{PERIOD_X, PERIOD_Y};
use crate::sigcore::{DspParams, DualPolBurst, C64};

/// Default cascade: a short lag for range, then a long one for precision.
pub const DEFAULT_LAGS: [usize; 2] = [2, 48];

/// `R_s / (2 pi L) * arg(sum r*(n) r(n + L))` with the lag in symbols.
///
/// The X sequence repeats every 2 symbols and Y every 4, so Y joins the sum
/// only when `lag_symbols` is a multiple of 4. Unambiguous for
/// `|delta_f| < R_s / (2 L)`.
pub fn fine_foe(pre_a: &DualPolBurst, params: &DspParams, lag_symbols: usize) -> Result<f64> {
    if lag_symbols == 0 || !lag_symbols.is_multiple_of(PERIOD_X) {
        return Err(DspError::Config(format!(
            "lag must be a positive multiple of {PERIOD_X} symbols, got {lag_symbols}"
        )));
    }
    let lag = lag_symbols * params.sps()?;
    if pre_a.len() <= lag {
        return Err(DspError::InputShape(format!(
            "{} samples cannot hold a {lag}-sample lag",
            pre_a.len()
        )));
    }
    let corr = |v: &[C64]| -> C64 { v.iter().zip(&v[lag..]).map(|(a, b)| a.conj() * b).sum() };
    let mut acc = corr(&pre_a.x);
    if lag_symbols.is_multiple_of(PERIOD_Y) {
        acc += corr(&pre_a.y);
    }
    Ok(params.rs / (2.0 * PI * lag_symbols as f64) * acc.arg())
}

/// Apply [`fine_foe`] for each lag in turn, removing the running estimate
/// before the next (longer) lag.
pub fn fine_foe_cascade(pre_a: &DualPolBurst, params: &DspParams, lags: &[usize]) -> Result<f64> {
    let mut est = 0.0;
    for &l in lags {
        let d = if est == 0.0 { pre_a.clone() } else { derotate(pre_a, est) };
        est += fine_foe(&d, params, l)?;
    }
    Ok(est)
}
