//! Pilot-aided carrier phase recovery.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::preambles::FrameLayout;
use crate::sigcore::{DualPolBurst, C64};

/// A pilot-to-pilot phase step larger than a quarter turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleSlip {
    pub pol: usize,
    /// Index of the later pilot of the pair.
    pub pilot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CprOutput {
    /// Frame with the estimated phase removed from every symbol.
    pub symbols: DualPolBurst,
    /// Unwrapped phase per frame position and polarization, radians.
    pub phase: [Vec<f64>; 2],
    pub cycle_slips: Vec<CycleSlip>,
}

fn wrap_pi(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Phase at each pilot from `rx * conj(tx)`, averaged over `half_window`
/// neighbouring pilots on each side, then unwrapped.
fn pilot_phases(rx: &[C64], tx: &[C64], pos: &[usize], half_window: usize) -> Vec<f64> {
    let c: Vec<C64> = pos.iter().zip(tx).map(|(&p, t)| rx[p] * t.conj()).collect();
    let mut out: Vec<f64> = Vec::with_capacity(c.len());
    for j in 0..c.len() {
        let lo = j.saturating_sub(half_window);
        let hi = (j + half_window + 1).min(c.len());
        let raw = c[lo..hi].iter().sum::<C64>().arg();
        let v = match out.last() {
            Some(&prev) => prev + wrap_pi(raw - prev),
            None => raw,
        };
        out.push(v);
    }
    out
}

/// Remove the carrier phase from a frame-aligned stream using the pilots at
/// `layout.pilot_positions()`. `half_window = 0` puts zero residual phase on
/// every pilot.
pub fn pilot_cpr(
    symbols: &DualPolBurst,
    layout: &FrameLayout,
    pilots: &[Vec<C64>; 2],
    half_window: usize,
) -> Result<CprOutput> {
    let pos = layout.pilot_positions();
    if pos.is_empty() || symbols.len() < layout.total || pilots.iter().any(|p| p.len() != pos.len()) {
        return Err(DspError::InputShape(format!(
            "{} symbols and {}/{} pilots for a {}-symbol frame with {} pilots",
            symbols.len(),
            pilots[0].len(),
            pilots[1].len(),
            layout.total,
            pos.len()
        )));
    }
    let n = layout.total;
    let mut phase: [Vec<f64>; 2] = Default::default();
    let mut cycle_slips = Vec::new();
    for p in 0..2 {
        let ph = pilot_phases(symbols.pol(p), &pilots[p], &pos, half_window);
        for j in 1..ph.len() {
            if (ph[j] - ph[j - 1]).abs() > PI / 2.0 {
                cycle_slips.push(CycleSlip { pol: p, pilot: j });
            }
        }
        let mut traj = vec![0.0; n];
        for (m, v) in traj.iter_mut().enumerate() {
            // Hold the end values outside the pilot span.
            let k = pos.partition_point(|&q| q <= m);
            *v = if k == 0 {
                ph[0]
            } else if k == pos.len() {
                ph[pos.len() - 1]
            } else {
                let (a, b) = (pos[k - 1], pos[k]);
                let w = (m - a) as f64 / (b - a) as f64;
                ph[k - 1] + w * (ph[k] - ph[k - 1])
            };
        }
        phase[p] = traj;
    }
    let rot = |p: usize| -> Vec<C64> {
        symbols.pol(p)[..n]
            .iter()
            .zip(&phase[p])
            .map(|(s, &f)| s * C64::from_polar(1.0, -f))
            .collect()
    };
    Ok(CprOutput {
        symbols: DualPolBurst::new(rot(0), rot(1), symbols.fs)?,
        phase,
        cycle_slips,
    })
}
