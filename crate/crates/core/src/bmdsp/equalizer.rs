//! Frequency-domain 2x2 MIMO equalizer with a delayed block DD-LMS update.

use std::collections::VecDeque;

use super::chanest::ChanEstimate;
use super::LoopConfig;
use crate::error::{DspError, Result};
use crate::preambles::{FrameLayout, PreambleA, PreambleB};
use crate::sigcore::{Dft, DualPolBurst, QamGrid, C64};

/// Half-width, in symbols, of the window used to reference the decision phase.
const PHASE_WINDOW: usize = 48;
/// Divergence: this many consecutive beats above `DIVERGE_FACTOR` times the initial MSE.
const DIVERGE_BEATS: usize = 10;
const DIVERGE_FACTOR: f64 = 10.0;

/// Symbols the receiver knows in advance: both preambles and the pilots.
#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub layout: FrameLayout,
    pub known: Vec<bool>,
    /// Reference values at known positions, zero elsewhere.
    pub symbols: [Vec<C64>; 2],
}

impl Training {
    pub fn new(layout: FrameLayout, pre_a: &PreambleA, pre_b: &PreambleB, pilots: &[Vec<C64>; 2]) -> Result<Self> {
        layout.validate()?;
        if pre_b.len() != layout.n_pre_b || pilots.iter().any(|p| p.len() != layout.n_pilot) {
            return Err(DspError::InputShape("training symbols do not match the frame layout".into()));
        }
        let mut known = vec![false; layout.total];
        let mut symbols = [vec![C64::new(0.0, 0.0); layout.total], vec![C64::new(0.0, 0.0); layout.total]];
        let a = [&pre_a.x_symbols, &pre_a.y_symbols];
        for p in 0..2 {
            symbols[p][..layout.n_pre_a].copy_from_slice(a[p]);
            symbols[p][layout.n_pre_a..layout.preamble_len()].copy_from_slice(pre_b.assembled(p));
            for (j, &pos) in layout.pilot_positions().iter().enumerate() {
                symbols[p][pos] = pilots[p][j];
            }
        }
        known[..layout.preamble_len()].fill(true);
        for pos in layout.pilot_positions() {
            known[pos] = true;
        }
        Ok(Self { layout, known, symbols })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqOutput {
    /// Equalized frame, one symbol per frame position.
    pub symbols: DualPolBurst,
    /// Mean squared decision error per beat.
    pub mse_trajectory: Vec<f64>,
    /// Final impulse responses `g[out][in]`, lag `l` at index `l mod taps`.
    pub final_taps: [[Vec<C64>; 2]; 2],
}

struct TapState {
    /// `g[out][in][j]` for lag `j - half`.
    g: [[Vec<C64>; 2]; 2],
    half: usize,
}

impl TapState {
    fn from_estimate(init: &ChanEstimate) -> Self {
        let n = init.bins();
        let half = n / 2;
        let ir = init.impulse_responses();
        let g = ir.map(|row| row.map(|h| (0..n).map(|j| h[(j + n - half) % n]).collect()));
        Self { g, half }
    }

    fn len(&self) -> usize {
        self.g[0][0].len()
    }

    /// Overlap-save filter spectra for an `nfft`-point transform.
    fn spectra(&self, dft: &Dft) -> [[Vec<C64>; 2]; 2] {
        let nfft = dft.len();
        self.g.clone().map(|row| {
            row.map(|taps| {
                let mut h = vec![C64::new(0.0, 0.0); nfft];
                for (j, v) in taps.iter().enumerate() {
                    let lag = j as isize - self.half as isize;
                    h[lag.rem_euclid(nfft as isize) as usize] = *v;
                }
                dft.forward_in_place(&mut h).expect("sized by construction");
                h
            })
        })
    }

    fn to_circular(&self) -> [[Vec<C64>; 2]; 2] {
        let n = self.len();
        self.g.clone().map(|row| {
            row.map(|taps| {
                let mut h = vec![C64::new(0.0, 0.0); n];
                for (j, v) in taps.iter().enumerate() {
                    h[(j + n - self.half) % n] = *v;
                }
                h
            })
        })
    }
}

/// Complex prefix sums of `y * conj(d)` over known symbols, per polarization.
struct PhaseReference {
    prefix: [Vec<C64>; 2],
}

impl PhaseReference {
    fn new(n: usize) -> Self {
        Self {
            prefix: [vec![C64::new(0.0, 0.0); n + 1], vec![C64::new(0.0, 0.0); n + 1]],
        }
    }

    fn fill(&mut self, p: usize, m: usize, c: C64) {
        self.prefix[p][m + 1] = self.prefix[p][m] + c;
    }

    /// Unit rotation from known symbols within the window, limited to `[0, done)`.
    fn rotation(&self, p: usize, m: usize, done: usize) -> C64 {
        let lo = m.saturating_sub(PHASE_WINDOW);
        let hi = (m + PHASE_WINDOW + 1).min(done);
        let s = self.prefix[p][hi] - self.prefix[p][lo];
        let n = s.norm();
        if n > 0.0 {
            s / n
        } else {
            C64::new(1.0, 0.0)
        }
    }
}

/// Equalize `training.layout.total` symbols of `sym` starting at `frame_start`.
pub fn mimo_equalize(
    sym: &DualPolBurst,
    frame_start: usize,
    init: &ChanEstimate,
    cfg: &LoopConfig,
    grid: &QamGrid,
    training: &Training,
) -> Result<EqOutput> {
    let n = training.layout.total;
    let beat = cfg.beat_symbols;
    if beat == 0 {
        return Err(DspError::Config("beat_symbols must be positive".into()));
    }
    if init.bins() < 2 || !init.bins().is_multiple_of(2) {
        return Err(DspError::InputShape(format!("{} taps per branch", init.bins())));
    }
    let mut taps = TapState::from_estimate(init);
    let l = taps.len();
    let dft = Dft::new((beat + l).next_power_of_two())?;
    let nfft = dft.len();
    let mut h = taps.spectra(&dft);

    let input = |p: usize, m: isize| -> C64 {
        let i = frame_start as isize + m;
        if i >= 0 && (i as usize) < sym.len() {
            sym.pol(p)[i as usize]
        } else {
            C64::new(0.0, 0.0)
        }
    };

    let mut out = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
    let mut phase = PhaseReference::new(n);
    let mut mse_trajectory = Vec::with_capacity(n.div_ceil(beat));
    let mut pending: VecDeque<[[Vec<C64>; 2]; 2]> = VecDeque::new();
    let mut initial_mse: Option<f64> = None;
    let mut above = 0usize;

    for b0 in (0..n).step_by(beat) {
        let b1 = (b0 + beat).min(n);
        let base = b0 as isize - taps.half as isize;
        let seg = [0, 1].map(|p| {
            let mut s: Vec<C64> = (0..nfft as isize).map(|j| input(p, base + j)).collect();
            dft.forward_in_place(&mut s).expect("sized by construction");
            s
        });
        for o in 0..2 {
            let mut y: Vec<C64> = (0..nfft).map(|k| h[o][0][k] * seg[0][k] + h[o][1][k] * seg[1][k]).collect();
            dft.inverse_in_place(&mut y).expect("sized by construction");
            out[o][b0..b1].copy_from_slice(&y[taps.half..taps.half + (b1 - b0)]);
        }
        for p in 0..2 {
            for m in b0..b1 {
                let c = if training.known[m] {
                    out[p][m] * training.symbols[p][m].conj()
                } else {
                    C64::new(0.0, 0.0)
                };
                phase.fill(p, m, c);
            }
        }

        let mut err = [vec![C64::new(0.0, 0.0); b1 - b0], vec![C64::new(0.0, 0.0); b1 - b0]];
        let mut sq = 0.0;
        for p in 0..2 {
            for m in b0..b1 {
                let rot = phase.rotation(p, m, b1);
                let y = out[p][m];
                let d = if training.known[m] {
                    training.symbols[p][m]
                } else {
                    grid.slice(y * rot.conj())
                };
                let e = d * rot - y;
                sq += e.norm_sqr();
                err[p][m - b0] = e;
            }
        }
        let mse = sq / (2 * (b1 - b0)) as f64;
        mse_trajectory.push(mse);
        let reference = *initial_mse.get_or_insert(mse);
        if !mse.is_finite() {
            return Err(DspError::ConvergenceFailure(format!("non-finite MSE at beat {}", b0 / beat)));
        }
        if mse > DIVERGE_FACTOR * reference.max(1e-3) {
            above += 1;
            if above >= DIVERGE_BEATS {
                return Err(DspError::ConvergenceFailure(format!(
                    "equalizer MSE {mse:.3e} above {DIVERGE_FACTOR}x the initial {reference:.3e} for {DIVERGE_BEATS} beats"
                )));
            }
        } else {
            above = 0;
        }

        if !cfg.eq_enabled {
            continue;
        }
        let grad = [0, 1].map(|o| {
            [0, 1].map(|i| {
                (0..l)
                    .map(|j| {
                        let lag = j as isize - taps.half as isize;
                        (b0..b1)
                            .map(|m| err[o][m - b0] * input(i, m as isize - lag).conj())
                            .sum::<C64>()
                    })
                    .collect::<Vec<C64>>()
            })
        });
        pending.push_back(grad);
        if pending.len() > cfg.eq_delay_beats {
            let g = pending.pop_front().expect("non-empty queue");
            for o in 0..2 {
                for i in 0..2 {
                    for j in 0..l {
                        taps.g[o][i][j] += g[o][i][j] * cfg.ddlms_mu;
                    }
                }
            }
            h = taps.spectra(&dft);
        }
    }
    let [x, y] = out;
    Ok(EqOutput {
        symbols: DualPolBurst::new(x, y, sym.fs)?,
        mse_trajectory,
        final_taps: taps.to_circular(),
    })
}
