//! Initial 2x2 equalizer taps from the three Preamble B blocks.
//!
//! Blocks are indexed `[pol][block]` and hold time-domain symbols; the
//! transmitted blocks carry their sign pattern. Taps map received spectra to
//! transmitted ones per bin: `T_X = w_xx R_X + w_xy R_Y`.

use serde::{Deserialize, Serialize};

use super::EstMethod;
use crate::error::{DspError, Result};
use crate::preambles::PreambleB;
use crate::sigcore::{fft, ifft, DualPolBurst, C64};

/// Three blocks per polarization.
pub type Blocks = [[Vec<C64>; 3]; 2];

/// Singular-bin tolerance relative to the mean bin power.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Allowed relative disagreement between the two determinant forms.
const DET_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChanEstimate {
    pub method: EstMethod,
    /// `taps[out][in]`, one value per bin.
    pub taps: [[Vec<C64>; 2]; 2],
}

impl ChanEstimate {
    pub fn bins(&self) -> usize {
        self.taps[0][0].len()
    }

    /// Frequency-flat taps.
    pub fn flat(m: [[C64; 2]; 2], bins: usize) -> Self {
        Self {
            method: EstMethod::Mmse,
            taps: m.map(|row| row.map(|v| vec![v; bins])),
        }
    }

    /// Impulse responses `g[out][in]`, lag `l` stored at index `l mod bins`.
    pub fn impulse_responses(&self) -> [[Vec<C64>; 2]; 2] {
        self.taps.clone().map(|row| row.map(|w| ifft(&w)))
    }

    /// Apply the taps to one block pair in the frequency domain.
    pub fn apply_block(&self, rx: [&[C64]; 2]) -> [Vec<C64>; 2] {
        let (sx, sy) = (fft(rx[0]), fft(rx[1]));
        [0, 1].map(|o| {
            let s: Vec<C64> = (0..sx.len())
                .map(|k| self.taps[o][0][k] * sx[k] + self.taps[o][1][k] * sy[k])
                .collect();
            ifft(&s)
        })
    }
}

/// The three received and transmitted Preamble B blocks, with Preamble B
/// starting at symbol `position` of `sym`.
pub fn preamble_b_blocks(sym: &DualPolBurst, position: usize, pre_b: &PreambleB) -> Result<(Blocks, Blocks)> {
    let l = pre_b.block_len();
    if position + 3 * l > sym.len() {
        return Err(DspError::InputShape(format!(
            "Preamble B at {position} runs past the {}-symbol stream",
            sym.len()
        )));
    }
    let rx = [0, 1].map(|p| [0, 1, 2].map(|i| sym.pol(p)[position + i * l..position + (i + 1) * l].to_vec()));
    let tx = [0, 1].map(|p| [0, 1, 2].map(|i| pre_b.assembled(p)[i * l..(i + 1) * l].to_vec()));
    Ok((rx, tx))
}

struct Spectra {
    r: [[Vec<C64>; 3]; 2],
    t: [[Vec<C64>; 3]; 2],
    n: usize,
    /// Mean per-bin power of one received block.
    scale: f64,
}

fn spectra(rx: &Blocks, tx: &Blocks) -> Result<Spectra> {
    let n = rx[0][0].len();
    if n == 0 || rx.iter().chain(tx).flatten().any(|b| b.len() != n) {
        return Err(DspError::InputShape("estimation blocks must share one non-zero length".into()));
    }
    let r = rx.clone().map(|p| p.map(|b| fft(&b)));
    let t = tx.clone().map(|p| p.map(|b| fft(&b)));
    let scale = r.iter().flatten().flatten().map(|v| v.norm_sqr()).sum::<f64>() / (6 * n) as f64;
    Ok(Spectra { r, t, n, scale })
}

/// Per-bin block averages of the second-order products in the normal equations.
struct Moments {
    rxx: f64,
    ryy: f64,
    /// `E[R_X R_Y*]`.
    rxy: C64,
    /// `E[T_p R_X*]`, `E[T_p R_Y*]` for p = X, Y.
    trx: [C64; 2],
    try_: [C64; 2],
}

fn moments(s: &Spectra, k: usize) -> Moments {
    let mut m = Moments {
        rxx: 0.0,
        ryy: 0.0,
        rxy: C64::new(0.0, 0.0),
        trx: [C64::new(0.0, 0.0); 2],
        try_: [C64::new(0.0, 0.0); 2],
    };
    for i in 0..3 {
        let (rx, ry) = (s.r[0][i][k], s.r[1][i][k]);
        m.rxx += rx.norm_sqr() / 3.0;
        m.ryy += ry.norm_sqr() / 3.0;
        m.rxy += rx * ry.conj() / 3.0;
        for p in 0..2 {
            m.trx[p] += s.t[p][i][k] * rx.conj() / 3.0;
            m.try_[p] += s.t[p][i][k] * ry.conj() / 3.0;
        }
    }
    m
}

/// Closed-form MMSE solution of the 2x2 normal equations per bin.
pub fn mmse_estimate(rx: &Blocks, tx: &Blocks) -> Result<ChanEstimate> {
    let s = spectra(rx, tx)?;
    let mut taps: [[Vec<C64>; 2]; 2] = Default::default();
    for k in 0..s.n {
        let m = moments(&s, k);
        let det = m.rxx * m.ryy - m.rxy.norm_sqr();
        if !(det > SINGULAR_TOL * s.scale * s.scale) {
            return Err(DspError::SingularEstimate { bin: k });
        }
        for p in 0..2 {
            taps[p][0].push((m.trx[p] * m.ryy - m.rxy.conj() * m.try_[p]) / det);
            taps[p][1].push((m.try_[p] * m.rxx - m.rxy * m.trx[p]) / det);
        }
    }
    Ok(ChanEstimate {
        method: EstMethod::Mmse,
        taps,
    })
}

/// Diagonal zero-forcing taps: the block average of `T / R` per polarization.
pub fn zf_estimate(rx: &Blocks, tx: &Blocks) -> Result<ChanEstimate> {
    let s = spectra(rx, tx)?;
    let zero = vec![C64::new(0.0, 0.0); s.n];
    let mut diag: [Vec<C64>; 2] = Default::default();
    for (p, d) in diag.iter_mut().enumerate() {
        for k in 0..s.n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..3 {
                let r = s.r[p][i][k];
                if r.norm_sqr() < SINGULAR_TOL * s.scale {
                    return Err(DspError::DivisionGuard { bin: k });
                }
                acc += s.t[p][i][k] / r;
            }
            d.push(acc / 3.0);
        }
    }
    let [dx, dy] = diag;
    Ok(ChanEstimate {
        method: EstMethod::Zf,
        taps: [[dx, zero.clone()], [zero, dy]],
    })
}

/// Dispatch on `method`.
pub fn estimate_channel(method: EstMethod, rx: &Blocks, tx: &Blocks) -> Result<ChanEstimate> {
    match method {
        EstMethod::Mmse => mmse_estimate(rx, tx),
        EstMethod::Zf => zf_estimate(rx, tx),
    }
}

/// Empirical cost `sum_k E|T - W R|^2`, both output polarizations, on the
/// estimation blocks.
pub fn residual_cost(rx: &Blocks, tx: &Blocks, est: &ChanEstimate) -> Result<f64> {
    let s = spectra(rx, tx)?;
    if est.bins() != s.n {
        return Err(DspError::InputShape(format!(
            "{} taps per branch for {}-point blocks",
            est.bins(),
            s.n
        )));
    }
    let mut j = 0.0;
    for k in 0..s.n {
        for i in 0..3 {
            for p in 0..2 {
                let y = est.taps[p][0][k] * s.r[0][i][k] + est.taps[p][1][k] * s.r[1][i][k];
                j += (s.t[p][i][k] - y).norm_sqr() / 3.0;
            }
        }
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionClass {
    Unique,
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// `sum|R_X|^2 sum|R_Y|^2 - |sum R_X R_Y*|^2` per bin.
    pub determinant: Vec<f64>,
    /// `sum_{i<j} |R_Xi R_Yj - R_Xj R_Yi|^2` per bin.
    pub cross_terms: Vec<f64>,
    pub class: Vec<SolutionClass>,
    /// Largest normalized consistency numerator over both outputs; zero when
    /// the equations admit a solution despite a vanishing determinant.
    pub consistency: Vec<f64>,
    /// Mean per-bin power used for the relative tolerances.
    pub scale: f64,
}

impl UniquenessReport {
    pub fn all_unique(&self) -> bool {
        self.class.iter().all(|c| *c == SolutionClass::Unique)
    }

    pub fn relative_determinant(&self, k: usize) -> f64 {
        self.determinant[k] / (9.0 * self.scale * self.scale)
    }
}

/// Evaluate the determinant of the normal equations in two independent forms
/// and classify each bin.
pub fn mmse_uniqueness_check(rx: &Blocks, tx: &Blocks) -> Result<UniquenessReport> {
    let s = spectra(rx, tx)?;
    let t_scale = s.t.iter().flatten().flatten().map(|v| v.norm_sqr()).sum::<f64>() / (6 * s.n) as f64;
    let mut rep = UniquenessReport {
        determinant: Vec::with_capacity(s.n),
        cross_terms: Vec::with_capacity(s.n),
        class: Vec::with_capacity(s.n),
        consistency: Vec::with_capacity(s.n),
        scale: s.scale,
    };
    for k in 0..s.n {
        let rx = |i: usize| s.r[0][i][k];
        let ry = |i: usize| s.r[1][i][k];
        let sxx: f64 = (0..3).map(|i| rx(i).norm_sqr()).sum();
        let syy: f64 = (0..3).map(|i| ry(i).norm_sqr()).sum();
        let sxy: C64 = (0..3).map(|i| rx(i) * ry(i).conj()).sum();
        let det = sxx * syy - sxy.norm_sqr();
        let cross: f64 = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| (rx(i) * ry(j) - rx(j) * ry(i)).norm_sqr())
            .sum();
        let mag = (sxx * syy).max(f64::MIN_POSITIVE);
        if (det - cross).abs() > DET_AGREEMENT * mag {
            return Err(DspError::InternalConsistency(format!(
                "bin {k}: determinant {det:e} vs cross-term sum {cross:e}"
            )));
        }
        let unique = cross > SINGULAR_TOL * 9.0 * s.scale * s.scale;
        let norm = 9.0 * s.scale * (3.0 * s.scale * 3.0 * t_scale).sqrt();
        let consistency = (0..2)
            .map(|p| {
                let ty = |i: usize| s.t[p][i][k];
                let t_ry: C64 = (0..3).map(|i| ty(i) * ry(i).conj()).sum();
                let t_rx: C64 = (0..3).map(|i| ty(i) * rx(i).conj()).sum();
                (sxx * t_ry - sxy * t_rx).norm() / norm.max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        rep.determinant.push(det);
        rep.cross_terms.push(cross);
        rep.class.push(if unique { SolutionClass::Unique } else { SolutionClass::Infinite });
        rep.consistency.push(consistency);
    }
    Ok(rep)
}
