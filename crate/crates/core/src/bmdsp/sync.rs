//! Frame synchronization on the signed CAZAC triplet.

use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::metrics::pmnr_excluding;
use crate::preambles::PreambleB;
use crate::sigcore::{DualPolBurst, C64};

/// Samples excluded on each side of the peak (and of its echoes) for PMNR.
pub const PMNR_EXCLUSION: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    /// Symbol index of the first Preamble B symbol (combined metric).
    pub position: usize,
    pub position_x: usize,
    pub position_y: usize,
    pub peak: f64,
    pub pmnr_db: f64,
    /// Symbol index of `metric_x[0]`.
    pub search_start: usize,
    #[serde(skip)]
    pub metric_x: Vec<f64>,
    #[serde(skip)]
    pub metric_y: Vec<f64>,
}

impl SyncResult {
    pub fn combined_metric(&self) -> Vec<f64> {
        self.metric_x.iter().zip(&self.metric_y).map(|(a, b)| a + b).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    /// `[start, end)` candidate positions; the whole stream if `None`.
    pub search: Option<(usize, usize)>,
    pub pmnr_floor_db: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            search: None,
            pmnr_floor_db: 3.0,
        }
    }
}

/// `M(n) = sum_i r(n + i) conj(b(i))`.
pub fn block_correlation(r: &[C64], block: &[C64], n: usize) -> C64 {
    r[n..n + block.len()]
        .iter()
        .zip(block)
        .map(|(a, b)| a * b.conj())
        .sum()
}

/// `P(n) = |sum_j sign_j M(n + j L)|^2` for `n` in `[lo, hi)`.
pub fn timing_metric(r: &[C64], block: &[C64], signs: [f64; 3], lo: usize, hi: usize) -> Vec<f64> {
    let l = block.len();
    let m: Vec<C64> = (lo..hi + 2 * l).map(|n| block_correlation(r, block, n)).collect();
    (0..hi - lo)
        .map(|i| {
            (0..3)
                .map(|j| m[i + j * l] * signs[j])
                .sum::<C64>()
                .norm_sqr()
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0)
}

/// Locate Preamble B in a symbol-rate stream whose polarizations are already separated.
pub fn frame_sync(sym: &DualPolBurst, pre_b: &PreambleB, cfg: &SyncConfig) -> Result<SyncResult> {
    let need = pre_b.len();
    if sym.len() < need {
        return Err(DspError::InputShape(format!(
            "{} symbols cannot hold a {need}-symbol Preamble B",
            sym.len()
        )));
    }
    let last = sym.len() - need + 1;
    let (lo, hi) = cfg.search.unwrap_or((0, last));
    let (lo, hi) = (lo.min(last), hi.min(last));
    if hi <= lo + 2 * PMNR_EXCLUSION + 1 {
        return Err(DspError::InputShape(format!("empty sync search range [{lo}, {hi})")));
    }
    let metric_x = timing_metric(&sym.x, &pre_b.bx, pre_b.sign_x, lo, hi);
    let metric_y = timing_metric(&sym.y, &pre_b.by, pre_b.sign_y, lo, hi);
    let combined: Vec<f64> = metric_x.iter().zip(&metric_y).map(|(a, b)| a + b).collect();
    let k = argmax(&combined);
    let l = pre_b.block_len();
    let echoes: Vec<usize> = [k.checked_sub(2 * l), Some(k + 2 * l)].into_iter().flatten().collect();
    let pmnr_db = pmnr_excluding(&combined, k, PMNR_EXCLUSION, &echoes)?;
    if pmnr_db < cfg.pmnr_floor_db {
        return Err(DspError::SyncFailure {
            pmnr_db,
            floor_db: cfg.pmnr_floor_db,
        });
    }
    Ok(SyncResult {
        position: lo + k,
        position_x: lo + argmax(&metric_x),
        position_y: lo + argmax(&metric_y),
        peak: combined[k],
        pmnr_db,
        search_start: lo,
        metric_x,
        metric_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmdsp::testutil::noise;
    use crate::preambles::{build_preamble_b, build_preamble_b_len};

    fn embed(pre_b: &PreambleB, at: usize, total: usize, seed: u64) -> DualPolBurst {
        let mut s = noise(total, seed);
        s.x[at..at + pre_b.len()].copy_from_slice(&pre_b.assembled_x);
        s.y[at..at + pre_b.len()].copy_from_slice(&pre_b.assembled_y);
        s.fs = 32e9;
        s
    }

    #[test]
    fn exact_position_and_single_peak() {
        let b = build_preamble_b(1, 3).unwrap();
        let s = embed(&b, 700, 2000, 1);
        let r = frame_sync(&s, &b, &SyncConfig::default()).unwrap();
        assert_eq!((r.position, r.position_x, r.position_y), (700, 700, 700));
        let m = r.combined_metric();
        assert_eq!(m.iter().filter(|&&v| v >= 0.5 * r.peak).count(), 1);
        assert!(r.peak > 0.0 && r.pmnr_db > 6.0);
    }

    #[test]
    fn echo_structure() {
        let b = build_preamble_b(1, 3).unwrap();
        let mut s = DualPolBurst::zeros(1000, 32e9);
        s.x[300..492].copy_from_slice(&b.assembled_x);
        s.y[300..492].copy_from_slice(&b.assembled_y);
        let r = frame_sync(&s, &b, &SyncConfig::default()).unwrap();
        let m = r.combined_metric();
        // Full peak (3L)^2 per polarization; the +/-2L echoes carry L^2.
        assert!((m[300] - 2.0 * 192f64.powi(2)).abs() < 1e-6);
        assert!((m[428] - 2.0 * 64f64.powi(2)).abs() < 1e-6);
        assert!(m[364].abs() < 1e-6 && m[236].abs() < 1e-6);
    }

    #[test]
    fn longer_blocks_raise_the_pmnr() {
        let mut means = Vec::new();
        for l in [16, 32, 64, 128] {
            let b = build_preamble_b_len(l, 1, 3).unwrap();
            let v: Vec<f64> = (0..30)
                .map(|seed| {
                    let s = embed(&b, 600, 1600, seed);
                    let r = frame_sync(&s, &b, &SyncConfig { search: Some((344, 856)), ..Default::default() }).unwrap();
                    assert_eq!(r.position, 600);
                    r.pmnr_db
                })
                .collect();
            means.push(v.iter().sum::<f64>() / v.len() as f64);
        }
        assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
    }

    #[test]
    fn failure_below_floor() {
        let b = build_preamble_b(1, 3).unwrap();
        let s = noise(2000, 5);
        let cfg = SyncConfig { pmnr_floor_db: 6.0, ..Default::default() };
        assert!(matches!(frame_sync(&s, &b, &cfg), Err(DspError::SyncFailure { .. })));
    }
}
