//! BER, MSE/EVM, PMNR, sweep aggregation, CSV output, and an independent
//! least-squares solver used to cross-check the channel estimator.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{DspError, Result};
use crate::sigcore::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub bits_compared: usize,
    pub bit_errors: usize,
    pub ber: f64,
    /// Length of the leading window, if one was requested.
    pub first_n: Option<usize>,
    pub ber_first: Option<f64>,
    pub error_positions: Vec<usize>,
}

pub fn ber(tx_bits: &[u8], rx_bits: &[u8], first_n: Option<usize>) -> Result<BerRecord> {
    if tx_bits.len() != rx_bits.len() {
        return Err(DspError::InputShape(format!(
            "BER inputs differ in length: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    if tx_bits.is_empty() {
        return Err(DspError::UndefinedMetric("BER over zero bits".into()));
    }
    let error_positions: Vec<usize> = tx_bits
        .iter()
        .zip(rx_bits)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i)
        .collect();
    let n = tx_bits.len();
    let ber_first = first_n.map(|w| {
        let w = w.min(n);
        error_positions.iter().take_while(|&&p| p < w).count() as f64 / w as f64
    });
    Ok(BerRecord {
        bits_compared: n,
        bit_errors: error_positions.len(),
        ber: error_positions.len() as f64 / n as f64,
        first_n: first_n.map(|w| w.min(n)),
        ber_first,
        error_positions,
    })
}

/// Bits of both polarizations in transmission order: for every payload
/// symbol, the 4 X bits then the 4 Y bits.
pub fn interleave_pol_bits(x: &[u8], y: &[u8]) -> Vec<u8> {
    x.chunks(4)
        .zip(y.chunks(4))
        .flat_map(|(a, b)| a.iter().chain(b).copied())
        .collect()
}

pub fn mse(rx: &[C64], reference: &[C64]) -> f64 {
    let n = rx.len().min(reference.len());
    if n == 0 {
        return f64::NAN;
    }
    rx.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / n as f64
}

/// RMS error vector magnitude relative to the reference RMS amplitude.
pub fn evm(rx: &[C64], reference: &[C64]) -> f64 {
    let p_ref = reference.iter().map(|v| v.norm_sqr()).sum::<f64>() / reference.len() as f64;
    (mse(rx, reference) / p_ref).sqrt()
}

/// Peak-to-maximum-noise ratio in dB. Samples within `half_width` of the
/// peak are excluded from the noise maximum.
pub fn pmnr(metric: &[f64], peak_index: usize, half_width: usize) -> Result<f64> {
    pmnr_excluding(metric, peak_index, half_width, &[])
}

/// [`pmnr`] that also excludes `half_width` around each index in `also_exclude`.
pub fn pmnr_excluding(
    metric: &[f64],
    peak_index: usize,
    half_width: usize,
    also_exclude: &[usize],
) -> Result<f64> {
    if metric.len() <= 2 * half_width + 1 || peak_index >= metric.len() {
        return Err(DspError::InputShape(format!(
            "metric of length {} is too short for a +/-{half_width} exclusion around {peak_index}",
            metric.len()
        )));
    }
    let near = |i: usize, c: usize| i.abs_diff(c) <= half_width;
    let floor = metric
        .iter()
        .enumerate()
        .filter(|&(i, _)| !near(i, peak_index) && !also_exclude.iter().any(|&c| near(i, c)))
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    let peak = metric[peak_index];
    if !(floor > 0.0) || !(peak > 0.0) {
        return Err(DspError::UndefinedMetric(format!(
            "PMNR undefined for peak {peak} over floor {floor}"
        )));
    }
    Ok(10.0 * (peak / floor).log10())
}

/// Bit error rate of Gray-mapped square 16QAM in AWGN at `es_n0_db`.
pub fn theoretical_ber_16qam(es_n0_db: f64) -> f64 {
    let g = 10f64.powf(es_n0_db / 10.0);
    // q(k) = Q(k * d/2 / sigma) for the 4-PAM rails.
    let q = |k: f64| 0.5 * erfc(k * (g / 10.0).sqrt());
    (3.0 * q(1.0) + 2.0 * q(3.0) - q(5.0)) / 4.0
}

/// Symbol Es/N0 for a per-sample SNR of white full-band noise at `k_os`
/// samples per symbol after a unit-gain matched filter.
pub fn es_n0_from_sample_snr(snr_db: f64, k_os: f64) -> f64 {
    snr_db + 10.0 * k_os.log10()
}

/// Per-sample SNR (dB) at which uncoded 16QAM BER equals `target` (bisection).
pub fn sample_snr_for_ber(target: f64, k_os: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 40.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if theoretical_ber_16qam(es_n0_from_sample_snr(mid, k_os)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Aggregated statistic at one value of the swept variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub variable: String,
    pub value: f64,
    pub metric: String,
    pub seeds: usize,
    pub mean: f64,
    /// 95% normal-approximation half-width.
    pub half_width: f64,
    pub min: f64,
    pub max: f64,
}

impl SweepPoint {
    pub fn aggregate(variable: &str, value: f64, metric: &str, samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(DspError::UndefinedMetric(format!("no seeds for {variable} = {value}")));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Self {
            variable: variable.to_string(),
            value,
            metric: metric.to_string(),
            seeds: samples.len(),
            mean,
            half_width: 1.96 * (var / n).sqrt(),
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

pub const SWEEP_CSV_HEADER: &str = "variable,value,metric,seeds,mean,half_width,min,max";

pub fn write_sweep_csv<W: Write>(mut out: W, points: &[SweepPoint]) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.variable, p.value, p.metric, p.seeds, p.mean, p.half_width, p.min, p.max
        )?;
    }
    Ok(())
}

/// Two-column series such as `beat_index,mse` or `sample_index,p_x`.
pub fn write_series_csv<W: Write>(mut out: W, header: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Per-bin taps from the reference least-squares solver.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTaps {
    pub w_xx: Vec<C64>,
    pub w_xy: Vec<C64>,
    pub w_yx: Vec<C64>,
    pub w_yy: Vec<C64>,
}

/// Direct O(N^2) DFT, deliberately separate from the FFT path.
fn naive_dft(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| v * C64::from_polar(1.0, -2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Least-squares 2x2 per-bin solve of the stacked block equations
/// `w_x . [r_x_i, r_y_i] = t_x_i` (i = 0..3), and likewise for Y.
///
/// `rx[pol][block]` and `tx[pol][block]` are time-domain blocks (with any
/// sign pattern already applied to `tx`).
pub fn ls_oracle(rx: &[[Vec<C64>; 3]; 2], tx: &[[Vec<C64>; 3]; 2]) -> Result<OracleTaps> {
    let n = rx[0][0].len();
    for pol in 0..2 {
        for b in 0..3 {
            if rx[pol][b].len() != n || tx[pol][b].len() != n {
                return Err(DspError::InputShape("oracle blocks must share one length".into()));
            }
        }
    }
    let spec = |v: &[Vec<C64>; 3]| -> Vec<Vec<C64>> { v.iter().map(|b| naive_dft(b)).collect() };
    let (rxs, rys) = (spec(&rx[0]), spec(&rx[1]));
    let (txs, tys) = (spec(&tx[0]), spec(&tx[1]));
    let scale: f64 = rxs
        .iter()
        .chain(&rys)
        .flat_map(|b| b.iter().map(|v| v.norm_sqr()))
        .sum::<f64>()
        / (6 * n) as f64;

    let mut taps = OracleTaps {
        w_xx: Vec::with_capacity(n),
        w_xy: Vec::with_capacity(n),
        w_yx: Vec::with_capacity(n),
        w_yy: Vec::with_capacity(n),
    };
    for k in 0..n {
        // A is 3x2 with rows [R_X, R_Y]; output = A w.
        let a: Vec<[C64; 2]> = (0..3).map(|i| [rxs[i][k], rys[i][k]]).collect();
        // G = A^H A.
        let mut g = [[C64::new(0.0, 0.0); 2]; 2];
        for row in &a {
            for r in 0..2 {
                for c in 0..2 {
                    g[r][c] += row[r].conj() * row[c];
                }
            }
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if det.norm() <= 1e-12 * scale * scale {
            return Err(DspError::SingularOracle { bin: k });
        }
        let inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        let solve = |t: &dyn Fn(usize) -> C64| -> [C64; 2] {
            let mut rhs = [C64::new(0.0, 0.0); 2];
            for (i, row) in a.iter().enumerate() {
                rhs[0] += row[0].conj() * t(i);
                rhs[1] += row[1].conj() * t(i);
            }
            [
                inv[0][0] * rhs[0] + inv[0][1] * rhs[1],
                inv[1][0] * rhs[0] + inv[1][1] * rhs[1],
            ]
        };
        let wx = solve(&|i| txs[i][k]);
        let wy = solve(&|i| tys[i][k]);
        taps.w_xx.push(wx[0]);
        taps.w_xy.push(wx[1]);
        taps.w_yx.push(wy[0]);
        taps.w_yy.push(wy[1]);
    }
    Ok(taps)
}
