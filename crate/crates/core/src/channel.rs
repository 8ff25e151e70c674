//! Parametric channel: polarization rotation, chromatic dispersion, fractional
//! delay, carrier offset with laser phase noise, AWGN, and TDMA assembly.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::preambles::{build_frame, Frame, PilotSource, PreambleA, PreambleB};
use crate::sigcore::{fft, fft_freqs, ifft, mean_power, DspParams, DualPolBurst, QamGrid, RrcFilter, C64};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Impairments seen by one burst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Power split ratio of the Jones rotation.
    pub alpha: f64,
    /// Relative phase of the Jones rotation, rad.
    pub theta: f64,
    /// Carrier frequency offset, Hz.
    pub delta_f: f64,
    /// Sampling phase offset in symbols.
    pub tau: f64,
    pub fiber_km: f64,
    pub disp_ps_nm_km: f64,
    pub lambda_nm: f64,
    /// Combined Tx + LO linewidth, Hz.
    pub linewidth_hz: f64,
    /// Per-polarization SNR at the simulation rate; `None` disables noise.
    pub snr_db: Option<f64>,
    /// Amplitude offset of this burst in the TDMA stream.
    pub gain_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            theta: 0.0,
            delta_f: 0.0,
            tau: 0.0,
            fiber_km: 20.0,
            disp_ps_nm_km: 17.0,
            lambda_nm: 1550.0,
            linewidth_hz: 200e3,
            snr_db: None,
            gain_db: 0.0,
        }
    }
}

impl ChannelConfig {
    /// Back-to-back: no rotation, fiber, offsets, phase noise or noise.
    pub fn identity() -> Self {
        Self {
            fiber_km: 0.0,
            linewidth_hz: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(DspError::Config(format!("{what} out of range: {v}")));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", self.alpha);
        }
        if !(0.0..2.0 * PI).contains(&self.theta) {
            return bad("theta", self.theta);
        }
        if !(self.tau.abs() <= 0.5) {
            return bad("tau", self.tau);
        }
        if !self.delta_f.is_finite() {
            return bad("delta_f", self.delta_f);
        }
        if !(self.fiber_km >= 0.0 && self.fiber_km.is_finite()) {
            return bad("fiber_km", self.fiber_km);
        }
        if !(self.disp_ps_nm_km >= 0.0 && self.disp_ps_nm_km.is_finite()) {
            return bad("disp_ps_nm_km", self.disp_ps_nm_km);
        }
        if !(self.lambda_nm > 0.0 && self.lambda_nm.is_finite()) {
            return bad("lambda_nm", self.lambda_nm);
        }
        if !(self.linewidth_hz >= 0.0 && self.linewidth_hz.is_finite()) {
            return bad("linewidth_hz", self.linewidth_hz);
        }
        if let Some(s) = self.snr_db {
            if s.is_nan() {
                return bad("snr_db", s);
            }
        }
        if !self.gain_db.is_finite() {
            return bad("gain_db", self.gain_db);
        }
        Ok(())
    }
}

/// Jones matrix `[[a, b], [c, d]]` for power split `alpha` and phase `theta`.
pub fn jones_matrix(alpha: f64, theta: f64) -> [[C64; 2]; 2] {
    let a = (1.0 - alpha).sqrt();
    let b = alpha.sqrt();
    [
        [C64::new(a, 0.0), -C64::from_polar(b, theta)],
        [C64::from_polar(b, -theta), C64::new(a, 0.0)],
    ]
}

pub(crate) fn apply_matrix(burst: &DualPolBurst, m: &[[C64; 2]; 2]) -> DualPolBurst {
    let (x, y): (Vec<C64>, Vec<C64>) = burst
        .x
        .iter()
        .zip(&burst.y)
        .map(|(&x, &y)| (m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y))
        .unzip();
    DualPolBurst { x, y, fs: burst.fs }
}

pub fn apply_jones(burst: &DualPolBurst, alpha: f64, theta: f64) -> Result<DualPolBurst> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(DspError::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(apply_matrix(burst, &jones_matrix(alpha, theta)))
}

/// Accumulated dispersion `D * lambda^2 * L / c` in s^2.
pub fn dispersion_s2(fiber_km: f64, disp_ps_nm_km: f64, lambda_nm: f64) -> f64 {
    let d = disp_ps_nm_km * 1e-6;
    let lambda = lambda_nm * 1e-9;
    d * lambda * lambda * fiber_km * 1e3 / SPEED_OF_LIGHT
}

/// Multiply each polarization's spectrum by `H(f)`, `f` in Hz.
pub(crate) fn filter_spectrum(burst: &DualPolBurst, h: impl Fn(f64) -> C64) -> DualPolBurst {
    let freqs = fft_freqs(burst.len(), burst.fs);
    let resp: Vec<C64> = freqs.iter().map(|&f| h(f)).collect();
    let run = |v: &[C64]| -> Vec<C64> {
        let mut s = fft(v);
        for (bin, r) in s.iter_mut().zip(&resp) {
            *bin *= r;
        }
        ifft(&s)
    };
    DualPolBurst {
        x: run(&burst.x),
        y: run(&burst.y),
        fs: burst.fs,
    }
}

/// Quadratic-phase all-pass dispersion with sign `+1` (fiber) or `-1` (compensation).
pub(crate) fn cd_filter(burst: &DualPolBurst, beta: f64, sign: f64) -> DualPolBurst {
    if beta == 0.0 || burst.is_empty() {
        return burst.clone();
    }
    filter_spectrum(burst, |f| C64::from_polar(1.0, -sign * PI * beta * f * f))
}

pub fn apply_cd(burst: &DualPolBurst, fiber_km: f64, disp_ps_nm_km: f64, lambda_nm: f64) -> DualPolBurst {
    cd_filter(burst, dispersion_s2(fiber_km, disp_ps_nm_km, lambda_nm), 1.0)
}

/// Receiver-side chromatic dispersion compensation: conjugate of [`apply_cd`].
pub fn cdc(burst: &DualPolBurst, fiber_km: f64, disp_ps_nm_km: f64, lambda_nm: f64) -> DualPolBurst {
    cd_filter(burst, dispersion_s2(fiber_km, disp_ps_nm_km, lambda_nm), -1.0)
}

/// Delay by `delay_samples` (any real value) as a linear phase over the FFT grid.
pub fn delay_samples(burst: &DualPolBurst, delay_samples: f64) -> DualPolBurst {
    if delay_samples == 0.0 || burst.is_empty() {
        return burst.clone();
    }
    let fs = burst.fs;
    filter_spectrum(burst, |f| C64::from_polar(1.0, -2.0 * PI * f * delay_samples / fs))
}

/// Delay by `tau_symbols` symbols.
pub fn apply_frac_delay(burst: &DualPolBurst, tau_symbols: f64, params: &DspParams) -> DualPolBurst {
    delay_samples(burst, tau_symbols * params.k_os)
}

/// Exact inverse of [`apply_frac_delay`].
pub fn retime(burst: &DualPolBurst, tau_symbols: f64, params: &DspParams) -> DualPolBurst {
    delay_samples(burst, -tau_symbols * params.k_os)
}

/// Laser phase-noise trajectory: Wiener process with per-sample variance `2 pi lw / fs`.
pub fn phase_noise(n: usize, linewidth_hz: f64, fs: f64, rng_seed: u64) -> Vec<f64> {
    let mut phi = vec![0.0; n];
    if linewidth_hz <= 0.0 || n == 0 {
        return phi;
    }
    let step = Normal::new(0.0, (2.0 * PI * linewidth_hz / fs).sqrt()).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for i in 1..n {
        phi[i] = phi[i - 1] + step.sample(&mut rng);
    }
    phi
}

/// Multiply both polarizations by `exp(j(2 pi df n / fs + phi(n)))`.
pub fn apply_cfo_pn(burst: &DualPolBurst, delta_f: f64, linewidth_hz: f64, rng_seed: u64) -> DualPolBurst {
    let phi = phase_noise(burst.len(), linewidth_hz, burst.fs, rng_seed);
    let w = 2.0 * PI * delta_f / burst.fs;
    let rot: Vec<C64> = phi
        .iter()
        .enumerate()
        .map(|(n, p)| C64::from_polar(1.0, w * n as f64 + p))
        .collect();
    let spin = |v: &[C64]| v.iter().zip(&rot).map(|(s, r)| s * r).collect();
    DualPolBurst {
        x: spin(&burst.x),
        y: spin(&burst.y),
        fs: burst.fs,
    }
}

/// Remove a known carrier offset (sample index 0 as phase reference).
pub fn derotate(burst: &DualPolBurst, delta_f: f64) -> DualPolBurst {
    apply_cfo_pn(burst, -delta_f, 0.0, 0)
}

fn add_noise_var(burst: &DualPolBurst, var: [f64; 2], rng_seed: u64) -> DualPolBurst {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut noisy = |v: &[C64], var: f64| -> Vec<C64> {
        let s = (var / 2.0).sqrt();
        v.iter()
            .map(|&x| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                x + C64::new(re, im) * s
            })
            .collect()
    };
    let x = noisy(&burst.x, var[0]);
    let y = noisy(&burst.y, var[1]);
    DualPolBurst { x, y, fs: burst.fs }
}

fn noise_variances(ref_power: (f64, f64), snr_db: f64) -> Result<[f64; 2]> {
    let (px, py) = ref_power;
    if !(px > 0.0 && py > 0.0) {
        return Err(DspError::Config(format!(
            "AWGN needs signal power on both polarizations, got ({px}, {py})"
        )));
    }
    let lin = 10f64.powf(snr_db / 10.0);
    Ok([px / lin, py / lin])
}

/// Complex white Gaussian noise at `snr_db` relative to each polarization's
/// mean sample power. `None` (or +inf) returns the input unchanged.
pub fn add_awgn(burst: &DualPolBurst, snr_db: Option<f64>, rng_seed: u64) -> Result<DualPolBurst> {
    match snr_db {
        None => Ok(burst.clone()),
        Some(s) if s == f64::INFINITY => Ok(burst.clone()),
        Some(s) => {
            let var = noise_variances(burst.power(), s)?;
            Ok(add_noise_var(burst, var, rng_seed))
        }
    }
}

/// Independent sub-seed for one random stage of one burst.
fn sub_seed(seed: u64, burst: usize, stage: u64) -> u64 {
    let mut z = seed ^ (burst as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stage.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Full impairment chain in propagation order. Noise power is referenced to
/// the samples in `ref_window` (the whole burst if `None`).
pub fn impair_burst(
    tx: &DualPolBurst,
    cfg: &ChannelConfig,
    params: &DspParams,
    rng_seed: u64,
    ref_window: Option<(usize, usize)>,
) -> Result<DualPolBurst> {
    cfg.validate()?;
    let mut b = apply_jones(tx, cfg.alpha, cfg.theta)?;
    b = apply_cd(&b, cfg.fiber_km, cfg.disp_ps_nm_km, cfg.lambda_nm);
    b = apply_frac_delay(&b, cfg.tau, params);
    b = apply_cfo_pn(&b, cfg.delta_f, cfg.linewidth_hz, sub_seed(rng_seed, 0, 1));
    if let Some(snr) = cfg.snr_db.filter(|s| s.is_finite()) {
        let (lo, hi) = ref_window.unwrap_or((0, b.len()));
        let win = b.slice(lo, hi);
        let var = noise_variances(win.power(), snr)?;
        b = add_noise_var(&b, var, sub_seed(rng_seed, 0, 2));
    }
    Ok(b)
}

/// Symbol frame plus its shaped 2-SPS waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct TxBurst {
    pub frame: Frame,
    pub bits: [Vec<u8>; 2],
    pub waveform: DualPolBurst,
    /// Sample index of the center of symbol 0 in `waveform`.
    pub symbol0: usize,
}

/// Uniform random payload bits.
pub fn random_bits(n: usize, rng_seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

pub fn transmit(
    bits: [Vec<u8>; 2],
    pre_a: &PreambleA,
    pre_b: &PreambleB,
    pilots: &PilotSource,
    grid: &QamGrid,
    params: &DspParams,
    span: usize,
) -> Result<TxBurst> {
    let frame = build_frame([&bits[0], &bits[1]], pre_a, pre_b, pilots, grid)?;
    let rrc = RrcFilter::design(params, span)?;
    let waveform = DualPolBurst::new(rrc.shape(&frame.x), rrc.shape(&frame.y), params.fs())?;
    Ok(TxBurst {
        frame,
        bits,
        waveform,
        symbol0: rrc.delay(),
    })
}

/// One burst of a TDMA uplink: what was sent and what it went through.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkBurst {
    pub tx: TxBurst,
    pub config: ChannelConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkScene {
    pub bursts: Vec<UplinkBurst>,
    pub guard_samples: usize,
    pub stream: DualPolBurst,
    /// Sample index in `stream` of each burst's symbol-0 center (before the SPO shift).
    pub burst_starts: Vec<usize>,
    /// `[start, end)` of each burst's waveform in `stream`.
    pub burst_windows: Vec<(usize, usize)>,
}

impl UplinkScene {
    pub fn duration(&self) -> f64 {
        self.stream.len() as f64 / self.stream.fs
    }
}

/// Zero padding that keeps dispersion and delay from wrapping around the FFT.
fn impairment_pad(cfg: &ChannelConfig, params: &DspParams) -> usize {
    if cfg.fiber_km == 0.0 && cfg.tau == 0.0 {
        return 0;
    }
    let beta = dispersion_s2(cfg.fiber_km, cfg.disp_ps_nm_km, cfg.lambda_nm);
    let spread = beta * params.rs * (1.0 + params.rolloff) * params.fs();
    spread.ceil() as usize + 16
}

/// `[guard | burst 1 | guard | burst 2 | ... | guard]`, each burst impaired by
/// its own configuration and scaled by its gain before concatenation.
pub fn assemble_uplink(
    bursts: Vec<UplinkBurst>,
    guard_ns: f64,
    params: &DspParams,
    rng_seed: u64,
) -> Result<UplinkScene> {
    params.validate()?;
    if bursts.is_empty() {
        return Err(DspError::Config("an uplink needs at least one burst".into()));
    }
    if !(guard_ns >= 0.0 && guard_ns.is_finite()) {
        return Err(DspError::Config(format!("guard_ns must be >= 0, got {guard_ns}")));
    }
    let fs = params.fs();
    let guard = (guard_ns * 1e-9 * fs).round() as usize;
    let mut x = vec![C64::new(0.0, 0.0); guard];
    let mut y = x.clone();
    let mut burst_starts = Vec::with_capacity(bursts.len());
    let mut burst_windows = Vec::with_capacity(bursts.len());
    for (i, b) in bursts.iter().enumerate() {
        b.config.validate()?;
        let pad = impairment_pad(&b.config, params);
        let wf = &b.tx.waveform;
        let mut padded = DualPolBurst::zeros(wf.len() + 2 * pad, fs);
        padded.x[pad..pad + wf.len()].copy_from_slice(&wf.x);
        padded.y[pad..pad + wf.len()].copy_from_slice(&wf.y);
        let core_start = pad + b.tx.symbol0;
        let core = (core_start, core_start + b.tx.frame.layout.total * params.sps()?);
        let mut rx = impair_burst(&padded, &b.config, params, sub_seed(rng_seed, i, 0), Some(core))?;
        let g = 10f64.powf(b.config.gain_db / 20.0);
        if g != 1.0 {
            rx.x.iter_mut().chain(rx.y.iter_mut()).for_each(|v| *v *= g);
        }
        let start = x.len();
        burst_starts.push(start + core_start);
        burst_windows.push((start, start + rx.len()));
        x.extend_from_slice(&rx.x);
        y.extend_from_slice(&rx.y);
        x.extend(std::iter::repeat_n(C64::new(0.0, 0.0), guard));
        y.extend(std::iter::repeat_n(C64::new(0.0, 0.0), guard));
    }
    Ok(UplinkScene {
        bursts,
        guard_samples: guard,
        stream: DualPolBurst::new(x, y, fs)?,
        burst_starts,
        burst_windows,
    })
}

/// Power of `burst` between `lo` and `hi` averaged over both polarizations.
pub fn window_power(burst: &DualPolBurst, lo: usize, hi: usize) -> f64 {
    0.5 * (mean_power(&burst.x[lo..hi]) + mean_power(&burst.y[lo..hi]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preambles::{build_preamble_b, gen_preamble_a, payload_bits_per_pol, FrameLayout};
    use crate::sigcore::DEFAULT_SPAN;

    fn random_burst(n: usize, seed: u64) -> DualPolBurst {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let x = (0..n).map(|_| g()).collect();
        let y = (0..n).map(|_| g()).collect();
        DualPolBurst::new(x, y, 64e9).unwrap()
    }

    /// Random signal confined to |f| < 0.3 fs.
    fn band_limited(n: usize, seed: u64) -> DualPolBurst {
        let b = random_burst(n, seed);
        filter_spectrum(&b, |f| if f.abs() < 0.3 * 64e9 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    #[test]
    fn jones_special_cases() {
        let b = random_burst(64, 1);
        assert_eq!(apply_jones(&b, 0.0, 2.0).unwrap(), b);
        let s = apply_jones(&b, 1.0, 0.0).unwrap();
        for i in 0..64 {
            assert!((s.x[i] + b.y[i]).norm() < 1e-15);
            assert!((s.y[i] - b.x[i]).norm() < 1e-15);
        }
        assert!(matches!(apply_jones(&b, 1.2, 0.0), Err(DspError::Config(_))));
    }

    #[test]
    fn jones_preserves_power() {
        let b = random_burst(1000, 2);
        let r = apply_jones(&b, 0.3, 1.0).unwrap();
        for i in 0..1000 {
            let p0 = b.x[i].norm_sqr() + b.y[i].norm_sqr();
            let p1 = r.x[i].norm_sqr() + r.y[i].norm_sqr();
            assert!((p0 - p1).abs() <= 1e-12 * p0.max(1.0));
        }
    }

    #[test]
    fn cd_identity_inverse_and_energy() {
        let b = random_burst(4096, 3);
        assert_eq!(apply_cd(&b, 0.0, 17.0, 1550.0), b);
        let d = apply_cd(&b, 20.0, 17.0, 1550.0);
        assert!(cdc(&d, 20.0, 17.0, 1550.0).max_abs_diff(&b) < 1e-8);
        let rel = (d.total_energy() - b.total_energy()).abs() / b.total_energy();
        assert!(rel < 1e-9);
    }

    #[test]
    fn cd_broadens_a_pulse() {
        let params = DspParams::default();
        let rrc = RrcFilter::design(&params, DEFAULT_SPAN).unwrap();
        let mut sym = vec![C64::new(0.0, 0.0); 256];
        sym[128] = C64::new(1.0, 0.0);
        let p = rrc.shape(&sym);
        let b = DualPolBurst::new(p.clone(), p, 64e9).unwrap();
        let d = apply_cd(&b, 20.0, 17.0, 1550.0);
        let rms_width = |v: &[C64]| {
            let e: f64 = v.iter().map(|s| s.norm_sqr()).sum();
            let m: f64 = v.iter().enumerate().map(|(i, s)| i as f64 * s.norm_sqr()).sum::<f64>() / e;
            (v.iter().enumerate().map(|(i, s)| (i as f64 - m).powi(2) * s.norm_sqr()).sum::<f64>() / e).sqrt()
        };
        assert!(rms_width(&d.x) > rms_width(&b.x) * 1.1);
        assert!((d.total_energy() - b.total_energy()).abs() < 1e-9 * b.total_energy());
    }

    #[test]
    fn cfo_moves_a_dc_tone() {
        let n = 1024;
        let dc = DualPolBurst::new(vec![C64::new(1.0, 0.0); n], vec![C64::new(1.0, 0.0); n], 64e9).unwrap();
        assert_eq!(apply_cfo_pn(&dc, 0.0, 0.0, 9), dc);
        let shifted = apply_cfo_pn(&dc, 1e9, 0.0, 9);
        let s = fft(&shifted.x);
        let k = (0..n).max_by(|&a, &b| s[a].norm().total_cmp(&s[b].norm())).unwrap();
        // 1 GHz at 62.5 MHz per bin.
        assert_eq!(k, 16);
        assert!(derotate(&shifted, 1e9).max_abs_diff(&dc) < 1e-9);
    }

    #[test]
    fn phase_noise_follows_wiener_law() {
        let (fs, lw, n, lag) = (64e9, 200e3, 100_000, 1000);
        let expect = 2.0 * PI * lw * lag as f64 / fs;
        let mut acc = 0.0;
        let mut count = 0usize;
        for seed in 0..100 {
            let ones = DualPolBurst::new(vec![C64::new(1.0, 0.0); n], vec![C64::new(1.0, 0.0); n], fs).unwrap();
            let out = apply_cfo_pn(&ones, 0.0, lw, seed);
            for k in (lag..n).step_by(lag) {
                let d = (out.x[k] * out.x[k - lag].conj()).arg();
                acc += d * d;
                count += 1;
            }
            assert_eq!(out.x, out.y);
        }
        let var = acc / count as f64;
        assert!((var / expect - 1.0).abs() < 0.2, "var {var} vs {expect}");
    }

    #[test]
    fn frac_delay_round_trip_and_identity() {
        let params = DspParams::default();
        let b = band_limited(4096, 4);
        assert_eq!(apply_frac_delay(&b, 0.0, &params), b);
        let d = apply_frac_delay(&apply_frac_delay(&b, 0.25, &params), -0.25, &params);
        assert!(d.max_abs_diff(&b) < 1e-6);
        let r = retime(&apply_frac_delay(&b, 0.37, &params), 0.37, &params);
        assert!(r.max_abs_diff(&b) < 1e-6);
    }

    #[test]
    fn frac_delay_shifts_the_correlation_peak() {
        let params = DspParams::default();
        // Narrow band keeps the correlation peak smooth for the parabolic fit.
        let b = random_burst(8192, 5);
        let b = filter_spectrum(&b, |f| if f.abs() < 0.05 * 64e9 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let d = apply_frac_delay(&b, 0.1, &params);
        let xc = |lag: i64| -> f64 {
            let n = b.len() as i64;
            (0..n)
                .map(|i| d.x[((i + lag).rem_euclid(n)) as usize] * b.x[i as usize].conj())
                .sum::<C64>()
                .re
        };
        let (m, c, p) = (xc(-1), xc(0), xc(1));
        let frac = 0.5 * (m - p) / (m - 2.0 * c + p);
        assert!((frac - 0.2).abs() < 0.01, "peak at {frac}");
    }

    #[test]
    fn awgn_statistics_and_seeds() {
        let n = 200_000;
        let ones = DualPolBurst::new(vec![C64::new(1.0, 0.0); n], vec![C64::new(0.0, 1.0); n], 64e9).unwrap();
        assert_eq!(add_awgn(&ones, None, 1).unwrap(), ones);
        assert_eq!(add_awgn(&ones, Some(f64::INFINITY), 1).unwrap(), ones);
        let a = add_awgn(&ones, Some(20.0), 1).unwrap();
        let b = add_awgn(&ones, Some(20.0), 2).unwrap();
        assert_ne!(a, b);
        for noisy in [&a, &b] {
            let nx: f64 = noisy.x.iter().map(|v| (v - 1.0).norm_sqr()).sum::<f64>() / n as f64;
            assert!((nx / 0.01 - 1.0).abs() < 0.05, "noise power {nx}");
            let snr = 10.0 * (1.0 / nx).log10();
            assert!((snr - 20.0).abs() < 0.1);
        }
        let zero = DualPolBurst::zeros(100, 64e9);
        assert!(matches!(add_awgn(&zero, Some(10.0), 1), Err(DspError::Config(_))));
    }

    fn tx_burst(seed: u64) -> TxBurst {
        let layout = FrameLayout::default();
        let n = payload_bits_per_pol(&layout);
        transmit(
            [random_bits(n, seed), random_bits(n, seed + 1000)],
            &gen_preamble_a(),
            &build_preamble_b(1, 3).unwrap(),
            &PilotSource::default(),
            &QamGrid::gray16(),
            &DspParams::default(),
            DEFAULT_SPAN,
        )
        .unwrap()
    }

    #[test]
    fn single_burst_no_guard_is_the_burst() {
        let params = DspParams::default();
        let tx = tx_burst(1);
        let wf = tx.waveform.clone();
        let s = assemble_uplink(
            vec![UplinkBurst { tx, config: ChannelConfig::identity() }],
            0.0,
            &params,
            3,
        )
        .unwrap();
        assert_eq!(s.stream, wf);
        assert_eq!(s.burst_starts, vec![DEFAULT_SPAN]);
    }

    #[test]
    fn two_burst_timing_and_gains() {
        let params = DspParams::default();
        let cfg = |g: f64| ChannelConfig { gain_db: g, ..ChannelConfig::identity() };
        let s = assemble_uplink(
            vec![
                UplinkBurst { tx: tx_burst(1), config: cfg(0.0) },
                UplinkBurst { tx: tx_burst(2), config: cfg(-3.0) },
            ],
            45.0,
            &params,
            3,
        )
        .unwrap();
        assert_eq!(s.guard_samples, 2880);
        let expect = 2.0 * 33_766.0 / 32e9 + 3.0 * 45e-9;
        // Each waveform also carries the half-span RRC tails on both sides.
        assert!((s.duration() - expect).abs() < 2.0 * 32.0 / 32e9 + 1e-12, "{}", s.duration());
        let core = 33_766 * 2;
        let p1 = window_power(&s.stream, s.burst_starts[0], s.burst_starts[0] + core);
        let p2 = window_power(&s.stream, s.burst_starts[1], s.burst_starts[1] + core);
        assert!((p2 / p1 - 10f64.powf(-0.3)).abs() < 0.02 * 0.5, "ratio {}", p2 / p1);
        // Guards stay empty.
        assert!(s.stream.x[..2880].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn impairments_are_deterministic() {
        let params = DspParams::default();
        let cfg = ChannelConfig {
            alpha: 0.3,
            theta: 1.0,
            delta_f: 1e9,
            tau: 0.2,
            snr_db: Some(18.0),
            ..ChannelConfig::default()
        };
        let b = random_burst(4096, 6);
        let r1 = impair_burst(&b, &cfg, &params, 11, None).unwrap();
        let r2 = impair_burst(&b, &cfg, &params, 11, None).unwrap();
        let r3 = impair_burst(&b, &cfg, &params, 12, None).unwrap();
        assert_eq!(r1, r2);
        assert_ne!(r1, r3);
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::default().validate().is_ok());
        for bad in [
            ChannelConfig { alpha: 1.5, ..Default::default() },
            ChannelConfig { theta: 7.0, ..Default::default() },
            ChannelConfig { tau: 0.6, ..Default::default() },
            ChannelConfig { fiber_km: -1.0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(DspError::Config(_))));
        }
        let toml_like = r#"{"alpha": 0.2, "bogus": 1}"#;
        assert!(serde_json::from_str::<ChannelConfig>(toml_like).is_err());
    }
}
