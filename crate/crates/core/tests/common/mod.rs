//! Scene builders shared by the integration tests.
#![allow(dead_code)]

use cotdma::bmdsp::RxOptions;
use cotdma::channel::{assemble_uplink, random_bits, transmit, ChannelConfig, UplinkBurst, UplinkScene};
use cotdma::preambles::{build_preamble_b_len, gen_preamble_a, payload_bits_per_pol, FrameLayout, PilotSource};
use cotdma::sigcore::{fft, ifft, DEFAULT_SPAN};
use cotdma::{DspParams, QamGrid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GUARD_NS: f64 = 45.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A TDMA stream with one burst per `(config, seed)` entry, transmitted with
/// the preamble settings in `opts`.
pub fn scene(bursts: &[(ChannelConfig, u64)], opts: &RxOptions, seed: u64) -> UplinkScene {
    let params = DspParams::default();
    let layout = FrameLayout::with_preamble_b_block(opts.pre_b_block);
    let pre_b = build_preamble_b_len(opts.pre_b_block, opts.root_x, opts.root_y).unwrap();
    let n = payload_bits_per_pol(&layout);
    let list = bursts
        .iter()
        .map(|(cfg, s)| {
            let bits = [random_bits(n, 2 * s), random_bits(n, 2 * s + 1)];
            let tx = transmit(
                bits,
                &gen_preamble_a(),
                &pre_b,
                &PilotSource::new(opts.pilot_seed),
                &QamGrid::gray16(),
                &params,
                DEFAULT_SPAN,
            )
            .unwrap();
            UplinkBurst { tx, config: cfg.clone() }
        })
        .collect();
    assemble_uplink(list, GUARD_NS, &params, seed).unwrap()
}

pub fn scene_one(cfg: ChannelConfig, seed: u64) -> UplinkScene {
    scene(&[(cfg, seed)], &RxOptions::default(), seed)
}

/// Full impairment stack with the given random draws.
pub fn impaired(alpha: f64, theta: f64, delta_f: f64, tau: f64, snr_db: Option<f64>) -> ChannelConfig {
    ChannelConfig {
        alpha,
        theta,
        delta_f,
        tau,
        snr_db,
        ..ChannelConfig::default()
    }
}

/// Random SOP and sampling phase on top of the full stack.
pub fn random_impaired(r: &mut ChaCha8Rng, delta_f: f64, snr_db: Option<f64>) -> ChannelConfig {
    impaired(
        r.random_range(0.0..1.0),
        r.random_range(0.0..std::f64::consts::TAU),
        delta_f,
        r.random_range(-0.5..0.5),
        snr_db,
    )
}

pub fn cgauss(r: &mut ChaCha8Rng) -> C64 {
    // Box-Muller keeps this helper independent of the crate's noise path.
    let u1: f64 = r.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = r.random_range(0.0..1.0);
    let m = (-u1.ln()).sqrt();
    C64::from_polar(m, std::f64::consts::TAU * u2)
}

/// Random 2x2 channel as short FIR filters, returned as per-bin responses `h[p][q][k]`.
pub fn random_channel(r: &mut ChaCha8Rng, n: usize, taps: usize) -> [[Vec<C64>; 2]; 2] {
    let mut h: [[Vec<C64>; 2]; 2] = Default::default();
    for (p, row) in h.iter_mut().enumerate() {
        for (q, hpq) in row.iter_mut().enumerate() {
            let mut t = vec![C64::new(0.0, 0.0); n];
            for v in t.iter_mut().take(taps) {
                *v = cgauss(r) * if p == q { 1.0 } else { 0.5 };
            }
            *hpq = fft(&t);
        }
    }
    h
}

/// Time-domain blocks `tx[pol][i] = signs_pol[i] * block_pol`.
pub fn signed_blocks(bx: &[C64], by: &[C64], sx: [f64; 3], sy: [f64; 3]) -> [[Vec<C64>; 3]; 2] {
    let mk = |b: &[C64], s: [f64; 3]| s.map(|g| b.iter().map(|v| v * g).collect::<Vec<_>>());
    [mk(bx, sx), mk(by, sy)]
}

/// `rx[p][i] = sum_q h[p][q] * tx[q][i]` per bin (circular), plus optional noise of std `sigma`.
pub fn propagate(
    h: &[[Vec<C64>; 2]; 2],
    tx: &[[Vec<C64>; 3]; 2],
    sigma: f64,
    r: &mut ChaCha8Rng,
) -> [[Vec<C64>; 3]; 2] {
    let spec: [[Vec<C64>; 3]; 2] = [0, 1].map(|q| [0, 1, 2].map(|i| fft(&tx[q][i])));
    [0, 1].map(|p| {
        [0, 1, 2].map(|i| {
            let bins: Vec<C64> = (0..spec[0][0].len())
                .map(|k| h[p][0][k] * spec[0][i][k] + h[p][1][k] * spec[1][i][k])
                .collect();
            ifft(&bins).into_iter().map(|v| v + cgauss(r) * sigma).collect()
        })
    })
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
