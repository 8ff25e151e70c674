//! Shared fixtures for the receiver unit tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{assemble_uplink, random_bits, transmit, ChannelConfig, UplinkBurst, UplinkScene};
use crate::preambles::{build_preamble_b, gen_preamble_a, payload_bits_per_pol, FrameLayout, PilotSource};
use crate::sigcore::{DspParams, DualPolBurst, QamGrid, RrcFilter, C64, DEFAULT_SPAN};

/// One burst through `cfg`, 45 ns guards.
pub fn scene_one(cfg: ChannelConfig, seed: u64) -> UplinkScene {
    let params = DspParams::default();
    let layout = FrameLayout::default();
    let n = payload_bits_per_pol(&layout);
    let bits = [random_bits(n, seed), random_bits(n, seed + 1000)];
    let tx = transmit(
        bits,
        &gen_preamble_a(),
        &build_preamble_b(1, 3).unwrap(),
        &PilotSource::default(),
        &QamGrid::gray16(),
        &params,
        DEFAULT_SPAN,
    )
    .unwrap();
    assemble_uplink(vec![UplinkBurst { tx, config: cfg }], 45.0, &params, seed).unwrap()
}

/// Shaped Preamble A alone; symbol 0 sits at sample `DEFAULT_SPAN`.
pub fn tone_burst(params: &DspParams) -> DualPolBurst {
    let a = gen_preamble_a();
    let rrc = RrcFilter::design(params, DEFAULT_SPAN).unwrap();
    DualPolBurst::new(rrc.shape(&a.x_symbols), rrc.shape(&a.y_symbols), params.fs()).unwrap()
}

/// The steady-state interior of a [`tone_burst`]: 208 samples starting at symbol 12.
pub fn pre_a_inner(b: &DualPolBurst) -> DualPolBurst {
    let s = DEFAULT_SPAN + 24;
    b.slice(s, s + 208)
}

/// Unit-power complex Gaussian noise at 64 GSa/s.
pub fn noise(n: usize, seed: u64) -> DualPolBurst {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut draw = || -> Vec<C64> {
        (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re * s, im * s)
            })
            .collect()
    };
    let x = draw();
    let y = draw();
    DualPolBurst::new(x, y, 64e9).unwrap()
}

/// Shaped random 16QAM; returns the waveform, its filter and the symbols.
pub fn shaped_random(params: &DspParams, n_sym: usize, seed: u64) -> (DualPolBurst, RrcFilter, [Vec<C64>; 2]) {
    let grid = QamGrid::gray16();
    let rrc = RrcFilter::design(params, DEFAULT_SPAN).unwrap();
    let sym = |s: u64| -> Vec<C64> {
        crate::sigcore::qam16_map(&random_bits(4 * n_sym, s), &grid).unwrap()
    };
    let (sx, sy) = (sym(seed), sym(seed + 1));
    let b = DualPolBurst::new(rrc.shape(&sx), rrc.shape(&sy), params.fs()).unwrap();
    (b, rrc, [sx, sy])
}
