mod common;

use std::f64::consts::TAU;

use cotdma::bmdsp::{
    acquire, estimate_sop, mmse_estimate, mmse_uniqueness_check, power_sum_curve, residual_cost, synchronize_burst,
    tone_projections, zf_estimate, LoopConfig, RxContext, RxOptions,
};
use cotdma::channel::{apply_cd, apply_cfo_pn, apply_jones, delay_samples, dispersion_s2, jones_matrix, ChannelConfig};
use cotdma::metrics::{ber, ls_oracle};
use cotdma::preambles::{
    build_preamble_b, gen_cazac, gen_preamble_a, FrameLayout, DEFAULT_ROOT_X, DEFAULT_ROOT_Y, SIGN_X, SIGN_Y,
};
use cotdma::sigcore::{fft, fft_freqs, ifft, qam16_demap, qam16_map, RrcFilter, DEFAULT_SPAN};
use cotdma::{DspParams, DualPolBurst, QamGrid, C64};
use proptest::prelude::*;
use rand::Rng;

use common::*;

fn tones(params: &DspParams) -> DualPolBurst {
    let a = gen_preamble_a();
    let rrc = RrcFilter::design(params, DEFAULT_SPAN).unwrap();
    DualPolBurst::new(rrc.shape(&a.x_symbols), rrc.shape(&a.y_symbols), params.fs()).unwrap()
}

fn shaped_random(seed: u64, n_sym: usize) -> DualPolBurst {
    let params = DspParams::default();
    let rrc = RrcFilter::design(&params, DEFAULT_SPAN).unwrap();
    let grid = QamGrid::gray16();
    let mut r = rng(seed);
    let mut sym = || {
        let bits: Vec<u8> = (0..4 * n_sym).map(|_| r.random_range(0..2u8)).collect();
        rrc.shape(&qam16_map(&bits, &grid).unwrap())
    };
    let (x, y) = (sym(), sym());
    DualPolBurst::new(x, y, params.fs()).unwrap()
}

/// Zero every bin above `f_max` so nothing sits near the Nyquist wrap.
fn band_limited(b: &DualPolBurst, f_max: f64) -> DualPolBurst {
    let freqs = fft_freqs(b.len(), b.fs);
    let cut = |v: &[C64]| -> Vec<C64> {
        let mut s = fft(v);
        s.iter_mut().zip(&freqs).filter(|(_, f)| f.abs() > f_max).for_each(|(v, _)| *v = C64::new(0.0, 0.0));
        ifft(&s)
    };
    DualPolBurst::new(cut(&b.x), cut(&b.y), b.fs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jones_is_unitary(alpha in 0.0..=1.0f64, theta in 0.0..TAU) {
        let j = jones_matrix(alpha, theta);
        for r in 0..2 {
            for c in 0..2 {
                let v: C64 = (0..2).map(|k| j[r][k] * j[c][k].conj()).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                prop_assert!((v - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cazac_flat_in_time_and_frequency(root in prop::sample::select(vec![1i64, 3, 5, 7, 9, 11, 13])) {
        let b = gen_cazac(64, root).unwrap();
        prop_assert!(b.iter().all(|v| (v.norm() - 1.0).abs() < 1e-9));
        prop_assert!(fft(&b).iter().all(|v| (v.norm() - 8.0).abs() < 1e-9));
    }

    #[test]
    fn ber_is_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a: Vec<u8> = (0..2000).map(|_| r.random_range(0..2u8)).collect();
        let b: Vec<u8> = a.iter().map(|&v| if r.random_bool(0.05) { 1 - v } else { v }).collect();
        let ab = ber(&a, &b, Some(a.len())).unwrap();
        let ba = ber(&b, &a, None).unwrap();
        prop_assert_eq!(ab.bit_errors, ba.bit_errors);
        prop_assert_eq!(ab.ber_first, Some(ab.ber));
    }

    #[test]
    fn qam_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let bits: Vec<u8> = (0..4000).map(|_| r.random_range(0..2u8)).collect();
        let grid = QamGrid::gray16();
        prop_assert_eq!(qam16_demap(&qam16_map(&bits, &grid).unwrap(), &grid), bits);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cd_after_cfo_is_cfo_after_cd_delayed(seed in 0u64..1000, km in 0.0..80.0f64, bins in -48i64..48) {
        let b = band_limited(&shaped_random(seed, 512), 20e9);
        // Whole-bin offsets keep the frequency shift circular on the FFT grid.
        let df = bins as f64 * b.fs / b.len() as f64;
        let beta = dispersion_s2(km, 17.0, 1550.0);
        let a = apply_cd(&apply_cfo_pn(&b, df, 0.0, 1), km, 17.0, 1550.0);
        // Delaying before the shift adds exp(j 2 pi beta df^2); half of it is the relation's own phase.
        let mut c = apply_cfo_pn(&delay_samples(&apply_cd(&b, km, 17.0, 1550.0), beta * df * b.fs), df, 0.0, 1);
        let rot = C64::from_polar(1.0, -std::f64::consts::PI * beta * df * df);
        c.x.iter_mut().chain(c.y.iter_mut()).for_each(|v| *v *= rot);
        prop_assert!(a.max_abs_diff(&c) <= 1e-8, "{}", a.max_abs_diff(&c));
        if bins == 0 {
            prop_assert!(a.max_abs_diff(&apply_cfo_pn(&apply_cd(&b, km, 17.0, 1550.0), df, 0.0, 1)) <= 1e-8);
        }
    }

    #[test]
    fn power_sum_is_a_single_sinusoid(alpha in 0.05..0.95f64, theta in 0.0..TAU, seed in any::<u64>()) {
        let params = DspParams::default();
        let mut rx = apply_jones(&tones(&params), alpha, theta).unwrap();
        let mut r = rng(seed);
        rx.x.iter_mut().chain(rx.y.iter_mut()).for_each(|v| *v += cgauss(&mut r) * 0.1);
        let p = tone_projections(&rx.slice(DEFAULT_SPAN + 24, DEFAULT_SPAN + 232), &params);
        let coarse = power_sum_curve(&p, alpha, 8);
        let (mut a0, mut ac, mut as_) = (0.0, 0.0, 0.0);
        for (i, v) in coarse.iter().enumerate() {
            let t = TAU * i as f64 / 8.0;
            a0 += v / 8.0;
            ac += v * t.cos() / 4.0;
            as_ += v * t.sin() / 4.0;
        }
        let fine = power_sum_curve(&p, alpha, 360);
        let top = fine.iter().cloned().fold(0.0, f64::max);
        for (i, v) in fine.iter().enumerate() {
            let t = TAU * i as f64 / 360.0;
            prop_assert!((a0 + ac * t.cos() + as_ * t.sin() - v).abs() <= 1e-6 * top);
        }
    }

    #[test]
    fn mmse_is_least_squares_and_optimal(seed in any::<u64>(), sigma in 0.0..0.5f64) {
        let pre_b = build_preamble_b(DEFAULT_ROOT_X, DEFAULT_ROOT_Y).unwrap();
        let tx = signed_blocks(&pre_b.bx, &pre_b.by, SIGN_X, SIGN_Y);
        let mut r = rng(seed);
        let h = random_channel(&mut r, 64, 4);
        let rx = propagate(&h, &tx, sigma, &mut r);
        let est = mmse_estimate(&rx, &tx).unwrap();
        let o = ls_oracle(&rx, &tx).unwrap();
        let reference = [[&o.w_xx, &o.w_xy], [&o.w_yx, &o.w_yy]];
        for p in 0..2 {
            for q in 0..2 {
                for (a, b) in est.taps[p][q].iter().zip(reference[p][q]) {
                    prop_assert!((a - b).norm() <= 1e-10);
                }
            }
        }
        let j = residual_cost(&rx, &tx, &est).unwrap();
        let mut moved = est.clone();
        let (p, q, k) = (r.random_range(0..2), r.random_range(0..2), r.random_range(0..64));
        moved.taps[p][q][k] += C64::from_polar(1e-3, r.random_range(0.0..TAU));
        prop_assert!(residual_cost(&rx, &tx, &moved).unwrap() >= j);
        prop_assert!(j <= residual_cost(&rx, &tx, &zf_estimate(&rx, &tx).unwrap()).unwrap());
    }

    #[test]
    fn signed_triplets_are_always_unique(seed in any::<u64>()) {
        let (bx, by) = (gen_cazac(64, DEFAULT_ROOT_X).unwrap(), gen_cazac(64, DEFAULT_ROOT_Y).unwrap());
        let tx = signed_blocks(&bx, &by, SIGN_X, SIGN_Y);
        let mut r = rng(seed);
        let rx = propagate(&random_channel(&mut r, 64, 4), &tx, 0.05, &mut r);
        prop_assert!(mmse_uniqueness_check(&rx, &tx).unwrap().all_unique());
    }

    #[test]
    fn sop_estimate_in_range(alpha in 0.0..=1.0f64, theta in 0.0..TAU) {
        let params = DspParams::default();
        let rx = apply_jones(&tones(&params), alpha, theta).unwrap();
        let e = estimate_sop(&rx.slice(DEFAULT_SPAN + 24, DEFAULT_SPAN + 232), &params).unwrap();
        prop_assert!((0.0..=1.0).contains(&e.alpha_hat));
        prop_assert!((0.0..TAU).contains(&e.theta_hat));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coarse_then_fine_foe(seed in 0u64..10_000, df in -3e9..3e9f64) {
        let params = DspParams::default();
        let mut r = rng(seed);
        let cfg = ChannelConfig { linewidth_hz: 0.0, ..random_impaired(&mut r, df, Some(20.0)) };
        let s = scene_one(cfg, seed);
        let fe = acquire(&s.stream, 0, &params, &RxOptions::default(), &FrameLayout::default()).unwrap();
        let bin = params.fs() / params.n_dft as f64;
        prop_assert!((fe.coarse_df - df).abs() <= bin, "coarse {} vs {}", fe.coarse_df, df);
        prop_assert!((fe.coarse_df + fe.fine_df - df).abs() <= 10e6);
    }

    #[test]
    fn noiseless_sync_has_one_peak(seed in 0u64..10_000) {
        let params = DspParams::default();
        let opts = RxOptions::default();
        let ctx = RxContext::new(&opts).unwrap();
        let mut r = rng(seed);
        let s = scene_one(random_impaired(&mut r, 1e9, None), seed);
        let sb = synchronize_burst(&s.stream, 0, 0, &params, &LoopConfig::default(), &opts, &ctx).unwrap();
        let m = sb.sync.combined_metric();
        prop_assert_eq!(m.iter().filter(|&&v| v >= 0.5 * sb.sync.peak).count(), 1);
        prop_assert!(sb.sync.position_x.abs_diff(sb.sync.position_y) <= 1);
    }
}
