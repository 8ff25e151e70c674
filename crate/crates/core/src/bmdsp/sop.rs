//! One-tap polarization recovery from the Preamble A tone powers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::detect::tone_lines;
use crate::channel::apply_matrix;
use crate::error::{DspError, Result};
use crate::sigcore::{DspParams, DualPolBurst, C64};

const THETA_GRID: usize = 1024;
/// Minimum share of segment power found on the tone lines.
const MIN_TONE_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SopEstimate {
    pub alpha_hat: f64,
    pub theta_hat: f64,
    /// `[X at R_s/2, X at R_s/4, Y at R_s/2, Y at R_s/4]`, each summed over the +/- lines.
    pub tone_powers: [f64; 4],
}

impl SopEstimate {
    pub fn identity() -> Self {
        Self {
            alpha_hat: 0.0,
            theta_hat: 0.0,
            tone_powers: [0.0; 4],
        }
    }
}

/// Hann-windowed projections onto the four tone lines, `[pol][line]` with
/// lines ordered `+R_s/2, -R_s/2, +R_s/4, -R_s/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneProjections {
    pub z: [[C64; 4]; 2],
    /// Sum of the window weights (a unit tone projects to this magnitude).
    pub gain: f64,
}

pub fn tone_projections(seg: &DualPolBurst, params: &DspParams) -> ToneProjections {
    let n = seg.len();
    let w: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * (i as f64 + 0.5) / n as f64).cos())
        .collect();
    let lines = tone_lines(params.rs);
    let mut z = [[C64::new(0.0, 0.0); 4]; 2];
    for (li, &f) in lines.iter().enumerate() {
        let step = -2.0 * PI * f / seg.fs;
        for (pol, samples) in [&seg.x, &seg.y].into_iter().enumerate() {
            z[pol][li] = samples
                .iter()
                .zip(&w)
                .enumerate()
                .map(|(i, (s, wi))| s * C64::from_polar(*wi, step * i as f64))
                .sum();
        }
    }
    ToneProjections {
        z,
        gain: w.iter().sum(),
    }
}

/// Inverse Jones matrix (the conjugate transpose) for `(alpha, theta)`.
pub fn inverse_jones(alpha: f64, theta: f64) -> [[C64; 2]; 2] {
    let a = (1.0 - alpha).sqrt();
    let b = alpha.sqrt();
    [
        [C64::new(a, 0.0), C64::from_polar(b, theta)],
        [-C64::from_polar(b, -theta), C64::new(a, 0.0)],
    ]
}

/// `|S_X|^2` on the R_s/2 lines plus `|S_Y|^2` on the R_s/4 lines after
/// inverting `(alpha, theta)`.
pub fn power_sum(p: &ToneProjections, alpha: f64, theta: f64) -> f64 {
    let m = inverse_jones(alpha, theta);
    let sx = |l: usize| m[0][0] * p.z[0][l] + m[0][1] * p.z[1][l];
    let sy = |l: usize| m[1][0] * p.z[0][l] + m[1][1] * p.z[1][l];
    sx(0).norm_sqr() + sx(1).norm_sqr() + sy(2).norm_sqr() + sy(3).norm_sqr()
}

/// Power sum on `n` evenly spaced phases over one period.
pub fn power_sum_curve(p: &ToneProjections, alpha: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| power_sum(p, alpha, 2.0 * PI * i as f64 / n as f64))
        .collect()
}

fn wrap_2pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Exact peak of `A + B cos(t - t0)` from samples at `t - d, t, t + d`.
pub fn sinusoid_peak(t: f64, d: f64, minus: f64, center: f64, plus: f64) -> f64 {
    let s = (plus - minus) / (2.0 * d.sin());
    let c = (plus + minus - 2.0 * center) / (2.0 * (d.cos() - 1.0));
    t + s.atan2(c)
}

/// `pre_a` should cover only Preamble A samples (coarse offset removed).
pub fn estimate_sop(pre_a: &DualPolBurst, params: &DspParams) -> Result<SopEstimate> {
    if pre_a.len() < 32 {
        return Err(DspError::InputShape(format!(
            "SOP estimation needs at least 32 samples, got {}",
            pre_a.len()
        )));
    }
    let p = tone_projections(pre_a, params);
    let pw = |pol: usize, a: usize, b: usize| p.z[pol][a].norm_sqr() + p.z[pol][b].norm_sqr();
    let tone_powers = [pw(0, 0, 1), pw(0, 2, 3), pw(1, 0, 1), pw(1, 2, 3)];
    let (px, py) = pre_a.power();
    let share = tone_powers.iter().sum::<f64>() / (p.gain * p.gain * (px + py));
    if !(share >= MIN_TONE_SHARE) {
        return Err(DspError::EstimationUnreliable(format!(
            "tone lines carry {:.3} of the segment power",
            share
        )));
    }
    let half = tone_powers[0] + tone_powers[2];
    let quarter = tone_powers[1] + tone_powers[3];
    let alpha_hat = (0.5 * (tone_powers[2] / half + tone_powers[1] / quarter)).clamp(0.0, 1.0);

    let d = 2.0 * PI / THETA_GRID as f64;
    let curve = power_sum_curve(&p, alpha_hat, THETA_GRID);
    let k = (0..THETA_GRID)
        .max_by(|&a, &b| curve[a].total_cmp(&curve[b]))
        .expect("non-empty grid");
    let at = |i: isize| curve[i.rem_euclid(THETA_GRID as isize) as usize];
    let ki = k as isize;
    let theta = sinusoid_peak(k as f64 * d, d, at(ki - 1), at(ki), at(ki + 1));
    Ok(SopEstimate {
        alpha_hat,
        theta_hat: wrap_2pi(theta),
        tone_powers,
    })
}

pub fn recover_sop(burst: &DualPolBurst, est: &SopEstimate) -> DualPolBurst {
    apply_matrix(burst, &inverse_jones(est.alpha_hat, est.theta_hat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmdsp::testutil::{pre_a_inner, tone_burst};
    use crate::channel::apply_jones;

    fn angle_err(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    }

    #[test]
    fn identity_channel() {
        let params = DspParams::default();
        let t = pre_a_inner(&tone_burst(&params));
        let e = estimate_sop(&t, &params).unwrap();
        assert!(e.alpha_hat <= 1e-3);
        assert_eq!(recover_sop(&t, &SopEstimate { alpha_hat: 0.0, theta_hat: 2.5, tone_powers: [0.0; 4] }), t);
    }

    #[test]
    fn known_rotation() {
        let params = DspParams::default();
        let t = tone_burst(&params);
        let r = pre_a_inner(&apply_jones(&t, 0.3, 1.0).unwrap());
        let e = estimate_sop(&r, &params).unwrap();
        assert!((e.alpha_hat - 0.3).abs() <= 1e-3, "{}", e.alpha_hat);
        assert!(angle_err(e.theta_hat, 1.0) <= 5e-3, "{}", e.theta_hat);
        let rec = estimate_sop(&recover_sop(&r, &e), &params).unwrap();
        let [xh, xq, yh, yq] = rec.tone_powers;
        assert!(xh / (xh + yh) >= 0.99 && yq / (xq + yq) >= 0.99);
    }

    #[test]
    fn exact_inverse_round_trip() {
        let params = DspParams::default();
        let t = tone_burst(&params);
        let j = apply_jones(&t, 0.71, 4.2).unwrap();
        let back = recover_sop(&j, &SopEstimate { alpha_hat: 0.71, theta_hat: 4.2, tone_powers: [0.0; 4] });
        assert!(back.max_abs_diff(&t) < 1e-9);
    }

    #[test]
    fn power_sum_is_one_sinusoid() {
        let params = DspParams::default();
        let r = pre_a_inner(&apply_jones(&tone_burst(&params), 0.4, 2.2).unwrap());
        let p = tone_projections(&r, &params);
        let curve = power_sum_curve(&p, 0.4, 360);
        let peaks = (0..360)
            .filter(|&i| curve[i] > curve[(i + 359) % 360] && curve[i] >= curve[(i + 1) % 360])
            .count();
        assert_eq!(peaks, 1);
        // Fit A + B cos + C sin from 8 samples, check all 360.
        let s8 = power_sum_curve(&p, 0.4, 8);
        let a = s8.iter().sum::<f64>() / 8.0;
        let b = s8.iter().enumerate().map(|(i, v)| v * (2.0 * PI * i as f64 / 8.0).cos()).sum::<f64>() / 4.0;
        let c = s8.iter().enumerate().map(|(i, v)| v * (2.0 * PI * i as f64 / 8.0).sin()).sum::<f64>() / 4.0;
        let scale = curve.iter().copied().fold(0.0, f64::max);
        for (i, v) in curve.iter().enumerate() {
            let t = 2.0 * PI * i as f64 / 360.0;
            assert!((a + b * t.cos() + c * t.sin() - v).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn sinusoid_refinement_is_exact() {
        let f = |t: f64| 3.0 + 2.0 * (t - 0.123).cos();
        let d = 0.05;
        let t = sinusoid_peak(0.1, d, f(0.1 - d), f(0.1), f(0.1 + d));
        assert!((t - 0.123).abs() < 1e-12);
    }

    #[test]
    fn data_only_is_unreliable() {
        let params = DspParams::default();
        let noise = crate::bmdsp::testutil::noise(256, 3);
        assert!(matches!(estimate_sop(&noise, &params), Err(DspError::EstimationUnreliable(_))));
    }
}
