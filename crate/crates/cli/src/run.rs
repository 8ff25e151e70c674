//! Scene construction, the end-to-end run and the parameter sweep.

use std::fmt::Write as _;

use cotdma::bmdsp::{run_pipeline_traced, BurstTrace, RxReport};
use cotdma::channel::{assemble_uplink, random_bits, transmit, UplinkBurst, UplinkScene};
use cotdma::metrics::SweepPoint;
use cotdma::preambles::{build_preamble_b_len, gen_preamble_a, payload_bits_per_pol, FrameLayout, PilotSource};
use cotdma::sigcore::DEFAULT_SPAN;
use cotdma::QamGrid;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Payload seeds of burst `i` under master seed `seed`.
fn bit_seeds(seed: u64, i: usize) -> (u64, u64) {
    let base = seed.wrapping_mul(1_000_003).wrapping_add(2 * i as u64);
    (base, base + 1)
}

pub fn build_scene(cfg: &ExperimentConfig, seed: u64) -> Result<UplinkScene, CliError> {
    let stage = |e: cotdma::DspError| CliError::Validation(e.to_string());
    let layout = FrameLayout::with_preamble_b_block(cfg.rx.pre_b_block);
    let pre_a = gen_preamble_a();
    let pre_b = build_preamble_b_len(cfg.rx.pre_b_block, cfg.rx.root_x, cfg.rx.root_y).map_err(stage)?;
    let pilots = PilotSource::new(cfg.rx.pilot_seed);
    let grid = QamGrid::gray16();
    let n = payload_bits_per_pol(&layout);
    let mut bursts = Vec::with_capacity(cfg.bursts.len());
    for (i, ch) in cfg.bursts.iter().enumerate() {
        let (sx, sy) = bit_seeds(seed, i);
        let tx = transmit(
            [random_bits(n, sx), random_bits(n, sy)],
            &pre_a,
            &pre_b,
            &pilots,
            &grid,
            &cfg.dsp,
            DEFAULT_SPAN,
        )
        .map_err(stage)?;
        bursts.push(UplinkBurst { tx, config: ch.clone() });
    }
    assemble_uplink(bursts, cfg.guard_ns, &cfg.dsp, seed).map_err(stage)
}

pub fn receive(cfg: &ExperimentConfig, seed: u64) -> Result<(UplinkScene, Vec<(RxReport, BurstTrace)>), CliError> {
    let scene = build_scene(cfg, seed)?;
    let out = run_pipeline_traced(&scene, &cfg.dsp, &cfg.loop_cfg, &cfg.rx).map_err(CliError::Stage)?;
    Ok((scene, out))
}

pub const SUMMARY_HEADER: &str = "burst,ber,ber_first,bit_errors,bits_compared,total_df_hz,df_error_hz,alpha_hat,theta_hat,tau0,frame_start_sample,pmnr_db,final_mse,cycle_slips";

/// One summary row per burst, against the configured impairments.
pub fn summary_csv(cfg: &ExperimentConfig, reports: &[RxReport]) -> String {
    let mut s = String::new();
    writeln!(s, "{SUMMARY_HEADER}").ok();
    for r in reports {
        let truth = cfg.bursts.get(r.burst).map(|b| b.delta_f).unwrap_or(f64::NAN);
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.burst,
            r.ber.ber,
            r.ber.ber_first.unwrap_or(f64::NAN),
            r.ber.bit_errors,
            r.ber.bits_compared,
            r.total_df,
            r.total_df - truth,
            r.sop.alpha_hat,
            r.sop.theta_hat,
            r.tau0,
            r.frame_start_sample,
            r.sync.pmnr_db,
            r.mse_trajectory.last().copied().unwrap_or(f64::NAN),
            r.cycle_slips.len()
        )
        .ok();
    }
    s
}

/// Metrics recorded for every burst of every sweep run.
pub const SWEEP_METRICS: &[&str] = &["ber", "ber_first", "df_abs_error_hz", "pmnr_db", "final_mse", "tau_abs_error"];

pub const RUNS_HEADER: &str = "variable,value,seed,burst,metric,result";

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub value: f64,
    pub seed: u64,
    pub burst: usize,
    pub metric: &'static str,
    pub result: f64,
}

fn metrics_of(cfg: &ExperimentConfig, r: &RxReport) -> [f64; 6] {
    let b = &cfg.bursts[r.burst];
    [
        r.ber.ber,
        r.ber.ber_first.unwrap_or(f64::NAN),
        (r.total_df - b.delta_f).abs(),
        r.sync.pmnr_db,
        r.mse_trajectory.last().copied().unwrap_or(f64::NAN),
        cotdma::bmdsp::wrap_half(r.tau_final - b.tau).abs(),
    ]
}

pub struct SweepOutput {
    pub variable: &'static str,
    pub runs: Vec<RunRow>,
    pub points: Vec<SweepPoint>,
}

/// Every (value, seed) pair runs as an independent job; the first stage
/// failure aborts the sweep.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepOutput, CliError> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Validation("sweep needs a [sweep] table".into()))?;
    let (variable, values) = spec.variable()?;
    let jobs: Vec<(f64, u64)> = values
        .iter()
        .flat_map(|&v| (0..cfg.seeds as u64).map(move |s| (v, s)))
        .collect();
    let runs: Vec<Vec<RunRow>> = jobs
        .par_iter()
        .map(|&(v, s)| -> Result<Vec<RunRow>, CliError> {
            let c = cfg.with_value(variable, v)?;
            let seed = cfg.seed.wrapping_add(s);
            let (_, out) = receive(&c, seed)?;
            Ok(out
                .iter()
                .flat_map(|(r, _)| {
                    let m = metrics_of(&c, r);
                    SWEEP_METRICS.iter().zip(m).map(move |(name, result)| RunRow {
                        value: v,
                        seed,
                        burst: r.burst,
                        metric: name,
                        result,
                    })
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let runs: Vec<RunRow> = runs.into_iter().flatten().collect();
    let mut points = Vec::new();
    for &v in &values {
        for &m in SWEEP_METRICS {
            let samples: Vec<f64> = runs
                .iter()
                .filter(|r| r.value == v && r.metric == m && r.result.is_finite())
                .map(|r| r.result)
                .collect();
            if samples.is_empty() {
                continue;
            }
            points.push(SweepPoint::aggregate(variable, v, m, &samples).map_err(CliError::Stage)?);
        }
    }
    Ok(SweepOutput { variable, runs, points })
}

pub fn runs_csv(variable: &str, runs: &[RunRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{RUNS_HEADER}").ok();
    for r in runs {
        writeln!(s, "{variable},{},{},{},{},{}", r.value, r.seed, r.burst, r.metric, r.result).ok();
    }
    s
}
