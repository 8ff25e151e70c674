//! The composed burst receiver.

use serde::{Deserialize, Serialize};

use super::chanest::{estimate_channel, mmse_uniqueness_check, preamble_b_blocks, ChanEstimate};
use super::cpr::{pilot_cpr, CycleSlip};
use super::detect::{detect_frame_from, DetectConfig};
use super::equalizer::{mimo_equalize, Training};
use super::foe::fine_foe_cascade;
use super::sop::{estimate_sop, recover_sop, SopEstimate};
use super::spo::{estimate_spo, wrap_half, Pol};
use super::sync::{frame_sync, SyncConfig, SyncResult};
use super::timing::{timing_recover, TimingOutput};
use super::{EstMethod, LoopConfig};
use crate::channel::{cdc, derotate, UplinkScene};
use crate::error::{DspError, Result};
use crate::metrics::{ber, interleave_pol_bits, BerRecord};
use crate::preambles::{
    build_preamble_b_len, extract_payload, gen_preamble_a, FrameLayout, PilotSource, PreambleA, PreambleB,
    DEFAULT_ROOT_X, DEFAULT_ROOT_Y, PRE_B_BLOCK,
};
use crate::sigcore::{matched_filter, qam16_demap, DspParams, DualPolBurst, QamGrid, RrcFilter, C64, DEFAULT_SPAN};

/// Samples skipped at each end of the detected Preamble A window before the
/// tone-based estimators (filter transients and detection slack).
const PRE_A_TRIM: usize = 24;
/// Samples kept ahead of the detected Preamble A.
const LEAD_SAMPLES: usize = 256;
/// Extra symbols kept past the nominal frame end.
const TAIL_SYMBOLS: usize = 64;

/// Receiver settings that are not part of the loop model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RxOptions {
    pub method: EstMethod,
    pub root_x: i64,
    pub root_y: i64,
    pub pre_b_block: usize,
    pub pilot_seed: u64,
    /// Fiber assumed by the dispersion compensator.
    pub cdc_fiber_km: f64,
    pub cdc_disp_ps_nm_km: f64,
    pub cdc_lambda_nm: f64,
    pub detect_window_symbols: usize,
    pub detect_threshold: f64,
    /// Fine FOE lags in symbols, applied in order.
    pub foe_lags: Vec<usize>,
    /// Half-width of the frame sync search around the expected Preamble B start, symbols.
    pub sync_search_symbols: usize,
    pub pmnr_floor_db: f64,
    /// Pilots averaged on each side when estimating the carrier phase.
    pub cpr_half_window: usize,
    /// Leading window for the reported first-N BER.
    pub ber_first_n: usize,
}

impl Default for RxOptions {
    fn default() -> Self {
        Self {
            method: EstMethod::Mmse,
            root_x: DEFAULT_ROOT_X,
            root_y: DEFAULT_ROOT_Y,
            pre_b_block: PRE_B_BLOCK,
            pilot_seed: PilotSource::default().seed,
            cdc_fiber_km: 20.0,
            cdc_disp_ps_nm_km: 17.0,
            cdc_lambda_nm: 1550.0,
            detect_window_symbols: 128,
            detect_threshold: 0.3,
            foe_lags: super::foe::DEFAULT_LAGS.to_vec(),
            sync_search_symbols: 256,
            pmnr_floor_db: 3.0,
            cpr_half_window: 2,
            ber_first_n: 20_000,
        }
    }
}

/// Everything the receiver knows ahead of time, derived from [`RxOptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct RxContext {
    pub pre_a: PreambleA,
    pub pre_b: PreambleB,
    pub layout: FrameLayout,
    pub pilots: [Vec<C64>; 2],
    pub grid: QamGrid,
    pub training: Training,
}

impl RxContext {
    pub fn new(opts: &RxOptions) -> Result<Self> {
        let pre_a = gen_preamble_a();
        let pre_b = build_preamble_b_len(opts.pre_b_block, opts.root_x, opts.root_y)?;
        let layout = FrameLayout::with_preamble_b_block(opts.pre_b_block);
        let grid = QamGrid::gray16();
        let src = PilotSource::new(opts.pilot_seed);
        let pilots = [src.symbols(0, layout.n_pilot, &grid), src.symbols(1, layout.n_pilot, &grid)];
        let training = Training::new(layout, &pre_a, &pre_b, &pilots)?;
        Ok(Self {
            pre_a,
            pre_b,
            layout,
            pilots,
            grid,
            training,
        })
    }
}

/// Per-burst recovery record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxReport {
    pub burst: usize,
    /// Stream sample where the detected Preamble A window starts.
    pub detected_index: usize,
    pub detection_score: f64,
    pub coarse_df: f64,
    /// Residual offset found after coarse compensation.
    pub fine_df: f64,
    /// Total offset removed (coarse plus fine), Hz.
    pub total_df: f64,
    pub sop: SopEstimate,
    /// Sampling phase handed to timing recovery, symbols.
    pub tau0: f64,
    pub tau_final: f64,
    pub sync: SyncResult,
    /// Stream sample of the recovered frame's first symbol.
    pub frame_start_sample: f64,
    pub method: EstMethod,
    pub estimate_unique: bool,
    pub mse_trajectory: Vec<f64>,
    pub cycle_slips: Vec<CycleSlip>,
    pub ber: BerRecord,
    pub ber_x: f64,
    pub ber_y: f64,
}

/// Intermediate data kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstTrace {
    /// Coarse-compensated Preamble A segment used for SOP estimation.
    pub pre_a_segment: DualPolBurst,
    pub tau_trajectory: Vec<f64>,
    pub ted: Vec<f64>,
    pub sync_metric_x: Vec<f64>,
    pub sync_metric_y: Vec<f64>,
    pub sync_search_start: usize,
    pub initial_taps: ChanEstimate,
    pub final_taps: [[Vec<C64>; 2]; 2],
    pub cpr_phase: [Vec<f64>; 2],
    /// Recovered payload symbols per polarization.
    pub payload: [Vec<C64>; 2],
}

/// Result of the stages ahead of timing recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEnd {
    pub detected_index: usize,
    pub detection_score: f64,
    pub coarse_df: f64,
    pub fine_df: f64,
    pub sop: SopEstimate,
    /// Sampling phase relative to `segment_start`.
    pub tau0: f64,
    pub segment_start: usize,
    /// Filtered, compensated segment ready for timing recovery.
    pub segment: DualPolBurst,
    pub pre_a_segment: DualPolBurst,
}

/// Detect the next burst at or after `cursor` and run the acquisition stages
/// (coarse FOE, SOP, matched filter, CDC, SPO, fine FOE).
pub fn acquire(
    stream: &DualPolBurst,
    cursor: usize,
    params: &DspParams,
    opts: &RxOptions,
    layout: &FrameLayout,
) -> std::result::Result<FrontEnd, (&'static str, DspError)> {
    let k = params.sps().map_err(|e| ("config", e))?;
    let dcfg = DetectConfig {
        window_symbols: opts.detect_window_symbols,
        threshold: opts.detect_threshold,
        ..DetectConfig::default()
    };
    let det = detect_frame_from(stream, params, &dcfg, cursor).map_err(|e| ("detect_frame", e))?;
    let seg_start = det.index.saturating_sub(LEAD_SAMPLES);
    let seg_end = (det.index + (layout.total + TAIL_SYMBOLS) * k).min(stream.len());
    let raw = derotate(&stream.slice(seg_start, seg_end), det.coarse_df);

    let win = dcfg.window_symbols * k;
    let a0 = det.index - seg_start + PRE_A_TRIM;
    let a1 = det.index - seg_start + win.saturating_sub(PRE_A_TRIM);
    // Both tone estimators need whole tone periods.
    let a1 = a0 + (a1.saturating_sub(a0)) / (4 * k) * (4 * k);
    if a1 > raw.len() || a1 <= a0 {
        return Err(("estimate_sop", DspError::InputShape("Preamble A window runs past the stream".into())));
    }
    let pre_a_segment = raw.slice(a0, a1);
    let sop = estimate_sop(&pre_a_segment, params).map_err(|e| ("estimate_sop", e))?;
    let rec = recover_sop(&raw, &sop);

    let rrc = RrcFilter::design(params, DEFAULT_SPAN).map_err(|e| ("matched_filter", e))?;
    let mf = DualPolBurst::new(matched_filter(&rec.x, &rrc), matched_filter(&rec.y, &rrc), rec.fs)
        .map_err(|e| ("matched_filter", e))?;
    let comp = cdc(&mf, opts.cdc_fiber_km, opts.cdc_disp_ps_nm_km, opts.cdc_lambda_nm);

    let block = comp.slice(a0, a1);
    let tau_block = estimate_spo(&block, params, Pol::X).map_err(|e| ("estimate_spo", e))?;
    let tau0 = wrap_half(tau_block + a0 as f64 / k as f64);
    let fine_df = fine_foe_cascade(&block, params, &opts.foe_lags).map_err(|e| ("fine_foe", e))?;
    let segment = derotate(&comp, fine_df);
    Ok(FrontEnd {
        detected_index: det.index,
        detection_score: det.score,
        coarse_df: det.coarse_df,
        fine_df,
        sop,
        tau0,
        segment_start: seg_start,
        segment,
        pre_a_segment,
    })
}

/// Acquisition, timing recovery and frame sync for the next burst at or after `cursor`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncedBurst {
    pub front: FrontEnd,
    pub timing: TimingOutput,
    pub sync: SyncResult,
    /// Index in `timing.symbols` of the frame's first symbol.
    pub frame_start: usize,
}

pub fn synchronize_burst(
    stream: &DualPolBurst,
    cursor: usize,
    burst: usize,
    params: &DspParams,
    loop_cfg: &LoopConfig,
    opts: &RxOptions,
    ctx: &RxContext,
) -> Result<SyncedBurst> {
    let at = |stage: &'static str| move |e: DspError| e.at_stage(burst, stage);
    let k = params.sps().map_err(at("config"))?;
    let front = acquire(stream, cursor, params, opts, &ctx.layout).map_err(|(s, e)| e.at_stage(burst, s))?;
    let timing = timing_recover(&front.segment, params, Some(front.tau0), loop_cfg).map_err(at("timing_recover"))?;
    // Preamble A nominally starts LEAD_SAMPLES into the segment.
    let expected_b = (front.detected_index - front.segment_start) / k + ctx.layout.n_pre_a;
    let scfg = SyncConfig {
        search: Some((
            expected_b.saturating_sub(opts.sync_search_symbols),
            expected_b + opts.sync_search_symbols + 1,
        )),
        pmnr_floor_db: opts.pmnr_floor_db,
    };
    let sync = frame_sync(&timing.symbols, &ctx.pre_b, &scfg).map_err(at("frame_sync"))?;
    let frame_start = sync.position.checked_sub(ctx.layout.n_pre_a).ok_or_else(|| {
        DspError::InputShape("frame sync placed Preamble B before the segment start".into()).at_stage(burst, "frame_sync")
    })?;
    Ok(SyncedBurst {
        front,
        timing,
        sync,
        frame_start,
    })
}

/// Receive one burst starting the search at `cursor`. Returns the report,
/// the trace and the cursor for the next burst.
#[allow(clippy::too_many_arguments)]
pub fn receive_burst(
    stream: &DualPolBurst,
    cursor: usize,
    burst: usize,
    tx_bits: &[Vec<u8>; 2],
    params: &DspParams,
    loop_cfg: &LoopConfig,
    opts: &RxOptions,
    ctx: &RxContext,
) -> Result<(RxReport, BurstTrace, usize)> {
    let at = |stage: &'static str| move |e: DspError| e.at_stage(burst, stage);
    let k = params.sps().map_err(at("config"))?;
    let SyncedBurst {
        front: fe,
        timing: tr,
        sync,
        frame_start,
    } = synchronize_burst(stream, cursor, burst, params, loop_cfg, opts, ctx)?;
    let sym = &tr.symbols;

    let (rx_b, tx_b) = preamble_b_blocks(sym, sync.position, &ctx.pre_b).map_err(at("channel_estimate"))?;
    let unique = mmse_uniqueness_check(&rx_b, &tx_b)
        .map(|r| r.all_unique())
        .map_err(at("channel_estimate"))?;
    let est = estimate_channel(opts.method, &rx_b, &tx_b).map_err(at("channel_estimate"))?;
    let eq = mimo_equalize(sym, frame_start, &est, loop_cfg, &ctx.grid, &ctx.training).map_err(at("mimo_equalize"))?;
    let cpr = pilot_cpr(&eq.symbols, &ctx.layout, &ctx.pilots, opts.cpr_half_window).map_err(at("pilot_cpr"))?;

    let payload = [0, 1].map(|p| extract_payload(cpr.symbols.pol(p), &ctx.layout));
    let bits = payload.clone().map(|s| qam16_demap(&s, &ctx.grid));
    let tx_all = interleave_pol_bits(&tx_bits[0], &tx_bits[1]);
    let rx_all = interleave_pol_bits(&bits[0], &bits[1]);
    let ber_rec = ber(&tx_all, &rx_all, Some(opts.ber_first_n)).map_err(at("ber"))?;
    let ber_x = ber(&tx_bits[0], &bits[0], None).map_err(at("ber"))?.ber;
    let ber_y = ber(&tx_bits[1], &bits[1], None).map_err(at("ber"))?.ber;

    let tau_final = tr.tau_trajectory.last().copied().unwrap_or(fe.tau0);
    let frame_start_sample = fe.segment_start as f64 + k as f64 * (frame_start as f64 + tau_final);
    let next = (fe.segment_start + (frame_start + ctx.layout.total) * k).max(fe.detected_index + 1);
    let trace = BurstTrace {
        pre_a_segment: fe.pre_a_segment,
        tau_trajectory: tr.tau_trajectory.clone(),
        ted: tr.ted.clone(),
        sync_metric_x: sync.metric_x.clone(),
        sync_metric_y: sync.metric_y.clone(),
        sync_search_start: sync.search_start,
        initial_taps: est.clone(),
        final_taps: eq.final_taps,
        cpr_phase: cpr.phase,
        payload,
    };
    let report = RxReport {
        burst,
        detected_index: fe.detected_index,
        detection_score: fe.detection_score,
        coarse_df: fe.coarse_df,
        fine_df: fe.fine_df,
        total_df: fe.coarse_df + fe.fine_df,
        sop: fe.sop,
        tau0: fe.tau0,
        tau_final,
        sync,
        frame_start_sample,
        method: opts.method,
        estimate_unique: unique,
        mse_trajectory: eq.mse_trajectory,
        cycle_slips: cpr.cycle_slips,
        ber: ber_rec,
        ber_x,
        ber_y,
    };
    Ok((report, trace, next))
}

/// Recover every burst of `scene` in order.
pub fn run_pipeline(
    scene: &UplinkScene,
    params: &DspParams,
    loop_cfg: &LoopConfig,
    opts: &RxOptions,
) -> Result<Vec<RxReport>> {
    Ok(run_pipeline_traced(scene, params, loop_cfg, opts)?
        .into_iter()
        .map(|(r, _)| r)
        .collect())
}

/// [`run_pipeline`] that also returns the per-burst traces.
pub fn run_pipeline_traced(
    scene: &UplinkScene,
    params: &DspParams,
    loop_cfg: &LoopConfig,
    opts: &RxOptions,
) -> Result<Vec<(RxReport, BurstTrace)>> {
    params.validate()?;
    let ctx = RxContext::new(opts)?;
    let mut cursor = 0;
    let mut out = Vec::with_capacity(scene.bursts.len());
    for (i, b) in scene.bursts.iter().enumerate() {
        let (report, trace, next) = receive_burst(&scene.stream, cursor, i, &b.tx.bits, params, loop_cfg, opts, &ctx)?;
        cursor = next;
        out.push((report, trace));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmdsp::testutil::scene_one;
    use crate::channel::ChannelConfig;

    #[test]
    fn back_to_back_is_error_free() {
        let s = scene_one(ChannelConfig::identity(), 1);
        let r = run_pipeline(&s, &DspParams::default(), &LoopConfig::default(), &RxOptions::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].ber.bit_errors, 0);
        assert!(r[0].estimate_unique);
        let truth = s.burst_starts[0] as f64;
        assert!((r[0].frame_start_sample - truth).abs() < 0.1, "{}", r[0].frame_start_sample);
    }

    #[test]
    fn impaired_burst_below_fec() {
        let cfg = ChannelConfig {
            alpha: 0.3,
            theta: 1.0,
            delta_f: 1e9,
            tau: 0.2,
            snr_db: Some(20.0),
            ..ChannelConfig::default()
        };
        let s = scene_one(cfg, 2);
        let r = run_pipeline(&s, &DspParams::default(), &LoopConfig::default(), &RxOptions::default()).unwrap();
        assert!(r[0].ber.ber < 2.4e-2, "{:?}", r[0].ber.ber);
        assert!((r[0].total_df - 1e9).abs() < 10e6);
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let mut s = scene_one(ChannelConfig::identity(), 3);
        s.stream = DualPolBurst::zeros(s.stream.len(), s.stream.fs);
        let e = run_pipeline(&s, &DspParams::default(), &LoopConfig::default(), &RxOptions::default()).unwrap_err();
        assert_eq!(e.stage(), Some("detect_frame"));
    }

    #[test]
    fn report_round_trips_through_json() {
        let s = scene_one(ChannelConfig::identity(), 4);
        let r = run_pipeline(&s, &DspParams::default(), &LoopConfig::default(), &RxOptions::default()).unwrap();
        let j = serde_json::to_string(&r[0]).unwrap();
        let back: RxReport = serde_json::from_str(&j).unwrap();
        assert_eq!(back.ber, r[0].ber);
        assert_eq!(back.mse_trajectory, r[0].mse_trajectory);
    }
}
