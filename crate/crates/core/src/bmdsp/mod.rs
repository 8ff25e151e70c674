//! Burst-mode receiver DSP: detection, polarization and timing acquisition,
//! frame sync, preamble-aided channel estimation, the delayed adaptive loops
//! and pilot-aided carrier recovery.

mod chanest;
mod cpr;
mod detect;
mod equalizer;
mod foe;
mod pipeline;
mod sop;
mod spo;
mod sync;
mod timing;

#[cfg(test)]
pub(crate) mod testutil;

use serde::{Deserialize, Serialize};

pub use crate::channel::cdc;
pub use chanest::{
    estimate_channel, mmse_estimate, mmse_uniqueness_check, preamble_b_blocks, residual_cost, zf_estimate, Blocks,
    ChanEstimate, SolutionClass, UniquenessReport, SINGULAR_TOL,
};
pub use cpr::{pilot_cpr, CprOutput, CycleSlip};
pub use detect::{detect_frame, detect_frame_from, tone_lines, DetectConfig, Detection};
pub use equalizer::{mimo_equalize, EqOutput, Training};
pub use foe::{fine_foe, fine_foe_cascade, DEFAULT_LAGS};
pub use pipeline::{
    acquire, receive_burst, run_pipeline, run_pipeline_traced, synchronize_burst, BurstTrace, FrontEnd, RxContext, RxOptions,
    RxReport, SyncedBurst,
};
pub use sop::{
    estimate_sop, inverse_jones, power_sum, power_sum_curve, recover_sop, sinusoid_peak, tone_projections,
    SopEstimate, ToneProjections,
};
pub use spo::{estimate_spo, spectral_product, wrap_half, Pol};
pub use sync::{block_correlation, frame_sync, timing_metric, SyncConfig, SyncResult, PMNR_EXCLUSION};
pub use timing::{beats_to_converge, godard_ted, timing_recover, Interpolator, TimingOutput};

/// Block-processing parameters shared by the timing and equalizer loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    /// Symbols per processing beat (one loop update per beat).
    pub beat_symbols: usize,
    /// Beats between a timing error measurement and its correction taking effect.
    pub tr_delay_beats: usize,
    /// Beats between an equalizer gradient and its tap update.
    pub eq_delay_beats: usize,
    pub tr_kp: f64,
    pub tr_ki: f64,
    /// DD-LMS step size, per symbol.
    pub ddlms_mu: f64,
    pub tr_enabled: bool,
    pub eq_enabled: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            beat_symbols: 100,
            tr_delay_beats: 20,
            eq_delay_beats: 60,
            tr_kp: 1e-2,
            tr_ki: 1e-4,
            ddlms_mu: 2e-4,
            tr_enabled: true,
            eq_enabled: true,
        }
    }
}

/// How the initial equalizer taps are obtained from Preamble B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstMethod {
    #[default]
    Mmse,
    Zf,
}

impl std::str::FromStr for EstMethod {
    type Err = crate::error::DspError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mmse" => Ok(Self::Mmse),
            "zf" => Ok(Self::Zf),
            other => Err(crate::error::DspError::Config(format!("unknown estimation method '{other}'"))),
        }
    }
}
