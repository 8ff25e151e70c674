//! Burst-mode coherent optical TDMA: transmit-side frame synthesis, a parametric
//! fiber/receiver impairment model, and the preamble-driven burst receiver chain
//! (SOP, FOE, SPO, frame sync, MMSE/ZF channel estimation, DD-LMS MIMO
//! equalization and pilot CPR).
//!
//! Modules map one-to-one onto the processing stages:
//!
//! - [`sigcore`]: complex containers, DFT, RRC shaping, resampling, 16QAM.
//! - [`preambles`]: Preamble A tones, Preamble B signed CAZAC triplets, frame layout.
//! - [`channel`]: Jones rotation, CD, CFO + phase noise, fractional delay, AWGN, uplink assembly.
//! - [`bmdsp`]: the receiver blocks and the composed pipeline.
//! - [`metrics`]: BER, PMNR, MSE and the independent least-squares oracle.

pub mod bmdsp;
pub mod channel;
pub mod error;
pub mod metrics;
pub mod preambles;
pub mod sigcore;

pub use error::{DspError, Result};
pub use sigcore::{DualPolBurst, DspParams, PolStream, QamGrid, C64};
