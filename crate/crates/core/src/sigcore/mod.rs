//! Complex-signal containers and the numerical primitives shared by every stage:
//! DFT, RRC pulse shaping / matched filtering, rational resampling and 16QAM.

mod dft;
mod qam;
mod resample;
mod rrc;

use serde::{Deserialize, Serialize};

pub use dft::{dft, fft, fft_freqs, fftshift, idft, ifft, Dft};
pub use qam::{qam16_demap, qam16_map, QamGrid};
pub use resample::{rational_approx, resample};
pub use rrc::{matched_filter, rrc_shape, RrcFilter, DEFAULT_SPAN};

use crate::error::{DspError, Result};

/// One complex sample. All streams in the crate are double precision.
pub type C64 = num_complex::Complex64;

/// A single-polarization sample stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PolStream {
    pub samples: Vec<C64>,
    /// Sample rate in Sa/s.
    pub fs: f64,
}

impl PolStream {
    pub fn new(samples: Vec<C64>, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(DspError::Config(format!("sample rate must be positive, got {fs}")));
        }
        Ok(Self { samples, fs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Two aligned polarization tributaries sharing one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolBurst {
    pub x: Vec<C64>,
    pub y: Vec<C64>,
    pub fs: f64,
}

impl DualPolBurst {
    pub fn new(x: Vec<C64>, y: Vec<C64>, fs: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(DspError::InputShape(format!(
                "polarization lengths differ: x={} y={}",
                x.len(),
                y.len()
            )));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(DspError::Config(format!("sample rate must be positive, got {fs}")));
        }
        Ok(Self { x, y, fs })
    }

    pub fn from_streams(x: PolStream, y: PolStream) -> Result<Self> {
        if x.fs != y.fs {
            return Err(DspError::InputShape(format!(
                "polarization sample rates differ: {} vs {}",
                x.fs, y.fs
            )));
        }
        Self::new(x.samples, y.samples, x.fs)
    }

    pub fn zeros(len: usize, fs: f64) -> Self {
        Self {
            x: vec![C64::new(0.0, 0.0); len],
            y: vec![C64::new(0.0, 0.0); len],
            fs,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn pol(&self, idx: usize) -> &[C64] {
        if idx == 0 {
            &self.x
        } else {
            &self.y
        }
    }

    /// Copy of samples `[start, end)`, clamped to the stream.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.len());
        let start = start.min(end);
        Self {
            x: self.x[start..end].to_vec(),
            y: self.y[start..end].to_vec(),
            fs: self.fs,
        }
    }

    /// Mean power per polarization `(x, y)`.
    pub fn power(&self) -> (f64, f64) {
        (mean_power(&self.x), mean_power(&self.y))
    }

    pub fn total_energy(&self) -> f64 {
        self.x.iter().chain(&self.y).map(|s| s.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(&self.y)
            .all(|s| s.re.is_finite() && s.im.is_finite())
    }

    /// Largest per-sample absolute difference to `other` over both polarizations.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub fn mean_power(samples: &[C64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Symbol rate, oversampling, DFT size and roll-off shared by the Tx and Rx DSP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DspParams {
    /// Baud rate R_s.
    pub rs: f64,
    /// Samples per symbol K.
    pub k_os: f64,
    /// DFT size N.
    pub n_dft: usize,
    pub rolloff: f64,
}

impl Default for DspParams {
    fn default() -> Self {
        Self {
            rs: 32e9,
            k_os: 2.0,
            n_dft: 1024,
            rolloff: 0.1,
        }
    }
}

impl DspParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rs > 0.0 && self.rs.is_finite()) {
            return Err(DspError::Config(format!("rs must be > 0, got {}", self.rs)));
        }
        if !(self.k_os >= 2.0 && self.k_os.is_finite()) {
            return Err(DspError::Config(format!("k_os must be >= 2, got {}", self.k_os)));
        }
        if !self.n_dft.is_power_of_two() {
            return Err(DspError::Config(format!(
                "n_dft must be a power of two, got {}",
                self.n_dft
            )));
        }
        if !(self.rolloff > 0.0 && self.rolloff < 1.0) {
            return Err(DspError::Config(format!(
                "rolloff must lie in (0, 1), got {}",
                self.rolloff
            )));
        }
        Ok(())
    }

    /// Sample rate `rs * k_os`.
    pub fn fs(&self) -> f64 {
        self.rs * self.k_os
    }

    /// Integer samples per symbol; the receiver blocks run on an integer grid.
    pub fn sps(&self) -> Result<usize> {
        let k = self.k_os.round();
        if (self.k_os - k).abs() > 1e-9 || k < 2.0 {
            return Err(DspError::Config(format!(
                "an integer oversampling rate is required here, got {}",
                self.k_os
            )));
        }
        Ok(k as usize)
    }
}
