use std::cell::RefCell;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::C64;
use crate::error::{DspError, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Fixed-size DFT pair. Forward is unscaled, inverse carries the 1/N.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(DspError::Config("DFT size must be positive".into()));
        }
        Ok(Self {
            n,
            fwd: plan(n, false),
            inv: plan(n, true),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(DspError::InputShape(format!(
                "DFT expects {} samples, got {len}",
                self.n
            )));
        }
        Ok(())
    }

    pub fn forward(&self, block: &[C64]) -> Result<Vec<C64>> {
        self.check(block.len())?;
        let mut buf = block.to_vec();
        self.fwd.process(&mut buf);
        Ok(buf)
    }

    pub fn inverse(&self, spectrum: &[C64]) -> Result<Vec<C64>> {
        self.check(spectrum.len())?;
        let mut buf = spectrum.to_vec();
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        Ok(buf)
    }

    pub fn forward_in_place(&self, buf: &mut [C64]) -> Result<()> {
        self.check(buf.len())?;
        self.fwd.process(buf);
        Ok(())
    }

    pub fn inverse_in_place(&self, buf: &mut [C64]) -> Result<()> {
        self.check(buf.len())?;
        self.inv.process(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }
}

/// Forward DFT of a block whose length must equal `n_dft`.
pub fn dft(block: &[C64], n_dft: usize) -> Result<Vec<C64>> {
    Dft::new(n_dft)?.forward(block)
}

/// Inverse DFT (1/N scaled) of a spectrum whose length must equal `n_dft`.
pub fn idft(spectrum: &[C64], n_dft: usize) -> Result<Vec<C64>> {
    Dft::new(n_dft)?.inverse(spectrum)
}

/// Unscaled forward FFT of any length.
pub fn fft(x: &[C64]) -> Vec<C64> {
    let mut buf = x.to_vec();
    if !buf.is_empty() {
        plan(buf.len(), false).process(&mut buf);
    }
    buf
}

/// Inverse FFT of any length, scaled by 1/N.
pub fn ifft(x: &[C64]) -> Vec<C64> {
    let mut buf = x.to_vec();
    if !buf.is_empty() {
        plan(buf.len(), true).process(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
    buf
}

/// Signed frequency of every FFT bin (natural order), in Hz.
pub fn fft_freqs(n: usize, fs: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let k = k as i64;
            let signed = if 2 * k >= n as i64 { k - n as i64 } else { k };
            signed as f64 * fs / n as f64
        })
        .collect()
}

/// Reorder natural-order bins so that DC sits at index `n/2`.
pub fn fftshift<T: Clone>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let half = n.div_ceil(2);
    x[half..].iter().chain(&x[..half]).cloned().collect()
}
