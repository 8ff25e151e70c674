//! Transmit-side burst construction: the tone preamble (A), the signed CAZAC
//! preamble (B), pilots, and the pilot-interleaved burst frame.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::sigcore::{qam16_demap, qam16_map, QamGrid, C64};

pub const PRE_A_LEN: usize = 128;
/// Period of the X tone sequence (R_s/2 line).
pub const PERIOD_X: usize = 2;
/// Period of the Y tone sequence (R_s/4 lines).
pub const PERIOD_Y: usize = 4;
pub const PRE_B_BLOCK: usize = 64;
pub const SIGN_X: [f64; 3] = [1.0, 1.0, -1.0];
pub const SIGN_Y: [f64; 3] = [-1.0, 1.0, 1.0];
pub const DEFAULT_ROOT_X: i64 = 1;
pub const DEFAULT_ROOT_Y: i64 = 3;

/// Tone preamble. X carries the period-2 sequence (line at ±R_s/2, which is one
/// line at symbol rate); Y carries a period-4 constant-modulus sequence with a
/// symmetric pair of lines at ±R_s/4.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleA {
    pub x_symbols: Vec<C64>,
    pub y_symbols: Vec<C64>,
}

/// Common unit-modulus QPSK phase of both tone sequences.
fn tone_phase() -> C64 {
    C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)
}

pub fn gen_preamble_a() -> PreambleA {
    let c = tone_phase();
    let x_symbols = (0..PRE_A_LEN).map(|n| c * (PI * n as f64).cos()).collect();
    // sqrt(2) cos(pi n / 2 - pi / 4) = 1, 1, -1, -1, ...
    let y_symbols = (0..PRE_A_LEN)
        .map(|n| c * (2f64.sqrt() * (PI * n as f64 / 2.0 - PI / 4.0).cos()))
        .collect();
    PreambleA { x_symbols, y_symbols }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zadoff-Chu sequence of the given length and root.
pub fn gen_cazac(length: usize, root: i64) -> Result<Vec<C64>> {
    if length == 0 || gcd(root, length as i64) != 1 {
        return Err(DspError::InvalidSeed { root, len: length });
    }
    let n_len = length as i64;
    Ok((0..n_len)
        .map(|n| {
            // Reduce the quadratic index modulo 2N before converting to f64.
            let q = if length.is_multiple_of(2) {
                (root * ((n * n) % (2 * n_len))) % (2 * n_len)
            } else {
                (root * ((n * (n + 1)) % (2 * n_len))) % (2 * n_len)
            };
            C64::from_polar(1.0, -PI * q as f64 / n_len as f64)
        })
        .collect())
}

/// Signed CAZAC preamble: X = [B_X, B_X, -B_X], Y = [-B_Y, B_Y, B_Y].
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleB {
    pub bx: Vec<C64>,
    pub by: Vec<C64>,
    pub sign_x: [f64; 3],
    pub sign_y: [f64; 3],
    pub assembled_x: Vec<C64>,
    pub assembled_y: Vec<C64>,
}

pub fn build_preamble_b(root_x: i64, root_y: i64) -> Result<PreambleB> {
    build_preamble_b_len(PRE_B_BLOCK, root_x, root_y)
}

pub fn build_preamble_b_len(block_len: usize, root_x: i64, root_y: i64) -> Result<PreambleB> {
    if root_x == root_y {
        return Err(DspError::Config(format!(
            "Preamble B roots must differ between polarizations, both are {root_x}"
        )));
    }
    let bx = gen_cazac(block_len, root_x)?;
    let by = gen_cazac(block_len, root_y)?;
    Ok(PreambleB::with_signs(bx, by, SIGN_X, SIGN_Y))
}

impl PreambleB {
    /// Assemble from arbitrary blocks and sign patterns. Used directly by tests
    /// that probe degenerate (unsigned) layouts.
    pub fn with_signs(bx: Vec<C64>, by: Vec<C64>, sign_x: [f64; 3], sign_y: [f64; 3]) -> Self {
        let assemble = |b: &[C64], s: &[f64; 3]| -> Vec<C64> {
            s.iter().flat_map(|&g| b.iter().map(move |v| v * g)).collect()
        };
        let assembled_x = assemble(&bx, &sign_x);
        let assembled_y = assemble(&by, &sign_y);
        Self {
            bx,
            by,
            sign_x,
            sign_y,
            assembled_x,
            assembled_y,
        }
    }

    pub fn block_len(&self) -> usize {
        self.bx.len()
    }

    pub fn len(&self) -> usize {
        3 * self.bx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bx.is_empty()
    }

    pub fn block(&self, pol: usize) -> &[C64] {
        if pol == 0 {
            &self.bx
        } else {
            &self.by
        }
    }

    pub fn signs(&self, pol: usize) -> [f64; 3] {
        if pol == 0 {
            self.sign_x
        } else {
            self.sign_y
        }
    }

    pub fn assembled(&self, pol: usize) -> &[C64] {
        if pol == 0 {
            &self.assembled_x
        } else {
            &self.assembled_y
        }
    }
}

/// Symbol-level map of one burst (per polarization).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameLayout {
    pub n_pre_a: usize,
    pub n_pre_b: usize,
    /// Symbols per pilot block (one pilot followed by `pilot_block - 1` payload).
    pub pilot_block: usize,
    pub n_payload: usize,
    pub n_pilot: usize,
    pub total: usize,
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self::with_preamble_b_block(PRE_B_BLOCK)
    }
}

impl FrameLayout {
    pub const PAYLOAD: usize = 32_400;
    pub const PILOT_BLOCK: usize = 32;

    pub fn with_preamble_b_block(block_len: usize) -> Self {
        let per_block = Self::PILOT_BLOCK - 1;
        let n_pilot = Self::PAYLOAD.div_ceil(per_block);
        let n_pre_b = 3 * block_len;
        Self {
            n_pre_a: PRE_A_LEN,
            n_pre_b,
            pilot_block: Self::PILOT_BLOCK,
            n_payload: Self::PAYLOAD,
            n_pilot,
            total: PRE_A_LEN + n_pre_b + Self::PAYLOAD + n_pilot,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expect_pilots = self.n_payload.div_ceil(self.pilot_block.saturating_sub(1).max(1));
        if self.pilot_block < 2
            || self.n_pilot != expect_pilots
            || self.total != self.n_pre_a + self.n_pre_b + self.n_payload + self.n_pilot
            || !self.n_pre_b.is_multiple_of(3)
        {
            return Err(DspError::Config(format!("inconsistent frame layout {self:?}")));
        }
        Ok(())
    }

    pub fn preamble_len(&self) -> usize {
        self.n_pre_a + self.n_pre_b
    }

    /// Frame index of every pilot.
    pub fn pilot_positions(&self) -> Vec<usize> {
        (0..self.n_pilot)
            .map(|j| self.preamble_len() + j * self.pilot_block)
            .collect()
    }

    /// Frame index of every payload symbol, in transmission order.
    pub fn payload_positions(&self) -> Vec<usize> {
        (self.preamble_len()..self.total)
            .filter(|&i| !(i - self.preamble_len()).is_multiple_of(self.pilot_block))
            .collect()
    }

    /// Burst duration in seconds at baud rate `rs`.
    pub fn duration(&self, rs: f64) -> f64 {
        self.total as f64 / rs
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let layout: Self =
            serde_json::from_str(s).map_err(|e| DspError::Config(format!("layout JSON: {e}")))?;
        layout.validate()?;
        Ok(layout)
    }
}

/// Deterministic pilot generator shared by transmitter and receiver. Pilots are
/// the four corner points of the 16QAM grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotSource {
    pub seed: u64,
}

impl Default for PilotSource {
    fn default() -> Self {
        Self { seed: 0x5e_ed0f_b107 }
    }
}

impl PilotSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn symbols(&self, pol: usize, n: usize, grid: &QamGrid) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15 * pol as u64));
        let corners = grid.corners();
        (0..n).map(|_| corners[rng.random_range(0..4)]).collect()
    }
}

/// Per-polarization symbol sequences of one burst.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub x: Vec<C64>,
    pub y: Vec<C64>,
    pub layout: FrameLayout,
}

impl Frame {
    pub fn pol(&self, pol: usize) -> &[C64] {
        if pol == 0 {
            &self.x
        } else {
            &self.y
        }
    }
}

/// Bits per polarization for one burst.
pub fn payload_bits_per_pol(layout: &FrameLayout) -> usize {
    layout.n_payload * 4
}

pub fn build_frame(
    payload_bits: [&[u8]; 2],
    pre_a: &PreambleA,
    pre_b: &PreambleB,
    pilots: &PilotSource,
    grid: &QamGrid,
) -> Result<Frame> {
    let layout = FrameLayout::with_preamble_b_block(pre_b.block_len());
    let need = payload_bits_per_pol(&layout);
    let mut pols: [Vec<C64>; 2] = [Vec::new(), Vec::new()];
    for (pol, out) in pols.iter_mut().enumerate() {
        let bits = payload_bits[pol];
        if bits.len() != need {
            return Err(DspError::InputShape(format!(
                "polarization {pol}: expected {need} payload bits, got {}",
                bits.len()
            )));
        }
        let payload = qam16_map(bits, grid)?;
        let pil = pilots.symbols(pol, layout.n_pilot, grid);
        let tones = if pol == 0 { &pre_a.x_symbols } else { &pre_a.y_symbols };
        out.reserve(layout.total);
        out.extend_from_slice(tones);
        out.extend_from_slice(pre_b.assembled(pol));
        let per_block = layout.pilot_block - 1;
        for (j, chunk) in payload.chunks(per_block).enumerate() {
            out.push(pil[j]);
            out.extend_from_slice(chunk);
        }
        debug_assert_eq!(out.len(), layout.total);
    }
    let [x, y] = pols;
    Ok(Frame { x, y, layout })
}

/// Pull the payload symbols out of a frame-aligned symbol sequence.
pub fn extract_payload(symbols: &[C64], layout: &FrameLayout) -> Vec<C64> {
    layout
        .payload_positions()
        .into_iter()
        .filter_map(|i| symbols.get(i).copied())
        .collect()
}

/// Noiseless inverse of [`build_frame`]: recover the payload bits of both polarizations.
pub fn deserialize(frame: &Frame, grid: &QamGrid) -> [Vec<u8>; 2] {
    [
        qam16_demap(&extract_payload(&frame.x, &frame.layout), grid),
        qam16_demap(&extract_payload(&frame.y, &frame.layout), grid),
    ]
}
