use super::C64;
use crate::error::{DspError, Result};

/// Per-axis Gray code for the two bits of one rail: 00, 01, 11, 10 -> -3, -1, +1, +3.
fn gray_level(b_hi: u8, b_lo: u8) -> f64 {
    match (b_hi, b_lo) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

/// Gray-labeled square 16QAM with unit average power. The label's two most
/// significant bits select the in-phase rail, the two least significant the
/// quadrature rail; bit streams are read MSB first.
#[derive(Debug, Clone, PartialEq)]
pub struct QamGrid {
    points: [C64; 16],
}

impl Default for QamGrid {
    fn default() -> Self {
        Self::gray16()
    }
}

impl QamGrid {
    pub fn gray16() -> Self {
        let scale = 1.0 / 10f64.sqrt();
        let mut points = [C64::new(0.0, 0.0); 16];
        for (label, p) in points.iter_mut().enumerate() {
            let b = |i: usize| ((label >> (3 - i)) & 1) as u8;
            *p = C64::new(gray_level(b(0), b(1)), gray_level(b(2), b(3))) * scale;
        }
        Self { points }
    }

    pub fn order(&self) -> usize {
        16
    }

    pub fn points(&self) -> &[C64; 16] {
        &self.points
    }

    pub fn point(&self, label: u8) -> C64 {
        self.points[label as usize & 15]
    }

    /// Minimum-distance label; exact ties resolve to the smallest label.
    pub fn decide(&self, s: C64) -> u8 {
        let mut best = 0u8;
        let mut best_d = f64::INFINITY;
        for (label, p) in self.points.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label as u8;
            }
        }
        best
    }

    /// Nearest constellation point.
    pub fn slice(&self, s: C64) -> C64 {
        self.point(self.decide(s))
    }

    /// The four corner points (outer ring), used as pilots.
    pub fn corners(&self) -> [C64; 4] {
        let a = 3.0 / 10f64.sqrt();
        [
            C64::new(a, a),
            C64::new(-a, a),
            C64::new(-a, -a),
            C64::new(a, -a),
        ]
    }
}

/// Map bits (0/1, MSB first, 4 per symbol) onto the grid.
pub fn qam16_map(bits: &[u8], grid: &QamGrid) -> Result<Vec<C64>> {
    if !bits.len().is_multiple_of(4) {
        return Err(DspError::InputShape(format!(
            "16QAM needs a multiple of 4 bits, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(4)
        .map(|c| {
            let label = c.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1));
            grid.point(label)
        })
        .collect())
}

/// Hard-decision demapping back to bits.
pub fn qam16_demap(symbols: &[C64], grid: &QamGrid) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * 4);
    for &s in symbols {
        let label = grid.decide(s);
        bits.extend((0..4).rev().map(|i| (label >> i) & 1));
    }
    bits
}
