//! Per-stage dumps of one burst's intermediate data, one CSV per stage.

use cotdma::bmdsp::{recover_sop, BurstTrace, RxReport};
use cotdma::sigcore::{fft, fft_freqs, fftshift};
use cotdma::C64;

use crate::CliError;

pub const STAGES: &[&str] = &["sop_spectra", "taps", "timing_metric", "mse", "tau", "cpr_phase", "error_positions"];

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

fn power_db(v: &[C64]) -> Vec<f64> {
    fftshift(&fft(v)).iter().map(|c| 10.0 * (c.norm_sqr() + 1e-30).log10()).collect()
}

fn at(v: &[f64], i: usize) -> f64 {
    v.get(i).copied().unwrap_or(f64::NAN)
}

fn taps_table(trace: &BurstTrace) -> Table {
    // Initial taps are per DFT bin; final taps are per lag.
    let cols: Vec<&[C64]> = trace
        .initial_taps
        .taps
        .iter()
        .chain(&trace.final_taps)
        .flatten()
        .map(Vec::as_slice)
        .collect();
    let mut header = vec!["index"];
    header.extend([
        "init_bin_xx_re", "init_bin_xx_im", "init_bin_xy_re", "init_bin_xy_im",
        "init_bin_yx_re", "init_bin_yx_im", "init_bin_yy_re", "init_bin_yy_im",
        "final_lag_xx_re", "final_lag_xx_im", "final_lag_xy_re", "final_lag_xy_im",
        "final_lag_yx_re", "final_lag_yx_im", "final_lag_yy_re", "final_lag_yy_im",
    ]);
    let n = cols.iter().map(|c| c.len()).max().unwrap_or(0);
    let rows = (0..n)
        .map(|i| {
            let mut row = vec![i as f64];
            for c in &cols {
                let v = c.get(i).copied().unwrap_or(C64::new(f64::NAN, f64::NAN));
                row.extend([v.re, v.im]);
            }
            row
        })
        .collect();
    Table { header, rows }
}

pub fn stage_table(stage: &str, report: &RxReport, trace: &BurstTrace) -> Result<Table, CliError> {
    let t = match stage {
        "sop_spectra" => {
            let before = &trace.pre_a_segment;
            let after = recover_sop(before, &report.sop);
            let freqs = fftshift(&fft_freqs(before.len(), before.fs));
            let cols = [power_db(&before.x), power_db(&before.y), power_db(&after.x), power_db(&after.y)];
            Table {
                header: vec!["freq_hz", "before_x_db", "before_y_db", "after_x_db", "after_y_db"],
                rows: freqs
                    .iter()
                    .enumerate()
                    .map(|(i, &f)| vec![f, cols[0][i], cols[1][i], cols[2][i], cols[3][i]])
                    .collect(),
            }
        }
        "taps" => taps_table(trace),
        "timing_metric" => Table {
            header: vec!["symbol", "p_x", "p_y"],
            rows: trace
                .sync_metric_x
                .iter()
                .zip(&trace.sync_metric_y)
                .enumerate()
                .map(|(i, (a, b))| vec![(trace.sync_search_start + i) as f64, *a, *b])
                .collect(),
        },
        "mse" => Table {
            header: vec!["beat", "mse"],
            rows: report.mse_trajectory.iter().enumerate().map(|(i, &m)| vec![i as f64, m]).collect(),
        },
        "tau" => {
            let n = trace.tau_trajectory.len().max(trace.ted.len());
            Table {
                header: vec!["beat", "tau", "ted"],
                rows: (0..n)
                    .map(|i| vec![i as f64, at(&trace.tau_trajectory, i), at(&trace.ted, i)])
                    .collect(),
            }
        }
        "cpr_phase" => {
            let [x, y] = &trace.cpr_phase;
            Table {
                header: vec!["pilot", "phase_x", "phase_y"],
                rows: (0..x.len().max(y.len())).map(|i| vec![i as f64, at(x, i), at(y, i)]).collect(),
            }
        }
        "error_positions" => Table {
            header: vec!["bit"],
            rows: report.ber.error_positions.iter().map(|&p| vec![p as f64]).collect(),
        },
        other => {
            return Err(CliError::Validation(format!(
                "unknown stage '{other}' (valid: {})",
                STAGES.join(", ")
            )))
        }
    };
    Ok(t)
}
