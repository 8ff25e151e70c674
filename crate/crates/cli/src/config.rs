//! Experiment configuration: one TOML file per run, unknown keys rejected.

use std::path::{Path, PathBuf};

use cotdma::bmdsp::{LoopConfig, RxContext, RxOptions};
use cotdma::channel::ChannelConfig;
use cotdma::DspParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Configs shipped with the binary, addressable by name with `--config NAME`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("two_bursts", include_str!("../configs/two_bursts.toml")),
    ("identity", include_str!("../configs/identity.toml")),
    ("foe_sweep", include_str!("../configs/foe_sweep.toml")),
    ("block_sweep", include_str!("../configs/block_sweep.toml")),
    ("snr_sweep", include_str!("../configs/snr_sweep.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; payload bits, noise and phase noise all derive from it.
    pub seed: u64,
    /// Seeds per sweep point (`seed`, `seed + 1`, ...).
    pub seeds: usize,
    pub guard_ns: f64,
    /// e2e exits with the threshold code if any burst's BER reaches this.
    pub ber_threshold: f64,
    pub out_dir: PathBuf,
    pub dsp: DspParams,
    #[serde(rename = "loop")]
    pub loop_cfg: LoopConfig,
    /// Receiver options, including the Preamble B block length and the estimation method.
    pub rx: RxOptions,
    /// One entry per burst, in transmission order.
    pub bursts: Vec<ChannelConfig>,
    pub sweep: Option<SweepConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let first = ChannelConfig {
            alpha: 0.3,
            theta: 1.0,
            delta_f: 1e9,
            tau: 0.2,
            snr_db: Some(20.0),
            ..ChannelConfig::default()
        };
        let second = ChannelConfig {
            gain_db: -3.0,
            ..first.clone()
        };
        Self {
            seed: 1,
            seeds: 20,
            guard_ns: 45.0,
            ber_threshold: 2.4e-2,
            out_dir: PathBuf::from("out"),
            dsp: DspParams::default(),
            loop_cfg: LoopConfig::default(),
            rx: RxOptions::default(),
            bursts: vec![first, second],
            sweep: None,
        }
    }
}

/// Either an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let v = match self {
            Axis::List(v) => v.clone(),
            Axis::Range { start, stop, step } => {
                if !(*step > 0.0 && step.is_finite()) || stop < start {
                    return Err(CliError::Validation(format!(
                        "range {start}..{stop} step {step} is not increasing"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| start + i as f64 * step).collect()
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Validation("sweep range is empty or not finite".into()));
        }
        Ok(v)
    }
}

/// Exactly one field must be set. Channel variables apply to every burst.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: Option<Axis>,
    pub delta_f: Option<Axis>,
    pub tau: Option<Axis>,
    pub alpha: Option<Axis>,
    pub theta: Option<Axis>,
    pub linewidth_hz: Option<Axis>,
    pub fiber_km: Option<Axis>,
    pub pre_b_block: Option<Axis>,
    pub eq_delay_beats: Option<Axis>,
    pub ddlms_mu: Option<Axis>,
}

impl SweepConfig {
    pub fn variable(&self) -> Result<(&'static str, Vec<f64>), CliError> {
        let all = [
            ("snr_db", &self.snr_db),
            ("delta_f", &self.delta_f),
            ("tau", &self.tau),
            ("alpha", &self.alpha),
            ("theta", &self.theta),
            ("linewidth_hz", &self.linewidth_hz),
            ("fiber_km", &self.fiber_km),
            ("pre_b_block", &self.pre_b_block),
            ("eq_delay_beats", &self.eq_delay_beats),
            ("ddlms_mu", &self.ddlms_mu),
        ];
        let set: Vec<_> = all.iter().filter_map(|(n, a)| a.as_ref().map(|a| (*n, a))).collect();
        match set.as_slice() {
            [(name, axis)] => Ok((name, axis.values()?)),
            [] => Err(CliError::Validation("[sweep] needs one ranged variable".into())),
            many => Err(CliError::Validation(format!(
                "[sweep] has {} ranged variables ({}); exactly one is allowed",
                many.len(),
                many.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            ))),
        }
    }
}

impl ExperimentConfig {
    /// Apply one sweep value to a copy of this config.
    pub fn with_value(&self, variable: &str, v: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        let as_count = |v: f64| -> Result<usize, CliError> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Validation(format!("{variable} needs whole values, got {v}")))
            }
        };
        match variable {
            "pre_b_block" => c.rx.pre_b_block = as_count(v)?,
            "eq_delay_beats" => c.loop_cfg.eq_delay_beats = as_count(v)?,
            "ddlms_mu" => c.loop_cfg.ddlms_mu = v,
            _ => {
                for b in &mut c.bursts {
                    match variable {
                        "snr_db" => b.snr_db = Some(v),
                        "delta_f" => b.delta_f = v,
                        "tau" => b.tau = v,
                        "alpha" => b.alpha = v,
                        "theta" => b.theta = v,
                        "linewidth_hz" => b.linewidth_hz = v,
                        "fiber_km" => {
                            b.fiber_km = v;
                            c.rx.cdc_fiber_km = v;
                        }
                        other => return Err(CliError::Validation(format!("unknown sweep variable {other}"))),
                    }
                }
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = |e: cotdma::DspError| CliError::Validation(e.to_string());
        self.dsp.validate().map_err(v)?;
        if self.bursts.is_empty() {
            return Err(CliError::Validation("at least one [[bursts]] entry is required".into()));
        }
        for (i, b) in self.bursts.iter().enumerate() {
            b.validate()
                .map_err(|e| CliError::Validation(format!("bursts[{i}]: {e}")))?;
        }
        RxContext::new(&self.rx).map_err(v)?;
        let l = &self.loop_cfg;
        if l.beat_symbols == 0 || !(l.ddlms_mu > 0.0 && l.ddlms_mu.is_finite()) {
            return Err(CliError::Validation(
                "loop.beat_symbols must be positive and loop.ddlms_mu a positive number".into(),
            ));
        }
        if self.seeds == 0 {
            return Err(CliError::Validation("seeds must be at least 1".into()));
        }
        if !(self.guard_ns >= 0.0 && self.guard_ns.is_finite()) {
            return Err(CliError::Validation(format!("guard_ns must be >= 0, got {}", self.guard_ns)));
        }
        if let Some(s) = &self.sweep {
            let (name, values) = s.variable()?;
            for x in values {
                let c = self.with_value(name, x)?;
                c.bursts.iter().try_for_each(|b| b.validate()).map_err(v)?;
                RxContext::new(&c.rx).map_err(v)?;
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// A file path, or the name of a bundled config.
    pub fn load(spec: &str) -> Result<Self, CliError> {
        let path = Path::new(spec);
        let text = if path.exists() {
            std::fs::read_to_string(path).map_err(|e| CliError::Io(anyhow::anyhow!("reading {spec}: {e}")))?
        } else if let Some((_, t)) = BUNDLED.iter().find(|(n, _)| *n == spec) {
            t.to_string()
        } else {
            let names: Vec<_> = BUNDLED.iter().map(|(n, _)| *n).collect();
            return Err(CliError::Validation(format!(
                "no config file '{spec}' and no bundled config of that name (bundled: {})",
                names.join(", ")
            )));
        };
        Self::from_toml(&text)
    }
}
