//! `cotdma`: run the burst-mode receiver end to end, sweep one parameter, or
//! dump a single stage of one burst.
//!
//! Exit codes: 0 success, 1 I/O, 2 invalid configuration or usage,
//! 3 a receiver stage failed, 4 a BER threshold was exceeded.

mod config;
mod inspect;
mod run;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cotdma::bmdsp::EstMethod;
use cotdma::metrics::{write_series_csv, write_sweep_csv};
use cotdma::DspError;

use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Stage(DspError),
    Threshold(String),
    Io(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Stage(_) => 3,
            CliError::Threshold(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Stage(e) => match e.stage() {
                Some(s) => write!(f, "stage '{s}' failed: {e}"),
                None => write!(f, "receiver failed: {e}"),
            },
            CliError::Threshold(m) => write!(f, "threshold exceeded: {m}"),
            CliError::Io(e) => write!(f, "{e:#}"),
        }
    }
}

fn io_err(what: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(anyhow::anyhow!("{}: {e}", what.display()))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Mmse,
    Zf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Parser)]
#[command(name = "cotdma", version, about = "Burst-mode coherent TDMA receiver simulator")]
struct Cli {
    /// Config file path or bundled config name.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Channel estimation method.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// `off` zeroes the timing and equalizer loop delays.
    #[arg(long, global = true)]
    loop_delay: Option<Toggle>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Receive every burst of one scene and write per-burst reports.
    E2e,
    /// Run the config's [sweep] over `seeds` seeds per point.
    Sweep,
    /// Write one stage's intermediate data for one burst.
    Inspect {
        #[arg(long)]
        stage: String,
        #[arg(long, default_value_t = 0)]
        burst: usize,
    },
    /// Print the default configuration as TOML.
    DumpDefaults,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(spec) => ExperimentConfig::load(spec)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(m) = cli.method {
        cfg.rx.method = match m {
            Method::Mmse => EstMethod::Mmse,
            Method::Zf => EstMethod::Zf,
        };
    }
    if let Some(Toggle::Off) = cli.loop_delay {
        cfg.loop_cfg.eq_delay_beats = 0;
        cfg.loop_cfg.tr_delay_beats = 0;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    Ok(&cfg.out_dir)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

fn e2e(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (_, out) = run::receive(cfg, cfg.seed)?;
    let dir = out_dir(cfg)?;
    let reports: Vec<_> = out.into_iter().map(|(r, _)| r).collect();
    for r in &reports {
        let json = serde_json::to_string_pretty(r).map_err(|e| CliError::Io(e.into()))?;
        write(&dir.join(format!("report_burst{}.json", r.burst)), &json)?;
    }
    write(&dir.join("summary.csv"), &run::summary_csv(cfg, &reports))?;
    println!("{:>5} {:>12} {:>12} {:>10} {:>9}", "burst", "ber", "df_hz", "pmnr_db", "mse");
    for r in &reports {
        println!(
            "{:>5} {:>12.3e} {:>12.4e} {:>10.2} {:>9.4}",
            r.burst,
            r.ber.ber,
            r.total_df,
            r.sync.pmnr_db,
            r.mse_trajectory.last().copied().unwrap_or(f64::NAN)
        );
    }
    let bad: Vec<_> = reports.iter().filter(|r| r.ber.ber >= cfg.ber_threshold).collect();
    if !bad.is_empty() {
        let list: Vec<_> = bad.iter().map(|r| format!("burst {} BER {:.3e}", r.burst, r.ber.ber)).collect();
        return Err(CliError::Threshold(format!("{} (threshold {:.3e})", list.join(", "), cfg.ber_threshold)));
    }
    Ok(())
}

fn sweep(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = run::sweep(cfg)?;
    let dir = out_dir(cfg)?;
    write(&dir.join("sweep_runs.csv"), &run::runs_csv(out.variable, &out.runs))?;
    let path = dir.join("sweep.csv");
    let f = fs::File::create(&path).map_err(io_err(&path))?;
    write_sweep_csv(BufWriter::new(f), &out.points).map_err(io_err(&path))?;
    for p in out.points.iter().filter(|p| p.metric == "ber") {
        println!("{} = {:<12} ber {:.3e} +/- {:.1e}", p.variable, p.value, p.mean, p.half_width);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn inspect(cfg: &ExperimentConfig, stage: &str, burst: usize) -> Result<(), CliError> {
    if !inspect::STAGES.contains(&stage) {
        return Err(CliError::Validation(format!(
            "unknown stage '{stage}' (valid: {})",
            inspect::STAGES.join(", ")
        )));
    }
    if burst >= cfg.bursts.len() {
        return Err(CliError::Validation(format!(
            "burst {burst} out of range; the config has {} bursts",
            cfg.bursts.len()
        )));
    }
    let (_, out) = run::receive(cfg, cfg.seed)?;
    let (report, trace) = &out[burst];
    let table = inspect::stage_table(stage, report, trace)?;
    let path = out_dir(cfg)?.join(format!("inspect_{stage}_burst{burst}.csv"));
    let f = fs::File::create(&path).map_err(io_err(&path))?;
    write_series_csv(BufWriter::new(f), &table.header, &table.rows).map_err(io_err(&path))?;
    println!("wrote {} ({} rows)", path.display(), table.rows.len());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Command::DumpDefaults = cli.command {
        print!("{}", ExperimentConfig::default().to_toml());
        return Ok(());
    }
    let cfg = resolve(cli)?;
    match &cli.command {
        Command::E2e => e2e(&cfg),
        Command::Sweep => sweep(&cfg),
        Command::Inspect { stage, burst } => inspect(&cfg, stage, *burst),
        Command::DumpDefaults => Ok(()),
    }
}

fn main() -> ExitCode {
    match dispatch(&Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
