//! `gutp` command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage or input errors (bad arguments,
//! unreadable or invalid files), 2 when a computation fails.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::channel::{self, MeasurementSet};
use crate::crlb;
use crate::experiments::{self, format_number, ExperimentConfig, RunOptions};
use crate::gtrs::{self, Estimate};
use crate::weighting;

pub use config::{parse_scenario, parse_scenario_str, ConfigError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

const SIMULATE_AFTER_HELP: &str = "\
CSV columns, in order:
  sweep_coord        sweep coordinate as key=value pairs joined by ';'
  nrmse_t_m          position NRMSE over successful trials, meters
  nrmse_p_db         transmit-power NRMSE over power-valid trials, dB (empty with known power)
  crlb_t_m           position CRLB, meters
  crlb_p_db          transmit-power CRLB, dB (empty with known power)
  power_failures     trials without a usable power estimate
  trials             Monte Carlo trials at this point
  seconds_per_solve  mean pipeline time per solve (only with --record-timing)

Numbers use 9 significant digits in scientific notation. Results depend only
on the config and its master_seed, never on --threads.";

#[derive(Debug, Parser)]
#[command(name = "gutp", version, about = "RSS-based underwater localization with unknown transmit power")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte Carlo sweep described by a scenario file and write CSV.
    #[command(after_help = SIMULATE_AFTER_HELP)]
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (affects wall time only).
        #[arg(long)]
        threads: Option<usize>,
        /// Time each sweep point and fill the seconds_per_solve column.
        #[arg(long)]
        record_timing: bool,
    },
    /// Print CRLB_t (m) and CRLB_p (dB) for the scenario across its σ grid.
    Crlb {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate position and transmit power from a measurement file.
    Locate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
    },
    /// Print the link weights for a measurement file.
    Weights {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
    },
    /// Print the acoustic absorption coefficient (dB/m) at a frequency.
    Absorption {
        #[arg(long = "freq-khz", allow_negative_numbers = true)]
        freq_khz: f64,
    },
    /// Time the single-threaded pipeline on the scenario's first sweep point.
    Runtime {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        solves: usize,
    },
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    dispatch_to(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`dispatch`] with explicit output streams.
pub fn dispatch_to<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match run(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Compute(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_FAILURE
        }
    }
}

fn run(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            config,
            out: csv_path,
            threads,
            record_timing,
        } => simulate(&config, &csv_path, threads, record_timing, err),
        Command::Crlb { config } => crlb_table(&config, out),
        Command::Locate { config, measurements } => locate(&config, &measurements, out),
        Command::Weights { config, measurements } => weights(&config, &measurements, out),
        Command::Absorption { freq_khz } => {
            let a = channel::absorption_coefficient(freq_khz).map_err(|e| Failure::Usage(e.to_string()))?;
            writeln!(out, "{}", format_number(a))?;
            Ok(())
        }
        Command::Runtime { config, solves } => {
            let cfg = parse_scenario(&config)?;
            let rep = experiments::measure_runtime(&cfg, solves).map_err(|e| Failure::Compute(e.to_string()))?;
            writeln!(out, "solves = {}", rep.solves)?;
            writeln!(out, "seconds_per_solve = {}", format_number(rep.seconds_per_solve))?;
            Ok(())
        }
    }
}

fn simulate(config: &Path, csv_path: &Path, threads: Option<usize>, record_timing: bool, err: &mut dyn Write) -> Result<(), Failure> {
    let cfg = parse_scenario(config)?;
    let opts = RunOptions { threads, record_timing };
    let records = experiments::run_sweep_with(&cfg, &opts).map_err(|e| Failure::Compute(e.to_string()))?;
    for r in records.iter().filter(|r| r.solver_failures > 0) {
        writeln!(err, "warning: {}: {} of {} solves failed", r.coord, r.solver_failures, r.trials)?;
    }
    let file = File::create(csv_path).map_err(|e| Failure::Compute(format!("{}: {e}", csv_path.display())))?;
    experiments::write_csv(&records, BufWriter::new(file)).map_err(|e| Failure::Compute(e.to_string()))?;
    // timing goes to stderr so the CSV stays reproducible
    if let Ok(rep) = experiments::measure_runtime(&cfg, experiments::MIN_RUNTIME_SOLVES) {
        writeln!(err, "seconds_per_solve = {}", format_number(rep.seconds_per_solve))?;
    }
    Ok(())
}

fn crlb_table(config: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = parse_scenario(config)?;
    let sc = &cfg.scenario;
    writeln!(out, "sigma_db,crlb_t_m,crlb_p_db,crlb_t_known_power_m")?;
    for &s in &cfg.sigma_grid_db {
        let sig = vec![s; sc.anchor_count()];
        let unknown = crlb::fim_unknown_power(sc, &sig).map_err(|e| Failure::Compute(e.to_string()))?;
        let known = crlb::fim_known_power(sc, &sig).map_err(|e| Failure::Compute(e.to_string()))?;
        writeln!(
            out,
            "{},{},{},{}",
            format_number(s),
            format_number(unknown.crlb_t_m),
            unknown.crlb_p_db.map(format_number).unwrap_or_default(),
            format_number(known.crlb_t_m)
        )?;
    }
    Ok(())
}

/// Anchors in measurement order.
fn measured_anchors(cfg: &ExperimentConfig, m: &MeasurementSet) -> Vec<Vec<f64>> {
    m.anchor_index.iter().map(|&i| cfg.scenario.anchors_m[i].clone()).collect()
}

fn load(config: &Path, measurements: &Path) -> Result<(ExperimentConfig, MeasurementSet), Failure> {
    let cfg = parse_scenario(config)?;
    let m = config::parse_measurements(measurements, cfg.scenario.anchor_count())?;
    Ok((cfg, m))
}

fn locate(config: &Path, measurements: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let (cfg, m) = load(config, measurements)?;
    let anchors = measured_anchors(&cfg, &m);
    let est = gtrs::locate(&m, &anchors, &cfg.scenario.environment, &cfg.solver).map_err(|e| Failure::Compute(e.to_string()))?;
    write_estimate(&est, out)?;
    Ok(())
}

/// `key = value` record, one field per line.
pub fn write_estimate(est: &Estimate, out: &mut dyn Write) -> io::Result<()> {
    let list = |v: &[f64]| v.iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(", ");
    writeln!(out, "position_m = [{}]", list(&est.position_m))?;
    match est.transmit_power_dbm {
        Some(p) => writeln!(out, "transmit_power_dbm = {}", format_number(p))?,
        None => writeln!(out, "transmit_power_dbm =")?,
    }
    writeln!(out, "power_valid = {}", est.power_valid)?;
    writeln!(out, "z = [{}]", list(&est.z))?;
    writeln!(out, "lambda = {}", format_number(est.lambda))?;
    writeln!(out, "iterations = {}", est.iterations)?;
    writeln!(out, "kkt_stationarity = {}", format_number(est.kkt_stationarity))?;
    writeln!(out, "kkt_constraint = {}", format_number(est.kkt_constraint))?;
    writeln!(out, "min_eigenvalue = {}", format_number(est.min_eigenvalue))?;
    Ok(())
}

fn weights(config: &Path, measurements: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let (cfg, m) = load(config, measurements)?;
    let w = weighting::link_weights(&m, &cfg.scenario.environment).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(out, "anchor_index,weight")?;
    for (i, wi) in m.anchor_index.iter().zip(&w.weights) {
        writeln!(out, "{i},{}", format_number(*wi))?;
    }
    Ok(())
}
