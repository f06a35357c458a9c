//! Deterministic Monte Carlo harness.
//!
//! Every noise draw comes from its own ChaCha8 stream seeded by
//! [`stream_seed`]`(master_seed, trial_index, anchor_index)`, so results do
//! not depend on how trials are spread over threads. The same streams are
//! reused at every sweep point (common random numbers): changing σ rescales
//! the same standard-normal draws, and dropping an anchor leaves the other
//! anchors' noise untouched.
//!
//! Per sweep point the harness reports
//!
//! ```text
//! NRMSE(t̂)  = sqrt( (1/M) Σ ‖t - t̂_m‖² )
//! NRMSE(P̂₀) = sqrt( (1/M') Σ (P_t - P̂₀_m)² )   over the M' power-valid trials
//! ```
//!
//! alongside the matching CRLB.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelError, Environment, MeasurementSet, NoiseKind, NoiseModel, Scenario};
use crate::crlb::{self, CrlbError};
use crate::gtrs::{self, Estimate, GtrsError, LocateOptions};

/// Default Monte Carlo trial count.
pub const DEFAULT_MC_TRIALS: usize = 3000;
/// Default noise grid, dB.
pub const DEFAULT_SIGMA_GRID_DB: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 9.0];
/// Minimum number of pipeline runs averaged by [`measure_runtime`].
pub const MIN_RUNTIME_SOLVES: usize = 100;

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 8] = [
    "sweep_coord",
    "nrmse_t_m",
    "nrmse_p_db",
    "crlb_t_m",
    "crlb_p_db",
    "power_failures",
    "trials",
    "seconds_per_solve",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("CRLB at sweep point {coord}: {source}")]
    Crlb {
        coord: String,
        #[source]
        source: CrlbError,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Sigma,
    AnchorCount,
    Ple,
    Frequency,
    NoiseScenarios,
    Sensitivity,
}

/// Relative bias applied to the solver's assumed β and α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasScenario {
    pub label: String,
    /// Fractional bias on β (0.05 = +5%).
    pub ple_bias: f64,
    /// Fractional bias on α.
    pub absorption_bias: f64,
}

impl BiasScenario {
    pub fn new(label: &str, ple_bias: f64, absorption_bias: f64) -> Self {
        Self {
            label: label.to_string(),
            ple_bias,
            absorption_bias,
        }
    }

    /// Six cases labelled a to f: none, β 5%, α 5%, β 10% + α 5%, α 10% + β 5%, both 10%.
    pub fn standard_set() -> Vec<Self> {
        vec![
            Self::new("a", 0.0, 0.0),
            Self::new("b", 0.05, 0.0),
            Self::new("c", 0.0, 0.05),
            Self::new("d", 0.10, 0.05),
            Self::new("e", 0.05, 0.10),
            Self::new("f", 0.10, 0.10),
        ]
    }

    pub fn apply(&self, env: &Environment) -> Environment {
        env.with_ple(env.ple * (1.0 + self.ple_bias))
            .with_absorption(env.absorption_db_per_m * (1.0 + self.absorption_bias))
    }
}

/// Sweep-specific parameters; only the fields relevant to `kind` are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Anchor counts for the anchor sweep; anchors are dropped last-listed first.
    pub anchor_counts: Vec<usize>,
    /// Noise level used by the anchor-count sweep, dB.
    pub sigma_db: f64,
    pub ple_grid: Vec<f64>,
    pub frequency_grid_khz: Vec<f64>,
    pub noise_kinds: Vec<NoiseKind>,
    /// Mean of the biased components in the noise-scenario sweep, dB.
    pub noise_mean_db: f64,
    pub bias_scenarios: Vec<BiasScenario>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            kind: SweepKind::Sigma,
            anchor_counts: vec![6, 7, 8, 9, 10],
            sigma_db: 2.0,
            ple_grid: vec![1.5, 1.75, 2.0, 2.25, 2.5],
            frequency_grid_khz: vec![9.0, 25.0, 50.0],
            noise_kinds: vec![
                NoiseKind::ZeroMeanGaussian,
                NoiseKind::BiasedGaussian,
                NoiseKind::GaussianPlusImpulsive,
            ],
            noise_mean_db: channel::DEFAULT_NOISE_MEAN_DB,
            bias_scenarios: BiasScenario::standard_set(),
        }
    }
}

impl SweepSpec {
    pub fn of_kind(kind: SweepKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Noise regime; its σ is replaced by each sweep point's σ.
    pub noise: NoiseModel,
    pub sigma_grid_db: Vec<f64>,
    pub mc_trials: usize,
    pub master_seed: u64,
    pub solver: LocateOptions,
    pub sweep: SweepSpec,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            noise: NoiseModel::zero_mean(1.0),
            sigma_grid_db: DEFAULT_SIGMA_GRID_DB.to_vec(),
            mc_trials: DEFAULT_MC_TRIALS,
            master_seed: 0,
            solver: LocateOptions::default(),
            sweep: SweepSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        self.scenario.validate()?;
        if self.mc_trials == 0 {
            return bad("mc_trials must be at least 1".into());
        }
        if self.sigma_grid_db.is_empty() {
            return bad("sigma_grid_db is empty".into());
        }
        if let Some(s) = self.sigma_grid_db.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return bad(format!("sigma_grid_db entries must be positive, got {s}"));
        }
        self.noise.with_sigma(1.0).validate()?;
        let sw = &self.sweep;
        match sw.kind {
            SweepKind::Sigma => {}
            SweepKind::AnchorCount => {
                if sw.anchor_counts.is_empty() {
                    return bad("sweep.anchor_counts is empty".into());
                }
                let k = self.scenario.dimension();
                for &n in &sw.anchor_counts {
                    if n < k + 2 || n > self.scenario.anchor_count() {
                        return bad(format!(
                            "sweep.anchor_counts entry {n} outside [{}, {}]",
                            k + 2,
                            self.scenario.anchor_count()
                        ));
                    }
                }
                if !(sw.sigma_db > 0.0) {
                    return bad(format!("sweep.sigma_db must be positive, got {}", sw.sigma_db));
                }
            }
            SweepKind::Ple => {
                if sw.ple_grid.is_empty() || sw.ple_grid.iter().any(|b| !(*b > 0.0)) {
                    return bad("sweep.ple_grid must be a non-empty list of positive values".into());
                }
            }
            SweepKind::Frequency => {
                if sw.frequency_grid_khz.is_empty() || sw.frequency_grid_khz.iter().any(|f| !(*f >= 0.0)) {
                    return bad("sweep.frequency_grid_khz must be a non-empty list of non-negative values".into());
                }
            }
            SweepKind::NoiseScenarios => {
                if sw.noise_kinds.is_empty() {
                    return bad("sweep.noise_kinds is empty".into());
                }
            }
            SweepKind::Sensitivity => {
                if sw.bias_scenarios.is_empty() {
                    return bad("sweep.bias_scenarios is empty".into());
                }
                if sw.bias_scenarios.iter().any(|b| !(b.ple_bias > -1.0) || !(b.absorption_bias >= -1.0)) {
                    return bad("bias fractions must keep β positive and α non-negative".into());
                }
            }
        }
        // every point must be constructible before any trial runs
        self.points()?;
        Ok(())
    }

    /// Expands the sweep into concrete points.
    pub fn points(&self) -> Result<Vec<SweepPoint>, ExperimentError> {
        let truth = self.scenario.environment;
        let sw = &self.sweep;
        let mut points = Vec::new();
        let point = |coord: String, scenario: Scenario, noise: NoiseModel, solver_env: Environment| SweepPoint {
            coord,
            scenario,
            noise,
            solver_env,
        };
        match sw.kind {
            SweepKind::Sigma => {
                for &s in &self.sigma_grid_db {
                    points.push(point(
                        format!("sigma_db={s}"),
                        self.scenario.clone(),
                        self.noise.with_sigma(s),
                        truth,
                    ));
                }
            }
            SweepKind::AnchorCount => {
                for &n in &sw.anchor_counts {
                    let sc = self.scenario.with_anchor_count(n)?;
                    points.push(point(
                        format!("anchors={n};sigma_db={}", sw.sigma_db),
                        sc,
                        self.noise.with_sigma(sw.sigma_db),
                        truth,
                    ));
                }
            }
            SweepKind::Ple => {
                for &b in &sw.ple_grid {
                    let env = truth.with_ple(b);
                    let sc = self.scenario.with_environment(env)?;
                    for &s in &self.sigma_grid_db {
                        points.push(point(format!("ple={b};sigma_db={s}"), sc.clone(), self.noise.with_sigma(s), env));
                    }
                }
            }
            SweepKind::Frequency => {
                for &f in &sw.frequency_grid_khz {
                    let env = truth.with_frequency(f)?;
                    let sc = self.scenario.with_environment(env)?;
                    for &s in &self.sigma_grid_db {
                        points.push(point(
                            format!("frequency_khz={f};sigma_db={s}"),
                            sc.clone(),
                            self.noise.with_sigma(s),
                            env,
                        ));
                    }
                }
            }
            SweepKind::NoiseScenarios => {
                for &kind in &sw.noise_kinds {
                    for &s in &self.sigma_grid_db {
                        let noise = match kind {
                            NoiseKind::ZeroMeanGaussian => NoiseModel::zero_mean(s),
                            NoiseKind::BiasedGaussian => NoiseModel::biased(s, sw.noise_mean_db),
                            NoiseKind::GaussianPlusImpulsive => NoiseModel::gaussian_plus_impulsive(s, sw.noise_mean_db),
                        };
                        points.push(point(
                            format!("noise={};sigma_db={s}", kind.label()),
                            self.scenario.clone(),
                            noise,
                            truth,
                        ));
                    }
                }
            }
            SweepKind::Sensitivity => {
                for bias in &sw.bias_scenarios {
                    let env = bias.apply(&truth);
                    env.validate()?;
                    for &s in &self.sigma_grid_db {
                        points.push(point(
                            format!("bias={};sigma_db={s}", bias.label),
                            self.scenario.clone(),
                            self.noise.with_sigma(s),
                            env,
                        ));
                    }
                }
            }
        }
        Ok(points)
    }
}

/// One coordinate of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// `key=value` pairs joined by `;`.
    pub coord: String,
    /// True geometry and environment used to generate measurements.
    pub scenario: Scenario,
    pub noise: NoiseModel,
    /// Model parameters the solver assumes.
    pub solver_env: Environment,
}

/// SplitMix64 finaliser.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the noise stream for one anchor in one trial.
pub fn stream_seed(master_seed: u64, trial_index: u64, anchor_index: u64) -> u64 {
    let a = mix64(master_seed);
    let b = mix64(a ^ trial_index.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    mix64(b ^ anchor_index.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Noise vector for one trial, anchor `i` drawn from its own stream.
pub fn trial_noise(model: &NoiseModel, master_seed: u64, trial_index: u64, anchors: usize) -> Vec<f64> {
    (0..anchors)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(master_seed, trial_index, i as u64));
            channel::sample_noise(model, &mut rng)
        })
        .collect()
}

/// Outcome of a single Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_index: u64,
    pub estimate: Result<Estimate, GtrsError>,
}

impl TrialOutcome {
    pub fn position(&self) -> Option<&[f64]> {
        self.estimate.as_ref().ok().map(|e| e.position_m.as_slice())
    }

    pub fn transmit_power_dbm(&self) -> Option<f64> {
        self.estimate.as_ref().ok().and_then(|e| e.transmit_power_dbm)
    }
}

/// Generates measurements for one trial and runs the full pipeline on them.
pub fn run_trial(point: &SweepPoint, solver: &LocateOptions, master_seed: u64, trial_index: u64) -> TrialOutcome {
    let noise = trial_noise(&point.noise, master_seed, trial_index, point.scenario.anchor_count());
    let estimate = channel::measurements_with_noise(&point.scenario, &noise)
        .map_err(GtrsError::from)
        .and_then(|m| gtrs::locate(&m, &point.scenario.anchors_m, &point.solver_env, solver));
    TrialOutcome { trial_index, estimate }
}

/// Aggregated statistics at one sweep coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub coord: String,
    pub nrmse_t_m: f64,
    pub nrmse_p_db: Option<f64>,
    pub crlb_t_m: f64,
    pub crlb_p_db: Option<f64>,
    /// Trials without a usable power estimate (includes solver failures).
    pub power_failures: usize,
    /// Trials where the solver returned an error; excluded from NRMSE_t.
    pub solver_failures: usize,
    pub trials: usize,
    pub seconds_per_solve: Option<f64>,
}

/// Execution knobs that must not affect results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads for the trial loop; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Fill `seconds_per_solve` by timing each sweep point.
    pub record_timing: bool,
}

/// Aggregates outcomes in trial order.
pub fn summarize(point: &SweepPoint, outcomes: &[TrialOutcome], known_power: bool) -> Result<ResultRecord, ExperimentError> {
    let truth_t = &point.scenario.target_m;
    let truth_p = point.scenario.environment.transmit_power_dbm;
    let mut sum_t = 0.0;
    let mut n_t = 0usize;
    let mut sum_p = 0.0;
    let mut n_p = 0usize;
    let mut solver_failures = 0usize;
    for o in outcomes {
        match o.position() {
            Some(p) => {
                sum_t += p.iter().zip(truth_t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                n_t += 1;
            }
            None => solver_failures += 1,
        }
        if let Some(p) = o.transmit_power_dbm() {
            sum_p += (p - truth_p) * (p - truth_p);
            n_p += 1;
        }
    }
    let sigma = point.noise.sigma_db;
    let sigmas = vec![sigma; point.scenario.anchor_count()];
    let crlb_err = |source| ExperimentError::Crlb {
        coord: point.coord.clone(),
        source,
    };
    let (crlb_t_m, crlb_p_db) = if known_power {
        let rep = crlb::fim_known_power(&point.scenario, &sigmas).map_err(crlb_err)?;
        (rep.crlb_t_m, None)
    } else {
        let rep = crlb::fim_unknown_power(&point.scenario, &sigmas).map_err(crlb_err)?;
        (rep.crlb_t_m, rep.crlb_p_db)
    };
    Ok(ResultRecord {
        coord: point.coord.clone(),
        nrmse_t_m: if n_t > 0 { (sum_t / n_t as f64).sqrt() } else { f64::NAN },
        nrmse_p_db: (!known_power && n_p > 0).then(|| (sum_p / n_p as f64).sqrt()),
        crlb_t_m,
        crlb_p_db,
        power_failures: if known_power { 0 } else { outcomes.len() - n_p },
        solver_failures,
        trials: outcomes.len(),
        seconds_per_solve: None,
    })
}

fn run_point(config: &ExperimentConfig, point: &SweepPoint) -> Vec<TrialOutcome> {
    (0..config.mc_trials as u64)
        .into_par_iter()
        .map(|m| run_trial(point, &config.solver, config.master_seed, m))
        .collect()
}

/// Runs every sweep point with `mc_trials` trials each.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRecord>, ExperimentError> {
    run_sweep_with(config, &RunOptions::default())
}

pub fn run_sweep_with(config: &ExperimentConfig, options: &RunOptions) -> Result<Vec<ResultRecord>, ExperimentError> {
    config.validate()?;
    let points = config.points()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = options.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
    let mut records = Vec::with_capacity(points.len());
    for point in &points {
        let outcomes = pool.install(|| run_point(config, point));
        let mut rec = summarize(point, &outcomes, config.solver.known_power)?;
        if options.record_timing {
            rec.seconds_per_solve = Some(time_point(config, point, MIN_RUNTIME_SOLVES)?.seconds_per_solve);
        }
        records.push(rec);
    }
    Ok(records)
}

/// Wall-clock cost of the measurement-to-estimate pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeReport {
    pub seconds_per_solve: f64,
    pub solves: usize,
}

fn time_point(config: &ExperimentConfig, point: &SweepPoint, solves: usize) -> Result<RuntimeReport, ExperimentError> {
    let solves = solves.max(1);
    let sets: Vec<MeasurementSet> = (0..solves as u64)
        .map(|m| {
            let noise = trial_noise(&point.noise, config.master_seed, m, point.scenario.anchor_count());
            channel::measurements_with_noise(&point.scenario, &noise)
        })
        .collect::<Result<_, _>>()?;
    let start = Instant::now();
    for m in &sets {
        // failures still cost time; the count is what matters here
        let est = gtrs::locate(m, &point.scenario.anchors_m, &point.solver_env, &config.solver);
        std::hint::black_box(&est);
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(RuntimeReport {
        seconds_per_solve: elapsed / solves as f64,
        solves,
    })
}

/// Average single-threaded time per solve at the first sweep point.
pub fn measure_runtime(config: &ExperimentConfig, solves: usize) -> Result<RuntimeReport, ExperimentError> {
    config.validate()?;
    let points = config.points()?;
    time_point(config, &points[0], solves.max(MIN_RUNTIME_SOLVES))
}

/// Nine significant digits, scientific notation.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.8e}")
    }
}

/// Writes records as CSV with the [`CSV_COLUMNS`] header.
pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for r in records {
        w.write_record([
            r.coord.clone(),
            format_number(r.nrmse_t_m),
            opt(r.nrmse_p_db),
            format_number(r.crlb_t_m),
            opt(r.crlb_p_db),
            r.power_failures.to_string(),
            r.trials.to_string(),
            opt(r.seconds_per_solve),
        ])?;
    }
    w.flush()?;
    Ok(())
}
