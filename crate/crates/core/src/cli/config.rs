//! JSON scenario and measurement files.
//!
//! A scenario file describes geometry, environment, noise, Monte Carlo
//! settings, solver options and the sweep to run. Positions may be given in
//! meters (`anchors_m`, `target_m`) or kilometers (`anchors_km`,
//! `target_km`, converted at load time). Everything except the geometry,
//! `ple`, `frequency_khz` and `transmit_power_dbm` has a default.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::channel::{ChannelError, Environment, MeasurementSet, NoiseKind, NoiseModel, Scenario};
use crate::experiments::{ExperimentConfig, ExperimentError, SweepSpec, DEFAULT_MC_TRIALS, DEFAULT_SIGMA_GRID_DB};
use crate::gtrs::{LocateOptions, SolveOptions, Weighting, DEFAULT_MAX_ITER};

/// The ten-anchor, 5 km cube scenario shipped with the crate.
pub const BUNDLED_SCENARIO: &str = include_str!("../../scenarios/ten_anchors.json");

pub const DEFAULT_MASTER_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("field `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error("geometry: {0}")]
    Geometry(#[from] ChannelError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    anchors_m: Option<Vec<Vec<f64>>>,
    anchors_km: Option<Vec<Vec<f64>>>,
    target_m: Option<Vec<f64>>,
    target_km: Option<Vec<f64>>,
    ple: f64,
    frequency_khz: f64,
    absorption_db_per_m: Option<f64>,
    transmit_power_dbm: f64,
    reference_distance_m: Option<f64>,
    #[serde(default)]
    noise: NoiseFile,
    sigma_grid_db: Option<Vec<f64>>,
    mc_trials: Option<usize>,
    master_seed: Option<u64>,
    #[serde(default)]
    solver: SolverFile,
    #[serde(default)]
    sweep: SweepSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    kind: NoiseKind,
    /// Only used when `sigma_grid_db` is absent.
    sigma_db: Option<f64>,
    mean_db: Option<f64>,
}

impl Default for NoiseFile {
    fn default() -> Self {
        Self {
            kind: NoiseKind::ZeroMeanGaussian,
            sigma_db: None,
            mean_db: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    #[serde(default = "yes")]
    weighted: bool,
    /// Overrides `weighted` when present.
    weighting: Option<Weighting>,
    #[serde(default)]
    known_power: bool,
    tol_phi: Option<f64>,
    tol_lambda: Option<f64>,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
}

fn yes() -> bool {
    true
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl Default for SolverFile {
    fn default() -> Self {
        Self {
            weighted: true,
            weighting: None,
            known_power: false,
            tol_phi: None,
            tol_lambda: None,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

fn positions(
    meters: Option<Vec<Vec<f64>>>,
    km: Option<Vec<Vec<f64>>>,
    name_m: &'static str,
    name_km: &'static str,
) -> Result<Vec<Vec<f64>>, ConfigError> {
    match (meters, km) {
        (Some(_), Some(_)) => Err(field(name_m, format!("give either `{name_m}` or `{name_km}`, not both"))),
        (Some(m), None) => Ok(m),
        (None, Some(k)) => Ok(k
            .into_iter()
            .map(|p| p.into_iter().map(|v| v * 1000.0).collect())
            .collect()),
        (None, None) => Err(field(name_m, "missing (or give it in kilometers)")),
    }
}

/// Parses a scenario document into a validated experiment configuration.
pub fn parse_scenario_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let file: ScenarioFile = serde_json::from_str(text)?;

    let anchors = positions(file.anchors_m, file.anchors_km, "anchors_m", "anchors_km")?;
    let target = positions(
        file.target_m.map(|t| vec![t]),
        file.target_km.map(|t| vec![t]),
        "target_m",
        "target_km",
    )?
    .pop()
    .unwrap_or_default();

    if !(file.ple > 0.0) {
        return Err(field("ple", format!("must be positive, got {}", file.ple)));
    }
    if !(file.frequency_khz >= 0.0) {
        return Err(field("frequency_khz", format!("must be non-negative, got {}", file.frequency_khz)));
    }
    let mut env = Environment::new(file.ple, file.frequency_khz, file.transmit_power_dbm)
        .map_err(|e| field("ple/frequency_khz/transmit_power_dbm", e.to_string()))?;
    if let Some(a) = file.absorption_db_per_m {
        if !(a >= 0.0) {
            return Err(field("absorption_db_per_m", format!("must be non-negative, got {a}")));
        }
        env = env.with_absorption(a);
    }
    if let Some(d0) = file.reference_distance_m {
        if !(d0 > 0.0) {
            return Err(field("reference_distance_m", format!("must be positive, got {d0}")));
        }
        env = env.with_reference_distance(d0);
    }
    let scenario = Scenario::new(anchors, target, env)?;

    let sigma_grid_db = match (file.sigma_grid_db, file.noise.sigma_db) {
        (Some(g), _) => g,
        (None, Some(s)) => vec![s],
        (None, None) => DEFAULT_SIGMA_GRID_DB.to_vec(),
    };
    if sigma_grid_db.is_empty() || sigma_grid_db.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(field("sigma_grid_db", "must be a non-empty list of positive values"));
    }
    let mean_db = file.noise.mean_db.unwrap_or(match file.noise.kind {
        NoiseKind::ZeroMeanGaussian => 0.0,
        _ => crate::channel::DEFAULT_NOISE_MEAN_DB,
    });
    let noise = NoiseModel {
        kind: file.noise.kind,
        sigma_db: sigma_grid_db[0],
        mean_db,
    };

    let mc_trials = file.mc_trials.unwrap_or(DEFAULT_MC_TRIALS);
    if mc_trials == 0 {
        return Err(field("mc_trials", "must be at least 1"));
    }
    let s = file.solver;
    if s.tol_phi.is_some_and(|t| !(t > 0.0)) {
        return Err(field("solver.tol_phi", "must be positive"));
    }
    if s.tol_lambda.is_some_and(|t| !(t > 0.0)) {
        return Err(field("solver.tol_lambda", "must be positive"));
    }
    if s.max_iter == 0 {
        return Err(field("solver.max_iter", "must be at least 1"));
    }
    let weighting = s.weighting.unwrap_or(if s.weighted {
        Weighting::Distance
    } else {
        Weighting::Uniform
    });
    let solver = LocateOptions {
        weighting,
        known_power: s.known_power,
        solve: SolveOptions {
            tol_phi: s.tol_phi,
            tol_lambda: s.tol_lambda,
            max_iter: s.max_iter,
        },
    };

    let config = ExperimentConfig {
        scenario,
        noise,
        sigma_grid_db,
        mc_trials,
        master_seed: file.master_seed.unwrap_or(DEFAULT_MASTER_SEED),
        solver,
        sweep: file.sweep,
    };
    config.validate()?;
    Ok(config)
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_scenario(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse_scenario_str(&read(path)?)
}

/// Bundled ten-anchor scenario.
pub fn bundled_scenario() -> ExperimentConfig {
    parse_scenario_str(BUNDLED_SCENARIO).expect("bundled scenario is valid")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementFile {
    anchor_index: Option<Vec<usize>>,
    rss_dbm: Vec<f64>,
}

/// Parses `{"anchor_index": [...], "rss_dbm": [...]}`; `anchor_index` defaults to `0..N`.
pub fn parse_measurements_str(text: &str, anchor_count: usize) -> Result<MeasurementSet, ConfigError> {
    let file: MeasurementFile = serde_json::from_str(text)?;
    let index = file.anchor_index.unwrap_or_else(|| (0..file.rss_dbm.len()).collect());
    if index.len() != file.rss_dbm.len() {
        return Err(field(
            "rss_dbm",
            format!("{} values for {} anchor indices", file.rss_dbm.len(), index.len()),
        ));
    }
    if let Some(bad) = index.iter().find(|&&i| i >= anchor_count) {
        return Err(field("anchor_index", format!("index {bad} but the scenario has {anchor_count} anchors")));
    }
    let mut seen = vec![false; anchor_count];
    for &i in &index {
        if std::mem::replace(&mut seen[i], true) {
            return Err(field("anchor_index", format!("index {i} appears twice")));
        }
    }
    if let Some(i) = file.rss_dbm.iter().position(|v| !v.is_finite()) {
        return Err(field("rss_dbm", format!("entry {i} is not finite")));
    }
    Ok(MeasurementSet {
        anchor_index: index,
        rss_dbm: file.rss_dbm,
        environment: None,
    })
}

pub fn parse_measurements(path: &Path, anchor_count: usize) -> Result<MeasurementSet, ConfigError> {
    parse_measurements_str(&read(path)?, anchor_count)
}

/// Serialises a measurement set in the format read by [`parse_measurements_str`].
pub fn measurements_to_json(m: &MeasurementSet) -> String {
    serde_json::json!({
        "anchor_index": m.anchor_index,
        "rss_dbm": m.rss_dbm,
    })
    .to_string()
}
