//! Underwater acoustic RSS channel.
//!
//! Received power at an anchor a distance `d` from the target follows the
//! log-distance transmission-loss model with an extra absorption term:
//!
//! ```text
//! P_i = P_t - 10·β·log10(d_i / d0) - α·(d_i - d0) + n_i
//! ```
//!
//! where `α` (dB/m) comes from [`absorption_coefficient`]. Distances are in
//! meters and powers in dBm throughout.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, Matrix};

/// Default reference distance in meters.
pub const DEFAULT_REFERENCE_DISTANCE_M: f64 = 1.0;

/// Relative eigenvalue floor for the link-gradient rank test.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("frequency must be non-negative, got {0} kHz")]
    NegativeFrequency(f64),
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("distance {distance} m is inside the reference distance {reference} m")]
    InsideReferenceDistance { distance: f64, reference: f64 },
    #[error("dimension mismatch: expected {expected}-D position, got {got}-D")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{anchors} anchors in {dimension}-D; at least {required} are required")]
    TooFewAnchors {
        anchors: usize,
        dimension: usize,
        required: usize,
    },
    #[error("anchor {anchor} is {distance} m from the target, inside d0 = {reference} m")]
    AnchorTooClose {
        anchor: usize,
        distance: f64,
        reference: f64,
    },
    #[error(
        "degenerate anchor geometry: link gradients do not span {required} dimensions \
         (eigenvalue ratio {ratio:e}); add or relocate anchors"
    )]
    DegenerateGeometry { required: usize, ratio: f64 },
    #[error("measurement set has {got} values for {expected} anchors")]
    MeasurementCount { expected: usize, got: usize },
    #[error("non-finite RSS value at anchor {0}")]
    NonFiniteRss(usize),
    #[error("position has non-finite coordinates")]
    NonFinitePosition,
}

/// Absorption coefficient in dB/m for a carrier frequency in kHz.
///
/// ```text
/// α = (0.11 f²/(1+f²) + 44 f²/(4100+f²) + 2.75e-4 f² + 0.003) × 1e-3
/// ```
pub fn absorption_coefficient(frequency_khz: f64) -> Result<f64, ChannelError> {
    if !(frequency_khz >= 0.0) || !frequency_khz.is_finite() {
        return Err(ChannelError::NegativeFrequency(frequency_khz));
    }
    let f2 = frequency_khz * frequency_khz;
    let db_per_km = 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75 * f2 / 10000.0 + 0.003;
    Ok(db_per_km * 1e-3)
}

/// Propagation environment shared by the target and all anchors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    /// Path loss exponent β.
    pub ple: f64,
    pub frequency_khz: f64,
    pub absorption_db_per_m: f64,
    pub transmit_power_dbm: f64,
    pub reference_distance_m: f64,
}

impl Environment {
    /// Environment with `α` derived from the carrier frequency and `d0 = 1 m`.
    pub fn new(ple: f64, frequency_khz: f64, transmit_power_dbm: f64) -> Result<Self, ChannelError> {
        let env = Self {
            ple,
            frequency_khz,
            absorption_db_per_m: absorption_coefficient(frequency_khz)?,
            transmit_power_dbm,
            reference_distance_m: DEFAULT_REFERENCE_DISTANCE_M,
        };
        env.validate()?;
        Ok(env)
    }

    /// Overrides the absorption coefficient (bias studies, `α = 0` checks).
    pub fn with_absorption(mut self, absorption_db_per_m: f64) -> Self {
        self.absorption_db_per_m = absorption_db_per_m;
        self
    }

    pub fn with_ple(mut self, ple: f64) -> Self {
        self.ple = ple;
        self
    }

    pub fn with_transmit_power(mut self, transmit_power_dbm: f64) -> Self {
        self.transmit_power_dbm = transmit_power_dbm;
        self
    }

    pub fn with_reference_distance(mut self, d0: f64) -> Self {
        self.reference_distance_m = d0;
        self
    }

    /// Switches carrier frequency and recomputes `α` from it.
    pub fn with_frequency(mut self, frequency_khz: f64) -> Result<Self, ChannelError> {
        self.frequency_khz = frequency_khz;
        self.absorption_db_per_m = absorption_coefficient(frequency_khz)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |name, value| Err(ChannelError::InvalidParameter { name, value });
        if !(self.ple > 0.0) || !self.ple.is_finite() {
            return bad("ple", self.ple);
        }
        if !(self.frequency_khz >= 0.0) || !self.frequency_khz.is_finite() {
            return Err(ChannelError::NegativeFrequency(self.frequency_khz));
        }
        if !(self.absorption_db_per_m >= 0.0) || !self.absorption_db_per_m.is_finite() {
            return bad("absorption_db_per_m", self.absorption_db_per_m);
        }
        if !self.transmit_power_dbm.is_finite() {
            return bad("transmit_power_dbm", self.transmit_power_dbm);
        }
        if !(self.reference_distance_m > 0.0) || !self.reference_distance_m.is_finite() {
            return bad("reference_distance_m", self.reference_distance_m);
        }
        Ok(())
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// RSS in dBm at `anchor` with no noise.
pub fn noiseless_rss(target: &[f64], anchor: &[f64], env: &Environment) -> Result<f64, ChannelError> {
    if target.len() != anchor.len() {
        return Err(ChannelError::DimensionMismatch {
            expected: target.len(),
            got: anchor.len(),
        });
    }
    let d = distance(target, anchor);
    let d0 = env.reference_distance_m;
    if !(d >= d0) {
        return Err(ChannelError::InsideReferenceDistance {
            distance: d,
            reference: d0,
        });
    }
    Ok(env.transmit_power_dbm - 10.0 * env.ple * (d / d0).log10() - env.absorption_db_per_m * (d - d0))
}

/// Anchor/target geometry plus the true environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub anchors_m: Vec<Vec<f64>>,
    pub target_m: Vec<f64>,
    pub environment: Environment,
}

impl Scenario {
    /// Validated scenario.
    ///
    /// Requires `N >= k + 2` anchors, every anchor at least `d0` from the
    /// target, and link gradients `g_i = [c_iᵀ, ln10·d_i²]ᵀ` spanning `k + 1`
    /// dimensions (rank test on the column-equilibrated Gram matrix).
    pub fn new(anchors_m: Vec<Vec<f64>>, target_m: Vec<f64>, environment: Environment) -> Result<Self, ChannelError> {
        let scenario = Self {
            anchors_m,
            target_m,
            environment,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn dimension(&self) -> usize {
        self.target_m.len()
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors_m.len()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.anchors_m.iter().map(|s| distance(&self.target_m, s)).collect()
    }

    /// Same geometry with the first `n` anchors kept.
    pub fn with_anchor_count(&self, n: usize) -> Result<Self, ChannelError> {
        let mut anchors = self.anchors_m.clone();
        anchors.truncate(n);
        Self::new(anchors, self.target_m.clone(), self.environment)
    }

    pub fn with_environment(&self, environment: Environment) -> Result<Self, ChannelError> {
        Self::new(self.anchors_m.clone(), self.target_m.clone(), environment)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        self.environment.validate()?;
        let k = self.dimension();
        if k == 0 {
            return Err(ChannelError::DimensionMismatch { expected: 1, got: 0 });
        }
        if self.target_m.iter().any(|v| !v.is_finite()) {
            return Err(ChannelError::NonFinitePosition);
        }
        for s in &self.anchors_m {
            if s.len() != k {
                return Err(ChannelError::DimensionMismatch {
                    expected: k,
                    got: s.len(),
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(ChannelError::NonFinitePosition);
            }
        }
        let n = self.anchor_count();
        if n < k + 2 {
            return Err(ChannelError::TooFewAnchors {
                anchors: n,
                dimension: k,
                required: k + 2,
            });
        }
        let d0 = self.environment.reference_distance_m;
        for (anchor, d) in self.distances().into_iter().enumerate() {
            if !(d >= d0) {
                return Err(ChannelError::AnchorTooClose {
                    anchor,
                    distance: d,
                    reference: d0,
                });
            }
        }
        let ratio = link_gradient_rank_ratio(self);
        if !(ratio > RANK_TOL) {
            return Err(ChannelError::DegenerateGeometry { required: k + 1, ratio });
        }
        Ok(())
    }
}

/// `λ_min / λ_max` of the column-equilibrated Gram matrix of the `g_i`.
pub(crate) fn link_gradient_rank_ratio(scenario: &Scenario) -> f64 {
    let g = crate::crlb::link_gradients(scenario);
    let rows: Vec<Vec<f64>> = g;
    let m = Matrix::from_rows(&rows);
    let gram = m.gram();
    let d: Vec<f64> = gram
        .diagonal()
        .iter()
        .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 })
        .collect();
    let eq = gram.congruence_diag(&d);
    match numerics::sym_eig(&eq) {
        Ok(e) if e.max() > 0.0 => e.min() / e.max(),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    ZeroMeanGaussian,
    BiasedGaussian,
    GaussianPlusImpulsive,
}

impl NoiseKind {
    pub fn label(self) -> &'static str {
        match self {
            NoiseKind::ZeroMeanGaussian => "zero_mean_gaussian",
            NoiseKind::BiasedGaussian => "biased_gaussian",
            NoiseKind::GaussianPlusImpulsive => "gaussian_plus_impulsive",
        }
    }
}

/// Mean used for the biased and impulsive noise regimes.
pub const DEFAULT_NOISE_MEAN_DB: f64 = 2.0;

/// Per-link RSS noise in dB.
///
/// The impulsive regime adds a `Uniform[0, a]` draw to a Gaussian draw. Both
/// components carry variance `σ²/2`, so `a = σ·√6` and the total standard
/// deviation is `σ`, matching the other two regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma_db: f64,
    pub mean_db: f64,
}

impl NoiseModel {
    pub fn zero_mean(sigma_db: f64) -> Self {
        Self {
            kind: NoiseKind::ZeroMeanGaussian,
            sigma_db,
            mean_db: 0.0,
        }
    }

    pub fn biased(sigma_db: f64, mean_db: f64) -> Self {
        Self {
            kind: NoiseKind::BiasedGaussian,
            sigma_db,
            mean_db,
        }
    }

    pub fn gaussian_plus_impulsive(sigma_db: f64, mean_db: f64) -> Self {
        Self {
            kind: NoiseKind::GaussianPlusImpulsive,
            sigma_db,
            mean_db,
        }
    }

    /// The regime's canonical model at a given σ (mean 0 or 2 dB).
    pub fn of_kind(kind: NoiseKind, sigma_db: f64) -> Self {
        match kind {
            NoiseKind::ZeroMeanGaussian => Self::zero_mean(sigma_db),
            NoiseKind::BiasedGaussian => Self::biased(sigma_db, DEFAULT_NOISE_MEAN_DB),
            NoiseKind::GaussianPlusImpulsive => Self::gaussian_plus_impulsive(sigma_db, DEFAULT_NOISE_MEAN_DB),
        }
    }

    pub fn with_sigma(mut self, sigma_db: f64) -> Self {
        self.sigma_db = sigma_db;
        self
    }

    /// Upper bound of the uniform impulsive component (zero for pure Gaussian kinds).
    pub fn impulsive_upper_db(&self) -> f64 {
        match self.kind {
            NoiseKind::GaussianPlusImpulsive => self.sigma_db * 6.0_f64.sqrt(),
            _ => 0.0,
        }
    }

    /// Mean of a single draw.
    pub fn expected_mean_db(&self) -> f64 {
        match self.kind {
            NoiseKind::ZeroMeanGaussian => 0.0,
            NoiseKind::BiasedGaussian => self.mean_db,
            NoiseKind::GaussianPlusImpulsive => self.mean_db + 0.5 * self.impulsive_upper_db(),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.sigma_db > 0.0) || !self.sigma_db.is_finite() {
            return Err(ChannelError::InvalidParameter {
                name: "sigma_db",
                value: self.sigma_db,
            });
        }
        if !self.mean_db.is_finite() {
            return Err(ChannelError::InvalidParameter {
                name: "mean_db",
                value: self.mean_db,
            });
        }
        Ok(())
    }
}

/// One noise draw in dB.
pub fn sample_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> f64 {
    match model.kind {
        NoiseKind::ZeroMeanGaussian => gaussian(0.0, model.sigma_db, rng),
        NoiseKind::BiasedGaussian => gaussian(model.mean_db, model.sigma_db, rng),
        NoiseKind::GaussianPlusImpulsive => {
            let g = gaussian(model.mean_db, model.sigma_db / std::f64::consts::SQRT_2, rng);
            let upper = model.impulsive_upper_db();
            let u = Uniform::new_inclusive(0.0, upper)
                .map(|d| d.sample(rng))
                .unwrap_or(0.0);
            g + u
        }
    }
}

fn gaussian<R: Rng + ?Sized>(mean: f64, std_dev: f64, rng: &mut R) -> f64 {
    // Normal::new only fails for non-finite or negative σ
    Normal::new(mean, std_dev).map(|d| d.sample(rng)).unwrap_or(mean)
}

/// RSS values observed at each anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub anchor_index: Vec<usize>,
    pub rss_dbm: Vec<f64>,
    /// Environment the values were generated under, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
}

impl MeasurementSet {
    pub fn new(rss_dbm: Vec<f64>) -> Result<Self, ChannelError> {
        let set = Self {
            anchor_index: (0..rss_dbm.len()).collect(),
            rss_dbm,
            environment: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.rss_dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rss_dbm.is_empty()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.anchor_index.len() != self.rss_dbm.len() {
            return Err(ChannelError::MeasurementCount {
                expected: self.anchor_index.len(),
                got: self.rss_dbm.len(),
            });
        }
        if let Some(i) = self.rss_dbm.iter().position(|v| !v.is_finite()) {
            return Err(ChannelError::NonFiniteRss(i));
        }
        Ok(())
    }

    /// Noise-free RSS for every anchor of `scenario`.
    pub fn noiseless(scenario: &Scenario) -> Result<Self, ChannelError> {
        measurements_with_noise(scenario, &vec![0.0; scenario.anchor_count()])
    }
}

/// Adds a given per-anchor noise vector to the noiseless RSS.
pub fn measurements_with_noise(scenario: &Scenario, noise_db: &[f64]) -> Result<MeasurementSet, ChannelError> {
    if noise_db.len() != scenario.anchor_count() {
        return Err(ChannelError::MeasurementCount {
            expected: scenario.anchor_count(),
            got: noise_db.len(),
        });
    }
    let env = &scenario.environment;
    let rss = scenario
        .anchors_m
        .iter()
        .zip(noise_db)
        .map(|(s, n)| noiseless_rss(&scenario.target_m, s, env).map(|p| p + n))
        .collect::<Result<Vec<_>, _>>()?;
    let set = MeasurementSet {
        anchor_index: (0..rss.len()).collect(),
        rss_dbm: rss,
        environment: Some(*env),
    };
    set.validate()?;
    Ok(set)
}

/// Noisy RSS, one independent draw per anchor taken from `rng` in anchor order.
pub fn generate_measurements<R: Rng + ?Sized>(
    scenario: &Scenario,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<MeasurementSet, ChannelError> {
    let noise: Vec<f64> = (0..scenario.anchor_count()).map(|_| sample_noise(model, rng)).collect();
    measurements_with_noise(scenario, &noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn absorption_reference_values() {
        let a9 = absorption_coefficient(9.0).unwrap();
        assert_eq!(format!("{a9:.2e}"), "9.86e-4");
        assert_eq!(absorption_coefficient(0.0).unwrap(), 3.0e-6);
        let a25 = absorption_coefficient(25.0).unwrap();
        assert!((a25 - 6.1048e-3).abs() < 5e-8, "{a25}");
        assert!(matches!(
            absorption_coefficient(-1.0),
            Err(ChannelError::NegativeFrequency(_))
        ));
    }

    #[test]
    fn absorption_increasing_in_frequency() {
        let mut prev = absorption_coefficient(0.0).unwrap();
        for i in 1..=1000 {
            let a = absorption_coefficient(i as f64 * 0.1).unwrap();
            assert!(a > prev);
            prev = a;
        }
    }

    #[test]
    fn noiseless_rss_examples() {
        let env = Environment::new(2.0, 9.0, 7.5).unwrap();
        let t = [0.0, 0.0, 0.0];
        assert_eq!(noiseless_rss(&t, &[1.0, 0.0, 0.0], &env).unwrap(), 7.5);

        let env = env.with_transmit_power(0.0).with_absorption(0.0);
        let p = noiseless_rss(&t, &[0.0, 100.0, 0.0], &env).unwrap();
        assert!((p + 40.0).abs() < 1e-12);

        let env = env.with_absorption(9.86e-4);
        let p = noiseless_rss(&t, &[0.0, 0.0, 1000.0], &env).unwrap();
        assert!((p - (-60.0 - 9.86e-4 * 999.0)).abs() < 1e-12);
        assert!((p + 60.985).abs() < 1e-3);

        assert!(matches!(
            noiseless_rss(&t, &[0.5, 0.0, 0.0], &env),
            Err(ChannelError::InsideReferenceDistance { .. })
        ));
    }

    #[test]
    fn noiseless_rss_decreasing() {
        let env = Environment::new(1.7, 30.0, 3.0).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..500 {
            let d = 1.0 + i as f64 * 20.0;
            let p = noiseless_rss(&[0.0, 0.0], &[d, 0.0], &env).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn scenario_rejects_too_few_anchors() {
        let env = Environment::new(2.0, 9.0, 0.0).unwrap();
        let anchors = vec![
            vec![0.0, 0.0, 0.0],
            vec![1000.0, 0.0, 0.0],
            vec![0.0, 1000.0, 0.0],
            vec![0.0, 0.0, 1000.0],
        ];
        let err = Scenario::new(anchors, vec![300.0, 400.0, 500.0], env).unwrap_err();
        assert_eq!(
            err,
            ChannelError::TooFewAnchors {
                anchors: 4,
                dimension: 3,
                required: 5
            }
        );
    }

    #[test]
    fn scenario_rejects_collinear_anchors() {
        let env = Environment::new(2.0, 9.0, 0.0).unwrap().with_absorption(0.0);
        // 2-D, all anchors and the target on one line
        let anchors: Vec<Vec<f64>> = (0..5).map(|i| vec![100.0 * (i as f64 + 1.0), 0.0]).collect();
        let err = Scenario::new(anchors, vec![-50.0, 0.0], env).unwrap_err();
        assert!(matches!(err, ChannelError::DegenerateGeometry { .. }), "{err:?}");
    }

    #[test]
    fn noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let stats = |m: NoiseModel, rng: &mut ChaCha8Rng| {
            let xs: Vec<f64> = (0..n).map(|_| sample_noise(&m, rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (mean, var.sqrt())
        };
        let (m0, s0) = stats(NoiseModel::zero_mean(3.0), &mut rng);
        assert!(m0.abs() < 0.01 * 3.0);
        assert!((s0 - 3.0).abs() < 0.02);
        let (m1, _) = stats(NoiseModel::biased(3.0, 2.0), &mut rng);
        assert!((m1 - 2.0).abs() < 0.01 * 3.0);
        let mix = NoiseModel::gaussian_plus_impulsive(3.0, 2.0);
        let (m2, s2) = stats(mix, &mut rng);
        assert!((s2 - 3.0).abs() < 0.02, "{s2}");
        assert!((m2 - mix.expected_mean_db()).abs() < 0.01 * 3.0);
    }

    #[test]
    fn tiny_sigma_matches_noiseless() {
        let env = Environment::new(2.0, 9.0, 0.0).unwrap();
        let scenario = Scenario::new(
            vec![
                vec![0.0, 0.0],
                vec![1000.0, 0.0],
                vec![0.0, 1000.0],
                vec![1000.0, 1000.0],
            ],
            vec![300.0, 400.0],
            env,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noisy = generate_measurements(&scenario, &NoiseModel::zero_mean(1e-12), &mut rng).unwrap();
        let clean = MeasurementSet::noiseless(&scenario).unwrap();
        for (a, b) in noisy.rss_dbm.iter().zip(&clean.rss_dbm) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
