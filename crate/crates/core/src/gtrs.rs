//! Weighted GTRS localisation.
//!
//! Taking `10^{(·)/(10β)}` of the RSS model, dropping the small absorption
//! and noise terms to first order and squaring gives, per anchor,
//!
//! ```text
//! q_i²·‖t - s_i‖² ≈ u,     q_i = 10^{(P_i - α·d0)/(10β)},  u = d0²·10^{P_t/(5β)}
//! ```
//!
//! Stacking `z = [t; ‖t‖²; u]` turns the weighted least-squares fit of these
//! residuals into
//!
//! ```text
//! minimise ‖R·z - v‖²   subject to   zᵀ·H·z + 2·hᵀ·z = 0
//! ```
//!
//! with `H = diag(I_k, 0, 0)` and `h = [0_k; -1/2; 0]`. The optimum satisfies
//! `(RᵀR + λH)·z = Rᵀv - λh` for the unique `λ > -1/λ*` at which the
//! constraint `φ(λ) = 0` holds, where `λ*` is the largest eigenvalue of
//! `(RᵀR)^{-1/2}·H·(RᵀR)^{-1/2}`. `φ` is strictly decreasing on that
//! interval, so `λ` is found by bisection.
//!
//! Internally every linear solve runs on the column-equilibrated problem
//! (`z = D·y`, `D = diag(RᵀR)^{-1/2}`). The multiplier is unchanged by this
//! change of variables, and it keeps the solves well conditioned even though
//! the columns of `R` differ by many orders of magnitude at kilometre scales.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, Environment, MeasurementSet};
use crate::numerics::{self, dot, norm2, Cholesky, LinalgError, Matrix, SymMatrix};
use crate::weighting::{self, WeightError, WeightVector};

/// Relative floor on the smallest eigenvalue of the equilibrated `RᵀR`.
pub const RANK_TOL: f64 = 1e-10;

/// Cap on doublings of the upper bracket.
pub const MAX_BRACKET_DOUBLINGS: usize = 120;

pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GtrsError {
    #[error("{anchors} anchors cannot determine {unknowns} unknowns in {dimension}-D; add anchors")]
    TooFewAnchors {
        anchors: usize,
        unknowns: usize,
        dimension: usize,
    },
    #[error("{weights} weights supplied for {anchors} anchors")]
    WeightCount { weights: usize, anchors: usize },
    #[error("anchor {0} has a different dimension from anchor 0")]
    AnchorDimension(usize),
    #[error(
        "design matrix is rank deficient (eigenvalue ratio {ratio:e}); \
         add anchors or move them off a common line/plane"
    )]
    RankDeficient { ratio: f64 },
    #[error("lambda {lambda} is outside the admissible interval (lower bound {lower})")]
    LambdaOutsideInterval { lambda: f64, lower: f64 },
    #[error("linear solve failed at lambda = {lambda}: {source}")]
    Numerical {
        lambda: f64,
        #[source]
        source: LinalgError,
    },
    #[error("bisection did not converge in {iterations} iterations; final bracket [{lower}, {upper}]")]
    NoConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },
    #[error("no sign change of the constraint residual: phi({lambda}) = {phi}")]
    Infeasible { lambda: f64, phi: f64 },
    #[error("tolerances must be positive")]
    BadTolerance,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// How link weights enter the least-squares objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every link weighted equally.
    Uniform,
    /// Objective `Σ w_i·r_i²`: rows scaled by `√w_i`.
    #[default]
    Distance,
    /// Objective `‖W(Rz - v)‖² = Σ w_i²·r_i²`: rows scaled by `w_i`.
    DistanceSquared,
}

/// Whether `u` (and hence `P_t`) is an unknown of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PowerModel {
    Unknown,
    Known { transmit_power_dbm: f64 },
}

/// `min ‖R·z - v‖²  s.t.  zᵀHz + 2hᵀz = 0`, with weights already folded into `R`, `v`.
#[derive(Debug, Clone)]
pub struct GtrsSystem {
    /// Weighted `R`, `N × (k+2)` (or `N × (k+1)` with known power).
    pub design: Matrix,
    /// Weighted `v`.
    pub target: Vec<f64>,
    pub constraint_quad: SymMatrix,
    pub constraint_lin: Vec<f64>,
    pub dimension: usize,
    pub anchor_count: usize,
    pub power: PowerModel,
    /// Model parameters assumed by the solver (used for power extraction).
    pub environment: Environment,
}

impl GtrsSystem {
    pub fn unknowns(&self) -> usize {
        self.design.cols()
    }

    /// Builds a system from raw parts. `H`, `h` must have matching order.
    pub fn from_parts(
        design: Matrix,
        target: Vec<f64>,
        constraint_quad: SymMatrix,
        constraint_lin: Vec<f64>,
        dimension: usize,
        power: PowerModel,
        environment: Environment,
    ) -> Result<Self, GtrsError> {
        let n = design.cols();
        if constraint_quad.order() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: constraint_quad.order(),
            }
            .into());
        }
        if constraint_lin.len() != n || target.len() != design.rows() {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: constraint_lin.len(),
            }
            .into());
        }
        Ok(Self {
            anchor_count: design.rows(),
            design,
            target,
            constraint_quad,
            constraint_lin,
            dimension,
            power,
            environment,
        })
    }

    /// `RᵀR`.
    pub fn normal_matrix(&self) -> SymMatrix {
        self.design.gram()
    }

    /// `Rᵀv`.
    pub fn normal_rhs(&self) -> Vec<f64> {
        self.design.tr_matvec(&self.target)
    }

    /// `‖R·z - v‖²`.
    pub fn objective(&self, z: &[f64]) -> f64 {
        self.design
            .matvec(z)
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `zᵀHz + 2hᵀz`.
    pub fn constraint_residual(&self, z: &[f64]) -> f64 {
        self.constraint_quad.quad_form(z) + 2.0 * dot(&self.constraint_lin, z)
    }
}

/// `H = diag(I_k, 0, …)` of the given order.
pub fn constraint_quad(dimension: usize, order: usize) -> SymMatrix {
    let diag: Vec<f64> = (0..order).map(|i| if i < dimension { 1.0 } else { 0.0 }).collect();
    SymMatrix::from_diagonal(&diag)
}

/// `h` with `-1/2` in the `‖t‖²` slot.
pub fn constraint_lin(dimension: usize, order: usize) -> Vec<f64> {
    let mut h = vec![0.0; order];
    h[dimension] = -0.5;
    h
}

/// `q_i = 10^{(P_i - α·d0)/(10β)}`.
pub fn q_values(measurements: &MeasurementSet, env: &Environment) -> Vec<f64> {
    let offset = env.absorption_db_per_m * env.reference_distance_m;
    let ten_beta = 10.0 * env.ple;
    measurements
        .rss_dbm
        .iter()
        .map(|p| 10f64.powf((p - offset) / ten_beta))
        .collect()
}

/// `u = d0²·10^{P_t/(5β)}`.
pub fn power_to_u(transmit_power_dbm: f64, env: &Environment) -> f64 {
    let d0 = env.reference_distance_m;
    d0 * d0 * 10f64.powf(transmit_power_dbm / (5.0 * env.ple))
}

fn check_inputs(
    measurements: &MeasurementSet,
    weights: &WeightVector,
    anchors: &[Vec<f64>],
    unknowns_extra: usize,
) -> Result<usize, GtrsError> {
    measurements.validate()?;
    let n = anchors.len();
    if measurements.len() != n {
        return Err(ChannelError::MeasurementCount {
            expected: n,
            got: measurements.len(),
        }
        .into());
    }
    if weights.len() != n {
        return Err(GtrsError::WeightCount {
            weights: weights.len(),
            anchors: n,
        });
    }
    let k = anchors.first().map_or(0, Vec::len);
    if let Some(i) = anchors.iter().position(|s| s.len() != k) {
        return Err(GtrsError::AnchorDimension(i));
    }
    if n < k + unknowns_extra {
        return Err(GtrsError::TooFewAnchors {
            anchors: n,
            unknowns: k + unknowns_extra,
            dimension: k,
        });
    }
    Ok(k)
}

fn row_scale(weighting: Weighting, w: f64) -> f64 {
    match weighting {
        Weighting::Uniform => 1.0,
        Weighting::Distance => w.sqrt(),
        Weighting::DistanceSquared => w,
    }
}

/// Assembles the weighted system with `z = [t; ‖t‖²; u]`.
///
/// Row `i` of the unweighted `R` is
/// `[-(10β/ln10)·q_i²·s_iᵀ, (5β/ln10)·q_i², -(5β/ln10)]` and
/// `v_i = -(5β/ln10)·q_i²·‖s_i‖²`; both are then scaled according to
/// `weighting`.
pub fn build_system(
    measurements: &MeasurementSet,
    weights: &WeightVector,
    anchors: &[Vec<f64>],
    env: &Environment,
    weighting: Weighting,
) -> Result<GtrsSystem, GtrsError> {
    let k = check_inputs(measurements, weights, anchors, 2)?;
    let n = anchors.len();
    let c5 = 5.0 * env.ple / LN_10;
    let q = q_values(measurements, env);
    let mut design = Matrix::zeros(n, k + 2);
    let mut target = vec![0.0; n];
    for i in 0..n {
        let q2 = q[i] * q[i];
        let sc = row_scale(weighting, weights.weights[i]);
        let row = design.row_mut(i);
        for (j, s) in anchors[i].iter().enumerate() {
            row[j] = -2.0 * c5 * q2 * s * sc;
        }
        row[k] = c5 * q2 * sc;
        row[k + 1] = -c5 * sc;
        target[i] = -c5 * q2 * dot(&anchors[i], &anchors[i]) * sc;
    }
    finish(design, target, k, PowerModel::Unknown, *env)
}

/// Known-power variant with `z = [t; ‖t‖²]`; the `u` column is moved into `v`.
pub fn build_system_known_power(
    measurements: &MeasurementSet,
    weights: &WeightVector,
    anchors: &[Vec<f64>],
    env: &Environment,
    weighting: Weighting,
) -> Result<GtrsSystem, GtrsError> {
    let k = check_inputs(measurements, weights, anchors, 1)?;
    let n = anchors.len();
    let c5 = 5.0 * env.ple / LN_10;
    let u = power_to_u(env.transmit_power_dbm, env);
    let q = q_values(measurements, env);
    let mut design = Matrix::zeros(n, k + 1);
    let mut target = vec![0.0; n];
    for i in 0..n {
        let q2 = q[i] * q[i];
        let sc = row_scale(weighting, weights.weights[i]);
        let row = design.row_mut(i);
        for (j, s) in anchors[i].iter().enumerate() {
            row[j] = -2.0 * c5 * q2 * s * sc;
        }
        row[k] = c5 * q2 * sc;
        target[i] = (-c5 * q2 * dot(&anchors[i], &anchors[i]) + c5 * u) * sc;
    }
    let power = PowerModel::Known {
        transmit_power_dbm: env.transmit_power_dbm,
    };
    finish(design, target, k, power, *env)
}

fn finish(design: Matrix, target: Vec<f64>, k: usize, power: PowerModel, env: Environment) -> Result<GtrsSystem, GtrsError> {
    let order = design.cols();
    let system = GtrsSystem::from_parts(
        design,
        target,
        constraint_quad(k, order),
        constraint_lin(k, order),
        k,
        power,
        env,
    )?;
    let ratio = equilibrated_rank_ratio(&system.normal_matrix());
    if !(ratio > RANK_TOL) {
        return Err(GtrsError::RankDeficient { ratio });
    }
    Ok(system)
}

fn equilibration(a: &SymMatrix) -> Vec<f64> {
    a.diagonal()
        .iter()
        .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
        .collect()
}

fn equilibrated_rank_ratio(a: &SymMatrix) -> f64 {
    let eq = a.congruence_diag(&equilibration(a));
    match numerics::sym_eig(&eq) {
        Ok(e) if e.max() > 0.0 => e.min() / e.max(),
        _ => 0.0,
    }
}

/// Admissible multiplier range `(-1/λ*, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaInterval {
    /// Largest eigenvalue of `(RᵀR)^{-1/2}·H·(RᵀR)^{-1/2}`.
    pub lambda_star: f64,
    /// `-1/λ* + ε_guard` (or `-∞` when `λ* ≤ 0`).
    pub lower: f64,
    /// `10⁻¹²·(1 + |1/λ*|)`.
    pub guard: f64,
}

impl LambdaInterval {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lower && lambda.is_finite()
    }
}

/// Normal equations of a system in equilibrated variables `z = D·y`.
#[derive(Debug, Clone)]
struct Prepared {
    scale: Vec<f64>,
    gram: SymMatrix,
    rhs: Vec<f64>,
    quad: SymMatrix,
    lin: Vec<f64>,
}

impl Prepared {
    fn new(system: &GtrsSystem) -> Self {
        let a = system.normal_matrix();
        let b = system.normal_rhs();
        let d = equilibration(&a);
        Self {
            gram: a.congruence_diag(&d),
            rhs: b.iter().zip(&d).map(|(x, s)| x * s).collect(),
            quad: system.constraint_quad.congruence_diag(&d),
            lin: system.constraint_lin.iter().zip(&d).map(|(x, s)| x * s).collect(),
            scale: d,
        }
    }

    fn interval(&self) -> Result<LambdaInterval, GtrsError> {
        let root = numerics::inv_sqrt_sym(&self.gram)?;
        let m = self.quad.congruence(&root);
        let lambda_star = numerics::sym_eig(&m)?.max();
        Ok(interval_from_star(lambda_star))
    }

    /// `z(λ)` in original units.
    fn z(&self, lambda: f64) -> Result<Vec<f64>, GtrsError> {
        let m = self.gram.add_scaled(lambda, &self.quad);
        let rhs: Vec<f64> = self.rhs.iter().zip(&self.lin).map(|(b, h)| b - lambda * h).collect();
        let y = Cholesky::factor(&m)
            .map_err(|source| GtrsError::Numerical { lambda, source })?
            .solve(&rhs);
        Ok(y.iter().zip(&self.scale).map(|(y, d)| y * d).collect())
    }
}

fn interval_from_star(lambda_star: f64) -> LambdaInterval {
    if lambda_star > 0.0 {
        let inv = 1.0 / lambda_star;
        let guard = 1e-12 * (1.0 + inv.abs());
        LambdaInterval {
            lambda_star,
            lower: -inv + guard,
            guard,
        }
    } else {
        LambdaInterval {
            lambda_star,
            lower: f64::NEG_INFINITY,
            guard: 0.0,
        }
    }
}

/// Lower end of the admissible multiplier interval.
pub fn lambda_interval(system: &GtrsSystem) -> Result<LambdaInterval, GtrsError> {
    Prepared::new(system).interval()
}

/// `z(λ) = (RᵀR + λH)⁻¹(Rᵀv - λh)`.
pub fn z_of_lambda(lambda: f64, system: &GtrsSystem) -> Result<Vec<f64>, GtrsError> {
    let prep = Prepared::new(system);
    let interval = prep.interval()?;
    if !interval.contains(lambda) {
        return Err(GtrsError::LambdaOutsideInterval {
            lambda,
            lower: interval.lower,
        });
    }
    prep.z(lambda)
}

/// Constraint residual `φ(λ) = z(λ)ᵀHz(λ) + 2hᵀz(λ)`.
pub fn phi(lambda: f64, system: &GtrsSystem) -> Result<f64, GtrsError> {
    let z = z_of_lambda(lambda, system)?;
    Ok(system.constraint_residual(&z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop once `|φ(λ)| ≤ tol_phi`. Default `1e-12·(1 + |z_{k+1}(λ)|)`.
    pub tol_phi: Option<f64>,
    /// Stop once the bracket is narrower than this. Default `1e-12·min(λ_hi - λ_lo, 1/λ*)`.
    pub tol_lambda: Option<f64>,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_phi: None,
            tol_lambda: None,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Full solution vector (`[t; ‖t‖²; u]`, or `[t; ‖t‖²]` with known power).
    pub z: Vec<f64>,
    pub position_m: Vec<f64>,
    /// `5β·log10(u/d0²)` when `u > 0` and power is estimated.
    pub transmit_power_dbm: Option<f64>,
    pub power_valid: bool,
    pub lambda: f64,
    pub iterations: usize,
    /// `‖(RᵀR + λH)z - (Rᵀv - λh)‖`.
    pub kkt_stationarity: f64,
    /// `‖RᵀR‖·‖z‖ + ‖Rᵀv‖ + |λ|·(‖H‖·‖z‖ + ‖h‖)`, the natural size of the stationarity terms.
    pub kkt_scale: f64,
    /// `zᵀHz + 2hᵀz`.
    pub kkt_constraint: f64,
    /// Smallest eigenvalue of `RᵀR + λH`.
    pub min_eigenvalue: f64,
    /// `‖RᵀR‖_F`.
    pub gram_norm: f64,
    pub interval: LambdaInterval,
    pub phi_lower: f64,
    pub tol_phi: f64,
}

/// Splits a solution vector into position and (when estimated) transmit power.
pub fn extract_estimate(z: &[f64], dimension: usize, env: &Environment) -> (Vec<f64>, Option<f64>) {
    let position = z[..dimension].to_vec();
    let power = if z.len() > dimension + 1 {
        let u = z[dimension + 1];
        let d0 = env.reference_distance_m;
        (u > 0.0).then(|| 5.0 * env.ple * (u / (d0 * d0)).log10())
    } else {
        None
    };
    (position, power)
}

/// Solves the GTRS by bisection on the multiplier.
pub fn solve(system: &GtrsSystem, options: &SolveOptions) -> Result<Estimate, GtrsError> {
    if options.tol_phi.is_some_and(|t| !(t > 0.0)) || options.tol_lambda.is_some_and(|t| !(t > 0.0)) {
        return Err(GtrsError::BadTolerance);
    }
    let prep = Prepared::new(system);
    let interval = prep.interval()?;
    let eval = |lambda: f64| -> Result<(f64, Vec<f64>), GtrsError> {
        let z = prep.z(lambda)?;
        Ok((system.constraint_residual(&z), z))
    };

    let gram_norm = system.normal_matrix().frobenius_norm();

    let mut lo = interval.lower;
    if !lo.is_finite() {
        // H = 0 has no finite lower end; start the search symmetric around zero
        lo = -gram_norm.max(1.0);
        while eval(lo)?.0 <= 0.0 {
            lo *= 2.0;
            if lo < -1e300 {
                return Err(GtrsError::Infeasible { lambda: lo, phi: eval(lo)?.0 });
            }
        }
    }
    let (phi_lo, z_lo) = eval(lo)?;
    // φ compares ‖t‖² with z_{k+1}, so the default tolerance is relative to that slot
    let k = system.dimension;
    let tol_at = |z: &[f64]| options.tol_phi.unwrap_or(1e-12 * (1.0 + z[k].abs()));

    if phi_lo.abs() <= tol_at(&z_lo) && phi_lo <= 0.0 {
        let tol = tol_at(&z_lo);
        return Ok(finish_estimate(system, lo, z_lo, 0, interval, phi_lo, tol, gram_norm));
    }
    if phi_lo < 0.0 {
        return Err(GtrsError::Infeasible { lambda: lo, phi: phi_lo });
    }

    // λ = 0 gives the unconstrained least-squares point; accept it when it is already feasible
    if interval.contains(0.0) {
        let (phi0, z0) = eval(0.0)?;
        let tol = tol_at(&z0);
        if phi0.abs() <= tol {
            return Ok(finish_estimate(system, 0.0, z0, 0, interval, phi_lo, tol, gram_norm));
        }
    }

    let mut hi = gram_norm.max(1.0);
    let mut phi_hi = eval(hi)?.0;
    let mut doublings = 0;
    while phi_hi > 0.0 {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(GtrsError::Infeasible { lambda: hi, phi: phi_hi });
        }
        lo = hi;
        hi *= 2.0;
        phi_hi = eval(hi)?.0;
        doublings += 1;
    }
    // φ varies on the scale 1/λ*, which can be far below the bracket width
    let natural = if interval.lambda_star > 0.0 { 1.0 / interval.lambda_star } else { f64::INFINITY };
    let tol_lambda = options.tol_lambda.unwrap_or(1e-12 * (hi - lo).min(natural));

    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for iter in 1..=options.max_iter {
        let mid = 0.5 * (lo + hi);
        let (f, z) = match eval(mid) {
            Ok(v) => v,
            // only possible right next to the pole, where φ → +∞
            Err(GtrsError::Numerical { .. }) => {
                lo = mid;
                continue;
            }
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(_, bf, _)| f.abs() < bf.abs()) {
            best = Some((mid, f, z.clone()));
        }
        let tol = tol_at(&z);
        if f.abs() <= tol {
            return Ok(finish_estimate(system, mid, z, iter, interval, phi_lo, tol, gram_norm));
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol_lambda {
            let (lambda, _, z) = best.expect("at least one evaluation");
            let tol = tol_at(&z);
            return Ok(finish_estimate(system, lambda, z, iter, interval, phi_lo, tol, gram_norm));
        }
    }
    Err(GtrsError::NoConvergence {
        iterations: options.max_iter,
        lower: lo,
        upper: hi,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish_estimate(
    system: &GtrsSystem,
    lambda: f64,
    z: Vec<f64>,
    iterations: usize,
    interval: LambdaInterval,
    phi_lower: f64,
    tol_phi: f64,
    gram_norm: f64,
) -> Estimate {
    let a = system.normal_matrix();
    let b = system.normal_rhs();
    let h = &system.constraint_lin;
    let m = a.add_scaled(lambda, &system.constraint_quad);
    let lhs = m.matvec(&z);
    let residual: Vec<f64> = lhs
        .iter()
        .zip(b.iter().zip(h))
        .map(|(l, (bi, hi))| l - (bi - lambda * hi))
        .collect();
    let kkt_scale = gram_norm * norm2(&z)
        + norm2(&b)
        + lambda.abs() * (system.constraint_quad.frobenius_norm() * norm2(&z) + norm2(h));
    let min_eigenvalue = numerics::sym_eig(&m).map(|e| e.min()).unwrap_or(f64::NAN);

    let (position_m, power) = extract_estimate(&z, system.dimension, &system.environment);
    let (transmit_power_dbm, power_valid) = match system.power {
        PowerModel::Unknown => (power, power.is_some()),
        PowerModel::Known { .. } => (None, false),
    };
    Estimate {
        kkt_constraint: system.constraint_residual(&z),
        z,
        position_m,
        transmit_power_dbm,
        power_valid,
        lambda,
        iterations,
        kkt_stationarity: norm2(&residual),
        kkt_scale,
        min_eigenvalue,
        gram_norm,
        interval,
        phi_lower,
        tol_phi,
    }
}

/// Solves a known-power system (see [`build_system_known_power`]).
pub fn solve_known_power(system: &GtrsSystem, options: &SolveOptions) -> Result<Estimate, GtrsError> {
    debug_assert!(matches!(system.power, PowerModel::Known { .. }));
    solve(system, options)
}

/// Options for the full measurement-to-estimate pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocateOptions {
    pub weighting: Weighting,
    pub known_power: bool,
    pub solve: SolveOptions,
}

/// Weights, system assembly, bisection and extraction in one call.
///
/// `env` holds the model parameters the solver assumes (β, α, d0 and, for
/// known-power solves, `P_t`).
pub fn locate(
    measurements: &MeasurementSet,
    anchors: &[Vec<f64>],
    env: &Environment,
    options: &LocateOptions,
) -> Result<Estimate, GtrsError> {
    let weights = match options.weighting {
        Weighting::Uniform => WeightVector::uniform(measurements.len()),
        Weighting::Distance | Weighting::DistanceSquared => weighting::link_weights(measurements, env)?,
    };
    let system = if options.known_power {
        build_system_known_power(measurements, &weights, anchors, env, options.weighting)?
    } else {
        build_system(measurements, &weights, anchors, env, options.weighting)?
    };
    solve(&system, &options.solve)
}
