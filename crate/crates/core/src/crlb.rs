//! Fisher information and Cramér-Rao bounds for `θ = [t; P_t]`.
//!
//! With independent Gaussian RSS noise the log-likelihood is
//!
//! ```text
//! ln p(p; θ) = -½ Σ ln(2πσ_i²) - Σ f_i² / (2σ_i²)
//! f_i = P_i - P_t + 10β·log10(d_i/d0) + α·(d_i - d0)
//! ```
//!
//! Its Hessian involves `c_i = 10β·(t - s_i) + α·ln10·d_i·(t - s_i)` and
//! `D_i = ∂c_i/∂t`. Taking expectations kills every term proportional to
//! `f_i`, leaving
//!
//! ```text
//! F = [[A, b], [bᵀ, c]]
//! A = Σ c_i c_iᵀ / (σ_i² ln²10 d_i⁴),  b = -Σ c_i / (σ_i² ln10 d_i²),  c = Σ 1/σ_i²
//! ```
//!
//! For any `[x; y]`, `[x; y]ᵀ F [x; y] = Σ (xᵀc_i/(ln10 d_i²) + y)² / σ_i²`,
//! so `F` is positive definite exactly when the `g_i = [c_i; ln10·d_i²]`
//! span `k + 1` dimensions.

use std::f64::consts::LN_10;

use thiserror::Error;

use crate::channel::{distance, ChannelError, Environment, MeasurementSet, Scenario};
use crate::numerics::{self, dot, LinalgError, Matrix, SymMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrlbError {
    #[error("target coincides with anchor {0}")]
    Coincident(usize),
    #[error("{got} noise levels supplied for {expected} anchors")]
    SigmaCount { expected: usize, got: usize },
    #[error("noise level for anchor {0} must be positive")]
    BadSigma(usize),
    #[error("Fisher information is not positive definite (smallest eigenvalue {eigenvalue:e}); anchor geometry is degenerate")]
    NotPositiveDefinite { eigenvalue: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Parameter vector `θ = [t; P_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub position_m: Vec<f64>,
    pub transmit_power_dbm: f64,
}

impl Theta {
    pub fn truth(scenario: &Scenario) -> Self {
        Self {
            position_m: scenario.target_m.clone(),
            transmit_power_dbm: scenario.environment.transmit_power_dbm,
        }
    }
}

/// Bounds derived from a Fisher information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FimReport {
    /// `(k+1)×(k+1)` with unknown power, `k×k` with known power.
    pub fim: SymMatrix,
    /// `√trace([F⁻¹]_{1:k,1:k})`, meters.
    pub crlb_t_m: f64,
    /// `√[F⁻¹]_{k+1,k+1}`, dB; absent for known power.
    pub crlb_p_db: Option<f64>,
    /// `λ_max / λ_min` of `F`.
    pub condition_estimate: f64,
}

fn offset(t: &[f64], s: &[f64]) -> Vec<f64> {
    t.iter().zip(s).map(|(a, b)| a - b).collect()
}

/// `f_i = P_i - P_t + 10β·log10(d_i/d0) + α·(d_i - d0)`.
pub fn residual_f(i: usize, p: &MeasurementSet, theta: &Theta, anchors: &[Vec<f64>], env: &Environment) -> Result<f64, CrlbError> {
    let d = distance(&theta.position_m, &anchors[i]);
    if d == 0.0 {
        return Err(CrlbError::Coincident(i));
    }
    let d0 = env.reference_distance_m;
    Ok(p.rss_dbm[i] - theta.transmit_power_dbm
        + 10.0 * env.ple * (d / d0).log10()
        + env.absorption_db_per_m * (d - d0))
}

/// `c_i = 10β·(t - s_i) + α·ln10·‖t - s_i‖·(t - s_i)`.
pub fn c_vector(t: &[f64], s: &[f64], env: &Environment) -> Result<Vec<f64>, CrlbError> {
    let r = offset(t, s);
    let d = numerics::norm2(&r);
    if d == 0.0 {
        return Err(CrlbError::Coincident(0));
    }
    let factor = 10.0 * env.ple + env.absorption_db_per_m * LN_10 * d;
    Ok(r.into_iter().map(|v| factor * v).collect())
}

/// `D_i = 10β·I + α·ln10·(d_i·I + r rᵀ/d_i)`, the Jacobian of `c_i`.
fn d_matrix(r: &[f64], d: f64, env: &Environment) -> Matrix {
    let k = r.len();
    let a = env.absorption_db_per_m * LN_10;
    Matrix::from_fn(k, k, |i, j| {
        let diag = if i == j { 10.0 * env.ple + a * d } else { 0.0 };
        diag + a * r[i] * r[j] / d
    })
}

/// `g_i = [c_iᵀ, ln10·d_i²]` for every anchor, at the true target.
pub fn link_gradients(scenario: &Scenario) -> Vec<Vec<f64>> {
    let t = &scenario.target_m;
    scenario
        .anchors_m
        .iter()
        .map(|s| {
            let d = distance(t, s);
            let r = offset(t, s);
            let factor = 10.0 * scenario.environment.ple + scenario.environment.absorption_db_per_m * LN_10 * d;
            let mut g: Vec<f64> = r.into_iter().map(|v| factor * v).collect();
            g.push(LN_10 * d * d);
            g
        })
        .collect()
}

fn check_sigmas(sigmas: &[f64], n: usize) -> Result<(), CrlbError> {
    if sigmas.len() != n {
        return Err(CrlbError::SigmaCount { expected: n, got: sigmas.len() });
    }
    if let Some(i) = sigmas.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(CrlbError::BadSigma(i));
    }
    Ok(())
}

/// Hessian of the log-likelihood with respect to `θ`, at arbitrary `θ` and `p`.
pub fn hessian_loglik(
    p: &MeasurementSet,
    theta: &Theta,
    anchors: &[Vec<f64>],
    sigmas: &[f64],
    env: &Environment,
) -> Result<SymMatrix, CrlbError> {
    check_sigmas(sigmas, anchors.len())?;
    let k = theta.position_m.len();
    let mut h = Matrix::zeros(k + 1, k + 1);
    for (i, s) in anchors.iter().enumerate() {
        let r = offset(&theta.position_m, s);
        let d = numerics::norm2(&r);
        if d == 0.0 {
            return Err(CrlbError::Coincident(i));
        }
        let f = residual_f(i, p, theta, anchors, env)?;
        let c = c_vector(&theta.position_m, s, env)?;
        let dm = d_matrix(&r, d, env);
        let inv_var = 1.0 / (sigmas[i] * sigmas[i]);
        let d2 = d * d;
        let denom = LN_10 * LN_10 * d2 * d2;
        for a in 0..k {
            for b in 0..k {
                let term = (c[a] * c[b] + LN_10 * d2 * f * dm[(a, b)] - 2.0 * LN_10 * f * c[a] * r[b]) / denom;
                h[(a, b)] -= inv_var * term;
            }
            let cross = inv_var * c[a] / (LN_10 * d2);
            h[(a, k)] += cross;
            h[(k, a)] += cross;
        }
        h[(k, k)] -= inv_var;
    }
    Ok(SymMatrix::new(h)?)
}

/// Fisher information for the joint position/power problem.
pub fn fim_unknown_power(scenario: &Scenario, sigmas: &[f64]) -> Result<FimReport, CrlbError> {
    check_sigmas(sigmas, scenario.anchor_count())?;
    let k = scenario.dimension();
    let mut f = Matrix::zeros(k + 1, k + 1);
    for (i, s) in scenario.anchors_m.iter().enumerate() {
        let d = distance(&scenario.target_m, s);
        if d == 0.0 {
            return Err(CrlbError::Coincident(i));
        }
        let c = c_vector(&scenario.target_m, s, &scenario.environment)?;
        let inv_var = 1.0 / (sigmas[i] * sigmas[i]);
        let d2 = d * d;
        for a in 0..k {
            for b in 0..k {
                f[(a, b)] += inv_var * c[a] * c[b] / (LN_10 * LN_10 * d2 * d2);
            }
            let cross = -inv_var * c[a] / (LN_10 * d2);
            f[(a, k)] += cross;
            f[(k, a)] += cross;
        }
        f[(k, k)] += inv_var;
    }
    report(SymMatrix::new(f)?, k, true)
}

/// Fisher information for position only (`P_t` known): the `A` block.
pub fn fim_known_power(scenario: &Scenario, sigmas: &[f64]) -> Result<FimReport, CrlbError> {
    check_sigmas(sigmas, scenario.anchor_count())?;
    let k = scenario.dimension();
    let mut f = Matrix::zeros(k, k);
    for (i, s) in scenario.anchors_m.iter().enumerate() {
        let d = distance(&scenario.target_m, s);
        if d == 0.0 {
            return Err(CrlbError::Coincident(i));
        }
        let c = c_vector(&scenario.target_m, s, &scenario.environment)?;
        let w = 1.0 / (sigmas[i] * sigmas[i] * LN_10 * LN_10 * d.powi(4));
        for a in 0..k {
            for b in 0..k {
                f[(a, b)] += w * c[a] * c[b];
            }
        }
    }
    report(SymMatrix::new(f)?, k, false)
}

fn report(fim: SymMatrix, k: usize, with_power: bool) -> Result<FimReport, CrlbError> {
    let eig = numerics::sym_eig(&fim)?;
    if !(eig.min() > numerics::SINGULARITY_TOL * eig.max()) {
        return Err(CrlbError::NotPositiveDefinite { eigenvalue: eig.min() });
    }
    let inv = numerics::inverse_spd(&fim).map_err(|_| CrlbError::NotPositiveDefinite { eigenvalue: eig.min() })?;
    let trace_t: f64 = (0..k).map(|i| inv[(i, i)]).sum();
    Ok(FimReport {
        crlb_t_m: trace_t.max(0.0).sqrt(),
        crlb_p_db: with_power.then(|| inv[(k, k)].max(0.0).sqrt()),
        condition_estimate: eig.max() / eig.min(),
        fim,
    })
}

/// `Σ (xᵀc_i/(ln10·d_i²) - y)² / σ_i²`, the quadratic form of `F` written per link.
///
/// The minus sign follows from the negative cross block `b`.
pub fn fim_quadratic_form(scenario: &Scenario, sigmas: &[f64], x: &[f64], y: f64) -> Result<f64, CrlbError> {
    check_sigmas(sigmas, scenario.anchor_count())?;
    let mut total = 0.0;
    for (i, s) in scenario.anchors_m.iter().enumerate() {
        let d = distance(&scenario.target_m, s);
        let c = c_vector(&scenario.target_m, s, &scenario.environment)?;
        let term = dot(x, &c) / (LN_10 * d * d) - y;
        total += term * term / (sigmas[i] * sigmas[i]);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross_scenario(alpha: f64) -> Scenario {
        let env = Environment::new(2.0, 9.0, 0.0).unwrap().with_absorption(alpha);
        Scenario::new(
            vec![
                vec![1000.0, 0.0],
                vec![-1000.0, 0.0],
                vec![0.0, 1000.0],
                vec![0.0, -1000.0],
            ],
            vec![0.0, 0.0],
            env,
        )
        .unwrap()
    }

    #[test]
    fn c_vector_examples() {
        let env = Environment::new(2.0, 9.0, 0.0).unwrap().with_absorption(9.86e-4);
        let c = c_vector(&[1000.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &env).unwrap();
        assert!((c[0] - 22270.3).abs() < 0.5, "{}", c[0]);
        assert_eq!(&c[1..], &[0.0, 0.0]);

        let env0 = env.with_absorption(0.0);
        let c = c_vector(&[3.0, -4.0], &[1.0, 1.0], &env0).unwrap();
        assert_eq!(c, vec![40.0, -100.0]);
        assert!(matches!(c_vector(&[1.0], &[1.0], &env), Err(CrlbError::Coincident(_))));
    }

    #[test]
    fn residual_is_zero_at_truth_and_linear_in_power() {
        let sc = cross_scenario(9.86e-4);
        let p = MeasurementSet::noiseless(&sc).unwrap();
        let theta = Theta::truth(&sc);
        for i in 0..4 {
            let f = residual_f(i, &p, &theta, &sc.anchors_m, &sc.environment).unwrap();
            assert!(f.abs() < 1e-12);
        }
        let bumped = Theta {
            transmit_power_dbm: theta.transmit_power_dbm + 1.0,
            ..theta.clone()
        };
        let f = residual_f(0, &p, &bumped, &sc.anchors_m, &sc.environment).unwrap();
        assert!((f + 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_cross_known_power() {
        // α = 0: c_i = 20·(t - s_i), d = 1000, so each link adds
        // 400·r rᵀ/(ln²10·10¹²) and F = diag(800e6, 800e6)/(ln²10·10¹²)
        let sc = cross_scenario(0.0);
        let rep = fim_known_power(&sc, &[1.0; 4]).unwrap();
        let diag = 800.0e6 / (LN_10 * LN_10 * 1e12);
        assert!((rep.fim[(0, 0)] - diag).abs() < 1e-15 * 1e3);
        assert!((rep.fim[(1, 1)] - diag).abs() < 1e-15 * 1e3);
        assert!(rep.fim[(0, 1)].abs() < 1e-18);
        let expected = (2.0 / diag).sqrt();
        assert!((rep.crlb_t_m - expected).abs() < 1e-9 * expected);
        // sqrt(2·ln²10·10¹²/8e8) = ln10·50 = 115.129...
        assert!((rep.crlb_t_m - 115.129_254_649_702_28).abs() < 1e-9);
        assert!(rep.crlb_p_db.is_none());
    }

    #[test]
    fn power_block_is_constant() {
        let sc = cross_scenario(9.86e-4);
        let p = MeasurementSet::new(vec![-55.0, -62.0, -70.0, -58.0]).unwrap();
        let theta = Theta {
            position_m: vec![120.0, -40.0],
            transmit_power_dbm: 3.0,
        };
        let sig = [1.0, 2.0, 0.5, 1.5];
        let h = hessian_loglik(&p, &theta, &sc.anchors_m, &sig, &sc.environment).unwrap();
        let expected: f64 = -sig.iter().map(|s| 1.0 / (s * s)).sum::<f64>();
        assert!((h[(2, 2)] - expected).abs() < 1e-12);
    }

    #[test]
    fn sigma_validation() {
        let sc = cross_scenario(0.0);
        assert!(matches!(
            fim_unknown_power(&sc, &[1.0; 3]),
            Err(CrlbError::SigmaCount { expected: 4, got: 3 })
        ));
        assert!(matches!(
            fim_unknown_power(&sc, &[1.0, 0.0, 1.0, 1.0]),
            Err(CrlbError::BadSigma(1))
        ));
    }
}
