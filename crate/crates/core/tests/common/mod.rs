#![allow(dead_code)]

use gutp::numerics::{Matrix, SymMatrix};
use rand::Rng;

/// `BᵀB + n·I` with entries of `B` in [-1, 1]: well-conditioned SPD.
pub fn random_spd<R: Rng>(n: usize, rng: &mut R) -> SymMatrix {
    let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let g = b.gram();
    g.add_scaled(n as f64, &SymMatrix::identity(n))
}

pub fn to_na(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

use gutp::channel::{self, Environment, MeasurementSet, NoiseModel, Scenario};
use gutp::gtrs::{self, GtrsSystem, Weighting};
use gutp::weighting;

/// Random anchors and target in a 5 km box, 9 kHz water, noisy RSS.
pub fn random_scenario<R: Rng>(k: usize, n: usize, rng: &mut R) -> Scenario {
    let env = Environment::new(2.0, 9.0, 0.0).unwrap();
    loop {
        let anchors: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(0.0..5000.0)).collect()).collect();
        let target: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5000.0)).collect();
        if let Ok(sc) = Scenario::new(anchors, target, env) {
            return sc;
        }
    }
}

pub fn noisy_measurements<R: Rng>(sc: &Scenario, sigma_db: f64, rng: &mut R) -> MeasurementSet {
    channel::generate_measurements(sc, &NoiseModel::zero_mean(sigma_db), rng).unwrap()
}

/// A weighted system built from a random noisy scenario; retries rank-deficient draws.
pub fn random_system<R: Rng>(k: usize, n: usize, rng: &mut R) -> (Scenario, GtrsSystem) {
    loop {
        let sc = random_scenario(k, n, rng);
        let sigma = rng.random_range(0.5..6.0);
        let m = noisy_measurements(&sc, sigma, rng);
        let w = weighting::link_weights(&m, &sc.environment).unwrap();
        if let Ok(sys) = gtrs::build_system(&m, &w, &sc.anchors_m, &sc.environment, Weighting::Distance) {
            return (sc, sys);
        }
    }
}

pub fn bundled_alpha0() -> Scenario {
    let sc = gutp::cli::config::bundled_scenario().scenario;
    let env = sc.environment.with_absorption(0.0);
    sc.with_environment(env).unwrap()
}

/// `min_u ‖R[t; ‖t‖²; u] − v‖²` for a 2-D unknown-power system, with the minimizing `u`.
pub fn profile_objective(sys: &GtrsSystem, t: [f64; 2]) -> (f64, f64) {
    let t2 = t[0] * t[0] + t[1] * t[1];
    let (mut ra, mut rr) = (0.0, 0.0);
    let mut rows = Vec::with_capacity(sys.design.rows());
    for i in 0..sys.design.rows() {
        let row = sys.design.row(i);
        let a = row[0] * t[0] + row[1] * t[1] + row[2] * t2 - sys.target[i];
        ra += row[3] * a;
        rr += row[3] * row[3];
        rows.push((a, row[3]));
    }
    let u = -ra / rr;
    let j = rows.iter().map(|(a, r)| (a + r * u).powi(2)).sum();
    (j, u)
}

/// Dense grid over a 15 km square followed by pattern-search refinement of the best cells.
pub fn brute_force_minimum(sys: &GtrsSystem) -> (f64, [f64; 2]) {
    let (lo, step, n) = (-5000.0, 50.0, 301);
    let mut cells: Vec<(f64, [f64; 2])> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let t = [lo + step * i as f64, lo + step * j as f64];
            cells.push((profile_objective(sys, t).0, t));
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = cells[0];
    for &(mut fj, mut t) in cells.iter().take(8) {
        let mut h = step;
        while h > 1e-9 {
            let mut moved = false;
            for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                let c = [t[0] + h * dx, t[1] + h * dy];
                let fc = profile_objective(sys, c).0;
                if fc < fj {
                    fj = fc;
                    t = c;
                    moved = true;
                }
            }
            if !moved {
                h *= 0.5;
            }
        }
        if fj < best.0 {
            best = (fj, t);
        }
    }
    best
}

/// Gaussian log-likelihood of `p`, written from the channel model directly.
pub fn loglik(p: &[f64], theta: &[f64], anchors: &[Vec<f64>], sigmas: &[f64], env: &Environment) -> f64 {
    let k = anchors[0].len();
    let (t, pt) = (&theta[..k], theta[k]);
    let d0 = env.reference_distance_m;
    anchors
        .iter()
        .zip(p)
        .zip(sigmas)
        .map(|((s, pi), sig)| {
            let d = t.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let mean = pt - 10.0 * env.ple * (d / d0).log10() - env.absorption_db_per_m * (d - d0);
            -(pi - mean).powi(2) / (2.0 * sig * sig)
        })
        .sum()
}

/// Central second differences, Richardson-extrapolated from steps `h` and `h/2`.
pub fn fd_hessian(p: &[f64], theta: &[f64], anchors: &[Vec<f64>], sigmas: &[f64], env: &Environment) -> Vec<Vec<f64>> {
    let coarse = fd_hessian_step(p, theta, anchors, sigmas, env, 1.0);
    let fine = fd_hessian_step(p, theta, anchors, sigmas, env, 0.5);
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| c.iter().zip(f).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
        .collect()
}

/// Central second differences; position step 1e-3 of the nearest anchor distance, power step 1e-3 dB.
fn fd_hessian_step(p: &[f64], theta: &[f64], anchors: &[Vec<f64>], sigmas: &[f64], env: &Environment, shrink: f64) -> Vec<Vec<f64>> {
    let n = theta.len();
    let k = n - 1;
    let scale = anchors.iter().map(|s| channel::distance(&theta[..k], s)).fold(f64::INFINITY, f64::min);
    let h: Vec<f64> = (0..n).map(|i| shrink * if i < k { 1e-3 * scale } else { 1e-3 }).collect();
    let f = |da: (usize, f64), db: (usize, f64)| {
        let mut th = theta.to_vec();
        th[da.0] += da.1;
        th[db.0] += db.1;
        loglik(p, &th, anchors, sigmas, env)
    };
    let mut out = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let (ha, hb) = (h[a], h[b]);
            out[a][b] = (f((a, ha), (b, hb)) - f((a, ha), (b, -hb)) - f((a, -ha), (b, hb)) + f((a, -ha), (b, -hb))) / (4.0 * ha * hb);
        }
    }
    out
}

/// Entry `(a, b)` measured against `sqrt(|M_aa·M_bb|)` so position and power entries are comparable.
pub fn scaled_error(m: &SymMatrix, other: &[Vec<f64>]) -> f64 {
    let n = m.order();
    let mut worst = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            let s = (m.as_matrix()[(a, a)] * m.as_matrix()[(b, b)]).abs().sqrt();
            worst = worst.max((m.as_matrix()[(a, b)] - other[a][b]).abs() / s);
        }
    }
    worst
}
