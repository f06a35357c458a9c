mod common;

use common::{random_spd, rel_close, to_na};
use gutp::numerics::{self, dot, inv_sqrt_sym, norm2, solve_spd, sym_eig, LinalgError, Matrix, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn solve_spd_residual_bound_on_1000_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let n = rng.random_range(3..=12);
        let a = random_spd(n, &mut rng);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let x = solve_spd(&a, &b).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        let bound = 1e-9 * (a.frobenius_norm() * norm2(&x) + norm2(&b));
        assert!(norm2(&r) <= bound, "n={n} residual {} > {bound}", norm2(&r));
    }
}

#[test]
fn solve_spd_recovers_known_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_spd(5, &mut rng);
    let x_known: Vec<f64> = (0..5).map(|_| rng.random_range(-10.0..10.0)).collect();
    let b = a.matvec(&x_known);
    let x = solve_spd(&a, &b).unwrap();
    for (xi, ki) in x.iter().zip(&x_known) {
        assert!((xi - ki).abs() <= 1e-9, "{xi} vs {ki}");
    }
}

#[test]
fn solve_spd_matches_nalgebra_cholesky() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let a = random_spd(n, &mut rng);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ours = solve_spd(&a, &b).unwrap();
        let chol = nalgebra::Cholesky::new(to_na(a.as_matrix())).unwrap();
        let theirs = chol.solve(&nalgebra::DVector::from_column_slice(&b));
        for (o, t) in ours.iter().zip(theirs.iter()) {
            assert!((o - t).abs() <= 1e-10 * (1.0 + t.abs()));
        }
    }
}

#[test]
fn singular_pivot_names_index() {
    let a = SymMatrix::from_diagonal(&[1.0, 1.0, 0.0]);
    match solve_spd(&a, &[1.0, 1.0, 1.0]) {
        Err(LinalgError::NonPositivePivot { index, .. }) => assert_eq!(index, 2),
        other => panic!("expected pivot error, got {other:?}"),
    }
}

#[test]
fn eigenvalues_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let n = rng.random_range(2..=12);
        let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-5.0..5.0));
        let sym = SymMatrix::new(Matrix::from_fn(n, n, |i, j| b[(i, j)] + b[(j, i)])).unwrap();
        let ours = sym_eig(&sym).unwrap();
        let mut theirs: Vec<f64> = nalgebra::SymmetricEigen::new(to_na(sym.as_matrix())).eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        let scale = sym.frobenius_norm();
        for (o, t) in ours.values.iter().zip(&theirs) {
            assert!((o - t).abs() <= 1e-11 * scale, "{o} vs {t}");
        }
    }
}

#[test]
fn eigenvectors_are_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let a = random_spd(8, &mut rng);
    let eig = sym_eig(&a).unwrap();
    let vtv = eig.vectors.transpose().matmul(&eig.vectors);
    assert!(max_abs_diff(&vtv, &Matrix::identity(8)) <= 1e-12);
}

#[test]
fn small_examples() {
    let e = sym_eig(&SymMatrix::from_diagonal(&[2.0, 0.0, 0.0])).unwrap();
    assert_eq!(e.values, vec![0.0, 0.0, 2.0]);
    let e = sym_eig(&SymMatrix::new(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]])).unwrap()).unwrap();
    assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] - 3.0).abs() < 1e-14);
    assert_eq!(solve_spd(&SymMatrix::from_diagonal(&[4.0]), &[8.0]).unwrap(), vec![2.0]);
    let r = inv_sqrt_sym(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
    assert!(max_abs_diff(r.as_matrix(), &Matrix::from_diagonal(&[0.5, 1.0 / 3.0])) < 1e-15);
}

#[test]
fn inv_sqrt_rejects_singular() {
    let a = SymMatrix::from_diagonal(&[1.0, 0.0]);
    assert!(matches!(inv_sqrt_sym(&a), Err(LinalgError::SingularEigenvalue { .. })));
}

#[test]
fn symmetric_check_rejects_asymmetric_input() {
    let m = Matrix::from_rows(&[[1.0, 2.0], [2.1, 1.0]]);
    assert!(matches!(SymMatrix::new(m), Err(LinalgError::NotSymmetric { .. })));
    let big = Matrix::identity(numerics::MAX_ORDER + 1);
    assert!(matches!(SymMatrix::new(big), Err(LinalgError::TooLarge { .. })));
}

fn spd_strategy() -> impl Strategy<Value = SymMatrix> {
    (3usize..=12, any::<u64>()).prop_map(|(n, seed)| random_spd(n, &mut ChaCha8Rng::seed_from_u64(seed)))
}

fn sym_strategy() -> impl Strategy<Value = SymMatrix> {
    (1usize..=12, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1e3..1e3));
        SymMatrix::new(Matrix::from_fn(n, n, |i, j| b[(i, j)] + b[(j, i)])).unwrap()
    })
}

proptest! {
    #[test]
    fn eigen_reconstruction(a in sym_strategy()) {
        let eig = sym_eig(&a).unwrap();
        let back = eig.reconstruct_with(|l| l);
        let diff = max_abs_diff(back.as_matrix(), a.as_matrix());
        prop_assert!(diff <= 1e-9 * a.as_matrix().max_abs().max(1e-300));
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn inv_sqrt_whitens(a in spd_strategy()) {
        let r = inv_sqrt_sym(&a).unwrap();
        let w = r.as_matrix().matmul(a.as_matrix()).matmul(r.as_matrix());
        prop_assert!(max_abs_diff(&w, &Matrix::identity(a.order())) <= 1e-8);
        prop_assert!(max_abs_diff(r.as_matrix(), &r.as_matrix().transpose()) == 0.0);
    }

    #[test]
    fn quad_form_is_positive_for_spd(a in spd_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..a.order()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q = a.quad_form(&x);
        prop_assert!(q > 0.0);
        prop_assert!(rel_close(q, dot(&x, &a.matvec(&x)), 1e-15));
    }
}
