use nalgebra::{DMatrix, DVector};
use netred::linalg::{h2_norm, solve_lyapunov, StateSpaceRealization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(I ⊗ A + A ⊗ I) vec(P) = −vec(Q)`.
fn kronecker_oracle(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let p = op.full_piv_lu().solve(&rhs).expect("oracle system is regular");
    DMatrix::from_column_slice(n, n, p.as_slice())
}

/// Random Hurwitz matrix: a random matrix shifted left of its spectral abscissa.
fn hurwitz(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let abscissa = m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let shift = abscissa + rng.random_range(0.05..1.0);
    m - DMatrix::<f64>::identity(n, n) * shift
}

#[test]
fn bartels_stewart_agrees_with_kronecker_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=10);
        let a = hurwitz(&mut rng, n);
        let b = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let q = &b * b.transpose();
        let p = solve_lyapunov(&a, &q).unwrap().p;
        let oracle = kronecker_oracle(&a, &q);
        let rel = (&p - &oracle).norm() / oracle.norm().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        let c = DMatrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
        let h2 = h2_norm(&StateSpaceRealization::new(a.clone(), b.clone(), c.clone()).unwrap()).unwrap();
        let h2_oracle = (&c * &oracle * c.transpose()).trace().max(0.0).sqrt();
        assert!((h2 - h2_oracle).abs() <= 1e-8 * h2_oracle.max(1e-12));
    }
    assert!(worst <= 1e-8, "worst relative deviation {worst:e}");
}
