//! Published reference matrices used by regression tests and the acceptance
//! suite. Values carry four or five significant digits.

use nalgebra::{DMatrix, DVector};

use crate::model::SecondOrderModel;

/// Spectrum of the four-node reduced stiffness.
pub const FOUR_NODE_SPECTRUM: [f64; 4] = [9.5631, 7.727, 5.1027, 4.1776];

/// Factor producing the sparse four-node realization.
pub fn sparse_t() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.5, -0.1845, 0.6826, 0.5, 0.1845, -0.6826, -0.5, -0.6826, -0.1845])
}

pub fn sparse_k4() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            6.246, 0.0, -0.4625, -1.6059, //
            0.0, 7.039, -2.3989, -0.4625, //
            -0.4625, -2.3989, 7.039, 0.0, //
            -1.6059, -0.4625, 0.0, 6.2460,
        ],
    )
}

/// Factor producing the dense four-node realization.
pub fn dense_t() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, 0.309, -0.809, -0.809, 0.0, 0.309, 0.309, -0.809, 0.0])
}

pub fn dense_k4() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            6.6426, -1.6301, 0.4579, -1.2928, //
            -1.6301, 8.0412, -1.3463, -0.8873, //
            0.4579, -1.3463, 5.2973, -0.2313, //
            -1.2928, -0.8873, -0.2313, 6.5889,
        ],
    )
}

/// `{(5 − √17)/2, 2, (5 + √17)/2, 7}`, printed as `{0.4384, 2, 4.5616, 7}`.
pub fn small_spectrum() -> [f64; 4] {
    let s = 17.0_f64.sqrt();
    [(5.0 - s) / 2.0, 2.0, (5.0 + s) / 2.0, 7.0]
}

/// Sparse realization of [`small_spectrum`] with zero couplings (1,4), (3,4).
pub fn small_sparse_k() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            3.0, -1.0, -1.5614, 0.0, //
            -1.0, 5.0, -1.0, -2.5615, //
            -1.5614, -1.0, 3.0, 0.0, //
            0.0, -2.5615, 0.0, 3.0,
        ],
    )
}

/// Tridiagonal form of [`small_spectrum`] as printed.
pub fn small_tridiagonal_printed() -> DMatrix<f64> {
    tridiagonal(&[5.0, 2.6667, 4.3333, 2.0], &[-2.4495, -1.8856, 0.0])
}

/// Exact tridiagonal `(5, −√6, 8/3, −4√2/3, 13/3; 2)`.
pub fn small_tridiagonal_exact() -> DMatrix<f64> {
    tridiagonal(
        &[5.0, 8.0 / 3.0, 13.0 / 3.0, 2.0],
        &[-(6.0_f64.sqrt()), -4.0 * 2.0_f64.sqrt() / 3.0, 0.0],
    )
}

/// Dense matrix similar to [`small_tridiagonal_exact`] that leaves the first
/// basis vector fixed, so Householder reduction recovers the tridiagonal form.
pub fn small_householder_input() -> DMatrix<f64> {
    let (c1, s1) = (0.6_f64, 0.8_f64);
    let (c2, s2) = (5.0_f64 / 13.0, 12.0_f64 / 13.0);
    let mut q = DMatrix::<f64>::identity(4, 4);
    // rotation in the (2,3) plane followed by one in the (3,4) plane
    let mut g1 = DMatrix::<f64>::identity(4, 4);
    g1[(1, 1)] = c1;
    g1[(1, 2)] = -s1;
    g1[(2, 1)] = s1;
    g1[(2, 2)] = c1;
    let mut g2 = DMatrix::<f64>::identity(4, 4);
    g2[(2, 2)] = c2;
    g2[(2, 3)] = -s2;
    g2[(3, 2)] = s2;
    g2[(3, 3)] = c2;
    q = g2 * g1 * q;
    let k = &q * small_tridiagonal_exact() * q.transpose();
    (&k + k.transpose()) * 0.5
}

fn tridiagonal(diag: &[f64], off: &[f64]) -> DMatrix<f64> {
    let n = diag.len();
    let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
    for i in 0..n - 1 {
        m[(i, i + 1)] = off[i];
        m[(i + 1, i)] = off[i];
    }
    m
}

/// Diagonal reduced model `(diag(λ), αI + β·diag(λ), 𝟙, 𝟙ᵀ)`.
pub fn modal_model(spectrum: &[f64], alpha: f64, beta: f64) -> SecondOrderModel {
    let r = spectrum.len();
    let k = DMatrix::from_diagonal(&DVector::from_column_slice(spectrum));
    let d = DMatrix::<f64>::identity(r, r) * alpha + &k * beta;
    SecondOrderModel::new(k, d, DMatrix::from_element(r, 1, 1.0), DMatrix::from_element(1, r, 1.0))
        .expect("shapes agree")
}
