//! Dense kernels: symmetric eigendecomposition, Bartels–Stewart Lyapunov
//! solver and H2 norms of LTI realizations.
//!
//! Everything here is a pure function of its inputs.

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues with `Re λ > −HURWITZ_TOL·‖A‖_F` count as marginal.
pub const HURWITZ_TOL: f64 = 1e-14;

const SYMMETRY_TOL: f64 = 1e-12;

/// Continuous-time realization `ẋ = Ax + Bu, y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceRealization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl StateSpaceRealization {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, A has {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if c.ncols() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "C has {} columns, A has {}",
                c.ncols(),
                a.ncols()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// Applies the state transformation `x ↦ T x`.
    pub fn similarity(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("singular similarity transform".into()))?;
        Self::new(t * &self.a * &t_inv, t * &self.b, &self.c * t_inv)
    }
}

#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    /// Symmetric solution of `AP + PAᵀ + Q = 0`.
    pub p: DMatrix<f64>,
    /// `‖AP + PAᵀ + Q‖_F` evaluated after the solve.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrder {
    Ascending,
    Descending,
}

#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, one per column, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Relative asymmetry `max|M − Mᵀ| / max(1, max|M|)`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let scale = m.amax().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn sym_eig(m: &DMatrix<f64>, order: EigenOrder) -> Result<SymEig> {
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        let ord = eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]);
        match order {
            EigenOrder::Ascending => ord,
            EigenOrder::Descending => ord.reverse(),
        }
    });
    let values = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in idx.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // deterministic sign: largest-magnitude component positive
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(SymEig { values, vectors })
}

/// Orthogonal diagonalization `X1 = U·diag(z)·Uᵀ` of a symmetric positive
/// definite matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SpdSchur {
    pub u: DMatrix<f64>,
    pub z: DVector<f64>,
}

pub fn schur_decompose_spd(x1: &DMatrix<f64>) -> Result<SpdSchur> {
    let eig = sym_eig(x1, EigenOrder::Descending)?;
    let top = eig.max().abs().max(eig.min().abs());
    let smallest = eig.min();
    if smallest <= 1e-12 * top || top == 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: smallest,
        });
    }
    Ok(SpdSchur {
        u: eig.vectors,
        z: eig.values,
    })
}

/// Diagonal blocks `(start, size)` of a real quasi-upper-triangular matrix.
fn quasi_triangular_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n {
            let sub = t[(i + 1, i)].abs();
            let scale = t[(i, i)].abs() + t[(i + 1, i + 1)].abs();
            if sub > f64::EPSILON * scale.max(f64::MIN_POSITIVE) {
                blocks.push((i, 2));
                i += 2;
                continue;
            }
        }
        blocks.push((i, 1));
        i += 1;
    }
    blocks
}

fn block_max_real_part(t: &DMatrix<f64>, (s, size): (usize, usize)) -> f64 {
    if size == 1 {
        return t[(s, s)];
    }
    let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        half_tr + disc.sqrt()
    } else {
        half_tr
    }
}

/// Solves `T_I·Y + Y·T_Jᵀ = R` for blocks of size ≤ 2 by Kronecker expansion.
fn small_sylvester(ti: &DMatrix<f64>, tj: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = ti.nrows();
    let q = tj.nrows();
    let mut k = DMatrix::zeros(p * q, p * q);
    for col in 0..q {
        for row in 0..p {
            let eq = col * p + row;
            for m in 0..p {
                k[(eq, col * p + m)] += ti[(row, m)];
            }
            for m in 0..q {
                k[(eq, m * p + row)] += tj[(col, m)];
            }
        }
    }
    let rhs = DVector::from_iterator(p * q, r.iter().copied());
    let sol = match k.clone().lu().solve(&rhs) {
        Some(sol) => sol,
        None => k
            .svd(true, true)
            .solve(&rhs, 0.0)
            .map_err(|_| Error::NumericalFailure("singular Sylvester block".into()))?,
    };
    Ok(DMatrix::from_column_slice(p, q, sol.as_slice()))
}

/// Bartels–Stewart solve of `AP + PAᵀ + Q = 0` through the real Schur form of `A`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<LyapunovSolution> {
    bartels_stewart(a, q, true)
}

/// As [`solve_lyapunov`] for an `A` that is Hurwitz by construction; slow modes
/// below the eigenvalue tolerance are solved rather than rejected.
pub fn solve_lyapunov_stable(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<LyapunovSolution> {
    bartels_stewart(a, q, false)
}

fn bartels_stewart(a: &DMatrix<f64>, q: &DMatrix<f64>, check: bool) -> Result<LyapunovSolution> {
    let n = a.nrows();
    if !a.is_square() || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    if n == 0 {
        return Ok(LyapunovSolution {
            p: DMatrix::zeros(0, 0),
            residual_norm: 0.0,
        });
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("real Schur iteration did not converge".into()))?;
    let (z, t) = schur.unpack();
    let blocks = quasi_triangular_blocks(&t);

    let max_real = blocks
        .iter()
        .map(|&b| block_max_real_part(&t, b))
        .fold(f64::NEG_INFINITY, f64::max);
    if check && max_real >= -HURWITZ_TOL * t.norm().max(1.0) {
        return Err(Error::NotHurwitz {
            max_real_part: max_real,
        });
    }

    // T·Y + Y·Tᵀ = C with Y = Zᵀ P Z and C = −Zᵀ Q Z
    let c = -(z.transpose() * q * &z);
    let mut y = DMatrix::<f64>::zeros(n, n);
    for (jb, &(js, jn)) in blocks.iter().enumerate().rev() {
        let mut rj = c.columns(js, jn).into_owned();
        for &(ks, kn) in &blocks[jb + 1..] {
            rj -= y.columns(ks, kn) * t.view((js, ks), (jn, kn)).transpose();
        }
        let tjj = t.view((js, js), (jn, jn)).into_owned();
        for (ib, &(is, inn)) in blocks.iter().enumerate().rev() {
            let mut rhs = rj.rows(is, inn).into_owned();
            for &(ls, ln) in &blocks[ib + 1..] {
                rhs -= t.view((is, ls), (inn, ln)) * y.view((ls, js), (ln, jn));
            }
            let tii = t.view((is, is), (inn, inn)).into_owned();
            let yij = small_sylvester(&tii, &tjj, &rhs)?;
            y.view_mut((is, js), (inn, jn)).copy_from(&yij);
        }
    }

    let p = symmetrize(&(&z * y * z.transpose()));
    let residual_norm = (a * &p + &p * a.transpose() + q).norm();
    Ok(LyapunovSolution { p, residual_norm })
}

/// Controllability Gramian `P` of a Hurwitz realization.
pub fn controllability_gramian(sys: &StateSpaceRealization) -> Result<LyapunovSolution> {
    let q = &sys.b * sys.b.transpose();
    solve_lyapunov(&sys.a, &q)
}

/// `sqrt(tr(C P Cᵀ))` with `P` the controllability Gramian.
pub fn h2_norm(sys: &StateSpaceRealization) -> Result<f64> {
    Ok(h2_norm_squared(sys)?.max(0.0).sqrt())
}

pub fn h2_norm_squared(sys: &StateSpaceRealization) -> Result<f64> {
    let gram = controllability_gramian(sys)?;
    Ok((&sys.c * gram.p * sys.c.transpose()).trace())
}

/// Block-diagonal assembly of square or rectangular blocks.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}
