//! Network realizations of a reduced stiffness matrix.
//!
//! An orthogonal `U_r = 𝒱𝒰ᵀ` maps `K̂ = 𝒰Λ̂𝒰ᵀ` to `K_r = λ_r I + 𝒱Λ𝒱ᵀ`, where
//! `𝒱 = [𝟙/√r, [−𝟙ᵀT; T]]` and `λ_r` is the smallest eigenvalue. The first
//! column of `𝒱` carries `λ_r`, so `K_r 𝟙 = λ_r 𝟙` and `K_r − λ_r I` has zero
//! row sums. Whether its off-diagonals are non-positive depends on `T`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenOrder};
use crate::model::SecondOrderModel;
use crate::network::SecondOrderNetwork;

const T_TOL: f64 = 1e-10;

/// `T` with `T Tᵀ = I − 𝟙𝟙ᵀ/r`, size `(r−1) × (r−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TFactor {
    t: DMatrix<f64>,
}

fn t_target(r: usize) -> DMatrix<f64> {
    let k = r.saturating_sub(1);
    DMatrix::identity(k, k) - DMatrix::from_element(k, k, 1.0 / r as f64)
}

/// Symmetric square root of `I − 𝟙𝟙ᵀ/r` (size `r − 1`).
fn sqrt_target(r: usize) -> DMatrix<f64> {
    let k = r - 1;
    let coef = if k == 0 {
        0.0
    } else {
        (1.0 / (r as f64).sqrt() - 1.0) / k as f64
    };
    DMatrix::identity(k, k) + DMatrix::from_element(k, k, coef)
}

impl TFactor {
    pub fn new(t: DMatrix<f64>) -> Result<Self> {
        if !t.is_square() {
            return Err(Error::DimensionMismatch(format!("T is {:?}, expected square", t.shape())));
        }
        let defect = Self::defect(&t);
        if !(defect <= T_TOL) {
            return Err(Error::NotOrthogonal { defect });
        }
        Ok(Self { t })
    }

    /// `max|T Tᵀ − (I − 𝟙𝟙ᵀ/r)|`.
    pub fn defect(t: &DMatrix<f64>) -> f64 {
        let r = t.nrows() + 1;
        (t * t.transpose() - t_target(r)).amax()
    }

    /// Nearest admissible factor `M·polar(M⁻¹T)`, for matrices printed to a few digits.
    pub fn project(t: &DMatrix<f64>) -> Result<Self> {
        if !t.is_square() {
            return Err(Error::DimensionMismatch(format!("T is {:?}, expected square", t.shape())));
        }
        let r = t.nrows() + 1;
        if r == 1 {
            return Ok(Self { t: t.clone() });
        }
        let m = sqrt_target(r);
        let m_inv = m.clone().try_inverse().expect("I − 𝟙𝟙ᵀ/r is nonsingular");
        let svd = (m_inv * t).svd(true, true);
        let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        Self::new(m * u * vt)
    }

    pub fn order(&self) -> usize {
        self.t.nrows() + 1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.t
    }
}

/// The symmetric positive definite factor `(I − 𝟙𝟙ᵀ/r)^{1/2}`.
pub fn base_t_factor(r: usize) -> TFactor {
    assert!(r >= 1, "order must be positive");
    TFactor { t: sqrt_target(r) }
}

/// Factor whose `𝒱` columns are the Helmert contrasts
/// `(1, …, 1, −k, 0, …)/√(k(k+1))`.
///
/// Paired with eigenvalues in descending order it always yields strictly
/// negative couplings.
pub fn ladder_t_factor(r: usize) -> TFactor {
    assert!(r >= 1, "order must be positive");
    let k = r - 1;
    let t = DMatrix::from_fn(k, k, |row, col| {
        let node = row + 1;
        let idx = col + 1;
        let scale = 1.0 / ((idx * (idx + 1)) as f64).sqrt();
        if node < idx {
            scale
        } else if node == idx {
            -(idx as f64) * scale
        } else {
            0.0
        }
    });
    TFactor { t }
}

/// `𝒱 = [1/√r, −𝟙ᵀT; 𝟙/√r, T]`.
pub fn assemble_v(t: &TFactor) -> DMatrix<f64> {
    assemble_v_unchecked(&t.t)
}

/// [`assemble_v`] for a raw matrix, without the orthogonality check.
pub fn assemble_v_unchecked(t: &DMatrix<f64>) -> DMatrix<f64> {
    let k = t.nrows();
    let r = k + 1;
    let mut v = DMatrix::zeros(r, r);
    let head = 1.0 / (r as f64).sqrt();
    v.column_mut(0).fill(head);
    for j in 0..k {
        v[(0, j + 1)] = -t.column(j).sum();
    }
    v.view_mut((1, 1), (k, k)).copy_from(t);
    v
}

/// How the eigenvalues of `K̂` are matched to the columns of `𝒱`.
///
/// The smallest eigenvalue always goes to the `𝟙/√r` column; the variants fix
/// the order of the remaining ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenPairing {
    #[default]
    Descending,
    Ascending,
}

/// `(λ_r, 𝒰)` with columns ordered by the pairing.
fn paired_eigen(k_hat: &DMatrix<f64>, pairing: EigenPairing) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let eig = linalg::sym_eig(k_hat, EigenOrder::Ascending)?;
    let r = eig.values.len();
    let mut order: Vec<usize> = vec![0];
    match pairing {
        EigenPairing::Descending => order.extend((1..r).rev()),
        EigenPairing::Ascending => order.extend(1..r),
    }
    let values = DVector::from_iterator(r, order.iter().map(|&i| eig.values[i]));
    let vectors = eig.vectors.select_columns(&order);
    Ok((values, vectors))
}

fn stiffness_for(values: &DVector<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let r = values.len();
    let lambda_r = values[0];
    let shifted = DVector::from_iterator(r, values.iter().map(|&l| l - lambda_r));
    DMatrix::identity(r, r) * lambda_r + v * DMatrix::from_diagonal(&shifted) * v.transpose()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphRealization {
    pub ur: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub kr: DMatrix<f64>,
    pub dr: DMatrix<f64>,
    pub fr: DMatrix<f64>,
    pub hr: DMatrix<f64>,
    pub lambda_r: f64,
    /// `K_r − λ_r I`.
    pub lr: DMatrix<f64>,
    /// Grounding `λ_r 𝟙`.
    pub vr: DVector<f64>,
    pub pairing: EigenPairing,
}

impl GraphRealization {
    pub fn order(&self) -> usize {
        self.kr.nrows()
    }

    pub fn model(&self) -> SecondOrderModel {
        SecondOrderModel {
            k: self.kr.clone(),
            d: self.dr.clone(),
            f: self.fr.clone(),
            h: self.hr.clone(),
        }
    }

    /// Largest off-diagonal entry of `K_r` and its position.
    pub fn max_off_diagonal(&self) -> (usize, usize, f64) {
        max_off_diagonal(&self.kr)
    }

    /// Network form; damping stays explicit, with `(α, β)` its least-squares fit.
    pub fn to_network(&self) -> Result<SecondOrderNetwork> {
        let (alpha, beta) = fit_rayleigh(&self.kr, &self.dr);
        let net = SecondOrderNetwork::new(self.vr.clone(), self.lr.clone(), alpha, beta, self.fr.clone(), self.hr.clone())?;
        if net.d() == self.dr {
            Ok(net)
        } else {
            net.with_damping(self.dr.clone())
        }
    }
}

fn max_off_diagonal(k: &DMatrix<f64>) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            if i != j && k[(i, j)] > best.2 {
                best = (i, j, k[(i, j)]);
            }
        }
    }
    best
}

/// Least-squares `(α, β)` in `D ≈ αI + βK`.
pub fn fit_rayleigh(k: &DMatrix<f64>, d: &DMatrix<f64>) -> (f64, f64) {
    let n = k.nrows();
    let i = DMatrix::<f64>::identity(n, n);
    let g = nalgebra::Matrix2::new(i.dot(&i), i.dot(k), k.dot(&i), k.dot(k));
    let rhs = nalgebra::Vector2::new(i.dot(d), k.dot(d));
    match g.try_inverse() {
        Some(inv) => {
            let sol = inv * rhs;
            (sol[0], sol[1])
        }
        // K ∝ I: all damping attributed to α
        None => (rhs[0] / n.max(1) as f64, 0.0),
    }
}

/// Similarity transform of `model` onto `K_r = λ_r I + 𝒱Λ𝒱ᵀ`.
///
/// Fails with [`Error::NotMMatrix`] (carrying the realization) when an
/// off-diagonal of `K_r` exceeds `1e-8·‖K̂‖₂`.
pub fn realize(model: &SecondOrderModel, t: &TFactor, pairing: EigenPairing) -> Result<GraphRealization> {
    let r = model.order();
    if t.order() != r {
        return Err(Error::DimensionMismatch(format!("T is for order {}, model has order {r}", t.order())));
    }
    let (values, vectors) = paired_eigen(&model.k, pairing)?;
    let lambda_r = values[0];
    if lambda_r <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lambda_r });
    }
    let v = assemble_v(t);
    let ur = &v * vectors.transpose();
    let transformed = model.orthogonal_transform(&ur)?;
    let kr = linalg::symmetrize(&transformed.k);
    let dr = linalg::symmetrize(&transformed.d);
    let lr = &kr - DMatrix::<f64>::identity(r, r) * lambda_r;
    let realization = GraphRealization {
        ur,
        t: t.matrix().clone(),
        kr,
        dr,
        fr: transformed.f,
        hr: transformed.h,
        lambda_r,
        lr,
        vr: DVector::from_element(r, lambda_r),
        pairing,
    };
    let scale = linalg::spectral_norm(&model.k);
    let (row, col, value) = realization.max_off_diagonal();
    if r > 1 && value > 1e-8 * scale {
        return Err(Error::NotMMatrix {
            row,
            col,
            value,
            realization: Box::new(realization),
        });
    }
    Ok(realization)
}

/// [`realize`] applied to a reduced model.
pub fn reconstruct(red: &crate::reduction::ReducedModel, t: &TFactor, pairing: EigenPairing) -> Result<GraphRealization> {
    realize(&red.model(), t, pairing)
}

/// `K_r` for `model.k` under `T` without any sign check.
pub fn realized_stiffness(k_hat: &DMatrix<f64>, t: &TFactor, pairing: EigenPairing) -> Result<DMatrix<f64>> {
    let (values, _) = paired_eigen(k_hat, pairing)?;
    Ok(stiffness_for(&values, &assemble_v(t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparsityOptions {
    pub starts: usize,
    pub seed: u64,
    /// Success threshold relative to `‖K̂‖₂`.
    pub tolerance: f64,
    pub pairing: EigenPairing,
}

impl Default for SparsityOptions {
    fn default() -> Self {
        Self {
            starts: 32,
            seed: 0,
            tolerance: 1e-8,
            pairing: EigenPairing::Descending,
        }
    }
}

/// Normalizes 0-based targets to deduplicated `(i, j)` with `i < j`.
pub fn normalize_targets(targets: &[(usize, usize)], r: usize) -> Result<Vec<(usize, usize)>> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &(i, j) in targets {
        if i >= r || j >= r {
            return Err(Error::InvalidArgument(format!("target ({i}, {j}) outside order {r}")));
        }
        if i == j {
            return Err(Error::InvalidArgument(format!("target ({i}, {i}) is a diagonal entry")));
        }
        let pair = (i.min(j), i.max(j));
        if !out.contains(&pair) {
            out.push(pair);
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Rotation in SO(k) from `k(k−1)/2` Givens angles.
pub fn givens_rotation(k: usize, angles: &[f64]) -> DMatrix<f64> {
    let mut q = DMatrix::identity(k, k);
    let mut idx = 0;
    for p in 0..k {
        for s in (p + 1)..k {
            let (sn, cs) = angles[idx].sin_cos();
            idx += 1;
            for row in 0..k {
                let a = q[(row, p)];
                let b = q[(row, s)];
                q[(row, p)] = cs * a - sn * b;
                q[(row, s)] = sn * a + cs * b;
            }
        }
    }
    q
}

struct SparsityProblem<'a> {
    values: DVector<f64>,
    m: DMatrix<f64>,
    targets: &'a [(usize, usize)],
}

impl SparsityProblem<'_> {
    fn k(&self) -> usize {
        self.values.len() - 1
    }

    fn t(&self, angles: &[f64]) -> DMatrix<f64> {
        &self.m * givens_rotation(self.k(), angles)
    }

    fn stiffness(&self, angles: &[f64]) -> DMatrix<f64> {
        stiffness_for(&self.values, &assemble_v_unchecked(&self.t(angles)))
    }

    fn residual(&self, angles: &[f64]) -> DVector<f64> {
        let k = self.stiffness(angles);
        DVector::from_iterator(self.targets.len(), self.targets.iter().map(|&(i, j)| k[(i, j)]))
    }

    fn energy(&self, angles: &[f64]) -> f64 {
        let k = self.stiffness(angles);
        let diag: f64 = k.diagonal().norm_squared();
        k.norm_squared() - diag
    }

    fn jacobian(&self, angles: &[f64]) -> DMatrix<f64> {
        let h = 1e-7;
        let mut jac = DMatrix::zeros(self.targets.len(), angles.len());
        let mut a = angles.to_vec();
        for c in 0..angles.len() {
            a[c] = angles[c] + h;
            let up = self.residual(&a);
            a[c] = angles[c] - h;
            let dn = self.residual(&a);
            a[c] = angles[c];
            jac.set_column(c, &((up - dn) / (2.0 * h)));
        }
        jac
    }

    fn energy_gradient(&self, angles: &[f64]) -> DVector<f64> {
        let h = 1e-7;
        let mut a = angles.to_vec();
        DVector::from_iterator(
            angles.len(),
            (0..angles.len()).map(|c| {
                a[c] = angles[c] + h;
                let up = self.energy(&a);
                a[c] = angles[c] - h;
                let dn = self.energy(&a);
                a[c] = angles[c];
                (up - dn) / (2.0 * h)
            }),
        )
    }

    /// Levenberg–Marquardt on the target residuals.
    fn levenberg_marquardt(&self, start: Vec<f64>, tol: f64) -> (Vec<f64>, f64) {
        let mut x = start;
        let mut res = self.residual(&x);
        let mut cost = res.norm();
        let mut lambda = 1e-3;
        for _ in 0..300 {
            if cost <= tol {
                break;
            }
            let j = self.jacobian(&x);
            let jt = j.transpose();
            let g = &jt * &res;
            let mut a = &jt * &j;
            let diag = a.diagonal();
            let mut improved = false;
            for _ in 0..20 {
                for d in 0..a.nrows() {
                    a[(d, d)] = diag[d] * (1.0 + lambda) + 1e-12;
                }
                let Some(step) = a.clone().lu().solve(&(-&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let trial_res = self.residual(&trial);
                let trial_cost = trial_res.norm();
                if trial_cost < cost {
                    x = trial;
                    res = trial_res;
                    cost = trial_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        (x, cost)
    }

    /// Gauss–Newton minimum-norm corrections back onto the zero set.
    fn restore(&self, mut x: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
        for _ in 0..30 {
            let res = self.residual(&x);
            if res.norm() <= tol {
                return Some(x);
            }
            let j = self.jacobian(&x);
            let step = j.pseudo_inverse(1e-12).ok()? * res;
            for (xi, si) in x.iter_mut().zip(step.iter()) {
                *xi -= si;
            }
        }
        (self.residual(&x).norm() <= tol).then_some(x)
    }

    /// Ascent of the coupling energy along the solution manifold.
    fn maximize_energy(&self, mut x: Vec<f64>, tol: f64) -> Vec<f64> {
        let mut e = self.energy(&x);
        let mut eta = 0.1;
        for _ in 0..200 {
            let g = self.energy_gradient(&x);
            let j = self.jacobian(&x);
            let Ok(jp) = j.clone().pseudo_inverse(1e-12) else { break };
            let n = x.len();
            let proj = DMatrix::<f64>::identity(n, n) - &jp * &j;
            let dir = proj * g;
            if dir.norm() <= 1e-9 * (1.0 + e) {
                break;
            }
            let mut moved = false;
            while eta > 1e-10 {
                let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + eta * d / dir.norm()).collect();
                if let Some(trial) = self.restore(trial, tol) {
                    let te = self.energy(&trial);
                    if te > e {
                        x = trial;
                        e = te;
                        eta *= 1.5;
                        moved = true;
                        break;
                    }
                }
                eta *= 0.5;
            }
            if !moved {
                break;
            }
        }
        x
    }
}

/// Finds `T = M·Q`, `Q ∈ SO(r−1)`, for which the listed couplings of `K_r`
/// vanish.
///
/// Converged multistarts are pushed along the solution set toward the
/// largest coupling energy `Σ_{i≠j} K_ij²`; the winner is the first
/// M-matrix solution by energy, ties broken by start index.
pub fn solve_sparsity(k_hat: &DMatrix<f64>, targets: &[(usize, usize)], opts: &SparsityOptions) -> Result<TFactor> {
    let r = k_hat.nrows();
    let targets = normalize_targets(targets, r)?;
    if r < 2 || targets.is_empty() {
        return Ok(base_t_factor(r.max(1)));
    }
    let (values, _) = paired_eigen(k_hat, opts.pairing)?;
    let scale = linalg::spectral_norm(k_hat);
    let tol = opts.tolerance * scale;
    let problem = SparsityProblem {
        values,
        m: sqrt_target(r),
        targets: &targets,
    };
    let dim = (r - 1) * (r - 2) / 2;

    if dim == 0 {
        // r = 2: T = ±1/√2 give the same K_r
        let t = base_t_factor(2);
        let res = problem.residual(&[]).norm();
        return if res <= tol {
            Ok(t)
        } else {
            Err(Error::NoSolutionFound { best_residual: res })
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|_| (0..dim).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect())
        .collect();

    let mut best_residual = f64::INFINITY;
    let mut candidates: Vec<(bool, f64, usize, Vec<f64>)> = Vec::new();
    for (idx, start) in starts.into_iter().enumerate() {
        let (x, cost) = problem.levenberg_marquardt(start, tol);
        best_residual = best_residual.min(cost);
        if cost > tol {
            continue;
        }
        let x = problem.maximize_energy(x, tol);
        let k = problem.stiffness(&x);
        let m_matrix = max_off_diagonal(&k).2 <= 1e-8 * scale;
        candidates.push((m_matrix, problem.energy(&x), idx, x));
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    match candidates.into_iter().next() {
        Some((_, _, _, x)) => TFactor::new(problem.t(&x)),
        None => Err(Error::NoSolutionFound { best_residual }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub ktilde: DMatrix<f64>,
    /// Orthogonal `U` with `K̃ = U K̂ Uᵀ`.
    pub ur: DMatrix<f64>,
    pub diag_dominant: bool,
}

/// Householder reduction to symmetric tridiagonal form with couplings
/// normalized to be non-positive.
pub fn householder_tridiag(k_hat: &DMatrix<f64>) -> Result<Tridiagonal> {
    let asym = linalg::asymmetry(k_hat);
    if asym > 1e-12 {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = k_hat.nrows();
    let mut a = linalg::symmetrize(k_hat);
    let mut u = DMatrix::<f64>::identity(n, n);
    for k in 0..n.saturating_sub(2) {
        let x = a.view((k + 1, k), (n - k - 1, 1)).into_owned();
        let alpha = x.norm();
        let tail = x.rows(1, x.nrows() - 1).norm();
        if tail == 0.0 {
            continue;
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = x;
        v[0] += sign * alpha;
        let v = &v / v.norm();
        let mut h = DMatrix::<f64>::identity(n, n);
        let mut block = h.view_mut((k + 1, k + 1), (n - k - 1, n - k - 1));
        block -= &v * v.transpose() * 2.0;
        a = &h * a * &h;
        u = &h * u;
    }
    // exact zeros outside the band
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) > 1 {
                a[(i, j)] = 0.0;
            }
        }
    }
    let mut signs = vec![1.0; n];
    for i in 1..n {
        let off = a[(i - 1, i)];
        signs[i] = if off > 0.0 { -signs[i - 1] } else { signs[i - 1] };
    }
    let s = DMatrix::from_diagonal(&DVector::from_vec(signs));
    let ktilde = linalg::symmetrize(&(&s * a * &s));
    let ur = s * u;
    let scale = linalg::spectral_norm(&ktilde);
    let diag_dominant = (0..n).all(|i| {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| ktilde[(i, j)].abs()).sum();
        ktilde[(i, i)] >= off - 1e-10 * scale
    });
    Ok(Tridiagonal {
        ktilde,
        ur,
        diag_dominant,
    })
}
