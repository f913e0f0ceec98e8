use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenOrder, StateSpaceRealization};

/// Generic second-order system `ẍ + Dẋ + Kx = Fu, y = Hx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderModel {
    #[serde(with = "crate::io::rows")]
    pub k: DMatrix<f64>,
    #[serde(with = "crate::io::rows")]
    pub d: DMatrix<f64>,
    #[serde(with = "crate::io::rows")]
    pub f: DMatrix<f64>,
    #[serde(with = "crate::io::rows")]
    pub h: DMatrix<f64>,
}

impl SecondOrderModel {
    pub fn new(k: DMatrix<f64>, d: DMatrix<f64>, f: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        if !k.is_square() || d.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "K is {:?}, D is {:?}",
                k.shape(),
                d.shape()
            )));
        }
        if f.nrows() != n || h.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "F is {:?} and H is {:?} for order {n}",
                f.shape(),
                h.shape()
            )));
        }
        Ok(Self { k, d, f, h })
    }

    pub fn order(&self) -> usize {
        self.k.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.f.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.h.nrows()
    }

    /// Companion realization with state `(x, ẋ)`.
    pub fn to_state_space(&self) -> StateSpaceRealization {
        let n = self.order();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).fill_with_identity();
        a.view_mut((n, 0), (n, n)).copy_from(&(-&self.k));
        a.view_mut((n, n), (n, n)).copy_from(&(-&self.d));
        let mut b = DMatrix::zeros(2 * n, self.inputs());
        b.view_mut((n, 0), (n, self.inputs())).copy_from(&self.f);
        let mut c = DMatrix::zeros(self.outputs(), 2 * n);
        c.view_mut((0, 0), (self.outputs(), n)).copy_from(&self.h);
        StateSpaceRealization { a, b, c }
    }

    /// Realization in energy coordinates `(K^{1/2}x, ẋ)`:
    /// `A = [0, S; −S, −D]`, `B = [0; F]`, `C = [HS⁻¹, 0]` with `S = K^{1/2}`.
    /// Also returns `S⁻¹`.
    ///
    /// Stiffness eigenvalues near zero make the companion form nearly
    /// defective; in these coordinates `A` stays a dissipative perturbation
    /// of a skew matrix and its spectrum remains well conditioned.
    pub fn to_energy_state_space(&self) -> Result<(StateSpaceRealization, DMatrix<f64>)> {
        let n = self.order();
        let eig = linalg::sym_eig(&self.k, EigenOrder::Ascending)?;
        if !(eig.min() > 0.0) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: eig.min(),
            });
        }
        let v = &eig.vectors;
        let root = v * DMatrix::from_diagonal(&eig.values.map(f64::sqrt)) * v.transpose();
        let root_inv = v * DMatrix::from_diagonal(&eig.values.map(|l| 1.0 / l.sqrt())) * v.transpose();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).copy_from(&root);
        a.view_mut((n, 0), (n, n)).copy_from(&(-&root));
        a.view_mut((n, n), (n, n)).copy_from(&(-&self.d));
        let mut b = DMatrix::zeros(2 * n, self.inputs());
        b.view_mut((n, 0), (n, self.inputs())).copy_from(&self.f);
        let mut c = DMatrix::zeros(self.outputs(), 2 * n);
        c.view_mut((0, 0), (self.outputs(), n)).copy_from(&(&self.h * &root_inv));
        Ok((StateSpaceRealization { a, b, c }, root_inv))
    }

    /// Controllability Gramian in energy coordinates. With `K, D ≻ 0` the
    /// realization is stable by construction and no eigenvalue test is made.
    fn energy_gramian(&self) -> Result<(StateSpaceRealization, DMatrix<f64>, DMatrix<f64>)> {
        let (ss, root_inv) = self.to_energy_state_space()?;
        let q = &ss.b * ss.b.transpose();
        let gram = if self.d.clone().cholesky().is_some() {
            linalg::solve_lyapunov_stable(&ss.a, &q)?
        } else {
            linalg::solve_lyapunov(&ss.a, &q)?
        };
        Ok((ss, gram.p, root_inv))
    }

    /// H2 norm, evaluated in energy coordinates when `K ≻ 0`.
    pub fn h2_norm(&self) -> Result<f64> {
        match self.energy_gramian() {
            Ok((ss, p, _)) => Ok((&ss.c * p * ss.c.transpose()).trace().max(0.0).sqrt()),
            Err(_) => linalg::h2_norm(&self.to_state_space()),
        }
    }

    /// Position block `P_xx` of the controllability Gramian of the companion
    /// realization, computed in energy coordinates.
    pub fn position_gramian(&self) -> Result<DMatrix<f64>> {
        let n = self.order();
        let (_, p, root_inv) = self.energy_gramian()?;
        let p11 = p.view((0, 0), (n, n)).into_owned();
        Ok(linalg::symmetrize(&(&root_inv * p11 * &root_inv)))
    }

    /// Transfer matrix `H (s²I + sD + K)⁻¹ F`.
    pub fn transfer(&self, s: Complex<f64>) -> Result<DMatrix<Complex<f64>>> {
        let n = self.order();
        let to_c = |m: &DMatrix<f64>| m.map(|v| Complex::new(v, 0.0));
        let mut pencil = to_c(&self.d) * s + to_c(&self.k);
        for i in 0..n {
            pencil[(i, i)] += s * s;
        }
        let x = pencil
            .lu()
            .solve(&to_c(&self.f))
            .ok_or_else(|| Error::NumericalFailure(format!("pencil singular at s = {s}")))?;
        Ok(to_c(&self.h) * x)
    }

    /// `‖D − αI − βK‖_F`.
    pub fn damping_defect(&self, alpha: f64, beta: f64) -> f64 {
        let n = self.order();
        (&self.d - DMatrix::<f64>::identity(n, n) * alpha - &self.k * beta).norm()
    }

    /// Applies `x ↦ U x` for orthogonal `U`: `(UKUᵀ, UDUᵀ, UF, HUᵀ)`.
    pub fn orthogonal_transform(&self, u: &DMatrix<f64>) -> Result<Self> {
        if u.shape() != (self.order(), self.order()) {
            return Err(Error::DimensionMismatch(format!(
                "transform is {:?}, model order {}",
                u.shape(),
                self.order()
            )));
        }
        let ut = u.transpose();
        Self::new(
            u * &self.k * &ut,
            u * &self.d * &ut,
            u * &self.f,
            &self.h * ut,
        )
    }
}
