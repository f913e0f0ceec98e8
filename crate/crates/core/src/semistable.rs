//! Semistable networks: `K ⪰ 0` with a nontrivial kernel.
//!
//! With `S = [S₀ S₁]` orthogonal and `K S₀ = 0`, proportional damping splits the
//! dynamics into an average part `z̈ₐ + αżₐ = S₀ᵀFu` and an asymptotically
//! stable part `(K̄, D̄, S₁ᵀF, HS₁)` with `K̄ = S₁ᵀKS₁ ≻ 0`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, EigenOrder};
use crate::model::SecondOrderModel;
use crate::network::SecondOrderNetwork;

pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AveragePart {
    pub alpha: f64,
    /// `S₀ᵀF`.
    pub f: DMatrix<f64>,
    /// `HS₀`.
    pub h: DMatrix<f64>,
}

impl AveragePart {
    pub fn dimension(&self) -> usize {
        self.f.nrows()
    }

    /// `(0, αI, S₀ᵀF, HS₀)`.
    pub fn model(&self) -> SecondOrderModel {
        let m = self.dimension();
        SecondOrderModel {
            k: DMatrix::zeros(m, m),
            d: DMatrix::identity(m, m) * self.alpha,
            f: self.f.clone(),
            h: self.h.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemistableSplit {
    pub s0: DMatrix<f64>,
    pub s1: DMatrix<f64>,
    pub kbar: DMatrix<f64>,
    pub dbar: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub average: AveragePart,
    /// `(K̄, D̄, S₁ᵀF, HS₁)`.
    pub stable: SecondOrderModel,
}

impl SemistableSplit {
    pub fn kernel_dimension(&self) -> usize {
        self.s0.ncols()
    }

    /// `S · blkdiag(0, K̄) · Sᵀ`.
    pub fn reassemble_stiffness(&self) -> DMatrix<f64> {
        &self.s1 * &self.kbar * self.s1.transpose()
    }

    pub fn basis(&self) -> DMatrix<f64> {
        let n = self.s0.nrows();
        let mut s = DMatrix::zeros(n, n);
        s.view_mut((0, 0), (n, self.s0.ncols())).copy_from(&self.s0);
        s.view_mut((0, self.s0.ncols()), (n, self.s1.ncols())).copy_from(&self.s1);
        s
    }
}

pub fn split(net: &SecondOrderNetwork) -> Result<SemistableSplit> {
    let (alpha, beta) = net.proportional().ok_or(Error::NotProportional)?;
    let k = net.k();
    let eig = linalg::sym_eig(&k, EigenOrder::Ascending)?;
    let thr = KERNEL_TOL * linalg::spectral_norm(&k).max(f64::MIN_POSITIVE);
    if eig.min() < -thr {
        return Err(Error::NotSemistable {
            min_eigenvalue: eig.min(),
        });
    }
    let m = eig.values.iter().take_while(|&&v| v.abs() <= thr).count();
    if m == 0 {
        return Err(Error::FullyStable);
    }
    let n = net.n();
    let s0 = eig.vectors.columns(0, m).into_owned();
    let s1 = eig.vectors.columns(m, n - m).into_owned();
    let kbar = linalg::symmetrize(&(s1.transpose() * &k * &s1));
    let dbar = linalg::symmetrize(&(s1.transpose() * net.d() * &s1));
    let average = AveragePart {
        alpha,
        f: s0.transpose() * net.f(),
        h: net.h() * &s0,
    };
    let stable = SecondOrderModel::new(kbar.clone(), dbar.clone(), s1.transpose() * net.f(), net.h() * &s1)?;
    Ok(SemistableSplit {
        s0,
        s1,
        kbar,
        dbar,
        alpha,
        beta,
        average,
        stable,
    })
}

/// Block-diagonal composite of the average part and a reduced stable part.
pub fn recombine(avg: &AveragePart, reduced: &SecondOrderModel) -> Result<SecondOrderModel> {
    if avg.f.ncols() != reduced.inputs() || avg.h.nrows() != reduced.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "average part has {} inputs / {} outputs, reduced part {} / {}",
            avg.f.ncols(),
            avg.h.nrows(),
            reduced.inputs(),
            reduced.outputs()
        )));
    }
    let (m, r) = (avg.dimension(), reduced.order());
    let zero = DMatrix::zeros(m, m);
    let k = linalg::block_diag(&[&zero, &reduced.k]);
    let am = DMatrix::identity(m, m) * avg.alpha;
    let d = linalg::block_diag(&[&am, &reduced.d]);
    let mut f = DMatrix::zeros(m + r, avg.f.ncols());
    f.view_mut((0, 0), (m, avg.f.ncols())).copy_from(&avg.f);
    f.view_mut((m, 0), (r, avg.f.ncols())).copy_from(&reduced.f);
    let mut h = DMatrix::zeros(avg.h.nrows(), m + r);
    h.view_mut((0, 0), (avg.h.nrows(), m)).copy_from(&avg.h);
    h.view_mut((0, m), (avg.h.nrows(), r)).copy_from(&reduced.h);
    SecondOrderModel::new(k, d, f, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator;
    use crate::network::{build_msd_example, Laplacian};
    use nalgebra::{Complex, DVector};

    fn pure_laplacian(l: &Laplacian, alpha: f64, beta: f64) -> SecondOrderNetwork {
        let n = l.n();
        let mut f = DMatrix::zeros(n, 1);
        f[(0, 0)] = 1.0;
        let h = DMatrix::from_fn(1, n, |_, j| if j == n - 1 { 1.0 } else { 0.0 });
        SecondOrderNetwork::new(DVector::zeros(n), l.matrix().clone(), alpha, beta, f, h).unwrap()
    }

    #[test]
    fn connected_graph_has_constant_kernel() {
        let net = pure_laplacian(&generator::ring(6).unwrap(), 0.5, 0.2);
        let s = split(&net).unwrap();
        assert_eq!(s.kernel_dimension(), 1);
        let expected = 1.0 / 6.0_f64.sqrt();
        assert!(s.s0.iter().all(|v| (v - expected).abs() < 1e-12));
        assert!((s.basis().transpose() * s.basis() - DMatrix::<f64>::identity(6, 6)).amax() < 1e-10);
        assert!((s.reassemble_stiffness() - net.k()).amax() < 1e-12);
        let defect = &s.dbar - DMatrix::<f64>::identity(5, 5) * 0.5 - &s.kbar * 0.2;
        assert!(defect.amax() < 1e-10);
    }

    #[test]
    fn positive_definite_input_is_fully_stable() {
        assert!(matches!(split(&build_msd_example()), Err(Error::FullyStable)));
    }

    #[test]
    fn two_components_give_two_dimensional_kernel() {
        let l = Laplacian::from_edges(6, &[(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 2.0), (3, 5, 1.0)]).unwrap();
        let s = split(&pure_laplacian(&l, 1.0, 0.1)).unwrap();
        assert_eq!(s.kernel_dimension(), 2);
    }

    #[test]
    fn non_proportional_rejected() {
        let net = pure_laplacian(&generator::ring(4).unwrap(), 1.0, 0.1)
            .with_damping(DMatrix::identity(4, 4))
            .unwrap();
        assert!(matches!(split(&net), Err(Error::NotProportional)));
    }

    #[test]
    fn untouched_split_reproduces_transfer() {
        let net = pure_laplacian(&generator::path(5).unwrap(), 0.8, 0.3);
        let s = split(&net).unwrap();
        let composite = recombine(&s.average, &s.stable).unwrap();
        let full = net.to_model();
        for w in [0.1, 0.7, 2.0, 9.0] {
            let jw = Complex::new(0.0, w);
            let a = full.transfer(jw).unwrap()[(0, 0)];
            let b = composite.transfer(jw).unwrap()[(0, 0)];
            assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-12), "ω = {w}");
        }
    }
}
