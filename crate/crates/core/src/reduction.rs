//! Convex relaxation of H2-optimal structure-preserving reduction.
//!
//! Decision variables `P₁₁ = P₁₁ᵀ, P₁₂, P₁₃ = P₁₃ᵀ ∈ ℝⁿˣⁿ`, `X₁ = X₁ᵀ ∈ ℝʳˣʳ`
//! and `γ`, with `X = blkdiag(X₁, 0)`:
//!
//! ```text
//! minimize γ
//!   s.t.  tr(H (P₁₁ − 2X) Hᵀ) ≤ γ
//!         Π = [sym(P₁₂), P₁₃ − P₁₁K − P₁₂D; ⋆, sym(−KP₁₂ − DP₁₃) + FFᵀ]       ≺ 0
//!         Φ = [sym(P₁₂), P₁₃ − P₁₁K − P₁₂D + 2XK; ⋆, sym(−KP₁₂ − DP₁₃)]      ≺ 0
//!         Ξ = P₁₁ − 2X ≻ 0,   P₁₃ ≻ 0,   X₁ ≻ 0
//! ```
//!
//! Strict inequalities carry a margin `ε`. From `X₁ = U Z Uᵀ` the projection is
//! `W = [U; 0] Z` and the reduced model is `(WᵀKW, WᵀDW, WᵀF, HW)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenOrder, StateSpaceRealization};
use crate::model::SecondOrderModel;
use crate::sdp::{self, ConicProgram, SolverSettings};

pub use crate::sdp::SolverStatus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReductionOptions {
    /// Strictness margin relative to the data scale.
    pub margin: f64,
    pub solver: SolverSettings,
    /// Replace `Ĥ_r` by the error-optimal output matrix after extraction.
    pub refine_output: bool,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            margin: 1e-7,
            solver: SolverSettings::default(),
            refine_output: false,
        }
    }
}

/// Offsets of the variable groups inside the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub n: usize,
    pub r: usize,
}

fn svec_len(k: usize) -> usize {
    k * (k + 1) / 2
}

impl VariableLayout {
    pub fn p11(&self) -> usize {
        0
    }

    pub fn p12(&self) -> usize {
        svec_len(self.n)
    }

    pub fn p13(&self) -> usize {
        self.p12() + self.n * self.n
    }

    pub fn x1(&self) -> usize {
        self.p13() + svec_len(self.n)
    }

    pub fn gamma(&self) -> usize {
        self.x1() + svec_len(self.r)
    }

    pub fn len(&self) -> usize {
        self.gamma() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Symmetric matrix from its upper triangle stored column by column.
fn unsvec(v: &[f64], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        for i in 0..=j {
            m[(i, j)] = v[idx];
            m[(j, i)] = v[idx];
            idx += 1;
        }
    }
    m
}

fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut out = Vec::with_capacity(svec_len(k));
    for j in 0..k {
        for i in 0..=j {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    m + m.transpose()
}

/// Unpacked decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Variables {
    pub p11: DMatrix<f64>,
    pub p12: DMatrix<f64>,
    pub p13: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub gamma: f64,
}

impl Variables {
    pub fn unpack(layout: VariableLayout, x: &DVector<f64>) -> Self {
        let (n, r) = (layout.n, layout.r);
        let s = x.as_slice();
        Self {
            p11: unsvec(&s[layout.p11()..layout.p12()], n),
            p12: DMatrix::from_column_slice(n, n, &s[layout.p12()..layout.p13()]),
            p13: unsvec(&s[layout.p13()..layout.x1()], n),
            x1: unsvec(&s[layout.x1()..layout.gamma()], r),
            gamma: s[layout.gamma()],
        }
    }

    pub fn pack(&self) -> DVector<f64> {
        let mut v = svec(&self.p11);
        v.extend(self.p12.iter());
        v.extend(svec(&self.p13));
        v.extend(svec(&self.x1));
        v.push(self.gamma);
        DVector::from_vec(v)
    }

    /// `X = blkdiag(X₁, 0)`.
    pub fn x_full(&self) -> DMatrix<f64> {
        let n = self.p11.nrows();
        let r = self.x1.nrows();
        let mut x = DMatrix::zeros(n, n);
        x.view_mut((0, 0), (r, r)).copy_from(&self.x1);
        x
    }

    pub fn xi(&self) -> DMatrix<f64> {
        &self.p11 - self.x_full() * 2.0
    }

    fn lower_right(&self, model: &SecondOrderModel) -> DMatrix<f64> {
        sym(&(-(&model.k * &self.p12) - &model.d * &self.p13))
    }

    pub fn pi(&self, model: &SecondOrderModel) -> DMatrix<f64> {
        let off = &self.p13 - &self.p11 * &model.k - &self.p12 * &model.d;
        let lr = self.lower_right(model) + &model.f * model.f.transpose();
        assemble2(&sym(&self.p12), &off, &lr)
    }

    pub fn phi(&self, model: &SecondOrderModel) -> DMatrix<f64> {
        let off = &self.p13 - &self.p11 * &model.k - &self.p12 * &model.d + self.x_full() * &model.k * 2.0;
        assemble2(&sym(&self.p12), &off, &self.lower_right(model))
    }

    pub fn trace_term(&self, model: &SecondOrderModel) -> f64 {
        (&model.h * self.xi() * model.h.transpose()).trace()
    }
}

/// `[[a, b], [bᵀ, c]]`.
fn assemble2(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = (a.nrows(), c.nrows());
    let mut m = DMatrix::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a);
    m.view_mut((0, p), (p, q)).copy_from(b);
    m.view_mut((p, 0), (q, p)).copy_from(&b.transpose());
    m.view_mut((p, p), (q, q)).copy_from(c);
    m
}

#[derive(Debug, Clone)]
pub struct SdpProgram {
    pub program: ConicProgram,
    pub layout: VariableLayout,
    /// Absolute strictness margin `ε`.
    pub epsilon: f64,
}

/// Data scale used for the strictness margin.
pub fn data_scale(model: &SecondOrderModel) -> f64 {
    let ff = &model.f * model.f.transpose();
    1.0_f64
        .max(linalg::spectral_norm(&model.k))
        .max(linalg::spectral_norm(&model.d))
        .max(linalg::spectral_norm(&ff))
}

fn check_order(n: usize, r: usize) -> Result<()> {
    if r == 0 || r >= n {
        return Err(Error::RankTooLarge { r, n });
    }
    Ok(())
}

/// Cone blocks, in order: `−Π − εI`, `−Φ − εI`, `Ξ − εI`, `P₁₃ − εI`,
/// `X₁ − εI`, `γ − tr(HΞHᵀ)`.
pub fn formulate_sdp(model: &SecondOrderModel, r: usize, margin: f64) -> Result<SdpProgram> {
    let n = model.order();
    check_order(n, r)?;
    if linalg::asymmetry(&model.k) > 1e-12 || linalg::asymmetry(&model.d) > 1e-12 {
        return Err(Error::NotSymmetric {
            asymmetry: linalg::asymmetry(&model.k).max(linalg::asymmetry(&model.d)),
        });
    }
    let layout = VariableLayout { n, r };
    let epsilon = margin * data_scale(model);
    let mut c = DVector::zeros(layout.len());
    c[layout.gamma()] = 1.0;
    let sizes = vec![2 * n, 2 * n, n, n, r, 1];
    let program = ConicProgram::from_affine(sizes, c, |x| {
        let v = Variables::unpack(layout, x);
        let e2 = DMatrix::<f64>::identity(2 * n, 2 * n) * epsilon;
        let e1 = DMatrix::<f64>::identity(n, n) * epsilon;
        let er = DMatrix::<f64>::identity(r, r) * epsilon;
        vec![
            -v.pi(model) - &e2,
            -v.phi(model) - &e2,
            v.xi() - &e1,
            &v.p13 - &e1,
            &v.x1 - er,
            DMatrix::from_element(1, 1, v.gamma - v.trace_term(model)),
        ]
    })?;
    Ok(SdpProgram {
        program,
        layout,
        epsilon,
    })
}

#[derive(Debug, Clone)]
pub struct SdpCertificate {
    pub p11: DMatrix<f64>,
    pub p12: DMatrix<f64>,
    pub p13: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub gamma: f64,
    pub solver_status: SolverStatus,
    pub epsilon: f64,
    pub iterations: usize,
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

impl SdpCertificate {
    pub fn variables(&self) -> Variables {
        Variables {
            p11: self.p11.clone(),
            p12: self.p12.clone(),
            p13: self.p13.clone(),
            x1: self.x1.clone(),
            gamma: self.gamma,
        }
    }

    pub fn order(&self) -> usize {
        self.x1.nrows()
    }

    /// Bound on the H2 error: `γ` bounds the squared norm.
    pub fn certified_bound(&self) -> f64 {
        self.gamma.max(0.0).sqrt()
    }
}

pub fn solve_sdp(prog: &SdpProgram, settings: &SolverSettings) -> Result<SdpCertificate> {
    let sol = sdp::solve(&prog.program, settings)?;
    let v = Variables::unpack(prog.layout, &sol.x);
    Ok(SdpCertificate {
        p11: v.p11,
        p12: v.p12,
        p13: v.p13,
        x1: v.x1,
        gamma: v.gamma,
        solver_status: sol.status,
        epsilon: prog.epsilon,
        iterations: sol.iterations,
        relative_gap: sol.relative_gap,
        primal_infeasibility: sol.primal_infeasibility,
        dual_infeasibility: sol.dual_infeasibility,
    })
}

/// Eigenvalue margins of the certificate at the returned point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub pi_max_eigenvalue: f64,
    pub phi_max_eigenvalue: f64,
    pub xi_min_eigenvalue: f64,
    pub trace_slack: f64,
}

pub fn check_certificate(cert: &SdpCertificate, model: &SecondOrderModel) -> Result<CertificateCheck> {
    let v = cert.variables();
    let ext = |m: &DMatrix<f64>, order| -> Result<f64> {
        let e = linalg::sym_eig(&linalg::symmetrize(m), EigenOrder::Ascending)?;
        Ok(match order {
            EigenOrder::Ascending => e.min(),
            EigenOrder::Descending => e.max(),
        })
    };
    Ok(CertificateCheck {
        pi_max_eigenvalue: ext(&v.pi(model), EigenOrder::Descending)?,
        phi_max_eigenvalue: ext(&v.phi(model), EigenOrder::Descending)?,
        xi_min_eigenvalue: ext(&v.xi(), EigenOrder::Ascending)?,
        trace_slack: v.gamma - v.trace_term(model),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub r: usize,
    #[serde(with = "crate::io::rows")]
    pub kr_hat: DMatrix<f64>,
    #[serde(with = "crate::io::rows")]
    pub dr_hat: DMatrix<f64>,
    #[serde(with = "crate::io::rows")]
    pub fr_hat: DMatrix<f64>,
    #[serde(with = "crate::io::rows")]
    pub hr_hat: DMatrix<f64>,
    /// Projection `W = P̂₂₁P̂₃₁⁻¹`, `n × r`.
    #[serde(with = "crate::io::rows")]
    pub w: DMatrix<f64>,
    pub gamma: f64,
    /// Whether `Ĥ_r` was replaced by the error-optimal output matrix.
    #[serde(default)]
    pub output_refined: bool,
}

impl ReducedModel {
    pub fn model(&self) -> SecondOrderModel {
        SecondOrderModel {
            k: self.kr_hat.clone(),
            d: self.dr_hat.clone(),
            f: self.fr_hat.clone(),
            h: self.hr_hat.clone(),
        }
    }

    pub fn certified_bound(&self) -> f64 {
        self.gamma.max(0.0).sqrt()
    }

    /// Projects `model` through `w`: `(WᵀKW, WᵀDW, WᵀF, HW)`.
    pub fn from_projection(model: &SecondOrderModel, w: DMatrix<f64>, gamma: f64) -> Result<Self> {
        if w.nrows() != model.order() {
            return Err(Error::DimensionMismatch(format!(
                "W has {} rows, model order {}",
                w.nrows(),
                model.order()
            )));
        }
        let wt = w.transpose();
        Ok(Self {
            r: w.ncols(),
            kr_hat: linalg::symmetrize(&(&wt * &model.k * &w)),
            dr_hat: linalg::symmetrize(&(&wt * &model.d * &w)),
            fr_hat: &wt * &model.f,
            hr_hat: &model.h * &w,
            w,
            gamma,
            output_refined: false,
        })
    }
}

/// Diagonalizes `X₁` and projects the model.
pub fn extract_reduced(cert: &SdpCertificate, model: &SecondOrderModel) -> Result<ReducedModel> {
    if cert.solver_status == SolverStatus::Infeasible {
        return Err(Error::Infeasible("certificate carries no feasible point".into()));
    }
    let n = model.order();
    let r = cert.order();
    check_order(n, r)?;
    let schur = linalg::schur_decompose_spd(&cert.x1)?;
    let mut w = DMatrix::zeros(n, r);
    w.view_mut((0, 0), (r, r))
        .copy_from(&(&schur.u * DMatrix::from_diagonal(&schur.z)));
    let sv = w.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if !(lo > 1e-10 * hi) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
    }
    ReducedModel::from_projection(model, w, cert.gamma)
}

/// `P̂` assembled from the certificate with `P̂₂₁ = [U; 0]`, `P̂₃₁ = Z⁻¹`.
pub fn assemble_p_hat(cert: &SdpCertificate) -> Result<DMatrix<f64>> {
    let n = cert.p11.nrows();
    let r = cert.order();
    let schur = linalg::schur_decompose_spd(&cert.x1)?;
    let mut p21 = DMatrix::zeros(n, r);
    p21.view_mut((0, 0), (r, r)).copy_from(&schur.u);
    let p31 = DMatrix::from_diagonal(&schur.z.map(|v| 1.0 / v));
    let size = 2 * n + 2 * r;
    let mut p = DMatrix::zeros(size, size);
    p.view_mut((0, 0), (n, n)).copy_from(&cert.p11);
    p.view_mut((0, n), (n, n)).copy_from(&cert.p12);
    p.view_mut((n, 0), (n, n)).copy_from(&cert.p12.transpose());
    p.view_mut((n, n), (n, n)).copy_from(&cert.p13);
    p.view_mut((0, 2 * n), (n, r)).copy_from(&p21);
    p.view_mut((2 * n, 0), (r, n)).copy_from(&p21.transpose());
    p.view_mut((2 * n, 2 * n), (r, r)).copy_from(&p31);
    p.view_mut((2 * n, 2 * n + r), (r, r)).copy_from(&(-&p31));
    p.view_mut((2 * n + r, 2 * n), (r, r)).copy_from(&(-&p31));
    p.view_mut((2 * n + r, 2 * n + r), (r, r)).copy_from(&(&p31 * 2.0));
    Ok(p)
}

/// Error system `Σ − Σ̂_r` with state `(x, ẋ, x̂, x̂̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRealization {
    pub realization: StateSpaceRealization,
    pub n: usize,
    pub r: usize,
}

pub fn error_system(model: &SecondOrderModel, red: &SecondOrderModel) -> Result<ErrorRealization> {
    if model.inputs() != red.inputs() || model.outputs() != red.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "full model has {} inputs / {} outputs, reduced {} / {}",
            model.inputs(),
            model.outputs(),
            red.inputs(),
            red.outputs()
        )));
    }
    let full = model.to_state_space();
    let reduced = red.to_state_space();
    let a = linalg::block_diag(&[&full.a, &reduced.a]);
    let mut b = DMatrix::zeros(a.nrows(), model.inputs());
    b.view_mut((0, 0), (full.b.nrows(), full.b.ncols())).copy_from(&full.b);
    b.view_mut((full.b.nrows(), 0), (reduced.b.nrows(), reduced.b.ncols()))
        .copy_from(&reduced.b);
    let mut c = DMatrix::zeros(model.outputs(), a.ncols());
    c.view_mut((0, 0), (full.c.nrows(), full.c.ncols())).copy_from(&full.c);
    c.view_mut((0, full.c.ncols()), (reduced.c.nrows(), reduced.c.ncols()))
        .copy_from(&(-&reduced.c));
    Ok(ErrorRealization {
        realization: StateSpaceRealization::new(a, b, c)?,
        n: model.order(),
        r: red.order(),
    })
}

/// The error system as one second-order model:
/// `(blkdiag(K, K̂), blkdiag(D, D̂), [F; F̂], [H, −Ĥ])`.
pub fn error_model(model: &SecondOrderModel, red: &SecondOrderModel) -> Result<SecondOrderModel> {
    if model.inputs() != red.inputs() || model.outputs() != red.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "full model has {} inputs / {} outputs, reduced {} / {}",
            model.inputs(),
            model.outputs(),
            red.inputs(),
            red.outputs()
        )));
    }
    let (n, r) = (model.order(), red.order());
    let mut f = DMatrix::zeros(n + r, model.inputs());
    f.view_mut((0, 0), (n, model.inputs())).copy_from(&model.f);
    f.view_mut((n, 0), (r, model.inputs())).copy_from(&red.f);
    let mut h = DMatrix::zeros(model.outputs(), n + r);
    h.view_mut((0, 0), (model.outputs(), n)).copy_from(&model.h);
    h.view_mut((0, n), (model.outputs(), r)).copy_from(&(-&red.h));
    SecondOrderModel::new(
        linalg::block_diag(&[&model.k, &red.k]),
        linalg::block_diag(&[&model.d, &red.d]),
        f,
        h,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub original_norm: f64,
    pub actual_error: f64,
    /// Raw optimal value, a bound on the squared error.
    pub gamma: f64,
    /// `sqrt(γ)`.
    pub certified_bound: f64,
    /// `actual_error² ≤ γ + 1e-6`.
    pub bound_holds: bool,
}

pub const BOUND_SLACK: f64 = 1e-6;

pub fn certified_error(model: &SecondOrderModel, red: &ReducedModel) -> Result<H2Report> {
    let original_norm = model.h2_norm()?;
    let actual_error = error_model(model, &red.model())?.h2_norm()?;
    Ok(H2Report {
        original_norm,
        actual_error,
        gamma: red.gamma,
        certified_bound: red.certified_bound(),
        bound_holds: actual_error * actual_error <= red.gamma + BOUND_SLACK,
    })
}

/// Error-optimal output matrix for the given `(K̂, D̂, F̂)`:
/// `Ĥ = H P_{x,x̂} P_{x̂,x̂}⁻¹` from the error-system Gramian.
pub fn refine_output(model: &SecondOrderModel, red: &ReducedModel) -> Result<ReducedModel> {
    let gram = error_model(model, &red.model())?.position_gramian()?;
    let n = model.order();
    let r = red.r;
    let p_cross = gram.view((0, n), (n, r)).into_owned();
    let p_red = gram.view((n, n), (r, r)).into_owned();
    let chol = p_red
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("reduced Gramian block is singular".into()))?;
    // Ĥ = H P_c P_r⁻¹  ⇔  P_r Ĥᵀ = P_cᵀ Hᵀ
    let hr = chol.solve(&(p_cross.transpose() * model.h.transpose())).transpose();
    let mut out = red.clone();
    out.hr_hat = hr;
    out.output_refined = true;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub certificate: SdpCertificate,
    pub reduced: ReducedModel,
    pub report: H2Report,
}

/// Formulate, solve, extract and evaluate in one call.
pub fn reduce(model: &SecondOrderModel, r: usize, opts: &ReductionOptions) -> Result<Reduction> {
    let prog = formulate_sdp(model, r, opts.margin)?;
    let certificate = solve_sdp(&prog, &opts.solver)?;
    let mut reduced = extract_reduced(&certificate, model)?;
    if opts.refine_output {
        reduced = refine_output(model, &reduced)?;
    }
    let report = certified_error(model, &reduced)?;
    Ok(Reduction {
        certificate,
        reduced,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_msd_example;

    #[test]
    fn decision_vector_length() {
        let layout = VariableLayout { n: 4, r: 2 };
        assert_eq!(layout.len(), 40);
        let prog = formulate_sdp(&build_msd_example().to_model(), 2, 1e-7).unwrap();
        assert_eq!(prog.program.num_vars(), 40);
        assert_eq!(prog.program.block_sizes, vec![8, 8, 4, 4, 2, 1]);
    }

    #[test]
    fn order_bounds() {
        let model = build_msd_example().to_model();
        assert!(matches!(formulate_sdp(&model, 0, 1e-7), Err(Error::RankTooLarge { .. })));
        assert!(matches!(formulate_sdp(&model, 4, 1e-7), Err(Error::RankTooLarge { .. })));
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let layout = VariableLayout { n: 3, r: 2 };
        let x = DVector::from_fn(layout.len(), |i, _| i as f64 * 0.5 - 3.0);
        let v = Variables::unpack(layout, &x);
        assert_eq!(v.p11, v.p11.transpose());
        assert_eq!(v.pack(), x);
    }

    #[test]
    fn slack_blocks_match_direct_evaluation() {
        let model = build_msd_example().to_model();
        let prog = formulate_sdp(&model, 2, 1e-7).unwrap();
        let x = DVector::from_fn(prog.layout.len(), |i, _| ((i * 7919) % 13) as f64 / 7.0 - 0.8);
        let v = Variables::unpack(prog.layout, &x);
        let s = prog.program.slack(&x);
        let e = prog.epsilon;
        assert!((&s[0] - (-v.pi(&model) - DMatrix::<f64>::identity(8, 8) * e)).amax() < 1e-12);
        assert!((&s[1] - (-v.phi(&model) - DMatrix::<f64>::identity(8, 8) * e)).amax() < 1e-12);
        assert!((&s[2] - (v.xi() - DMatrix::<f64>::identity(4, 4) * e)).amax() < 1e-12);
        assert!((s[5][(0, 0)] - (v.gamma - v.trace_term(&model))).abs() < 1e-12);
    }

    #[test]
    fn identity_projection_takes_leading_blocks() {
        let net = build_msd_example();
        let model = net.to_model();
        let cert = SdpCertificate {
            p11: DMatrix::identity(4, 4),
            p12: DMatrix::zeros(4, 4),
            p13: DMatrix::identity(4, 4),
            x1: DMatrix::identity(2, 2),
            gamma: 1.0,
            solver_status: SolverStatus::Optimal,
            epsilon: 1e-7,
            iterations: 0,
            relative_gap: 0.0,
            primal_infeasibility: 0.0,
            dual_infeasibility: 0.0,
        };
        let red = extract_reduced(&cert, &model).unwrap();
        assert!((&red.kr_hat - model.k.view((0, 0), (2, 2))).amax() < 1e-15);
        assert!((&red.dr_hat - model.d.view((0, 0), (2, 2))).amax() < 1e-15);
        let x = &red.w * red.w.transpose();
        assert!((x.view((0, 0), (2, 2)) - &cert.x1).amax() < 1e-12);
    }

    #[test]
    fn error_system_blocks() {
        let model = build_msd_example().to_model();
        let red = ReducedModel::from_projection(&model, DMatrix::identity(4, 2), 1.0).unwrap();
        let e = error_system(&model, &red.model()).unwrap();
        let a = &e.realization.a;
        assert_eq!(a.shape(), (12, 12));
        assert_eq!(a.view((0, 4), (4, 4)).into_owned(), DMatrix::<f64>::identity(4, 4));
        assert_eq!(a.view((8, 10), (2, 2)).into_owned(), DMatrix::<f64>::identity(2, 2));
        assert_eq!(e.realization.c.nrows(), 1);
        assert_eq!(e.realization.c[(0, 8)], -red.hr_hat[(0, 0)]);
    }

    #[test]
    fn exact_copy_has_zero_error() {
        let model = build_msd_example().to_model();
        let red = ReducedModel::from_projection(&model, DMatrix::identity(4, 4), 0.0).unwrap();
        let report = certified_error(&model, &red).unwrap();
        assert!(report.actual_error < 1e-7, "{}", report.actual_error);
    }

    #[test]
    fn refinement_never_hurts_on_truncation() {
        let model = build_msd_example().to_model();
        for r in 1..4 {
            let red = ReducedModel::from_projection(&model, DMatrix::identity(4, r), 1.0).unwrap();
            let before = certified_error(&model, &red).unwrap().actual_error;
            let after = certified_error(&model, &refine_output(&model, &red).unwrap()).unwrap().actual_error;
            assert!(after <= before + 1e-9, "r = {r}: {after} > {before}");
        }
    }
}
