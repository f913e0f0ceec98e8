//! Diffusively coupled second-order networks `ẍ + Dẋ + Kx = Fu, y = Hx`
//! with `K = V + L` and Rayleigh damping `D = αI + βK`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenOrder};
use crate::model::SecondOrderModel;

/// Weighted undirected graph Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
}

impl Laplacian {
    /// Validates symmetry, zero row sums, sign pattern and semidefiniteness.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let violations = laplacian_violations(&matrix);
        if let Some(first) = violations.into_iter().next() {
            return Err(Error::Validation(first));
        }
        Ok(Self { matrix })
    }

    /// Builds `L` from weighted edges `(i, j, ω_ij)`; repeated edges accumulate.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut l = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) outside {n} nodes")));
            }
            if i == j {
                continue;
            }
            l[(i, j)] -= w;
            l[(j, i)] -= w;
            l[(i, i)] += w;
            l[(j, j)] += w;
        }
        Self::new(l)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Undirected edges `(i, j, ω)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = -self.matrix[(i, j)];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Second-smallest eigenvalue.
    pub fn algebraic_connectivity(&self) -> f64 {
        if self.n() < 2 {
            return 0.0;
        }
        linalg::sym_eig(&self.matrix, EigenOrder::Ascending)
            .map(|e| e.values[1])
            .unwrap_or(f64::NAN)
    }

    pub fn is_connected(&self) -> bool {
        if self.n() < 2 {
            return true;
        }
        let scale = linalg::spectral_norm(&self.matrix);
        self.algebraic_connectivity() > 1e-10 * scale
    }
}

fn laplacian_violations(l: &DMatrix<f64>) -> Vec<String> {
    let mut out = Vec::new();
    if !l.is_square() {
        out.push(format!("Laplacian is {}x{}, expected square", l.nrows(), l.ncols()));
        return out;
    }
    if l.iter().any(|v| !v.is_finite()) {
        out.push("Laplacian has non-finite entries".into());
        return out;
    }
    let n = l.nrows();
    let asym = linalg::asymmetry(l);
    if asym > 1e-12 {
        out.push(format!("Laplacian not symmetric (relative asymmetry {asym:.3e})"));
        return out;
    }
    let scale = linalg::spectral_norm(l).max(f64::MIN_POSITIVE);
    for i in 0..n {
        let row_sum: f64 = l.row(i).sum();
        if row_sum.abs() > 1e-10 * scale {
            out.push(format!("Laplacian row {i} sums to {row_sum:.6e}, expected 0"));
        }
        for j in 0..n {
            if i != j && l[(i, j)] > 1e-12 {
                out.push(format!("Laplacian off-diagonal ({i}, {j}) = {:.6e} is positive", l[(i, j)]));
            }
        }
    }
    if let Ok(eig) = linalg::sym_eig(l, EigenOrder::Ascending) {
        if n > 0 && eig.min() < -1e-10 * scale {
            out.push(format!("Laplacian has negative eigenvalue {:.6e}", eig.min()));
        }
    }
    out
}

/// Second-order network with `K = diag(V) + L`.
///
/// Damping is `αI + βK` unless an explicit non-proportional matrix is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderNetwork {
    v_diag: DVector<f64>,
    l: DMatrix<f64>,
    alpha: f64,
    beta: f64,
    f: DMatrix<f64>,
    h: DMatrix<f64>,
    damping: Option<DMatrix<f64>>,
}

impl SecondOrderNetwork {
    /// Checks shapes only; structural checks live in [`validate`].
    pub fn new(
        v_diag: DVector<f64>,
        l: DMatrix<f64>,
        alpha: f64,
        beta: f64,
        f: DMatrix<f64>,
        h: DMatrix<f64>,
    ) -> Result<Self> {
        let n = v_diag.len();
        if l.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("L is {:?}, expected {n}x{n}", l.shape())));
        }
        if f.nrows() != n {
            return Err(Error::DimensionMismatch(format!("F has {} rows, expected {n}", f.nrows())));
        }
        if h.ncols() != n {
            return Err(Error::DimensionMismatch(format!("H has {} columns, expected {n}", h.ncols())));
        }
        Ok(Self {
            v_diag,
            l,
            alpha,
            beta,
            f,
            h,
            damping: None,
        })
    }

    /// Replaces the Rayleigh damping by an explicit matrix.
    pub fn with_damping(mut self, d: DMatrix<f64>) -> Result<Self> {
        if d.shape() != (self.n(), self.n()) {
            return Err(Error::DimensionMismatch(format!("D is {:?}", d.shape())));
        }
        self.damping = Some(d);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.v_diag.len()
    }

    pub fn v_diag(&self) -> &DVector<f64> {
        &self.v_diag
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn damping_override(&self) -> Option<&DMatrix<f64>> {
        self.damping.as_ref()
    }

    /// `(α, β)` when the damping is Rayleigh.
    pub fn proportional(&self) -> Option<(f64, f64)> {
        match &self.damping {
            None => Some((self.alpha, self.beta)),
            Some(_) => None,
        }
    }

    pub fn k(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.v_diag) + &self.l
    }

    pub fn d(&self) -> DMatrix<f64> {
        match &self.damping {
            Some(d) => d.clone(),
            None => DMatrix::identity(self.n(), self.n()) * self.alpha + self.k() * self.beta,
        }
    }

    pub fn to_model(&self) -> SecondOrderModel {
        SecondOrderModel {
            k: self.k(),
            d: self.d(),
            f: self.f.clone(),
            h: self.h.clone(),
        }
    }

    /// Splits `K` into `diag(K𝟙) + L` with `L` zero-row-sum.
    pub fn from_stiffness(
        k: &DMatrix<f64>,
        alpha: f64,
        beta: f64,
        f: DMatrix<f64>,
        h: DMatrix<f64>,
    ) -> Result<Self> {
        let (v, l) = split_stiffness(k)?;
        Self::new(v, l, alpha, beta, f, h)
    }
}

/// `K = diag(V) + L` with `V = K𝟙` and `L = K − diag(K𝟙)`.
pub fn split_stiffness(k: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !k.is_square() {
        return Err(Error::DimensionMismatch(format!("K is {:?}", k.shape())));
    }
    let v = DVector::from_iterator(k.nrows(), k.row_iter().map(|r| r.sum()));
    let l = k - DMatrix::from_diagonal(&v);
    Ok((v, l))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// Informational only: a disconnected graph is still a valid network.
    pub connected: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn into_result(self) -> Result<()> {
        let msgs: Vec<String> = self
            .failures()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        if msgs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(msgs.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            writeln!(f, "{tag} {:<22} {}", c.name, c.detail)?;
        }
        write!(f, "connected: {}", self.connected)
    }
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

fn min_eig_check(name: &'static str, m: &DMatrix<f64>, what: &str) -> Check {
    match linalg::sym_eig(m, EigenOrder::Ascending) {
        Ok(e) => {
            let scale = e.max().abs().max(f64::MIN_POSITIVE);
            let lo = e.min();
            if lo > 1e-12 * scale {
                check(name, true, format!("smallest eigenvalue {lo:.6e}"))
            } else {
                check(name, false, format!("{what} singular or indefinite: smallest eigenvalue {lo:.6e}"))
            }
        }
        Err(e) => check(name, false, e.to_string()),
    }
}

/// Evaluates every structural invariant and records the first offending entry.
pub fn validate(net: &SecondOrderNetwork) -> ValidationReport {
    let mut checks = Vec::new();
    let l = &net.l;

    let lap = laplacian_violations(l);
    checks.push(check(
        "laplacian",
        lap.is_empty(),
        lap.first().cloned().unwrap_or_else(|| "symmetric, zero row sums, L ⪰ 0".into()),
    ));

    let neg_v = net.v_diag.iter().position(|&v| !(v >= 0.0));
    checks.push(check(
        "grounding",
        neg_v.is_none(),
        match neg_v {
            Some(i) => format!("V[{i}] = {:.6e} is negative", net.v_diag[i]),
            None => "V ≥ 0".into(),
        },
    ));

    let alpha_ok = net.alpha > 0.0 && net.alpha.is_finite();
    let beta_ok = net.beta >= 0.0 && net.beta.is_finite();
    checks.push(if net.damping.is_some() {
        check("damping coefficients", true, "explicit D; alpha and beta unused")
    } else {
        check(
            "damping coefficients",
            alpha_ok && beta_ok,
            format!("alpha = {}, beta = {}", net.alpha, net.beta),
        )
    });

    let k = net.k();
    checks.push(min_eig_check("stiffness definite", &k, "K"));
    checks.push(min_eig_check("damping definite", &net.d(), "D"));

    let k_scale = linalg::spectral_norm(&k);
    let mut dominance = None;
    for i in 0..net.n() {
        let off: f64 = (0..net.n()).filter(|&j| j != i).map(|j| k[(i, j)].abs()).sum();
        if k[(i, i)] < off - 1e-10 * k_scale {
            dominance = Some(format!("row {i}: K_ii = {:.6e} < Σ|K_ij| = {off:.6e}", k[(i, i)]));
            break;
        }
        if let Some(j) = (0..net.n()).find(|&j| j != i && k[(i, j)] > 1e-12) {
            dominance = Some(format!("K[{i}, {j}] = {:.6e} is positive", k[(i, j)]));
            break;
        }
    }
    checks.push(check(
        "diagonal dominance",
        dominance.is_none(),
        dominance.unwrap_or_else(|| "K is a diagonally dominant M-matrix".into()),
    ));

    let connected = lap.is_empty() && Laplacian { matrix: l.clone() }.is_connected();
    ValidationReport { checks, connected }
}

/// The four-node mass-spring-damper network with unit damping and input at node 1.
pub fn build_msd_example() -> SecondOrderNetwork {
    let l = DMatrix::from_row_slice(
        4,
        4,
        &[
            3.0, -1.0, 0.0, -2.0, //
            -1.0, 4.0, -2.0, -1.0, //
            0.0, -2.0, 3.0, -1.0, //
            -2.0, -1.0, -1.0, 4.0,
        ],
    );
    let v = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
    let mut f = DMatrix::zeros(4, 1);
    f[(0, 0)] = 1.0;
    let h = f.transpose();
    SecondOrderNetwork::new(v, l, 1.0, 0.0, f, h).expect("static example is well-formed")
}

/// Grounds node 1 with unit stiffness on top of `L`; `D = 0.97I + 0.15K`,
/// `F = e₁`, `H = K − diag(e₁)`.
pub fn build_sec4_system(l: &Laplacian) -> Result<SecondOrderNetwork> {
    build_grounded_system(l, 0.97, 0.15)
}

pub fn build_grounded_system(l: &Laplacian, alpha: f64, beta: f64) -> Result<SecondOrderNetwork> {
    let n = l.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty graph".into()));
    }
    let mut v = DVector::zeros(n);
    v[0] = 1.0;
    let mut f = DMatrix::zeros(n, 1);
    f[(0, 0)] = 1.0;
    let h = l.matrix().clone();
    let net = SecondOrderNetwork::new(v, l.matrix().clone(), alpha, beta, f, h)?;
    validate(&net).into_result()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msd_example_matches_printed_matrices() {
        let net = build_msd_example();
        let k = net.k();
        assert_eq!(k.row(0).iter().copied().collect::<Vec<_>>(), vec![4.0, -1.0, 0.0, -2.0]);
        assert_eq!(net.v_diag().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(net.d(), DMatrix::<f64>::identity(4, 4));
        let report = validate(&net);
        assert!(report.is_valid(), "{report}");
        assert!(report.connected);
    }

    #[test]
    fn positive_off_diagonal_reported_with_index() {
        let mut l = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        l[(0, 2)] = 0.5;
        l[(2, 0)] = 0.5;
        l[(0, 0)] = 0.5;
        l[(2, 2)] = 1.5;
        let net = SecondOrderNetwork::new(
            DVector::from_element(3, 1.0),
            l,
            1.0,
            0.1,
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 3),
        )
        .unwrap();
        let report = validate(&net);
        let fail = report.failures().find(|c| c.name == "laplacian").unwrap();
        assert!(fail.detail.contains("(0, 2)"), "{}", fail.detail);
    }

    #[test]
    fn ungrounded_connected_graph_is_singular() {
        let net = build_msd_example();
        let ungrounded = SecondOrderNetwork::new(
            DVector::zeros(4),
            net.laplacian().clone(),
            1.0,
            0.0,
            net.f().clone(),
            net.h().clone(),
        )
        .unwrap();
        let report = validate(&ungrounded);
        let fail = report.failures().find(|c| c.name == "stiffness definite").unwrap();
        assert!(fail.detail.contains("K singular"));
    }

    #[test]
    fn sec4_row_sums_and_damping() {
        let l = Laplacian::from_edges(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (0, 4, 1.0)]).unwrap();
        let net = build_sec4_system(&l).unwrap();
        let k = net.k();
        assert!((k.row(0).sum() - 1.0).abs() < 1e-15);
        for i in 1..5 {
            assert!(k.row(i).sum().abs() < 1e-15);
        }
        let rest = net.d() - &k * 0.15;
        assert!((rest - DMatrix::<f64>::identity(5, 5) * 0.97).amax() < 1e-15);
        assert_eq!(net.h(), l.matrix());
    }

    #[test]
    fn stiffness_split_recovers_grounding() {
        let net = build_msd_example();
        let (v, l) = split_stiffness(&net.k()).unwrap();
        assert_eq!(&v, net.v_diag());
        assert_eq!(&l, net.laplacian());
    }

    #[test]
    fn laplacian_rejects_nonzero_row_sum() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]);
        assert!(matches!(Laplacian::new(m), Err(Error::Validation(_))));
    }

    #[test]
    fn edges_roundtrip() {
        let l = Laplacian::from_edges(3, &[(0, 1, 2.0), (1, 2, 0.5)]).unwrap();
        assert_eq!(l.edges(), vec![(0, 1, 2.0), (1, 2, 0.5)]);
        assert!(l.is_connected());
        let split = Laplacian::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(!split.is_connected());
    }
}
