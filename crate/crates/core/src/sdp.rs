//! Block-diagonal linear matrix inequality programs
//!
//! ```text
//! minimize cᵀx   subject to   S = Σᵢ xᵢFᵢ − F₀ ⪰ 0
//! ```
//!
//! solved by an infeasible-start primal–dual interior-point method (HKM search
//! direction, Mehrotra predictor–corrector). The dual program is
//! `maximize ⟨F₀, Y⟩ subject to ⟨Fᵢ, Y⟩ = cᵢ, Y ⪰ 0`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenOrder};

/// Upper-triangle entry `(block, row, col, value)` with `row <= col`.
pub type Entry = (usize, usize, usize, f64);

/// Symmetric block-diagonal matrix stored as upper-triangle triplets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseSym {
    pub entries: Vec<Entry>,
}

impl SparseSym {
    /// Keeps exact nonzeros of the upper triangles of `blocks`.
    pub fn from_dense(blocks: &[DMatrix<f64>]) -> Self {
        let mut entries = Vec::new();
        for (b, m) in blocks.iter().enumerate() {
            for c in 0..m.ncols() {
                for r in 0..=c {
                    let v = m[(r, c)];
                    if v != 0.0 {
                        entries.push((b, r, c, v));
                    }
                }
            }
        }
        Self { entries }
    }

    pub fn to_dense(&self, sizes: &[usize]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect();
        self.add_scaled_to(1.0, &mut out);
        out
    }

    fn add_scaled_to(&self, a: f64, out: &mut [DMatrix<f64>]) {
        for &(b, r, c, v) in &self.entries {
            out[b][(r, c)] += a * v;
            if r != c {
                out[b][(c, r)] += a * v;
            }
        }
    }

    /// `⟨F, G⟩ = tr(F G)` for symmetric `F` and arbitrary block `G`.
    fn dot(&self, g: &[DMatrix<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|&(b, r, c, v)| {
                if r == c {
                    v * g[b][(r, r)]
                } else {
                    v * (g[b][(r, c)] + g[b][(c, r)])
                }
            })
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, r, c, v)| if r == c { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }
}

/// `minimize cᵀx s.t. Σ xᵢFᵢ − F₀ ⪰ 0` over blocks of the given sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub block_sizes: Vec<usize>,
    pub c: DVector<f64>,
    pub f0: SparseSym,
    pub f: Vec<SparseSym>,
}

impl ConicProgram {
    pub fn new(block_sizes: Vec<usize>, c: DVector<f64>, f0: SparseSym, f: Vec<SparseSym>) -> Result<Self> {
        if c.len() != f.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} objective entries for {} constraint matrices",
                c.len(),
                f.len()
            )));
        }
        for (k, m) in std::iter::once(&f0).chain(f.iter()).enumerate() {
            for &(b, r, col, _) in &m.entries {
                if b >= block_sizes.len() || col >= block_sizes[b] || r > col {
                    return Err(Error::DimensionMismatch(format!(
                        "matrix {k}: entry ({b}, {r}, {col}) outside the upper triangle of the block structure"
                    )));
                }
            }
        }
        Ok(Self {
            block_sizes,
            c,
            f0,
            f,
        })
    }

    /// Builds the program from an affine block map `x ↦ S(x)`:
    /// `F₀ = −S(0)`, `Fᵢ = S(eᵢ) − S(0)`.
    pub fn from_affine<M>(block_sizes: Vec<usize>, c: DVector<f64>, map: M) -> Result<Self>
    where
        M: Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Sync,
    {
        let m = c.len();
        let base = map(&DVector::zeros(m));
        check_blocks(&base, &block_sizes)?;
        let f0 = SparseSym::from_dense(&base.iter().map(|b| -b).collect::<Vec<_>>());
        let f = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut e = DVector::zeros(m);
                e[i] = 1.0;
                let blocks: Vec<DMatrix<f64>> = map(&e).iter().zip(&base).map(|(a, b)| a - b).collect();
                SparseSym::from_dense(&blocks)
            })
            .collect();
        Self::new(block_sizes, c, f0, f)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// `Σ xᵢFᵢ − F₀` as dense blocks.
    pub fn slack(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out = self.zero_blocks();
        self.f0.add_scaled_to(-1.0, &mut out);
        self.add_operator(x, &mut out);
        out
    }

    fn add_operator(&self, x: &DVector<f64>, out: &mut [DMatrix<f64>]) {
        for (fi, &xi) in self.f.iter().zip(x.iter()) {
            if xi != 0.0 {
                fi.add_scaled_to(xi, out);
            }
        }
    }

    fn zero_blocks(&self) -> Vec<DMatrix<f64>> {
        self.block_sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect()
    }

    /// SDPA sparse format (1-based, upper triangle).
    pub fn to_sdpa(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.num_vars());
        let _ = writeln!(s, "{}", self.block_sizes.len());
        let sizes: Vec<String> = self.block_sizes.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "{}", sizes.join(" "));
        let c: Vec<String> = self.c.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{}", c.join(" "));
        for (k, m) in std::iter::once(&self.f0).chain(self.f.iter()).enumerate() {
            for &(b, r, col, v) in &m.entries {
                let _ = writeln!(s, "{k} {} {} {} {v:?}", b + 1, r + 1, col + 1);
            }
        }
        s
    }

    pub fn from_sdpa(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split(['"', '*']).next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(0, &format!("missing {what}")));
        let (ln, m_line) = next("variable count")?;
        let m: usize = first_token(m_line, ln)?;
        let (ln, nb_line) = next("block count")?;
        let nb: usize = first_token(nb_line, ln)?;
        let (ln, sz_line) = next("block sizes")?;
        let sizes: Vec<i64> = tokens(sz_line, ln)?;
        if sizes.len() != nb {
            return Err(parse_err(ln, "block size count disagrees with block count"));
        }
        if let Some(&neg) = sizes.iter().find(|&&s| s <= 0) {
            return Err(parse_err(ln, &format!("diagonal (LP) block {neg} not supported")));
        }
        let block_sizes: Vec<usize> = sizes.into_iter().map(|s| s as usize).collect();
        let (ln, c_line) = next("objective")?;
        let c: Vec<f64> = tokens(c_line, ln)?;
        if c.len() != m {
            return Err(parse_err(ln, "objective length disagrees with variable count"));
        }
        let mut mats = vec![SparseSym::default(); m + 1];
        for (ln, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 {
                return Err(parse_err(ln, "entry needs `matrix block row col value`"));
            }
            let idx: Vec<usize> = parts[..4]
                .iter()
                .map(|p| p.parse().map_err(|_| parse_err(ln, &format!("bad index `{p}`"))))
                .collect::<Result<_>>()?;
            let v: f64 = parts[4].parse().map_err(|_| parse_err(ln, "bad value"))?;
            let (k, b, r, col) = (idx[0], idx[1], idx[2], idx[3]);
            if k > m || b == 0 || b > nb || r == 0 || col == 0 || r > block_sizes[b - 1] || col > block_sizes[b - 1] {
                return Err(parse_err(ln, "index out of range"));
            }
            let (r, col) = if r <= col { (r, col) } else { (col, r) };
            mats[k].entries.push((b - 1, r - 1, col - 1, v));
        }
        let f0 = mats.remove(0);
        Self::new(block_sizes, DVector::from_vec(c), f0, mats)
    }
}

fn check_blocks(blocks: &[DMatrix<f64>], sizes: &[usize]) -> Result<()> {
    if blocks.len() != sizes.len() || blocks.iter().zip(sizes).any(|(b, &s)| b.shape() != (s, s)) {
        return Err(Error::DimensionMismatch("affine map blocks disagree with block sizes".into()));
    }
    Ok(())
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        column: 1,
        message: message.into(),
    }
}

fn tokens<T: std::str::FromStr>(line: &str, ln: usize) -> Result<Vec<T>> {
    line.split(|ch: char| ch.is_whitespace() || ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| parse_err(ln, &format!("bad token `{t}`"))))
        .collect()
}

fn first_token<T: std::str::FromStr>(line: &str, ln: usize) -> Result<T> {
    tokens(line, ln)?.into_iter().next().ok_or_else(|| parse_err(ln, "empty line"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    NearOptimal,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Relative duality gap for `Optimal`.
    pub gap_tol: f64,
    /// Relative primal and dual residuals for `Optimal`.
    pub feas_tol: f64,
    /// Looser thresholds accepted as `NearOptimal` when progress stalls.
    pub near_gap_tol: f64,
    pub near_feas_tol: f64,
    pub max_iter: usize,
    /// Farkas-ratio threshold for infeasibility and unboundedness.
    pub certificate_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            feas_tol: 1e-9,
            near_gap_tol: 1e-5,
            near_feas_tol: 1e-6,
            max_iter: 100,
            certificate_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: DVector<f64>,
    /// Slack blocks `Σ xᵢFᵢ − F₀`.
    pub s: Vec<DMatrix<f64>>,
    /// Dual blocks.
    pub y: Vec<DMatrix<f64>>,
    pub status: SolverStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

/// `(row, col, value)` entries of one block.
type BlockEntries = Vec<(usize, usize, f64)>;

struct Layout {
    /// Per constraint, its entries grouped as `(block, entries)`.
    grouped: Vec<Vec<(usize, BlockEntries)>>,
    /// Per block, the constraints touching it.
    users: Vec<Vec<usize>>,
}

impl Layout {
    fn new(prog: &ConicProgram) -> Self {
        let nb = prog.block_sizes.len();
        let mut users = vec![Vec::new(); nb];
        let grouped = prog
            .f
            .iter()
            .enumerate()
            .map(|(i, fi)| {
                let mut per_block: Vec<BlockEntries> = vec![Vec::new(); nb];
                for &(b, r, c, v) in &fi.entries {
                    per_block[b].push((r, c, v));
                }
                per_block
                    .into_iter()
                    .enumerate()
                    .filter(|(_, e)| !e.is_empty())
                    .map(|(b, e)| {
                        users[b].push(i);
                        (b, e)
                    })
                    .collect()
            })
            .collect();
        Self { grouped, users }
    }
}

fn block_dot(entries: &[(usize, usize, f64)], g: &DMatrix<f64>) -> f64 {
    entries
        .iter()
        .map(|&(r, c, v)| if r == c { v * g[(r, r)] } else { v * (g[(r, c)] + g[(c, r)]) })
        .sum()
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

fn sym_blocks(a: Vec<DMatrix<f64>>) -> Vec<DMatrix<f64>> {
    a.into_iter().map(|m| linalg::symmetrize(&m)).collect()
}

fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("iterate lost positive definiteness".into()))?;
    Ok(linalg::symmetrize(&chol.inverse()))
}

/// Largest `α ≤ ∞` keeping `M + αΔ ⪰ 0`, for `M ≻ 0`.
fn max_step(m: &[DMatrix<f64>], dm: &[DMatrix<f64>]) -> Result<f64> {
    let mut alpha = f64::INFINITY;
    for (mb, db) in m.iter().zip(dm) {
        if mb.is_empty() {
            continue;
        }
        let chol = mb
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("iterate lost positive definiteness".into()))?;
        let l = chol.l();
        let left = l
            .solve_lower_triangular(db)
            .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
        let scaled = l
            .solve_lower_triangular(&left.transpose())
            .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
        let lo = linalg::sym_eig(&linalg::symmetrize(&scaled), EigenOrder::Ascending)?.min();
        if lo < 0.0 {
            alpha = alpha.min(-1.0 / lo);
        }
    }
    Ok(alpha)
}

struct Direction {
    dx: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dy: Vec<DMatrix<f64>>,
}

struct Solver<'a> {
    prog: &'a ConicProgram,
    layout: Layout,
}

impl Solver<'_> {
    /// `M_ij = tr(Fᵢ Y Fⱼ S⁻¹)`.
    fn schur(&self, y: &[DMatrix<f64>], s_inv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.prog.num_vars();
        let columns: Vec<Vec<(usize, f64)>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut col: Vec<(usize, f64)> = Vec::new();
                for (b, entries) in &self.layout.grouped[j] {
                    let n = self.prog.block_sizes[*b];
                    let mut t = DMatrix::zeros(n, n);
                    let mut touched = vec![false; n];
                    for &(r, c, v) in entries {
                        let srow = s_inv[*b].row(c).into_owned();
                        let mut row = t.row_mut(r);
                        row += srow * v;
                        touched[r] = true;
                        if r != c {
                            let srow = s_inv[*b].row(r).into_owned();
                            let mut row = t.row_mut(c);
                            row += srow * v;
                            touched[c] = true;
                        }
                    }
                    let rows: Vec<usize> = (0..n).filter(|&i| touched[i]).collect();
                    let yr = y[*b].select_columns(&rows);
                    let tr = t.select_rows(&rows);
                    let g = yr * tr;
                    for &i in &self.layout.users[*b] {
                        if let Some((_, ei)) = self.layout.grouped[i].iter().find(|(bb, _)| bb == b) {
                            col.push((i, block_dot(ei, &g)));
                        }
                    }
                }
                col
            })
            .collect();
        let mut out = DMatrix::zeros(m, m);
        for (j, col) in columns.into_iter().enumerate() {
            for (i, v) in col {
                out[(i, j)] += v;
            }
        }
        linalg::symmetrize(&out)
    }

    fn operator_adjoint(&self, dx: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out = self.prog.zero_blocks();
        self.prog.add_operator(dx, &mut out);
        out
    }

    fn operator(&self, y: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.prog.num_vars(), self.prog.f.iter().map(|fi| fi.dot(y)))
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        schur: &SchurSystem,
        y: &[DMatrix<f64>],
        s_inv: &[DMatrix<f64>],
        rp: &[DMatrix<f64>],
        rd: &DVector<f64>,
        rc: &[DMatrix<f64>],
    ) -> Direction {
        // rhs_i = ⟨Fᵢ, Rc + Y Rp S⁻¹⟩ − rd_i
        let t: Vec<DMatrix<f64>> = rc
            .iter()
            .zip(y.iter().zip(rp.iter().zip(s_inv)))
            .map(|(c, (yb, (pb, sb)))| c + yb * pb * sb)
            .collect();
        let rhs = self.operator(&t) - rd;
        // M·v = A(Y A*(v) S⁻¹)
        let apply = |v: &DVector<f64>| {
            let av = self.operator_adjoint(v);
            let t: Vec<DMatrix<f64>> = y.iter().zip(av.iter().zip(s_inv)).map(|(yb, (ab, sb))| yb * ab * sb).collect();
            self.operator(&t)
        };
        let dx = schur.solve(&rhs, apply);
        let ds: Vec<DMatrix<f64>> = self
            .operator_adjoint(&dx)
            .into_iter()
            .zip(rp)
            .map(|(a, p)| a - p)
            .collect();
        let dy = sym_blocks(
            rc.iter()
                .zip(y.iter().zip(ds.iter().zip(s_inv)))
                .map(|(c, (yb, (db, sb)))| c - linalg::symmetrize(&(yb * db * sb)))
                .collect(),
        );
        Direction { dx, ds, dy }
    }
}

/// Schur complement with a possibly regularized factor.
struct SchurSystem {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SchurSystem {
    const REFINEMENT_STEPS: usize = 4;

    /// Factor solve refined against `apply`, the exact operator behind `m`.
    fn solve<F>(&self, rhs: &DVector<f64>, apply: F) -> DVector<f64>
    where
        F: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let mut x = self.chol.solve(rhs);
        let scale = rhs.norm();
        let mut best = (rhs - apply(&x)).norm();
        for _ in 0..Self::REFINEMENT_STEPS {
            if best <= f64::EPSILON * scale {
                break;
            }
            let res = rhs - apply(&x);
            let cand = &x + self.chol.solve(&res);
            let r = (rhs - apply(&cand)).norm();
            if r >= best {
                break;
            }
            x = cand;
            best = r;
        }
        x
    }
}

fn factor_schur(m: DMatrix<f64>) -> Result<SchurSystem> {
    if let Some(chol) = m.clone().cholesky() {
        return Ok(SchurSystem { chol });
    }
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    for k in [1e-14, 1e-12, 1e-10] {
        let reg = &m + DMatrix::identity(m.nrows(), m.ncols()) * (k * scale);
        if let Some(chol) = reg.cholesky() {
            return Ok(SchurSystem { chol });
        }
    }
    Err(Error::NumericalFailure("Schur complement is singular".into()))
}

/// Solves the program; see the module docs for the formulation.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<SdpSolution> {
    let solver = Solver {
        prog,
        layout: Layout::new(prog),
    };
    let m = prog.num_vars();
    let dim: usize = prog.block_sizes.iter().sum();
    if dim == 0 {
        return Err(Error::InvalidArgument("program has no cone blocks".into()));
    }
    let nb = prog.block_sizes.len();
    let f0 = prog.f0.to_dense(&prog.block_sizes);
    let f0_norm = frob(&f0);
    let c_norm = prog.c.norm();
    let c_max = prog.c.amax();

    // block-wise starting point scaled to the data
    let mut f_norms = vec![0.0_f64; nb];
    let mut f_ratio = vec![0.0_f64; nb];
    for (i, fi) in solver.layout.grouped.iter().enumerate() {
        for (b, e) in fi {
            let nrm = e
                .iter()
                .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
                .sum::<f64>()
                .sqrt();
            f_norms[*b] = f_norms[*b].max(nrm);
            f_ratio[*b] = f_ratio[*b].max((1.0 + prog.c[i].abs()) / (1.0 + nrm));
        }
    }
    let mut y: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
    let mut s: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
    for (b, &n) in prog.block_sizes.iter().enumerate() {
        let nf = n as f64;
        let xi = 10.0_f64.max(nf.sqrt()).max(nf * f_ratio[b]);
        let eta = 10.0_f64
            .max(nf.sqrt())
            .max((1.0 + f_norms[b].max(frob(&f0[b..b + 1]))) / nf.sqrt().max(1.0))
            .max(1.0 + c_max);
        y.push(DMatrix::identity(n, n) * xi);
        s.push(DMatrix::identity(n, n) * eta);
    }
    let mut x = DVector::zeros(m);
    let mut step_fraction = 0.9;
    let mut stalls = 0;
    let mut last = None;

    for iter in 0..=settings.max_iter {
        let ax = solver.operator_adjoint(&x);
        let rp: Vec<DMatrix<f64>> = (0..nb).map(|b| &s[b] - &ax[b] + &f0[b]).collect();
        let ay = solver.operator(&y);
        let rd = &prog.c - &ay;
        let gap = inner(&y, &s);
        let pobj = prog.c.dot(&x);
        let dobj = inner(&f0, &y);
        let rel_gap = gap / (1.0 + pobj.abs() + dobj.abs());
        let pinf = frob(&rp) / (1.0 + f0_norm);
        let dinf = rd.norm() / (1.0 + c_norm);

        let snapshot = |status| SdpSolution {
            x: x.clone(),
            s: prog.slack(&x),
            y: y.clone(),
            status,
            primal_objective: pobj,
            dual_objective: dobj,
            relative_gap: rel_gap,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            iterations: iter,
        };
        if rel_gap <= settings.gap_tol && pinf <= settings.feas_tol && dinf <= settings.feas_tol {
            return Ok(snapshot(SolverStatus::Optimal));
        }
        // Farkas certificates
        if dobj > 0.0 && ay.norm() / dobj <= settings.certificate_tol {
            return Err(Error::Infeasible(format!(
                "dual ray with ‖A(Y)‖/⟨F₀,Y⟩ = {:.3e} after {iter} iterations",
                ay.norm() / dobj
            )));
        }
        if pobj < 0.0 {
            let viol = ax
                .iter()
                .filter(|b| !b.is_empty())
                .map(|b| linalg::sym_eig(&linalg::symmetrize(b), EigenOrder::Ascending).map(|e| (-e.min()).max(0.0)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            if viol / -pobj <= settings.certificate_tol && -pobj > 1e6 * (1.0 + c_norm) {
                return Err(Error::Unbounded(format!("primal ray with objective {pobj:.3e}")));
            }
        }
        let near = rel_gap <= settings.near_gap_tol && pinf <= settings.near_feas_tol && dinf <= settings.near_feas_tol;
        if iter == settings.max_iter || stalls >= 3 {
            if near {
                return Ok(snapshot(SolverStatus::NearOptimal));
            }
            return Err(Error::NumericalFailure(format!(
                "no convergence after {iter} iterations (gap {rel_gap:.2e}, primal {pinf:.2e}, dual {dinf:.2e})"
            )));
        }

        let mu = gap / dim as f64;
        let s_inv = s.iter().map(inverse_spd).collect::<Result<Vec<_>>>()?;
        let schur = factor_schur(solver.schur(&y, &s_inv))?;

        // predictor
        let rc_aff: Vec<DMatrix<f64>> = y.iter().map(|b| -b).collect();
        let aff = solver.direction(&schur, &y, &s_inv, &rp, &rd, &rc_aff);
        let ay_max = max_step(&y, &aff.dy)?;
        let as_max = max_step(&s, &aff.ds)?;
        let a_y = (step_fraction * ay_max).min(1.0);
        let a_s = (step_fraction * as_max).min(1.0);
        let mu_aff: f64 = (0..nb)
            .map(|b| (&y[b] + &aff.dy[b] * a_y).dot(&(&s[b] + &aff.ds[b] * a_s)))
            .sum::<f64>()
            / dim as f64;
        let ratio = (mu_aff / mu).clamp(0.0, 1.0);
        let expon = if a_y.min(a_s) > 0.5 { 3.0 } else { 2.0 };
        let sigma = ratio.powf(expon).min(1.0);

        // corrector
        let rc: Vec<DMatrix<f64>> = (0..nb)
            .map(|b| &s_inv[b] * (sigma * mu) - &y[b] - linalg::symmetrize(&(&aff.dy[b] * &aff.ds[b] * &s_inv[b])))
            .collect();
        let dir = solver.direction(&schur, &y, &s_inv, &rp, &rd, &rc);
        let ay_max = max_step(&y, &dir.dy)?;
        let as_max = max_step(&s, &dir.ds)?;
        let mut a_y = (step_fraction * ay_max).min(1.0);
        let mut a_s = (step_fraction * as_max).min(1.0);

        // rounding near the boundary can still leave the cone
        let (y_next, s_next) = loop {
            let y_next: Vec<DMatrix<f64>> = (0..nb).map(|b| linalg::symmetrize(&(&y[b] + &dir.dy[b] * a_y))).collect();
            let s_next: Vec<DMatrix<f64>> = (0..nb).map(|b| linalg::symmetrize(&(&s[b] + &dir.ds[b] * a_s))).collect();
            if y_next.iter().chain(&s_next).all(|m| m.clone().cholesky().is_some()) {
                break (y_next, s_next);
            }
            if a_y.max(a_s) < 1e-12 {
                return Err(Error::NumericalFailure("iterate lost positive definiteness".into()));
            }
            a_y *= 0.5;
            a_s *= 0.5;
        };
        y = y_next;
        s = s_next;
        x += &dir.dx * a_s;
        step_fraction = 0.9 + 0.09 * a_y.min(a_s);

        if a_y.max(a_s) < 1e-8 {
            stalls += 1;
        } else if let Some((g0, p0, d0)) = last {
            let improved = rel_gap < 0.999 * g0 || pinf < 0.999 * p0 || dinf < 0.999 * d0;
            stalls = if improved { 0 } else { stalls + 1 };
        }
        last = Some((rel_gap, pinf, dinf));
    }
    unreachable!("loop returns by max_iter")
}
