use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use netred::network::{self, build_grounded_system, build_msd_example};
use netred::reconstruct::{self, base_t_factor, ladder_t_factor};
use netred::reduction::{self, SolverStatus};
use netred::semistable::{self, SemistableSplit};
use netred::{generator, linalg, SecondOrderModel, SecondOrderNetwork};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Config, SolverFlags, SparsityFlags};
use crate::error::{CliError, CliResult};
use crate::files::{self, AverageDocument, Document, ReduceReport, ReducedDocument, TridiagonalDocument};
use crate::sweep::{parse_orders, SweepMetadata, SweepReport, SweepRow};

#[derive(Debug, Parser)]
#[command(name = "netred", version, about = "H2 model reduction and graph reconstruction for second-order networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Write a network file
    Generate(GenerateArgs),
    /// Reduce a network to order r
    Reduce(ReduceArgs),
    /// Realize a reduced model as a network
    Reconstruct(ReconstructArgs),
    /// Reduce over a range of orders and tabulate the errors
    Sweep(SweepArgs),
    /// Summarize any file written by this tool
    Show(ShowArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    MsdExample,
    HolmeKim,
    Ring,
    Path,
    /// Laplacian read from `--laplacian`
    MatrixMarket,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::HolmeKim)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Edges added per new node
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Probability of closing a triangle after each attachment
    #[arg(long, default_value_t = 0.1)]
    pub p_triangle: f64,
    #[arg(long, default_value_t = 0.97)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.15)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Matrix-Market file holding L
    #[arg(long)]
    pub laplacian: Option<PathBuf>,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReduceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub order: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Theorem2,
    Householder,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    /// Reduced-model file
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Couplings forced to zero, 1-based: "i,j;k,l"
    #[arg(long, default_value = "")]
    pub zeros: String,
    #[arg(long, value_enum, default_value_t = Method::Theorem2)]
    pub method: Method,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub sparsity: SparsityFlags,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// start:stop:step, stop inclusive
    #[arg(long)]
    pub orders: String,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// CSV report; printed to standard output when neither --csv nor --json is given
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Plain `r actual bound` table
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Args)]
pub struct ShowArgs {
    pub path: PathBuf,
}

pub fn run(cmd: &Command, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Generate(a) => cmd_generate(a, out).map(|_| ()),
        Command::Reduce(a) => cmd_reduce(a, out).map(|_| ()),
        Command::Reconstruct(a) => cmd_reconstruct(a, out).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(a, out).map(|_| ()),
        Command::Show(a) => cmd_show(a, out),
    }
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write) -> CliResult<SecondOrderNetwork> {
    let mut meta = Map::new();
    let name = args.model.to_possible_value().expect("no skipped variants").get_name().to_owned();
    meta.insert("model".into(), json!(name));
    let usage = |e: netred::Error| match e {
        netred::Error::InvalidArgument(m) => CliError::Usage(m),
        other => CliError::Generation(other),
    };
    let net = match args.model {
        ModelKind::MsdExample => build_msd_example(),
        ModelKind::HolmeKim => {
            let l = generator::generate_powerlaw_cluster(args.n, args.m, args.p_triangle, args.seed).map_err(usage)?;
            meta.insert("n".into(), json!(args.n));
            meta.insert("m".into(), json!(args.m));
            meta.insert("p_triangle".into(), json!(args.p_triangle));
            meta.insert("seed".into(), json!(args.seed));
            build_grounded_system(&l, args.alpha, args.beta)?
        }
        ModelKind::Ring | ModelKind::Path => {
            let l = if args.model == ModelKind::Ring {
                generator::ring(args.n)
            } else {
                generator::path(args.n)
            }
            .map_err(usage)?;
            meta.insert("n".into(), json!(args.n));
            build_grounded_system(&l, args.alpha, args.beta)?
        }
        ModelKind::MatrixMarket => {
            let path = args
                .laplacian
                .as_ref()
                .ok_or_else(|| CliError::Usage("--model matrix-market needs --laplacian FILE".into()))?;
            let l = netred::io::load_laplacian(path)?;
            meta.insert("source".into(), json!(path.display().to_string()));
            build_grounded_system(&l, args.alpha, args.beta)?
        }
    };
    let mut extra = Map::new();
    extra.insert("meta".into(), Value::Object(meta));
    let text = files::to_pretty(&files::network_document(&net, extra));
    files::emit(args.out.as_deref(), &text, out)?;
    if let Some(path) = &args.out {
        writeln!(out, "wrote {name} network with n={} to {}", net.n(), path.display())?;
    }
    Ok(net)
}

/// The model handed to the solver, plus the kernel split for semistable inputs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: SecondOrderModel,
    pub split: Option<SemistableSplit>,
}

/// Validates a network and, when its only defect is a singular stiffness,
/// separates the kernel.
pub fn prepare(net: &SecondOrderNetwork) -> CliResult<Prepared> {
    let report = network::validate(net);
    if report.is_valid() {
        return Ok(Prepared {
            model: net.to_model(),
            split: None,
        });
    }
    if report.failures().all(|c| c.name == "stiffness definite") {
        let split = semistable::split(net)?;
        return Ok(Prepared {
            model: split.stable.clone(),
            split: Some(split),
        });
    }
    Err(report.into_result().unwrap_err().into())
}

pub fn reduce_prepared(p: &Prepared, r: usize, cfg: &Config) -> CliResult<ReducedDocument> {
    let start = Instant::now();
    let red = reduction::reduce(&p.model, r, &cfg.reduction_options())?;
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let report = ReduceReport {
        n: p.model.order(),
        r,
        status: red.certificate.solver_status,
        iterations: red.certificate.iterations,
        gamma_raw: red.report.gamma,
        certified_bound: red.report.certified_bound,
        actual_h2_error: red.report.actual_error,
        original_h2_norm: red.report.original_norm,
        bound_holds: red.report.bound_holds,
        wall_time_seconds,
        stable_part_only: p.split.is_some(),
    };
    let average = p.split.as_ref().map(|s| AverageDocument {
        alpha: s.average.alpha,
        f: s.average.f.clone(),
        h: s.average.h.clone(),
        s0: s.s0.clone(),
    });
    Ok(ReducedDocument {
        kind: files::REDUCED.into(),
        reduced: red.reduced,
        report,
        average,
    })
}

pub fn cmd_reduce(args: &ReduceArgs, out: &mut dyn Write) -> CliResult<ReducedDocument> {
    let cfg = args.solver.resolve()?;
    let (net, _) = files::load_network(&args.input)?;
    let prepared = prepare(&net)?;
    let doc = reduce_prepared(&prepared, args.order, &cfg)?;
    if let Some(path) = &args.out {
        std::fs::write(path, files::to_pretty(&doc))?;
    }
    writeln!(out, "{}", doc.report.line())?;
    Ok(doc)
}

/// Parses `"i,j;k,l"` (1-based) into 0-based pairs.
pub fn parse_zeros(spec: &str) -> CliResult<Vec<(usize, usize)>> {
    let bad = |item: &str| CliError::Usage(format!("--zeros entries are 1-based pairs \"i,j\", got {item:?}"));
    spec.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (a, b) = item.split_once(',').ok_or_else(|| bad(item))?;
            let i: usize = a.trim().parse().map_err(|_| bad(item))?;
            let j: usize = b.trim().parse().map_err(|_| bad(item))?;
            if i == 0 || j == 0 {
                return Err(bad(item));
            }
            Ok((i - 1, j - 1))
        })
        .collect()
}

/// Result of `reconstruct`: a network file or a tridiagonal form.
#[derive(Debug, Clone)]
pub enum Reconstruction {
    Network(Box<SecondOrderNetwork>),
    Tridiagonal(Box<TridiagonalDocument>),
}

pub fn cmd_reconstruct(args: &ReconstructArgs, out: &mut dyn Write) -> CliResult<Reconstruction> {
    let cfg = args.sparsity.resolve()?;
    let doc = files::load_reduced(&args.input)?;
    let model = doc.reduced.model();
    let r = model.order();
    if doc.average.is_some() {
        writeln!(out, "note: input is semistable; only the reduced stable part is realized")?;
    }
    match args.method {
        Method::Theorem2 => {
            let targets = parse_zeros(&args.zeros)?;
            let t = if targets.is_empty() {
                if r >= 2 {
                    ladder_t_factor(r)
                } else {
                    base_t_factor(1)
                }
            } else {
                reconstruct::solve_sparsity(&model.k, &targets, &cfg.sparsity)?
            };
            let real = reconstruct::realize(&model, &t, cfg.sparsity.pairing)?;
            let net = real.to_network()?;
            let h2_before = model.h2_norm()?;
            let h2_after = real.model().h2_norm()?;
            let mut extra = Map::new();
            extra.insert(
                "reconstruction".into(),
                json!({
                    "method": "theorem2",
                    "pairing": cfg.sparsity.pairing,
                    "zeros": targets.iter().map(|&(i, j)| [i + 1, j + 1]).collect::<Vec<_>>(),
                    "lambda_r": real.lambda_r,
                    "T": netred::io::to_rows(&real.t),
                    "Ur": netred::io::to_rows(&real.ur),
                }),
            );
            let text = files::to_pretty(&files::network_document(&net, extra));
            files::emit(args.out.as_deref(), &text, out)?;
            let report = network::validate(&net);
            writeln!(
                out,
                "method=theorem2 r={r} lambda_r={:.6e} max_coupling={:.3e} h2_reduced={:.10e} h2_realized={:.10e} validate={}",
                real.lambda_r,
                real.max_off_diagonal().2,
                h2_before,
                h2_after,
                if report.is_valid() { "ok" } else { "failed" }
            )?;
            Ok(Reconstruction::Network(Box::new(net)))
        }
        Method::Householder => {
            if !args.zeros.trim().is_empty() {
                return Err(CliError::Usage("--zeros applies to --method theorem2 only".into()));
            }
            let tri = reconstruct::householder_tridiag(&model.k)?;
            let network = if tri.diag_dominant {
                let u = &tri.ur;
                let d = linalg::symmetrize(&(u * &model.d * u.transpose()));
                let (alpha, beta) = reconstruct::fit_rayleigh(&tri.ktilde, &d);
                let net = SecondOrderNetwork::from_stiffness(&tri.ktilde, alpha, beta, u * &model.f, &model.h * u.transpose())?;
                let net = if net.d() == d { net } else { net.with_damping(d)? };
                Some(files::network_document(&net, Map::new()))
            } else {
                None
            };
            let doc = TridiagonalDocument {
                kind: files::TRIDIAGONAL.into(),
                diagonally_dominant: tri.diag_dominant,
                k_tilde: tri.ktilde,
                u: tri.ur,
                network,
            };
            files::emit(args.out.as_deref(), &files::to_pretty(&doc), out)?;
            writeln!(
                out,
                "method=householder r={r} diagonally_dominant={}{}",
                doc.diagonally_dominant,
                if doc.diagonally_dominant {
                    ""
                } else {
                    " non-network: tridiagonal stiffness is not diagonally dominant"
                }
            )?;
            Ok(Reconstruction::Tridiagonal(Box::new(doc)))
        }
    }
}

fn sweep_row(p: &Prepared, r: usize, cfg: &Config) -> SweepRow {
    let start = Instant::now();
    match reduce_prepared(p, r, cfg) {
        Ok(doc) => {
            let rep = doc.report;
            SweepRow {
                r,
                status: files::status_name(rep.status).into(),
                gamma_raw: Some(rep.gamma_raw),
                certified_bound: Some(rep.certified_bound),
                actual_h2_error: Some(rep.actual_h2_error),
                bound_holds: Some(rep.bound_holds),
                iterations: Some(rep.iterations),
                wall_time_seconds: rep.wall_time_seconds,
                message: None,
            }
        }
        Err(e) => SweepRow {
            r,
            status: match &e {
                CliError::Core(netred::Error::Infeasible(_) | netred::Error::Unbounded(_)) => {
                    files::status_name(SolverStatus::Infeasible).into()
                }
                _ => "failed".into(),
            },
            gamma_raw: None,
            certified_bound: None,
            actual_h2_error: None,
            bound_holds: None,
            iterations: None,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            message: Some(e.to_string()),
        },
    }
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> CliResult<SweepReport> {
    let cfg = args.solver.resolve()?;
    let orders = parse_orders(&args.orders)?;
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let (net, meta) = files::load_network(&args.input)?;
    let prepared = prepare(&net)?;
    let n = prepared.model.order();
    if let Some(&max) = orders.last() {
        if max >= n {
            return Err(CliError::Usage(format!("orders must stay below the model order {n}, got {max}")));
        }
    }

    let ss = prepared.model.to_state_space();
    let gram = linalg::controllability_gramian(&ss)?;
    let bbt = (&ss.b * ss.b.transpose()).norm();
    let lyapunov_residual = gram.residual_norm / bbt.max(f64::MIN_POSITIVE);
    let original_h2_norm = linalg::h2_norm(&ss)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| orders.par_iter().map(|&r| sweep_row(&prepared, r, &cfg)).collect());

    let metadata = SweepMetadata {
        input: args.input.display().to_string(),
        n: net.n(),
        kernel_dimension: prepared.split.as_ref().map_or(0, SemistableSplit::kernel_dimension),
        seed: meta.get("seed").and_then(Value::as_u64),
        alpha: net.alpha(),
        beta: net.beta(),
        orders: args.orders.clone(),
        margin: cfg.margin,
        refine_output: cfg.refine_output,
        solver: cfg.solver,
        original_h2_norm,
        lyapunov_residual,
    };
    let report = SweepReport::new(metadata, rows);

    if let Some(path) = &args.csv {
        std::fs::write(path, report.to_csv()?)?;
    }
    if let Some(path) = &args.json {
        std::fs::write(path, files::to_pretty(&report))?;
    }
    if let Some(path) = &args.table {
        std::fs::write(path, report.error_table())?;
    }
    if args.csv.is_none() && args.json.is_none() {
        out.write_all(report.to_csv()?.as_bytes())?;
    } else {
        for row in &report.rows {
            writeln!(out, "{}", row_line(row))?;
        }
    }

    if report.optimal_rows().next().is_none() {
        let all_infeasible = report.rows.iter().all(|r| r.status == "infeasible");
        return Err(CliError::SweepFailed(if all_infeasible {
            "all orders infeasible".into()
        } else {
            "solver failures".into()
        }));
    }
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6e}"))
}

fn row_line(row: &SweepRow) -> String {
    format!(
        "r={} status={} gamma={} bound={} actual={} time={:.3}s{}",
        row.r,
        row.status,
        fmt_opt(row.gamma_raw),
        fmt_opt(row.certified_bound),
        fmt_opt(row.actual_h2_error),
        row.wall_time_seconds,
        row.message.as_deref().map(|m| format!(" ({m})")).unwrap_or_default()
    )
}

pub fn cmd_show(args: &ShowArgs, out: &mut dyn Write) -> CliResult<()> {
    match files::load_any(&args.path)? {
        Document::Network(net, meta) => {
            writeln!(
                out,
                "network n={} alpha={} beta={} proportional={}{}",
                net.n(),
                net.alpha(),
                net.beta(),
                net.proportional().is_some(),
                if meta.is_null() { String::new() } else { format!(" meta={meta}") }
            )?;
            writeln!(out, "{}", network::validate(&net))?;
        }
        Document::Reduced(doc) => {
            writeln!(out, "reduced model {}", doc.report.line())?;
            if let Some(avg) = &doc.average {
                writeln!(out, "average part of dimension {} with alpha={}", avg.s0.ncols(), avg.alpha)?;
            }
        }
        Document::Tridiagonal(doc) => {
            writeln!(
                out,
                "tridiagonal r={} diagonally_dominant={} network={}",
                doc.k_tilde.nrows(),
                doc.diagonally_dominant,
                doc.network.is_some()
            )?;
        }
        Document::Sweep(report) => {
            if let Some(m) = &report.metadata {
                writeln!(
                    out,
                    "sweep n={} orders={} original_h2_norm={:.6e} lyapunov_residual={:.3e}",
                    m.n, m.orders, m.original_h2_norm, m.lyapunov_residual
                )?;
            }
            for row in &report.rows {
                writeln!(out, "{}", row_line(row))?;
            }
        }
        Document::Laplacian(l) => {
            writeln!(
                out,
                "laplacian n={} edges={} connected={}",
                l.n(),
                l.edges().len(),
                l.is_connected()
            )?;
        }
    }
    Ok(())
}
