//! Config-driven commands behind the `gph` binary.
//!
//! Each command is also callable as a function so examples and tests can
//! drive it without spawning a process.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{load_config, ExperimentConfig, Horizon, LoadedConfig, SolverKind};
use crate::error::{Error, Result};
use crate::estimates::{convergence_report, estimate_constant, refinement_table, ConstantEstimate, ConvergenceRow, RefinementRow, SlotMax};
use crate::hierarchy::{quasi_norm, Hierarchy, NormSequence, QuasiNormResult, DEFAULT_REL_TOL};
use crate::lowrank::Kernel;
use crate::picard::{oracle_closure, theorem_horizon, Closure, ClosureKind, IncrementRow, PicardSolver, TimeGrid, TrajectorySet, VerificationReport};
use crate::snapshot::{self, FORMAT_VERSION};

/// Version of the JSON report layout.
pub const REPORT_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Budget { .. } | Error::RankCap { .. } => EXIT_BUDGET,
        Error::Verification(_) => EXIT_VERIFICATION,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "gph", version, about = "Truncated Gross-Pitaevskii hierarchy experiments")]
pub struct Cli {
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the truncated hierarchy and write a trajectory and report.
    Run(ConfigArgs),
    /// Quasi-norm of a set of kernel snapshots, one per level.
    Quasinorm(QuasinormArgs),
    /// Estimate the collision constant on a seeded random ensemble.
    Estimate(ConfigArgs),
    /// Tabulate Picard increments against the theoretical envelope.
    Converge(ConfigArgs),
    /// Check a stored trajectory against the mild formulation.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding `estimate.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct QuasinormArgs {
    /// Sobolev exponent of the level norms.
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    pub rel_tol: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Kernel snapshots (GPHK or GPHS).
    #[arg(required = true)]
    pub snapshots: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Trajectory to check (default: `<out>/trajectory.gpht`).
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::config("--workers must be at least 1"));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::Io(std::io::Error::other(e)))?;
    pool.install(|| match cli.command {
        Command::Run(a) => {
            let (exp, out) = open(&a)?;
            run(&exp, &out).map(|_| ())
        }
        Command::Quasinorm(a) => {
            let report = quasinorm_files(&a.snapshots, a.alpha, a.rel_tol)?;
            let text = to_json(&report)?;
            match a.out {
                Some(p) => write_file(&p, text.as_bytes()),
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
        Command::Estimate(a) => {
            let (exp, out) = open(&a)?;
            estimate(&exp, &out).map(|_| ())
        }
        Command::Converge(a) => {
            let (exp, out) = open(&a)?;
            converge(&exp, &out).map(|_| ())
        }
        Command::Verify(a) => {
            let (exp, out) = open(&a.common)?;
            let path = a.trajectory.unwrap_or_else(|| out.join("trajectory.gpht"));
            verify(&exp, &path, &out).map(|_| ())
        }
    })
}

fn open(args: &ConfigArgs) -> Result<(LoadedConfig, PathBuf)> {
    let mut exp = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        exp.config.estimate.seed = seed;
    }
    let out = match &args.out {
        Some(o) => o.clone(),
        None if exp.config.output.dir.is_absolute() => exp.config.output.dir.clone(),
        None => exp.base_dir.join(&exp.config.output.dir),
    };
    Ok((exp, out))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    seconds: f64,
}

/// Wall time goes to its own file so the report stays reproducible.
fn write_timing(out: &Path, command: &str, start: Instant) -> Result<()> {
    let t = Timing {
        command,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_file(&out.join(format!("{command}.timing.json")), to_json(&t)?.as_bytes())
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub format_version: u32,
    pub snapshot_version: u32,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    fn of(exp: &LoadedConfig) -> Self {
        Provenance {
            format_version: REPORT_VERSION,
            snapshot_version: FORMAT_VERSION,
            config_hash: exp.hash.clone(),
            seed: exp.config.estimate.seed,
        }
    }
}

/// `Γ₀` from the config: factorized modes or per-level snapshots.
pub fn initial_hierarchy(exp: &LoadedConfig) -> Result<Hierarchy> {
    let c = &exp.config;
    let grid = c.grid_spec()?;
    let model = c.model_spec()?;
    let budget = c.budget();
    if let Some(phi) = c.initial_wave(&grid)? {
        return Hierarchy::factorized(&phi, model, c.truncation.k, c.representation.kind, &budget);
    }
    let paths = c.initial.snapshots.as_deref().unwrap_or_default();
    let mut levels = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        let path = if p.is_absolute() { p.clone() } else { exp.base_dir.join(p) };
        let kernel = snapshot::load_kernel(&path)?;
        if kernel.grid() != &grid {
            return Err(Error::Config(format!(
                "initial.snapshots[{i}]: kernel grid does not match [grid]"
            )));
        }
        if kernel.particles() != i + 1 {
            return Err(Error::Config(format!(
                "initial.snapshots[{i}]: expected a level-{} kernel, found level {}",
                i + 1,
                kernel.particles()
            )));
        }
        levels.push(kernel);
    }
    Hierarchy::new(model, levels)
}

pub fn build_closure(config: &ExperimentConfig, gamma0: &Hierarchy, time: &TimeGrid) -> Result<Closure> {
    match config.closure.kind {
        ClosureKind::Zero => Ok(Closure::Zero),
        ClosureKind::Oracle => oracle_closure(gamma0, time, config.oracle_steps()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HorizonChoice {
    pub horizon: f64,
    /// `fixed`, `theorem` or `fallback`.
    pub source: &'static str,
    pub c_hat: Option<f64>,
    pub q_hat: f64,
}

/// `Ĉ` from `time.c_hat`, or from a fresh estimate.
fn resolve_c_hat(config: &ExperimentConfig) -> Result<(f64, Option<ConstantEstimate>)> {
    match config.time.c_hat {
        Some(c) if !config.time.estimate_first => Ok((c, None)),
        _ => {
            let e = run_estimate(config)?;
            Ok((e.c_hat, Some(e)))
        }
    }
}

pub fn resolve_horizon(config: &ExperimentConfig, gamma0: &Hierarchy) -> Result<(HorizonChoice, Option<ConstantEstimate>)> {
    let q_hat = gamma0.quasi_norm(DEFAULT_REL_TOL)?.value;
    match &config.time.horizon {
        Horizon::Fixed(t) => Ok((
            HorizonChoice {
                horizon: *t,
                source: "fixed",
                c_hat: config.time.c_hat,
                q_hat,
            },
            None,
        )),
        Horizon::Keyword(_) => {
            let (c_hat, est) = resolve_c_hat(config)?;
            let (horizon, source) = match theorem_horizon(config.model.interaction, c_hat, q_hat) {
                Some(t) => (t, "theorem"),
                None => match config.time.fallback_horizon {
                    Some(t) => (t, "fallback"),
                    None => {
                        return Err(Error::config(
                            "time.fallback_horizon: required because the theorem horizon is unbounded here",
                        ))
                    }
                },
            };
            Ok((
                HorizonChoice {
                    horizon,
                    source,
                    c_hat: Some(c_hat),
                    q_hat,
                },
                est,
            ))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverSummary {
    pub kind: SolverKind,
    pub depth: Option<usize>,
    pub converged: bool,
    pub increments: Vec<IncrementRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeQuasiNorm {
    pub time: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    pub horizon: HorizonChoice,
    pub solver: SolverSummary,
    pub quasi_norms: Vec<NodeQuasiNorm>,
    pub final_quasi_norm: f64,
    pub l1t_quasi_norm: f64,
    pub residual: VerificationReport,
    /// Per-level `sup_t` relative error against tensorized one-body solutions.
    pub oracle_error: Option<Vec<f64>>,
    pub trajectory_file: String,
    pub final_level_files: Vec<String>,
}

/// Solve and write `trajectory.gpht`, `level<k>.gphk` (final node),
/// `run.json` and `run.timing.json` into `out`.
pub fn run(exp: &LoadedConfig, out: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let config = &exp.config;
    let budget = config.budget();
    let gamma0 = initial_hierarchy(exp)?;
    let (horizon, _) = resolve_horizon(config, &gamma0)?;
    let time = TimeGrid::new(horizon.horizon, config.time.steps)?;
    let closure = build_closure(config, &gamma0, &time)?;
    let solver = PicardSolver::new(&gamma0, time, &closure, &budget)?;
    let (trajectory, summary) = match config.solver.kind {
        SolverKind::Picard => {
            let sol = solver.solve(config.solver.tolerance, config.solver.max_depth)?;
            let summary = SolverSummary {
                kind: SolverKind::Picard,
                depth: Some(sol.depth),
                converged: sol.converged,
                increments: sol.rows,
            };
            (sol.trajectory, summary)
        }
        SolverKind::Direct => (
            solver.direct_solve()?,
            SolverSummary {
                kind: SolverKind::Direct,
                depth: None,
                converged: true,
                increments: Vec::new(),
            },
        ),
    };
    let residual = solver.verify(&trajectory)?;
    let oracle_error = match &closure {
        Closure::Oracle(reference) => {
            let reference = reference.resample(&time)?.factorized_hierarchy(
                config.truncation.k,
                config.representation.kind,
                &budget,
            )?;
            Some(trajectory.max_relative_error(&reference, &budget)?)
        }
        Closure::Zero => None,
    };
    let norms = trajectory.quasi_norms(DEFAULT_REL_TOL)?;
    let quasi_norms: Vec<NodeQuasiNorm> = time
        .nodes()
        .into_iter()
        .zip(&norms)
        .map(|(t, q)| NodeQuasiNorm { time: t, value: q.value })
        .collect();
    let final_quasi_norm = norms.last().map_or(0.0, |q| q.value);
    let l1t_quasi_norm = trajectory.l1t_quasi_norm(DEFAULT_REL_TOL)?.value;

    std::fs::create_dir_all(out)?;
    snapshot::save_trajectory(out.join("trajectory.gpht"), &trajectory)?;
    let last = trajectory.node(time.steps());
    let mut final_level_files = Vec::with_capacity(last.len());
    for (i, kernel) in last.iter().enumerate() {
        let name = format!("level{}.gphk", i + 1);
        snapshot::save_kernel(out.join(&name), kernel)?;
        final_level_files.push(name);
    }
    let report = RunReport {
        command: "run",
        provenance: Provenance::of(exp),
        config: config.clone(),
        horizon,
        solver: summary,
        quasi_norms,
        final_quasi_norm,
        l1t_quasi_norm,
        residual,
        oracle_error,
        trajectory_file: "trajectory.gpht".into(),
        final_level_files,
    };
    write_file(&out.join("run.json"), to_json(&report)?.as_bytes())?;
    write_timing(out, "run", start)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelNorm {
    pub level: usize,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasinormReport {
    pub alpha: f64,
    pub levels: Vec<LevelNorm>,
    pub result: QuasiNormResult,
}

/// Quasi-norm of kernels for levels `1..=K`, in any order.
pub fn quasinorm_kernels(kernels: &[Kernel], alpha: f64, rel_tol: f64) -> Result<QuasinormReport> {
    let mut levels = kernels
        .iter()
        .map(|k| Ok(LevelNorm { level: k.particles(), norm: k.h_alpha_norm(alpha)? }))
        .collect::<Result<Vec<_>>>()?;
    levels.sort_by_key(|l| l.level);
    for (i, l) in levels.iter().enumerate() {
        if l.level != i + 1 {
            return Err(Error::config(format!(
                "snapshots must cover levels 1..={} exactly once; level {} is missing or repeated",
                levels.len(),
                i + 1
            )));
        }
    }
    let seq = NormSequence::new(levels.iter().map(|l| l.norm).collect())?;
    Ok(QuasinormReport {
        alpha,
        levels,
        result: quasi_norm(&seq, rel_tol)?,
    })
}

pub fn quasinorm_files(paths: &[PathBuf], alpha: f64, rel_tol: f64) -> Result<QuasinormReport> {
    let kernels = paths.iter().map(snapshot::load_kernel).collect::<Result<Vec<_>>>()?;
    quasinorm_kernels(&kernels, alpha, rel_tol)
}

fn run_estimate(config: &ExperimentConfig) -> Result<ConstantEstimate> {
    let e = estimate_constant(
        &config.model_spec()?,
        &config.grid_spec()?,
        config.estimate.samples,
        config.estimate.seed,
        &config.estimate.levels,
        &config.budget(),
    )?;
    if let Some(w) = &e.warning {
        eprintln!("warning: {w}");
    }
    Ok(e)
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub command: &'static str,
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    pub c_hat: f64,
    pub per_slot: Vec<SlotMax>,
    pub warning: Option<String>,
    pub refinement: Vec<RefinementRow>,
}

/// Write `estimate.csv` (every ratio) and `estimate.json`.
pub fn estimate(exp: &LoadedConfig, out: &Path) -> Result<EstimateReport> {
    let start = Instant::now();
    let config = &exp.config;
    let e = run_estimate(config)?;
    let refinement = if config.estimate.refine_points.is_empty() {
        Vec::new()
    } else {
        refinement_table(
            &config.model_spec()?,
            config.grid.n,
            &config.estimate.refine_points,
            config.estimate.samples,
            config.estimate.seed,
            &config.estimate.levels,
            &config.budget(),
        )?
    };
    std::fs::create_dir_all(out)?;
    write_file(&out.join("estimate.csv"), &e.to_csv()?)?;
    let report = EstimateReport {
        command: "estimate",
        provenance: Provenance::of(exp),
        config: config.clone(),
        c_hat: e.c_hat,
        per_slot: e.per_slot,
        warning: e.warning,
        refinement,
    };
    write_file(&out.join("estimate.json"), to_json(&report)?.as_bytes())?;
    write_timing(out, "estimate", start)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergeReport {
    pub command: &'static str,
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    pub horizon: HorizonChoice,
    pub c_hat: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Every increment sits below its envelope.
    pub dominated: bool,
}

/// Write `converge.csv` and `converge.json`.
pub fn converge(exp: &LoadedConfig, out: &Path) -> Result<ConvergeReport> {
    let start = Instant::now();
    let config = &exp.config;
    let budget = config.budget();
    let gamma0 = initial_hierarchy(exp)?;
    let (horizon, _) = resolve_horizon(config, &gamma0)?;
    let c_hat = match horizon.c_hat {
        Some(c) => c,
        None => resolve_c_hat(config)?.0,
    };
    let time = TimeGrid::new(horizon.horizon, config.time.steps)?;
    let closure = build_closure(config, &gamma0, &time)?;
    let solver = PicardSolver::new(&gamma0, time, &closure, &budget)?;
    let rows = convergence_report(&solver, c_hat, config.solver.max_depth)?;
    let dominated = rows.iter().all(|r| r.increment <= r.envelope * (1.0 + 1e-12));

    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["depth", "increment", "ratio", "iterate_norm", "envelope"]).map_err(io)?;
    for r in &rows {
        w.write_record([
            r.depth.to_string(),
            format!("{:e}", r.increment),
            r.ratio.map(|x| format!("{x:e}")).unwrap_or_default(),
            format!("{:e}", r.iterate_norm),
            format!("{:e}", r.envelope),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    std::fs::create_dir_all(out)?;
    write_file(&out.join("converge.csv"), &bytes)?;
    let report = ConvergeReport {
        command: "converge",
        provenance: Provenance::of(exp),
        config: config.clone(),
        horizon,
        c_hat,
        rows,
        dominated,
    };
    write_file(&out.join("converge.json"), to_json(&report)?.as_bytes())?;
    write_timing(out, "converge", start)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub provenance: Provenance,
    pub trajectory: String,
    pub tolerance: f64,
    pub residual: VerificationReport,
    pub passed: bool,
}

/// Recompute the mild-form residual of a stored trajectory.
///
/// Writes `verify.json` in every case and returns a verification error when
/// the residual exceeds `verify.tolerance`.
pub fn verify(exp: &LoadedConfig, trajectory: &Path, out: &Path) -> Result<VerifyReport> {
    let start = Instant::now();
    let config = &exp.config;
    let traj: TrajectorySet = snapshot::load_trajectory(trajectory)?;
    let gamma0 = initial_hierarchy(exp)?;
    if traj.grid() != gamma0.grid() || traj.truncation() != gamma0.truncation() || traj.model() != gamma0.model() {
        return Err(Error::config(
            "trajectory: grid, model or truncation differs from the config",
        ));
    }
    if traj.closure() != config.closure.kind {
        return Err(Error::config("closure.kind: differs from the stored trajectory"));
    }
    let time = *traj.time();
    let closure = build_closure(config, &gamma0, &time)?;
    let solver = PicardSolver::new(&gamma0, time, &closure, &config.budget())?;
    let residual = solver.verify(&traj)?;
    let passed = residual.max_residual <= config.verify.tolerance;
    let report = VerifyReport {
        command: "verify",
        provenance: Provenance::of(exp),
        trajectory: trajectory.display().to_string(),
        tolerance: config.verify.tolerance,
        residual,
        passed,
    };
    std::fs::create_dir_all(out)?;
    write_file(&out.join("verify.json"), to_json(&report)?.as_bytes())?;
    write_timing(out, "verify", start)?;
    if !passed {
        return Err(Error::Verification(format!(
            "max residual {:e} exceeds verify.tolerance {:e}",
            report.residual.max_residual, config.verify.tolerance
        )));
    }
    Ok(report)
}
