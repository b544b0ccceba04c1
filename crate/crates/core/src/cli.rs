//! Command-line front end: `run`, `verify` and `probe`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bifunctions::probe_monotonicity;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, Vector};
use crate::problems::ProblemInstance;
use crate::solver::{
    check_fejer, solve, FejerReport, InvariantMonitor, SolveOutcome, SolveStatus, SolverConfig,
    FEASIBILITY_TOL, STEP_BOUND_SLACK,
};
use crate::trace::TraceFormat;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const OUT_DIR_ENV: &str = "EQSPLIT_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "eqsplit", version, about = "Splitting solver for equilibrium problems over fixed-point sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured instance and write a trace and a summary.
    Run(RunArgs),
    /// Solve with invariant checking and report pass/fail per invariant.
    Verify(VerifyArgs),
    /// Sample the monotonicity class of the configured bifunction.
    Probe(ProbeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for outputs with relative or default paths.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Trace file, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub config: PathBuf,
    /// Also check the Fejér inequality against the instance's oracle solution.
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Test hook: report every β_k ten times larger than used.
    #[arg(long, hide = true)]
    pub corrupt_report_beta: bool,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    match cli.command {
        Command::Run(a) => run(&a),
        Command::Verify(a) => verify(&a),
        Command::Probe(a) => probe(&a),
    }
}

fn stem(config: &Path) -> String {
    config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn resolve(out_dir: &Option<PathBuf>, path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    match out_dir {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

fn in_out_dir(out_dir: &Option<PathBuf>, name: String) -> PathBuf {
    out_dir.clone().unwrap_or_else(|| PathBuf::from(".")).join(name)
}

fn load(path: &Path, overrides: &Overrides) -> Result<(RunConfig, SolverConfig)> {
    let mut cfg = RunConfig::from_path(path)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    let mut solver = cfg.solver_config()?;
    if let Some(n) = overrides.max_iters {
        solver.max_iters = n;
    }
    if let Some(t) = overrides.tol {
        solver.tol = t;
    }
    if let Some(g) = overrides.gamma {
        solver.gamma = g;
    }
    if let Some(b) = overrides.beta0 {
        match &mut solver.schedule {
            crate::solver::StepSchedule::Power { beta0, .. } => *beta0 = b,
            crate::solver::StepSchedule::Explicit(_) => {
                return Err(Error::Config("--beta0 cannot override an explicit solver.betas list".into()))
            }
        }
    }
    solver.validate()?;
    Ok((cfg, solver))
}

#[derive(Debug, Default, Serialize)]
pub struct Summary {
    pub config: String,
    pub instance: Option<String>,
    pub status: String,
    pub message: Option<String>,
    pub iterations: Option<usize>,
    pub x: Option<Vector>,
    pub final_fixed_point_residual: Option<f64>,
    pub final_prox_residual: Option<f64>,
    pub oracle: Option<Vector>,
    pub oracle_provenance: Option<String>,
    pub dist_to_oracle: Option<f64>,
    pub warnings: Vec<String>,
    pub invariants: Option<InvariantMonitor>,
    pub trace: Option<String>,
}

impl Summary {
    fn record(&mut self, instance: &ProblemInstance, out: &SolveOutcome) {
        self.instance = Some(instance.name.clone());
        self.status = out.status.label().into();
        if let SolveStatus::Error(msg) = &out.status {
            self.message = Some(msg.clone());
        }
        self.iterations = Some(out.iterations);
        self.x = Some(out.x.clone());
        self.final_fixed_point_residual = Some(out.final_fixed_point_residual);
        self.final_prox_residual = Some(out.final_prox_residual);
        self.oracle = instance.oracle.clone();
        self.oracle_provenance = instance.oracle_provenance.clone();
        self.dist_to_oracle = out.dist_to_oracle;
        self.warnings = out.warnings.clone();
        self.invariants = Some(out.invariants.clone());
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn exit_code(status: &SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => EXIT_CONVERGED,
        SolveStatus::MaxIters => EXIT_MAX_ITERS,
        SolveStatus::Error(_) => EXIT_ERROR,
    }
}

pub fn run(args: &RunArgs) -> i32 {
    let out_dir = &args.overrides.out_dir;
    let mut summary = Summary {
        config: args.config.display().to_string(),
        status: "error".into(),
        ..Summary::default()
    };
    let mut summary_path = in_out_dir(out_dir, format!("{}.summary.json", stem(&args.config)));

    let result = (|| -> Result<SolveStatus> {
        let (cfg, solver) = load(&args.config, &args.overrides)?;
        if let Some(s) = &cfg.output.summary {
            summary_path = resolve(out_dir, s);
        }
        let instance = cfg.build_instance()?;
        let x0 = cfg.initial_point(&instance.problem)?;
        let outcome = solve(&instance.problem, &solver, &x0, instance.oracle.as_ref())?;
        summary.record(&instance, &outcome);

        let ext = match cfg.output.format {
            TraceFormat::Csv => "csv",
            TraceFormat::JsonLines => "jsonl",
        };
        let trace_path = match (&args.out, &cfg.output.trace) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => resolve(out_dir, p),
            (None, None) => in_out_dir(out_dir, format!("{}.trace.{ext}", stem(&args.config))),
        };
        outcome.trace.write(&trace_path, cfg.output.format)?;
        summary.trace = Some(trace_path.display().to_string());
        Ok(outcome.status)
    })();

    let code = match result {
        Ok(status) => {
            println!(
                "{}: {} after {} iterations",
                summary.instance.as_deref().unwrap_or("instance"),
                status.label(),
                summary.iterations.unwrap_or(0)
            );
            if let Some(d) = summary.dist_to_oracle {
                println!("distance to oracle: {d:.3e}");
            }
            if let SolveStatus::Error(msg) = &status {
                eprintln!("error: {msg}");
            }
            exit_code(&status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            summary.status = "error".into();
            summary.message = Some(e.to_string());
            EXIT_ERROR
        }
    };
    if let Err(e) = write_json(&summary_path, &summary) {
        eprintln!("error: could not write summary: {e}");
        return EXIT_ERROR;
    }
    code
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantRow {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub config: String,
    pub instance: Option<String>,
    pub status: String,
    pub message: Option<String>,
    pub iterations: Option<usize>,
    pub invariants: Vec<InvariantRow>,
    pub passed: bool,
}

/// Invariant table for a finished run.
pub fn invariant_rows(
    outcome: &SolveOutcome,
    solver: &SolverConfig,
    oracle: Option<&Vector>,
    reported_betas: &[f64],
) -> Vec<InvariantRow> {
    let inv = &outcome.invariants;
    let mut rows = vec![
        InvariantRow {
            name: "lambda-in-(0,1]",
            passed: inv.lambda_in_unit_interval(),
            worst: if inv.steps == 0 { 1.0 } else { inv.max_lambda },
            limit: 1.0,
            detail: if inv.steps == 0 {
                "no steps taken".into()
            } else {
                format!("lambda ranged over [{:e}, {:e}]", inv.min_lambda, inv.max_lambda)
            },
        },
        InvariantRow {
            name: "step-bound",
            passed: inv.step_bound_holds(),
            worst: inv.worst_step_bound_excess,
            limit: STEP_BOUND_SLACK,
            detail: "max_k |z^k - x^k| - sqrt(2) beta_k".into(),
        },
        InvariantRow {
            name: "step-bound-2beta",
            passed: inv.triangle_bound_holds(),
            worst: inv.max_step_ratio,
            limit: 2.0,
            detail: "max_k |z^k - x^k| / beta_k".into(),
        },
        InvariantRow {
            name: "feasibility",
            passed: inv.feasible(),
            worst: inv.max_infeasibility,
            limit: FEASIBILITY_TOL,
            detail: "largest distance of x^k, y^k, z^k to C".into(),
        },
    ];
    let min_residual = inv.min_fixed_point_residual.min(outcome.final_fixed_point_residual);
    rows.push(InvariantRow {
        name: "residual-decay",
        passed: min_residual <= solver.tol,
        worst: min_residual,
        limit: solver.tol,
        detail: "min_k |T(x^k) - x^k|".into(),
    });
    rows.push(InvariantRow {
        name: "prox-certificate",
        passed: inv.max_prox_certificate <= solver.prox.inner_tol,
        worst: inv.max_prox_certificate,
        limit: solver.prox.inner_tol,
        detail: "largest optimality certificate of a prox step".into(),
    });
    if let Some(xstar) = oracle {
        let fejer: FejerReport = check_fejer(
            &inv.oracle_distances,
            reported_betas,
            solver.gamma,
            xstar.norm(),
        );
        let mismatch = reported_betas.iter().enumerate().find(|(k, b)| {
            solver
                .schedule
                .beta(*k)
                .map_or(true, |expected| (**b - expected).abs() > 1e-15 * expected)
        });
        let (passed, detail) = match (mismatch, fejer.first_violation) {
            (Some((k, b)), _) => (
                false,
                format!(
                    "reported beta_{k} = {b:e} disagrees with the schedule value {:e}",
                    solver.schedule.beta(k).unwrap_or(f64::NAN)
                ),
            ),
            (None, Some(k)) => (false, format!("inequality violated first at k = {k}")),
            (None, None) => (fejer.passed, format!("worst slack at k = {:?}", fejer.worst_index)),
        };
        rows.push(InvariantRow {
            name: "fejer",
            passed,
            worst: fejer.worst_slack,
            limit: fejer.tolerance,
            detail,
        });
    }
    rows
}

pub fn verify(args: &VerifyArgs) -> i32 {
    let out_dir = &args.overrides.out_dir;
    let report_path = in_out_dir(out_dir, format!("{}.verify.json", stem(&args.config)));
    let mut report = VerifyReport {
        config: args.config.display().to_string(),
        instance: None,
        status: "error".into(),
        message: None,
        iterations: None,
        invariants: Vec::new(),
        passed: false,
    };

    let result = (|| -> Result<()> {
        let (cfg, solver) = load(&args.config, &args.overrides)?;
        let instance = cfg.build_instance()?;
        report.instance = Some(instance.name.clone());
        let oracle = if args.oracle {
            Some(instance.oracle.clone().ok_or_else(|| {
                Error::Config(format!("--oracle given but instance {} has no oracle solution", instance.name))
            })?)
        } else {
            None
        };
        let x0 = cfg.initial_point(&instance.problem)?;
        let outcome = solve(&instance.problem, &solver, &x0, oracle.as_ref())?;
        report.status = outcome.status.label().into();
        if let SolveStatus::Error(msg) = &outcome.status {
            report.message = Some(msg.clone());
        }
        report.iterations = Some(outcome.iterations);
        let factor = if args.corrupt_report_beta { 10.0 } else { 1.0 };
        let betas: Vec<f64> = outcome.invariants.betas.iter().map(|b| b * factor).collect();
        report.invariants = invariant_rows(&outcome, &solver, oracle.as_ref(), &betas);
        report.passed = !matches!(outcome.status, SolveStatus::Error(_))
            && report.invariants.iter().all(|r| r.passed);
        Ok(())
    })();

    if let Err(e) = result {
        eprintln!("error: {e}");
        report.message = Some(e.to_string());
        report.passed = false;
    }
    println!("{:<18} {:<6} {:>14} {:>12}  detail", "invariant", "result", "worst", "limit");
    for r in &report.invariants {
        println!(
            "{:<18} {:<6} {:>14.6e} {:>12.3e}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.worst,
            r.limit,
            r.detail
        );
    }
    if let Err(e) = write_json(&report_path, &report) {
        eprintln!("error: could not write report: {e}");
        return EXIT_ERROR;
    }
    if report.passed {
        EXIT_CONVERGED
    } else {
        EXIT_ERROR
    }
}

pub fn probe(args: &ProbeArgs) -> i32 {
    let result = (|| -> Result<String> {
        let cfg = RunConfig::from_path(&args.config)?;
        let instance = cfg.build_instance()?;
        let set = &instance.problem.set;
        let region = match set.bounding_box() {
            Some((lo, hi)) if lo.is_finite() && hi.is_finite() => None,
            _ => {
                let x0 = cfg.initial_point(&instance.problem)?;
                Some(ConvexSet::boxed(x0.map(|v| v - 10.0), x0.map(|v| v + 10.0))?)
            }
        };
        let total = instance.problem.split.total();
        let report = probe_monotonicity(
            &total,
            set,
            region.as_ref(),
            args.samples,
            args.seed.unwrap_or(cfg.seed),
        )?;
        Ok(serde_json::to_string_pretty(&report).expect("report serializes"))
    })();
    match result {
        Ok(text) => {
            println!("{text}");
            EXIT_CONVERGED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
