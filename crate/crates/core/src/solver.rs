//! The splitting iteration.
//!
//! Each outer step freezes `f1(x^k, ·)` and `f2(x^k, ·)`, normalizes the
//! stepsize by the larger diagonal subgradient, takes one prox step on each
//! component in sequence, and averages the result with `T(x^k)`:
//!
//! ```text
//! η_k = max{β_k, ‖g1‖, ‖g2‖},   λ_k = β_k / η_k
//! y   = argmin { λ_k f1(x, ·) + ½‖· − x‖² over C }
//! z   = argmin { λ_k f2(x, ·) + ½‖· − y‖² over C }
//! x⁺  = γ z + (1 − γ) T(x)
//! ```

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bifunctions::{Bifunction, SplitBifunction, SumBifunction};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, Vector};
use crate::maps::NonexpansiveMap;
use crate::prox::{prox_step, ProxOptions, ProxRequest};
use crate::trace::{Trace, TraceRecord};

/// Slack allowed in the per-step bound `‖z − x‖ <= √2 β`.
pub const STEP_BOUND_SLACK: f64 = 1e-8;
/// Feasibility tolerance for `x`, `y`, `z`.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// `(f1 + f2, C, T)`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub split: SplitBifunction,
    pub set: ConvexSet,
    pub map: NonexpansiveMap,
}

impl Problem {
    pub fn new(split: SplitBifunction, set: ConvexSet, map: NonexpansiveMap) -> Result<Self> {
        check_dim(set.dim(), split.dim())?;
        check_dim(set.dim(), map.dim())?;
        Ok(Problem { split, set, map })
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }
}

/// Stepsize sequence `β_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `β_k = β₀ / (k + 1)^p` with `½ < p <= 1`, which makes `Σβ_k` diverge
    /// while `Σβ_k²` converges.
    Power { beta0: f64, exponent: f64 },
    /// User-supplied sequence; the two summability conditions are the
    /// caller's responsibility.
    Explicit(Vec<f64>),
}

impl StepSchedule {
    pub fn harmonic(beta0: f64) -> Self {
        StepSchedule::Power {
            beta0,
            exponent: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StepSchedule::Power { beta0, exponent } => {
                if !(beta0.is_finite() && *beta0 > 0.0) {
                    return Err(Error::invalid("beta0 must be > 0"));
                }
                if !(*exponent > 0.5 && *exponent <= 1.0) {
                    return Err(Error::invalid(format!(
                        "beta exponent {exponent} must lie in (1/2, 1] for sum(beta) = inf and sum(beta^2) < inf"
                    )));
                }
            }
            StepSchedule::Explicit(seq) => {
                if seq.is_empty() {
                    return Err(Error::invalid("explicit beta sequence is empty"));
                }
                if let Some(b) = seq.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
                    return Err(Error::invalid(format!("explicit beta value {b} must be > 0")));
                }
            }
        }
        Ok(())
    }

    pub fn beta(&self, k: usize) -> Result<f64> {
        match self {
            StepSchedule::Power { beta0, exponent } => {
                let denom = (k as f64 + 1.0).powf(*exponent);
                Ok(beta0 / denom)
            }
            StepSchedule::Explicit(seq) => seq.get(k).copied().ok_or_else(|| {
                Error::invalid(format!(
                    "explicit beta sequence has {} entries, iteration {k} needs more",
                    seq.len()
                ))
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Mann averaging weight, strictly inside (0, 1).
    pub gamma: f64,
    pub schedule: StepSchedule,
    pub max_iters: usize,
    pub tol: f64,
    /// Fixed stepsize of the prox residual used for stopping.
    pub fixed_residual_lambda: f64,
    pub trace_every: usize,
    pub prox: ProxOptions,
    pub seed: u64,
    /// Record elapsed wall time in the trace. Off by default because it makes
    /// traces non-reproducible.
    pub record_wall_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 0.5,
            schedule: StepSchedule::harmonic(1.0),
            max_iters: 200_000,
            tol: 1e-6,
            fixed_residual_lambda: 1.0,
            trace_every: 1,
            prox: ProxOptions::default(),
            seed: 0,
            record_wall_time: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma must lie strictly inside (0,1)"));
        }
        self.schedule.validate()?;
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid("tol must be > 0"));
        }
        if !(self.fixed_residual_lambda.is_finite() && self.fixed_residual_lambda > 0.0) {
            return Err(Error::invalid("fixed_residual_lambda must be > 0"));
        }
        if self.trace_every == 0 {
            return Err(Error::invalid("trace_every must be >= 1"));
        }
        self.prox.validate()
    }
}

/// Quantities computed during the step from `x^k` to `x^{k+1}`.
#[derive(Clone, Debug)]
pub struct StepDetails {
    pub k: usize,
    pub beta: f64,
    pub g1: Vector,
    pub g2: Vector,
    pub eta: f64,
    pub lambda: f64,
    pub y: Vector,
    pub z: Vector,
    /// `T(x^k)`.
    pub tx: Vector,
    /// `‖T(x^k) − x^k‖`.
    pub residual_t: f64,
    /// Larger of the two prox certificates.
    pub certificate: f64,
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub k: usize,
    pub x: Vector,
    /// Details of the step that produced `x`, absent for the initial point.
    pub last: Option<StepDetails>,
}

impl SolverState {
    pub fn initial(x0: Vector) -> Self {
        SolverState {
            k: 0,
            x: x0,
            last: None,
        }
    }
}

/// `η = max{β, ‖g1‖, ‖g2‖}` and `λ = β/η`.
pub fn stepsize(beta: f64, g1_norm: f64, g2_norm: f64) -> (f64, f64) {
    let eta = beta.max(g1_norm).max(g2_norm);
    (eta, beta / eta)
}

fn certificate_seed(seed: u64, k: usize, which: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((k as u64) << 2 | which)
}

/// One outer iteration from `state.x`.
pub fn step(state: &SolverState, problem: &Problem, config: &SolverConfig) -> Result<SolverState> {
    check_dim(problem.dim(), state.x.dim())?;
    let tx = problem.map.apply_unchecked(&state.x);
    advance(state.k, &state.x, tx, problem, config)
}

fn advance(
    k: usize,
    x: &Vector,
    tx: Vector,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<SolverState> {
    let beta = config.schedule.beta(k)?;
    let split = &problem.split;
    let g1 = split.f1.diagonal_subgradient(x);
    let g2 = split.f2.diagonal_subgradient(x);
    let (eta, lambda) = stepsize(beta, g1.norm(), g2.norm());
    if !lambda.is_finite() {
        return Err(Error::Divergence {
            iteration: k,
            reason: format!("stepsize is {lambda} (|g1| = {}, |g2| = {})", g1.norm(), g2.norm()),
        });
    }

    let y = prox_step(
        &ProxRequest {
            bifunction: split.f1.as_ref(),
            base: x,
            anchor: x,
            lambda,
            set: &problem.set,
        },
        &config.prox,
        certificate_seed(config.seed, k, 1),
    )?;
    let z = prox_step(
        &ProxRequest {
            bifunction: split.f2.as_ref(),
            base: x,
            anchor: &y.point,
            lambda,
            set: &problem.set,
        },
        &config.prox,
        certificate_seed(config.seed, k, 2),
    )?;

    let residual_t = tx.dist(x);
    // T is assumed to map C into C; composing with P_C is a no-op when it does.
    let tx_in_c = problem.set.project_unchecked(&tx);
    let next = z.point.lerp(config.gamma, &tx_in_c);
    if !next.is_finite() {
        return Err(Error::Divergence {
            iteration: k,
            reason: "non-finite iterate".into(),
        });
    }
    Ok(SolverState {
        k: k + 1,
        x: next,
        last: Some(StepDetails {
            k,
            beta,
            g1,
            g2,
            eta,
            lambda,
            y: y.point,
            z: z.point,
            tx,
            residual_t,
            certificate: y.certificate.max(z.certificate),
        }),
    })
}

/// `‖x − argmin { λ̄ f(x, y) + ½‖y − x‖² : y ∈ C }‖` for the total bifunction
/// `f = f1 + f2`; zero exactly when `x` solves the equilibrium problem on `C`.
pub fn fixed_residual(
    total: &dyn Bifunction,
    set: &ConvexSet,
    x: &Vector,
    lambda_bar: f64,
    opts: &ProxOptions,
    seed: u64,
) -> Result<f64> {
    let out = prox_step(
        &ProxRequest {
            bifunction: total,
            base: x,
            anchor: x,
            lambda: lambda_bar,
            set,
        },
        opts,
        seed,
    )?;
    Ok(out.point.dist(x))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "message")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Error(String),
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Error(_) => "error",
        }
    }
}

/// Running worst cases of the checks that hold along every run.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantMonitor {
    pub steps: usize,
    pub min_lambda: f64,
    pub max_lambda: f64,
    /// `max_k ‖z^k − x^k‖ − √2 β_k`.
    pub worst_step_bound_excess: f64,
    /// `max_k ‖z^k − x^k‖ / β_k`; the triangle inequality caps it at 2.
    pub max_step_ratio: f64,
    /// Largest distance from `x^k`, `y^k` or `z^k` to `C`.
    pub max_infeasibility: f64,
    pub min_fixed_point_residual: f64,
    pub max_prox_certificate: f64,
    /// `β_k` for every step taken.
    #[serde(skip)]
    pub betas: Vec<f64>,
    /// `‖x^k − x*‖` for k = 0..=K when an oracle solution was supplied.
    #[serde(skip)]
    pub oracle_distances: Vec<f64>,
}

impl InvariantMonitor {
    fn new() -> Self {
        InvariantMonitor {
            steps: 0,
            min_lambda: f64::INFINITY,
            max_lambda: f64::NEG_INFINITY,
            worst_step_bound_excess: f64::NEG_INFINITY,
            max_step_ratio: 0.0,
            max_infeasibility: 0.0,
            min_fixed_point_residual: f64::INFINITY,
            max_prox_certificate: 0.0,
            betas: Vec::new(),
            oracle_distances: Vec::new(),
        }
    }

    fn observe(&mut self, x: &Vector, d: &StepDetails, set: &ConvexSet) {
        self.steps += 1;
        self.min_lambda = self.min_lambda.min(d.lambda);
        self.max_lambda = self.max_lambda.max(d.lambda);
        let step = d.z.dist(x);
        self.worst_step_bound_excess = self
            .worst_step_bound_excess
            .max(step - std::f64::consts::SQRT_2 * d.beta);
        self.max_step_ratio = self.max_step_ratio.max(step / d.beta);
        self.max_infeasibility = self
            .max_infeasibility
            .max(set.distance(x))
            .max(set.distance(&d.y))
            .max(set.distance(&d.z));
        self.min_fixed_point_residual = self.min_fixed_point_residual.min(d.residual_t);
        self.max_prox_certificate = self.max_prox_certificate.max(d.certificate);
        self.betas.push(d.beta);
    }

    pub fn lambda_in_unit_interval(&self) -> bool {
        self.steps == 0 || (self.min_lambda > 0.0 && self.max_lambda <= 1.0)
    }

    pub fn step_bound_holds(&self) -> bool {
        self.steps == 0 || self.worst_step_bound_excess <= STEP_BOUND_SLACK
    }

    /// `‖z − x‖ <= ‖y − x‖ + ‖z − y‖ <= λ‖g1‖ + λ‖g2‖ <= 2β`.
    pub fn triangle_bound_holds(&self) -> bool {
        self.steps == 0 || self.max_step_ratio <= 2.0 + STEP_BOUND_SLACK
    }

    pub fn feasible(&self) -> bool {
        self.max_infeasibility <= FEASIBILITY_TOL
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub x: Vector,
    pub status: SolveStatus,
    /// Outer steps taken.
    pub iterations: usize,
    pub trace: Trace,
    pub final_fixed_point_residual: f64,
    pub final_prox_residual: f64,
    pub dist_to_oracle: Option<f64>,
    pub invariants: InvariantMonitor,
    pub warnings: Vec<String>,
}

/// Runs the splitting iteration from `x0` until
/// `max(‖T(x) − x‖, fixed_residual(x)) <= tol` or `max_iters` steps.
///
/// Invalid configuration is an `Err`; failures during the iteration are
/// reported through [`SolveStatus::Error`] together with the partial trace.
pub fn solve(
    problem: &Problem,
    config: &SolverConfig,
    x0: &Vector,
    oracle: Option<&Vector>,
) -> Result<SolveOutcome> {
    config.validate()?;
    check_dim(problem.dim(), x0.dim())?;
    if let Some(o) = oracle {
        check_dim(problem.dim(), o.dim())?;
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite("starting point".into()));
    }

    let mut warnings = Vec::new();
    let mut x = x0.clone();
    if !problem.set.contains(&x) {
        x = problem.set.project_unchecked(&x);
        let msg = format!("x0 is not in C; projected to {x:?}");
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let total = problem.split.total();
    let started = Instant::now();
    let mut trace = Trace::default();
    let mut monitor = InvariantMonitor::new();
    let mut k = 0usize;
    let residual_seed = |k: usize| certificate_seed(config.seed, k, 3);
    let prox_residual_at = |x: &Vector, k: usize| {
        fixed_residual(
            &total as &SumBifunction,
            &problem.set,
            x,
            config.fixed_residual_lambda,
            &config.prox,
            residual_seed(k),
        )
    };

    let status = loop {
        if let Some(o) = oracle {
            monitor.oracle_distances.push(x.dist(o));
        }
        let tx = problem.map.apply_unchecked(&x);
        let residual_t = tx.dist(&x);
        let mut prox_residual = None;
        if residual_t <= config.tol {
            match prox_residual_at(&x, k) {
                Ok(r) if r <= config.tol => break SolveStatus::Converged,
                Ok(r) => prox_residual = Some(r),
                Err(e) => break SolveStatus::Error(e.to_string()),
            }
        }
        if k >= config.max_iters {
            break SolveStatus::MaxIters;
        }

        let traced = k % config.trace_every == 0;
        if traced && prox_residual.is_none() {
            match prox_residual_at(&x, k) {
                Ok(r) => prox_residual = Some(r),
                Err(e) => break SolveStatus::Error(e.to_string()),
            }
        }

        let next = match advance(k, &x, tx, problem, config) {
            Ok(s) => s,
            Err(e) => break SolveStatus::Error(e.to_string()),
        };
        let d = next.last.as_ref().expect("advance records details");
        monitor.observe(&x, d, &problem.set);
        if traced {
            trace.push(TraceRecord {
                k,
                beta: d.beta,
                lambda: d.lambda,
                norm_y_minus_x: d.y.dist(&x),
                norm_z_minus_x: d.z.dist(&x),
                fixed_point_residual: d.residual_t,
                prox_residual: prox_residual.unwrap_or(f64::NAN),
                dist_to_oracle: oracle.map(|o| x.dist(o)),
                wall_time_s: config
                    .record_wall_time
                    .then(|| started.elapsed().as_secs_f64()),
            });
        }
        x = next.x;
        k = next.k;
    };

    let final_fixed_point_residual = problem.map.apply_unchecked(&x).dist(&x);
    let final_prox_residual = prox_residual_at(&x, k).unwrap_or(f64::NAN);
    if let SolveStatus::Error(msg) = &status {
        log::error!("solver stopped at k = {k}: {msg}");
    }
    Ok(SolveOutcome {
        dist_to_oracle: oracle.map(|o| x.dist(o)),
        x,
        status,
        iterations: k,
        trace,
        final_fixed_point_residual,
        final_prox_residual,
        invariants: monitor,
        warnings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FejerReport {
    /// `max_k ‖x^{k+1} − x*‖² − ‖x^k − x*‖² − 2γβ_k²`.
    pub worst_slack: f64,
    pub worst_index: Option<usize>,
    pub first_violation: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `‖x^{k+1} − x*‖² <= ‖x^k − x*‖² + 2γβ_k²` along a run.
///
/// `distances[k] = ‖x^k − x*‖` for `k = 0..=K` and `betas[k] = β_k` for the
/// `K` steps taken. The tolerance is `1e-8·(1 + ‖x*‖²)`.
pub fn check_fejer(distances: &[f64], betas: &[f64], gamma: f64, oracle_norm: f64) -> FejerReport {
    let tolerance = 1e-8 * (1.0 + oracle_norm * oracle_norm);
    let mut worst_slack = f64::NEG_INFINITY;
    let mut worst_index = None;
    let mut first_violation = None;
    for (k, pair) in distances.windows(2).enumerate() {
        let Some(beta) = betas.get(k) else { break };
        let slack = pair[1] * pair[1] - pair[0] * pair[0] - 2.0 * gamma * beta * beta;
        if slack > worst_slack {
            worst_slack = slack;
            worst_index = Some(k);
        }
        if slack > tolerance && first_violation.is_none() {
            first_violation = Some(k);
        }
    }
    FejerReport {
        worst_slack,
        worst_index,
        first_violation,
        tolerance,
        passed: first_violation.is_none(),
    }
}
