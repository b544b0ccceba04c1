//! The strongly convex subproblems `argmin { λ f(base, y) + ½‖y − anchor‖² : y ∈ C }`.
//!
//! Closed forms are used whenever the bifunction provides one; everything else
//! goes through a projected (sub)gradient inner solver. Either way the result
//! carries a sampled first-order optimality certificate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bifunctions::Bifunction;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, Vector};

pub const DEFAULT_INNER_TOL: f64 = 1e-10;
pub const DEFAULT_INNER_MAX_ITERS: usize = 10_000;
pub const CERTIFICATE_SAMPLES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxOptions {
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Number of feasible probe points used by the certificate; 0 disables it.
    pub certificate_samples: usize,
}

impl Default for ProxOptions {
    fn default() -> Self {
        ProxOptions {
            inner_tol: DEFAULT_INNER_TOL,
            inner_max_iters: DEFAULT_INNER_MAX_ITERS,
            certificate_samples: CERTIFICATE_SAMPLES,
        }
    }
}

impl ProxOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_tol.is_finite() && self.inner_tol > 0.0) {
            return Err(Error::invalid("inner_tol must be > 0"));
        }
        if self.inner_max_iters == 0 {
            return Err(Error::invalid("inner_max_iters must be >= 1"));
        }
        Ok(())
    }
}

/// A 1-strongly convex objective with a (sub)gradient oracle.
pub trait StronglyConvexObjective {
    fn dim(&self) -> usize;

    fn value(&self, y: &Vector) -> f64;

    fn gradient(&self, y: &Vector) -> Vector;

    /// Lipschitz constant of the gradient, `None` if nonsmooth.
    fn lipschitz(&self) -> Option<f64>;
}

/// One subproblem of the splitting step.
#[derive(Clone, Copy, Debug)]
pub struct ProxRequest<'a> {
    pub bifunction: &'a dyn Bifunction,
    /// Point at which `f(base, ·)` is frozen.
    pub base: &'a Vector,
    /// Proximity center.
    pub anchor: &'a Vector,
    pub lambda: f64,
    pub set: &'a ConvexSet,
}

impl ProxRequest<'_> {
    pub fn validate(&self) -> Result<()> {
        let n = self.set.dim();
        check_dim(n, self.bifunction.dim())?;
        check_dim(n, self.base.dim())?;
        check_dim(n, self.anchor.dim())?;
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid(format!("prox stepsize {} must be > 0", self.lambda)));
        }
        Ok(())
    }
}

impl StronglyConvexObjective for ProxRequest<'_> {
    fn dim(&self) -> usize {
        self.anchor.dim()
    }

    fn value(&self, y: &Vector) -> f64 {
        self.lambda * self.bifunction.value(self.base, y) + 0.5 * y.dist(self.anchor).powi(2)
    }

    fn gradient(&self, y: &Vector) -> Vector {
        (y - self.anchor).axpy(self.lambda, &self.bifunction.subgradient(self.base, y))
    }

    fn lipschitz(&self) -> Option<f64> {
        self.bifunction
            .smoothness(self.base)
            .map(|l| 1.0 + self.lambda * l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProxMethod {
    ClosedForm,
    Generic { iterations: usize },
}

#[derive(Clone, Debug)]
pub struct ProxOutcome {
    pub point: Vector,
    /// Worst sampled violation of `<∇h(y), s − y> >= 0` per unit `‖s − y‖`.
    pub certificate: f64,
    pub method: ProxMethod,
}

/// Solves one subproblem. `seed` fixes the certificate's probe points.
pub fn prox_step(req: &ProxRequest<'_>, opts: &ProxOptions, seed: u64) -> Result<ProxOutcome> {
    req.validate()?;
    if let Some(point) = req.bifunction.prox(req.base, req.anchor, req.lambda, req.set) {
        let certificate = optimality_certificate(req, req.set, &point, opts.certificate_samples, seed);
        return Ok(ProxOutcome {
            point,
            certificate,
            method: ProxMethod::ClosedForm,
        });
    }
    let sol = solve_certified(req, req.set, req.anchor, opts, seed)?;
    Ok(ProxOutcome {
        point: sol.point,
        certificate: sol.certificate,
        method: ProxMethod::Generic {
            iterations: sol.iterations,
        },
    })
}

/// Sampled first-order optimality measure of `y` for `min h over C`.
///
/// Probe points are feasible points near `y`; the value is the largest
/// `max(0, −<∇h(y), s − y>) / ‖s − y‖`, which is zero at the exact minimizer
/// of a differentiable objective.
pub fn optimality_certificate(
    objective: &dyn StronglyConvexObjective,
    set: &ConvexSet,
    y: &Vector,
    samples: usize,
    seed: u64,
) -> f64 {
    if samples == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grad = objective.gradient(y);
    let radius = 1.0 + y.norm();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let s = set.sample_near(&mut rng, y, radius);
        let d = &s - y;
        let len = d.norm();
        if len <= 1e-14 * radius {
            continue;
        }
        worst = worst.max(-grad.dot(&d) / len);
    }
    worst
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub point: Vector,
    pub iterations: usize,
    pub certificate: f64,
}

/// Projected gradient (smooth case) or averaged projected subgradient
/// (nonsmooth case) from `start`.
///
/// The smooth iteration uses the fixed step `1/L` and stops once
/// `‖y⁺ − y‖ <= tol·(1 + ‖y‖)` and the contraction bound
/// `‖y⁺ − y‖·ρ/(1 − ρ)` on the distance to the minimizer is below `tol`.
pub fn inner_solve(
    objective: &dyn StronglyConvexObjective,
    set: &ConvexSet,
    start: &Vector,
    inner_tol: f64,
    inner_max_iters: usize,
) -> Result<Vector> {
    let opts = ProxOptions {
        inner_tol,
        inner_max_iters,
        certificate_samples: 0,
    };
    opts.validate()?;
    check_dim(set.dim(), objective.dim())?;
    check_dim(set.dim(), start.dim())?;
    Ok(solve_certified(objective, set, start, &opts, 0)?.point)
}

fn solve_certified(
    objective: &dyn StronglyConvexObjective,
    set: &ConvexSet,
    start: &Vector,
    opts: &ProxOptions,
    seed: u64,
) -> Result<InnerSolution> {
    match objective.lipschitz() {
        Some(l) => projected_gradient(objective, set, start, l.max(1.0), opts, seed),
        None => projected_subgradient(objective, set, start, opts, seed),
    }
}

fn projected_gradient(
    objective: &dyn StronglyConvexObjective,
    set: &ConvexSet,
    start: &Vector,
    lipschitz: f64,
    opts: &ProxOptions,
    seed: u64,
) -> Result<InnerSolution> {
    let step = 1.0 / lipschitz;
    // contraction factor of y ↦ P(y − ∇h(y)/L) for 1-strongly convex h
    let rho = 1.0 - step;
    let mut y = set.project_unchecked(start);
    let mut certificate = f64::INFINITY;
    for it in 1..=opts.inner_max_iters {
        let next = set.project_unchecked(&y.axpy(-step, &objective.gradient(&y)));
        if !next.is_finite() {
            return Err(Error::NonFinite(format!("inner iterate at step {it}")));
        }
        let delta = next.dist(&y);
        y = next;
        let small_step = delta <= opts.inner_tol * (1.0 + y.norm()) && delta * rho <= opts.inner_tol * (1.0 - rho);
        if rho == 0.0 || small_step {
            certificate = optimality_certificate(objective, set, &y, opts.certificate_samples, seed);
            if certificate <= opts.inner_tol {
                return Ok(InnerSolution {
                    point: y,
                    iterations: it,
                    certificate,
                });
            }
        }
    }
    if certificate.is_infinite() {
        certificate = optimality_certificate(objective, set, &y, opts.certificate_samples.max(1), seed);
    }
    Err(Error::InnerSolver {
        iterations: opts.inner_max_iters,
        certificate,
        tolerance: opts.inner_tol,
        best: y,
    })
}

/// Strongly convex subgradient method: steps `1/(k+1)`, iterate averaging with
/// weights proportional to `k`. The certificate is reported but not enforced,
/// since a single subgradient cannot certify a kink.
fn projected_subgradient(
    objective: &dyn StronglyConvexObjective,
    set: &ConvexSet,
    start: &Vector,
    opts: &ProxOptions,
    seed: u64,
) -> Result<InnerSolution> {
    let mut y = set.project_unchecked(start);
    let mut avg = y.clone();
    let mut weight_sum = 0.0;
    for it in 1..=opts.inner_max_iters {
        let step = 1.0 / it as f64;
        y = set.project_unchecked(&y.axpy(-step, &objective.gradient(&y)));
        if !y.is_finite() {
            return Err(Error::NonFinite(format!("inner subgradient iterate at step {it}")));
        }
        let w = it as f64;
        weight_sum += w;
        let next_avg = avg.lerp(1.0 - w / weight_sum, &y);
        let delta = next_avg.dist(&avg);
        avg = next_avg;
        if it > 1 && delta <= opts.inner_tol * (1.0 + avg.norm()) {
            let point = set.project_unchecked(&avg);
            let certificate =
                optimality_certificate(objective, set, &point, opts.certificate_samples, seed);
            return Ok(InnerSolution {
                point,
                iterations: it,
                certificate,
            });
        }
    }
    let point = set.project_unchecked(&avg);
    Err(Error::InnerSolver {
        iterations: opts.inner_max_iters,
        certificate: optimality_certificate(objective, set, &point, opts.certificate_samples.max(1), seed),
        tolerance: opts.inner_tol,
        best: point,
    })
}
