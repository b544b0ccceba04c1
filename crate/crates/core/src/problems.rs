//! Problem builders and ground-truth oracles.
//!
//! Oracles never call the splitting solver or the generic prox solver: they
//! use best-response iteration, closed forms, direct linear algebra or
//! active-set enumeration only.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bifunctions::{QuadraticGame, SplitBifunction};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, Vector};
use crate::maps::{MonotoneOperator, NonexpansiveMap};
use crate::solver::Problem;

/// `‖T(x*) − x*‖` allowed for an oracle solution.
pub const ORACLE_FIXED_POINT_TOL: f64 = 1e-8;
/// Lowest sampled `f(x*, y)` allowed for an oracle solution.
pub const ORACLE_EP_TOL: f64 = 1e-6;
/// Residual at which the best-response oracle stops.
pub const BEST_RESPONSE_TOL: f64 = 1e-12;
const BEST_RESPONSE_MAX_ITERS: usize = 1_000_000;
const BEST_RESPONSE_DAMPING: f64 = 0.5;
const CHECK_SAMPLES: usize = 2000;
const CHECK_SEED: u64 = 0x5EED;

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub name: String,
    pub problem: Problem,
    pub oracle: Option<Vector>,
    /// How the oracle solution was obtained.
    pub oracle_provenance: Option<String>,
}

impl ProblemInstance {
    pub fn new(name: impl Into<String>, problem: Problem) -> Self {
        ProblemInstance {
            name: name.into(),
            problem,
            oracle: None,
            oracle_provenance: None,
        }
    }

    /// Attaches an oracle solution after checking it against the instance.
    pub fn with_oracle(mut self, oracle: Vector, provenance: impl Into<String>) -> Result<Self> {
        check_dim(self.dim(), oracle.dim())?;
        let report = check_instance(&self.problem, &oracle, CHECK_SAMPLES, CHECK_SEED)?;
        if !report.passed {
            return Err(Error::Oracle(format!(
                "oracle for {} fails the instance check: {report:?}",
                self.name
            )));
        }
        self.oracle = Some(oracle);
        self.oracle_provenance = Some(provenance.into());
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceCheck {
    pub infeasibility: f64,
    pub fixed_point_residual: f64,
    /// `min f(x*, y)` over the sampled `y ∈ C ∩ Fix(T)`.
    pub min_sampled_value: f64,
    pub samples_used: usize,
    pub passed: bool,
}

/// Checks that `candidate` is a fixed point of `T` in `C` and that
/// `f(candidate, y) >= -1e-6` for sampled `y ∈ C ∩ Fix(T)`.
///
/// Test points are drawn from `C` (or a box around the candidate when `C` is
/// unbounded), half of them close to the candidate, and pushed into
/// `C ∩ Fix(T)` by iterating `P_C ∘ T`; points that do not settle are skipped.
pub fn check_instance(
    problem: &Problem,
    candidate: &Vector,
    samples: usize,
    seed: u64,
) -> Result<InstanceCheck> {
    check_dim(problem.dim(), candidate.dim())?;
    let set = &problem.set;
    let map = &problem.map;
    let infeasibility = set.distance(candidate);
    let fixed_point_residual = map.apply_unchecked(candidate).dist(candidate);

    let scale = 1.0 + candidate.max_abs();
    let region = match set.bounding_box() {
        Some((lo, hi)) => ConvexSet::boxed(lo, hi)?,
        None => ConvexSet::boxed(
            candidate.map(|c| c - 10.0 * scale),
            candidate.map(|c| c + 10.0 * scale),
        )?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let mut used = 0;
    for i in 0..samples {
        let raw = if i % 2 == 0 {
            region.sample(&mut rng).expect("bounded region")
        } else {
            region.sample_near(&mut rng, candidate, 0.05 * scale)
        };
        let Some(y) = settle_into_fixed_set(problem, set.project_unchecked(&raw)) else {
            continue;
        };
        used += 1;
        min_value = min_value.min(problem.split.value(candidate, &y));
    }
    let passed = infeasibility <= ORACLE_FIXED_POINT_TOL
        && fixed_point_residual <= ORACLE_FIXED_POINT_TOL
        && used > 0
        && min_value >= -ORACLE_EP_TOL;
    Ok(InstanceCheck {
        infeasibility,
        fixed_point_residual,
        min_sampled_value: min_value,
        samples_used: used,
        passed,
    })
}

fn settle_into_fixed_set(problem: &Problem, mut y: Vector) -> Option<Vector> {
    for _ in 0..5000 {
        if problem.map.fixed_set_contains(&y, 1e-12) == Some(true) {
            return Some(y);
        }
        let ty = problem.map.apply_unchecked(&y);
        let moved = ty.dist(&y);
        y = problem.set.project_unchecked(&ty);
        if moved <= 1e-11 && problem.map.apply_unchecked(&y).dist(&y) <= 1e-11 {
            return Some(y);
        }
    }
    None
}

/// How the Nikaido–Isoda bifunction is divided between the two prox steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    /// `f1` = revenue part, `f2` = cost part.
    #[default]
    RevenueCost,
    /// `f1` = whole bifunction, `f2 ≡ 0`.
    Lumped,
}

fn game_split(game: &QuadraticGame, split: SplitKind) -> SplitBifunction {
    match split {
        SplitKind::RevenueCost => game.nikaido_isoda(),
        SplitKind::Lumped => SplitBifunction::single(Arc::new(game.nikaido_isoda_lumped())),
    }
}

fn require_box(set: &ConvexSet, players: usize) -> Result<(Vector, Vector)> {
    check_dim(players, set.dim())?;
    match set {
        ConvexSet::Box { lo, hi } => Ok((lo.clone(), hi.clone())),
        _ => Err(Error::invalid("the action set of a game must be a box")),
    }
}

/// Oligopoly over an action box with `T = I`; the oracle is the
/// best-response equilibrium.
pub fn build_cournot(
    game: &QuadraticGame,
    action_box: ConvexSet,
    split: SplitKind,
) -> Result<ProblemInstance> {
    let oracle = cournot_oracle(game, &action_box)?;
    let n = game.players();
    let problem = Problem::new(game_split(game, split), action_box, NonexpansiveMap::identity(n))?;
    ProblemInstance::new(format!("cournot-{n}"), problem)
        .with_oracle(oracle, "damped best-response iteration")
}

/// Nash equilibrium of a quadratic game on a box by damped Jacobi
/// best-response iteration.
///
/// Requires `Σ_{j≠i} |b_ij| < 2 b_ii` for every player, which makes the
/// best-response map a contraction. For two symmetric players with an
/// interior solution the result is cross-checked against
/// `x_i = (a − 2c_i + c_j) / (3b)`.
pub fn cournot_oracle(game: &QuadraticGame, action_box: &ConvexSet) -> Result<Vector> {
    let n = game.players();
    let (lo, hi) = require_box(action_box, n)?;
    let b = &game.b;
    let worst = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| b[(i, j)].abs()).sum::<f64>() / (2.0 * b[(i, i)]))
        .fold(0.0, f64::max);
    if worst >= 1.0 {
        return Err(Error::Oracle(format!(
            "best-response map is not contractive (ratio {worst}); equilibrium may not be unique"
        )));
    }

    let best_response = |x: &Vector| -> Vector {
        (0..n)
            .map(|i| {
                let others: f64 = (0..n).filter(|&j| j != i).map(|j| b[(i, j)] * x[j]).sum();
                let br = (game.a[i] - game.c[i] - others) / (2.0 * b[(i, i)]);
                br.clamp(lo[i], hi[i])
            })
            .collect::<Vec<_>>()
            .into()
    };

    let mut x = lo.lerp(0.5, &hi);
    let mut converged = false;
    for _ in 0..BEST_RESPONSE_MAX_ITERS {
        let br = best_response(&x);
        if br.dist(&x) <= BEST_RESPONSE_TOL {
            x = br;
            converged = true;
            break;
        }
        x = br.lerp(BEST_RESPONSE_DAMPING, &x);
    }
    if !converged {
        return Err(Error::Oracle("best-response iteration did not converge".into()));
    }

    if n == 2 && b.iter().all(|&v| v == b[(0, 0)]) && game.a[0] == game.a[1] {
        let (a, bb) = (game.a[0], b[(0, 0)]);
        let closed = Vector::from([
            (a - 2.0 * game.c[0] + game.c[1]) / (3.0 * bb),
            (a - 2.0 * game.c[1] + game.c[0]) / (3.0 * bb),
        ]);
        let interior = (0..2).all(|i| closed[i] > lo[i] && closed[i] < hi[i]);
        if interior && closed.dist(&x) > 1e-9 {
            return Err(Error::Oracle(format!(
                "best response {x:?} disagrees with the closed form {closed:?}"
            )));
        }
    }
    Ok(x)
}

/// Averaged halfspace projections, or the identity when there are none.
fn halfspace_map(
    dim: usize,
    constraints: &[(Vector, f64)],
    weights: Option<Vec<f64>>,
) -> Result<NonexpansiveMap> {
    if constraints.is_empty() {
        if weights.is_some_and(|w| !w.is_empty()) {
            return Err(Error::invalid("weights given without constraints"));
        }
        return Ok(NonexpansiveMap::identity(dim));
    }
    let maps = constraints
        .iter()
        .map(|(a, b)| Ok(NonexpansiveMap::projection(ConvexSet::halfspace(a.clone(), *b)?)))
        .collect::<Result<Vec<_>>>()?;
    match weights {
        Some(w) => NonexpansiveMap::averaged(w, maps),
        None => NonexpansiveMap::uniform_average(maps),
    }
}

/// Game over an action box with shared constraints `⟨a_j, x⟩ <= b_j` pushed
/// into `T = Σ μ_j P_{H_j}`. With no constraints this is exactly
/// [`build_cournot`].
pub fn build_sep_game(
    game: &QuadraticGame,
    action_box: ConvexSet,
    constraints: &[(Vector, f64)],
    weights: Option<Vec<f64>>,
    split: SplitKind,
) -> Result<ProblemInstance> {
    if constraints.is_empty() {
        if weights.is_some_and(|w| !w.is_empty()) {
            return Err(Error::invalid("weights given without constraints"));
        }
        return build_cournot(game, action_box, split);
    }
    let n = game.players();
    let map = halfspace_map(n, constraints, weights)?;
    let oracle = sep_oracle(game, &action_box, constraints)?;
    let problem = Problem::new(game_split(game, split), action_box, map)?;
    ProblemInstance::new(format!("sep-game-{n}x{}", constraints.len()), problem)
        .with_oracle(oracle, "active-set enumeration of the variational equilibrium")
}

/// Variational equilibrium of a quadratic game on `box ∩ {⟨a_j, x⟩ <= b_j}`:
/// the solution of the affine variational inequality with the game's
/// pseudo-gradient, found by enumerating active sets and solving each KKT
/// system directly.
///
/// The result is also verified to be a fixed point of the constrained
/// best-response map, so it is a generalized Nash equilibrium.
pub fn sep_oracle(
    game: &QuadraticGame,
    action_box: &ConvexSet,
    constraints: &[(Vector, f64)],
) -> Result<Vector> {
    let n = game.players();
    let (lo, hi) = require_box(action_box, n)?;
    if n > 8 {
        return Err(Error::Oracle("active-set enumeration limited to 8 players".into()));
    }
    // rows ⟨g, x⟩ <= h
    let mut rows: Vec<(Vector, f64)> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = -1.0;
        rows.push((Vector::from(e.clone()), -lo[i]));
        e[i] = 1.0;
        rows.push((Vector::from(e), hi[i]));
    }
    for (a, b) in constraints {
        check_dim(n, a.dim())?;
        rows.push((a.clone(), *b));
    }
    // F(x) = Jx + r
    let mut jac = game.b.clone();
    for i in 0..n {
        jac[(i, i)] += game.b[(i, i)];
    }
    let r = DVector::from_iterator(n, (0..n).map(|i| game.c[i] - game.a[i]));

    let feas_tol = 1e-10 * (1.0 + lo.max_abs().max(hi.max_abs()));
    let mut found: Option<Vector> = None;
    for active in subsets(rows.len(), n) {
        let k = active.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&jac);
        for i in 0..n {
            rhs[i] = -r[i];
        }
        for (col, &idx) in active.iter().enumerate() {
            let (g, h) = &rows[idx];
            for i in 0..n {
                kkt[(i, n + col)] = g[i];
                kkt[(n + col, i)] = g[i];
            }
            rhs[n + col] = *h;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let x = Vector::from((0..n).map(|i| sol[i]).collect::<Vec<_>>());
        let feasible = rows.iter().all(|(g, h)| g.dot(&x) <= h + feas_tol);
        let dual_ok = (0..k).all(|j| sol[n + j] >= -1e-12);
        if feasible && dual_ok {
            found = Some(x);
            break;
        }
    }
    let x = found.ok_or_else(|| Error::Oracle("no active set satisfies the KKT conditions".into()))?;

    // constrained best response: each player maximizes its concave payoff
    // over its own interval given the others
    for i in 0..n {
        let others: f64 = (0..n).filter(|&j| j != i).map(|j| game.b[(i, j)] * x[j]).sum();
        let mut lo_i = lo[i];
        let mut hi_i = hi[i];
        for (a, b) in constraints {
            let rest: f64 = (0..n).filter(|&j| j != i).map(|j| a[j] * x[j]).sum();
            if a[i] > 0.0 {
                hi_i = hi_i.min((b - rest) / a[i]);
            } else if a[i] < 0.0 {
                lo_i = lo_i.max((b - rest) / a[i]);
            }
        }
        let br = ((game.a[i] - game.c[i] - others) / (2.0 * game.b[(i, i)])).clamp(lo_i, hi_i);
        if (br - x[i]).abs() > 1e-9 * (1.0 + x[i].abs()) {
            return Err(Error::Oracle(format!(
                "player {i} best response {br} differs from the equilibrium action {}",
                x[i]
            )));
        }
    }
    Ok(x)
}

/// All subsets of `0..m` with at most `max_len` elements, smallest first.
fn subsets(m: usize, max_len: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=max_len.min(m)).flat_map(move |len| combinations(m, len))
}

fn combinations(m: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..len).collect();
    loop {
        out.push(idx.clone());
        let mut i = len;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < m - len + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..len {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Prox steps run over a box enclosing all `C_i`, and
/// `T = Σ μ_i P_{C_i}` carries the intersection.
///
/// A common point is required: either `common_point` (checked) or one found
/// by cyclic projections.
pub fn build_intersection_ep(
    split: SplitBifunction,
    sets: Vec<ConvexSet>,
    weights: Option<Vec<f64>>,
    common_point: Option<Vector>,
) -> Result<ProblemInstance> {
    if sets.is_empty() {
        return Err(Error::invalid("intersection needs at least one set"));
    }
    let n = split.dim();
    for s in &sets {
        check_dim(n, s.dim())?;
    }
    let point = match common_point {
        Some(p) => {
            check_dim(n, p.dim())?;
            if let Some(s) = sets.iter().find(|s| !s.contains_within(&p, 1e-9)) {
                return Err(Error::invalid(format!(
                    "claimed common point {p:?} is not in {s:?}"
                )));
            }
            p
        }
        None => find_common_point(&sets)?,
    };
    let bounding = intersection_bounding_box(&sets, n)?;
    if !bounding.contains_within(&point, 1e-9) {
        return Err(Error::invalid("common point lies outside the bounding box"));
    }
    let m = sets.len();
    let maps: Vec<_> = sets.into_iter().map(NonexpansiveMap::projection).collect();
    let map = match weights {
        Some(w) => NonexpansiveMap::averaged(w, maps)?,
        None => NonexpansiveMap::uniform_average(maps)?,
    };
    let problem = Problem::new(split, bounding, map)?;
    Ok(ProblemInstance::new(format!("intersection-ep-{n}x{m}"), problem))
}

/// Intersection of the bounding boxes of the bounded sets, or the whole
/// space when none is bounded.
fn intersection_bounding_box(sets: &[ConvexSet], n: usize) -> Result<ConvexSet> {
    let mut bounds: Option<(Vector, Vector)> = None;
    for (lo, hi) in sets.iter().filter_map(ConvexSet::bounding_box) {
        bounds = Some(match bounds {
            None => (lo, hi),
            Some((l, h)) => (l.zip_map(&lo, f64::max), h.zip_map(&hi, f64::min)),
        });
    }
    match bounds {
        Some((lo, hi)) => ConvexSet::boxed(lo, hi)
            .map_err(|_| Error::invalid("bounding boxes of the sets do not overlap")),
        None => ConvexSet::whole_space(n),
    }
}

fn find_common_point(sets: &[ConvexSet]) -> Result<Vector> {
    let mut x = Vector::zeros(sets[0].dim());
    for _ in 0..100_000 {
        for s in sets {
            x = s.project_unchecked(&x);
        }
        if sets.iter().all(|s| s.contains_within(&x, 1e-10)) {
            return Ok(x);
        }
    }
    Err(Error::invalid(
        "cyclic projections found no common point; the intersection looks empty",
    ))
}

/// `T = Σ μ_i (I + cM_i)^{-1}`, whose fixed points are the common zeros of
/// the `M_i`.
pub fn build_inclusion_ep(
    split: SplitBifunction,
    operators: Vec<MonotoneOperator>,
    c: f64,
    weights: Option<Vec<f64>>,
    set: ConvexSet,
) -> Result<ProblemInstance> {
    if operators.is_empty() {
        return Err(Error::invalid("inclusion needs at least one operator"));
    }
    let m = operators.len();
    let maps = operators
        .into_iter()
        .map(|op| NonexpansiveMap::resolvent(op, c))
        .collect::<Result<Vec<_>>>()?;
    let map = match weights {
        Some(w) => NonexpansiveMap::averaged(w, maps)?,
        None if m == 1 => maps.into_iter().next().expect("one map"),
        None => NonexpansiveMap::uniform_average(maps)?,
    };
    let n = set.dim();
    let problem = Problem::new(split, set, map)?;
    Ok(ProblemInstance::new(format!("inclusion-ep-{n}x{m}"), problem))
}

/// Solution of the variational inequality with affine field `F(x) = Ax + q`
/// over the common zero set `{z : M_i z + q_i = 0 ∀i}`, assuming the
/// constraint set does not bind there.
///
/// The zero set is parametrized as `x_p + N t` from an SVD of the stacked
/// operators; the reduced system `NᵀANt = −Nᵀ(Ax_p + q)` is solved directly.
pub fn inclusion_oracle(
    operators: &[MonotoneOperator],
    field: (&DMatrix<f64>, &Vector),
    set: &ConvexSet,
) -> Result<Vector> {
    let n = set.dim();
    let (a, q) = field;
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.nrows(),
        });
    }
    check_dim(n, q.dim())?;
    let rows: usize = operators.len() * n;
    let mut stacked = DMatrix::zeros(rows.max(n), n);
    let mut rhs = DVector::zeros(rows.max(n));
    for (i, op) in operators.iter().enumerate() {
        check_dim(n, op.dim())?;
        let (m, qi) = op.affine_parts();
        stacked.view_mut((i * n, 0), (n, n)).copy_from(m);
        for r in 0..n {
            rhs[i * n + r] = -qi[r];
        }
    }
    let svd = stacked.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let rank_tol = 1e-12 * sigma_max.max(1.0);
    let particular = svd
        .solve(&rhs, rank_tol)
        .map_err(|e| Error::Oracle(e.to_string()))?;
    let mismatch = (&stacked * &particular - &rhs).norm();
    if mismatch > 1e-10 * (1.0 + rhs.norm()) {
        return Err(Error::Oracle(format!(
            "operators have no common zero (least-squares residual {mismatch:e})"
        )));
    }
    let v_t = svd.v_t.as_ref().expect("requested V");
    let null: Vec<DVector<f64>> = (0..n)
        .filter(|&i| svd.singular_values[i] <= rank_tol)
        .map(|i| v_t.row(i).transpose())
        .collect();

    let mut x = particular;
    if !null.is_empty() {
        let basis = DMatrix::from_columns(&null);
        let reduced = basis.transpose() * a * &basis;
        let reduced_rhs = -(basis.transpose() * (a * &x + q.to_dvector()));
        let t = reduced.lu().solve(&reduced_rhs).ok_or_else(|| {
            Error::Oracle("field is degenerate on the zero set; solution not unique".into())
        })?;
        x += basis * t;
    }
    let x = Vector::from_dvector(&x);
    if !set.contains_within(&x, 1e-9) {
        return Err(Error::Oracle(format!(
            "unconstrained solution {x:?} lies outside the constraint set"
        )));
    }
    Ok(x)
}

/// `P_K(p)` for `K = Ball(center, r) ∩ {⟨a, x⟩ <= b}` in closed form; this
/// is the solution of the variational inequality with `F(x) = x − p` on `K`.
pub fn ball_halfspace_projection(
    center: &Vector,
    radius: f64,
    a: &Vector,
    b: f64,
    p: &Vector,
) -> Result<Vector> {
    let n = center.dim();
    check_dim(n, a.dim())?;
    check_dim(n, p.dim())?;
    let ball = ConvexSet::ball(center.clone(), radius)?;
    let half = ConvexSet::halfspace(a.clone(), b)?;
    let tol = 1e-12;
    if ball.contains_within(p, tol) && half.contains_within(p, tol) {
        return Ok(p.clone());
    }
    let pb = ball.project_unchecked(p);
    if half.contains_within(&pb, tol) {
        return Ok(pb);
    }
    let ph = half.project_unchecked(p);
    if ball.contains_within(&ph, tol) {
        return Ok(ph);
    }
    // nearest point on the sphere ∩ hyperplane
    let an = a.norm();
    let offset = (a.dot(center) - b) / an;
    if offset.abs() > radius {
        return Err(Error::Oracle("ball and halfspace do not intersect".into()));
    }
    let ring_center = center.axpy(-offset / an, a);
    let ring_radius = (radius * radius - offset * offset).sqrt();
    let on_plane = p.axpy(-(a.dot(p) - b) / (an * an), a);
    let dir = &on_plane - &ring_center;
    if dir.norm() == 0.0 {
        return Err(Error::Oracle("projection is not unique".into()));
    }
    Ok(ring_center.axpy(ring_radius / dir.norm(), &dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunctions::{ViLinear, ZeroBifunction};

    fn v(x: &[f64]) -> Vector {
        Vector::from(x)
    }

    fn box10(n: usize) -> ConvexSet {
        ConvexSet::boxed(Vector::zeros(n), Vector::filled(n, 10.0)).unwrap()
    }

    #[test]
    fn cournot_oracle_examples() {
        let sym = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 1.0])).unwrap();
        let x = cournot_oracle(&sym, &box10(2)).unwrap();
        let closed = (10.0 - 2.0 + 1.0) / 3.0;
        assert!(x.dist(&v(&[closed, closed])) < 1e-10);

        let asym = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 4.0])).unwrap();
        let x = cournot_oracle(&asym, &box10(2)).unwrap();
        let closed = v(&[(10.0 - 2.0 + 4.0) / 3.0, (10.0 - 8.0 + 1.0) / 3.0]);
        assert!(x.dist(&closed) < 1e-10);

        let dead = QuadraticGame::cournot(10.0, 1.0, v(&[10.0, 12.0])).unwrap();
        let x = cournot_oracle(&dead, &box10(2)).unwrap();
        assert_eq!(x, Vector::zeros(2));
    }

    #[test]
    fn cournot_oracle_rejects_non_contractive_games() {
        // three symmetric players: Σ_{j≠i} b_ij / 2b_ii = 1
        let g = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 1.0, 1.0])).unwrap();
        assert!(matches!(cournot_oracle(&g, &box10(3)), Err(Error::Oracle(_))));
    }

    #[test]
    fn cournot_instance_passes_its_check() {
        let g = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 1.0])).unwrap();
        let inst = build_cournot(&g, box10(2), SplitKind::RevenueCost).unwrap();
        assert!(inst.oracle.is_some());
        // a wrong candidate fails
        let report = check_instance(&inst.problem, &v(&[4.0, 2.0]), 500, 1).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn sep_game_binding_constraint() {
        let g = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 1.0])).unwrap();
        let inst = build_sep_game(&g, box10(2), &[(v(&[1.0, 1.0]), 4.0)], None, SplitKind::RevenueCost)
            .unwrap();
        // symmetric VI on the segment x1 + x2 = 4: F(x) = (2x1 + x2 − 9, x1 + 2x2 − 9)
        // has equal components only at x1 = x2
        let x = inst.oracle.unwrap();
        assert!(x.dist(&v(&[2.0, 2.0])) < 1e-12);
    }

    #[test]
    fn sep_game_with_slack_constraint_matches_cournot() {
        let g = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 4.0])).unwrap();
        let sep = build_sep_game(&g, box10(2), &[(v(&[1.0, 1.0]), 1e6)], None, SplitKind::RevenueCost)
            .unwrap();
        let nash = cournot_oracle(&g, &box10(2)).unwrap();
        assert!(sep.oracle.unwrap().dist(&nash) < 1e-10);
    }

    #[test]
    fn sep_game_without_constraints_is_cournot() {
        let g = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 1.0])).unwrap();
        let sep = build_sep_game(&g, box10(2), &[], None, SplitKind::RevenueCost).unwrap();
        assert!(matches!(sep.problem.map, NonexpansiveMap::Identity { .. }));
        assert_eq!(sep.oracle, build_cournot(&g, box10(2), SplitKind::RevenueCost).unwrap().oracle);
    }

    #[test]
    fn combinations_enumerate_all() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(subsets(5, 2).count(), 1 + 5 + 10);
    }

    #[test]
    fn intersection_of_two_halfspaces() {
        let sets = vec![
            ConvexSet::halfspace(v(&[1.0, 0.0]), 0.0).unwrap(),
            ConvexSet::halfspace(v(&[-1.0, 0.0]), 0.0).unwrap(),
        ];
        let split = SplitBifunction::single(Arc::new(ZeroBifunction::new(2)));
        let inst = build_intersection_ep(split, sets, None, None).unwrap();
        assert!(matches!(inst.problem.set, ConvexSet::WholeSpace { .. }));
        let inst = inst.with_oracle(v(&[0.0, 3.0]), "any point of the hyperplane").unwrap();
        assert!(inst.oracle.is_some());
    }

    #[test]
    fn intersection_rejects_disjoint_sets() {
        let sets = vec![
            ConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
            ConvexSet::ball(v(&[5.0, 0.0]), 1.0).unwrap(),
        ];
        let split = SplitBifunction::single(Arc::new(ZeroBifunction::new(2)));
        assert!(build_intersection_ep(split.clone(), sets.clone(), None, None).is_err());
        assert!(build_intersection_ep(split, sets, None, Some(v(&[0.0, 0.0]))).is_err());
    }

    #[test]
    fn ball_box_identity_field() {
        let sets = vec![
            ConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
            ConvexSet::boxed(v(&[0.0, 0.0]), v(&[2.0, 2.0])).unwrap(),
        ];
        let f = ViLinear::new(DMatrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let split = SplitBifunction::single(Arc::new(f));
        let inst = build_intersection_ep(split, sets, None, None).unwrap();
        // prox box is [0,1]²: the overlap of [-1,1]² and [0,2]²
        assert_eq!(
            inst.problem.set.bounding_box().unwrap(),
            (v(&[0.0, 0.0]), v(&[1.0, 1.0]))
        );
        assert!(inst.with_oracle(v(&[0.0, 0.0]), "origin").is_ok());
    }

    #[test]
    fn ball_halfspace_projection_examples() {
        let c = v(&[2.0, 0.0]);
        let a = v(&[1.0, 0.0]);
        assert_eq!(
            ball_halfspace_projection(&c, 1.0, &a, 1.5, &v(&[0.0, 0.0])).unwrap(),
            v(&[1.0, 0.0])
        );
        // flat face
        let p = ball_halfspace_projection(&c, 1.0, &a, 1.5, &v(&[5.0, 0.1])).unwrap();
        assert_eq!(p, v(&[1.5, 0.1]));
        // corner where the circle meets the line x1 = 1.5
        let target = v(&[5.0, 3.0]);
        let p = ball_halfspace_projection(&c, 1.0, &a, 1.5, &target).unwrap();
        assert!(p.dist(&v(&[1.5, 0.75f64.sqrt()])) < 1e-12);
        // grid search cross-check
        let mut best = f64::INFINITY;
        let steps = 2000;
        for i in 0..=steps {
            for j in 0..=steps {
                let y = v(&[1.0 + i as f64 / steps as f64, -1.0 + 2.0 * j as f64 / steps as f64]);
                if y.dist(&c) <= 1.0 && y[0] <= 1.5 {
                    best = best.min(y.dist(&target));
                }
            }
        }
        assert!(p.dist(&target) <= best + 1e-12);
        assert!(best - p.dist(&target) < 2e-3);
    }

    #[test]
    fn inclusion_oracle_examples() {
        let a = v(&[1.0, -2.0, 0.5]);
        let set = ConvexSet::boxed(Vector::filled(3, -5.0), Vector::filled(3, 5.0)).unwrap();
        let zero = DMatrix::zeros(3, 3);
        let x = inclusion_oracle(&[MonotoneOperator::distance_to_point(&a)], (&zero, &Vector::zeros(3)), &set)
            .unwrap();
        assert!(x.dist(&a) < 1e-12);

        let b = v(&[0.0, 1.0, 0.0]);
        let err = inclusion_oracle(
            &[MonotoneOperator::distance_to_point(&a), MonotoneOperator::distance_to_point(&b)],
            (&zero, &Vector::zeros(3)),
            &set,
        );
        assert!(matches!(err, Err(Error::Oracle(_))));

        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let op = MonotoneOperator::linear(m, Vector::zeros(3)).unwrap();
        let field = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0]));
        let x = inclusion_oracle(&[op], (&field, &v(&[0.0, 0.0, -2.0])), &set).unwrap();
        assert!(x.dist(&v(&[0.0, 0.0, 2.0])) < 1e-12);
    }
}
