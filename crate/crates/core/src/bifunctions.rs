//! Bifunctions `f(x, y)` that are convex in `y` and vanish on the diagonal,
//! together with the sum structure `f = f1 + f2` the splitting solver works on.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, Vector};

/// A bifunction with the oracles the splitting method needs.
///
/// Implementations must satisfy `value(x, x) == 0` and be convex in the
/// second argument.
pub trait Bifunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector, y: &Vector) -> f64;

    /// Some element of `∂₂f(x, y)`, the subdifferential of `f(x, ·)` at `y`.
    fn subgradient(&self, x: &Vector, y: &Vector) -> Vector;

    /// Some element of `∂₂f(x, x)`.
    fn diagonal_subgradient(&self, x: &Vector) -> Vector {
        self.subgradient(x, x)
    }

    /// Lipschitz constant of `y ↦ ∇₂f(x, y)`, or `None` when `f(x, ·)` is
    /// not known to be smooth.
    fn smoothness(&self, x: &Vector) -> Option<f64>;

    /// Coordinate-separable quadratic description of `f(x, ·)`, when one exists.
    fn separable_form(&self, _x: &Vector) -> Option<SeparableForm> {
        None
    }

    /// Closed-form `argmin { λ f(base, y) + ½‖y − anchor‖² : y ∈ set }`.
    ///
    /// Returns `None` when no closed form is known, in which case callers fall
    /// back to the generic inner solver.
    fn prox(&self, base: &Vector, anchor: &Vector, lambda: f64, set: &ConvexSet) -> Option<Vector> {
        self.separable_form(base)?.prox(anchor, lambda, set)
    }
}

/// `f(x, y) = Σ_i ½ q_i (y_i² − x_i²) + l_i (y_i − x_i)` for a frozen `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableForm {
    pub curvature: Vector,
    pub linear: Vector,
}

impl SeparableForm {
    pub fn zero(dim: usize) -> Self {
        SeparableForm {
            curvature: Vector::zeros(dim),
            linear: Vector::zeros(dim),
        }
    }

    fn add(&self, other: &SeparableForm) -> SeparableForm {
        SeparableForm {
            curvature: &self.curvature + &other.curvature,
            linear: &self.linear + &other.linear,
        }
    }

    /// The minimizer is `clamp((v − λl)/(1 + λq))` on coordinate-separable
    /// sets, and a plain projection of the same point when `q` is uniform.
    pub fn prox(&self, anchor: &Vector, lambda: f64, set: &ConvexSet) -> Option<Vector> {
        let uniform = self
            .curvature
            .iter()
            .all(|&q| q == self.curvature[0]);
        if !(uniform || is_coordinate_separable(set)) {
            return None;
        }
        let mut u = anchor.axpy(-lambda, &self.linear);
        if self.curvature.iter().any(|&q| q != 0.0) {
            u = u.zip_map(&self.curvature, |ui, q| ui / (1.0 + lambda * q));
        }
        Some(set.project_unchecked(&u))
    }
}

fn is_coordinate_separable(set: &ConvexSet) -> bool {
    match set {
        ConvexSet::Box { .. } | ConvexSet::WholeSpace { .. } => true,
        ConvexSet::Product { blocks } => blocks.iter().all(is_coordinate_separable),
        _ => false,
    }
}

/// Affine map `x ↦ Lx + d` on `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    offset: Vector,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: Vector) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid(format!(
                "affine map matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_dim(matrix.nrows(), offset.dim())?;
        if matrix.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(Error::NonFinite("affine map coefficients".into()));
        }
        Ok(AffineMap { matrix, offset })
    }

    pub fn constant(offset: Vector) -> Self {
        let n = offset.dim();
        AffineMap {
            matrix: DMatrix::zeros(n, n),
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        let mx = &self.matrix * x.to_dvector();
        Vector::from_dvector(&mx).axpy(1.0, &self.offset)
    }

    fn plus(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            matrix: &self.matrix + &other.matrix,
            offset: &self.offset + &other.offset,
        }
    }
}

/// `f ≡ 0`.
#[derive(Clone, Debug)]
pub struct ZeroBifunction {
    dim: usize,
}

impl ZeroBifunction {
    pub fn new(dim: usize) -> Self {
        ZeroBifunction { dim }
    }
}

impl Bifunction for ZeroBifunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: &Vector, _y: &Vector) -> f64 {
        0.0
    }

    fn subgradient(&self, _x: &Vector, _y: &Vector) -> Vector {
        Vector::zeros(self.dim)
    }

    fn smoothness(&self, _x: &Vector) -> Option<f64> {
        Some(0.0)
    }

    fn separable_form(&self, _x: &Vector) -> Option<SeparableForm> {
        Some(SeparableForm::zero(self.dim))
    }
}

/// Variational-inequality bifunction `f(x, y) = <F(x), y − x>` for an affine
/// operator `F(x) = Mx + q`.
#[derive(Clone, Debug)]
pub struct ViLinear {
    operator: AffineMap,
}

impl ViLinear {
    pub fn new(m: DMatrix<f64>, q: Vector) -> Result<Self> {
        Ok(ViLinear {
            operator: AffineMap::new(m, q)?,
        })
    }

    pub fn from_operator(operator: AffineMap) -> Self {
        ViLinear { operator }
    }

    pub fn operator(&self) -> &AffineMap {
        &self.operator
    }
}

impl Bifunction for ViLinear {
    fn dim(&self) -> usize {
        self.operator.dim()
    }

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.operator.apply(x).dot(&(y - x))
    }

    fn subgradient(&self, x: &Vector, _y: &Vector) -> Vector {
        self.operator.apply(x)
    }

    fn smoothness(&self, _x: &Vector) -> Option<f64> {
        Some(0.0)
    }

    fn separable_form(&self, x: &Vector) -> Option<SeparableForm> {
        Some(SeparableForm {
            curvature: Vector::zeros(self.dim()),
            linear: self.operator.apply(x),
        })
    }
}

/// `f(x, y) = Σ_i [½ q_i (y_i² − x_i²) + l_i(x)(y_i − x_i)]` with `q >= 0`
/// and an affine coupling `l`.
#[derive(Clone, Debug)]
pub struct SeparableQuadratic {
    curvature: Vector,
    coupling: AffineMap,
}

impl SeparableQuadratic {
    pub fn new(curvature: Vector, coupling: AffineMap) -> Result<Self> {
        check_dim(curvature.dim(), coupling.dim())?;
        if let Some(i) = curvature.iter().position(|&q| !(q >= 0.0) || !q.is_finite()) {
            return Err(Error::invalid(format!(
                "separable quadratic curvature q[{i}] = {} must be finite and >= 0 (f(x, .) would be nonconvex)",
                curvature[i]
            )));
        }
        Ok(SeparableQuadratic {
            curvature,
            coupling,
        })
    }

    pub fn curvature(&self) -> &Vector {
        &self.curvature
    }

    pub fn coupling(&self) -> &AffineMap {
        &self.coupling
    }
}

impl Bifunction for SeparableQuadratic {
    fn dim(&self) -> usize {
        self.curvature.dim()
    }

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        let l = self.coupling.apply(x);
        (0..self.dim())
            .map(|i| {
                0.5 * self.curvature[i] * (y[i] * y[i] - x[i] * x[i]) + l[i] * (y[i] - x[i])
            })
            .sum()
    }

    fn subgradient(&self, x: &Vector, y: &Vector) -> Vector {
        let l = self.coupling.apply(x);
        y.zip_map(&self.curvature, |yi, q| q * yi).axpy(1.0, &l)
    }

    fn smoothness(&self, _x: &Vector) -> Option<f64> {
        Some(self.curvature.max_abs())
    }

    fn separable_form(&self, x: &Vector) -> Option<SeparableForm> {
        Some(SeparableForm {
            curvature: self.curvature.clone(),
            linear: self.coupling.apply(x),
        })
    }
}

/// Optimization-type bifunction `f(x, y) = φ(y) − φ(x)` with the convex
/// quadratic `φ(y) = ½ yᵀQy + pᵀy`.
///
/// Paramonotone with respect to the minimizers of `φ`. No closed-form prox
/// unless `Q` is diagonal.
#[derive(Clone, Debug)]
pub struct PotentialDifference {
    hessian: DMatrix<f64>,
    linear: Vector,
    lipschitz: f64,
}

impl PotentialDifference {
    pub fn new(hessian: DMatrix<f64>, linear: Vector) -> Result<Self> {
        let n = linear.dim();
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: hessian.nrows(),
            });
        }
        if (&hessian - hessian.transpose()).amax() > 1e-12 * (1.0 + hessian.amax()) {
            return Err(Error::invalid("potential hessian must be symmetric"));
        }
        let eig = hessian.clone().symmetric_eigen().eigenvalues;
        let min = eig.min();
        if min < -1e-12 * (1.0 + eig.amax()) {
            return Err(Error::invalid(format!(
                "potential hessian must be positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(PotentialDifference {
            lipschitz: eig.amax(),
            hessian,
            linear,
        })
    }

    pub fn potential(&self, y: &Vector) -> f64 {
        let qy = Vector::from_dvector(&(&self.hessian * y.to_dvector()));
        0.5 * y.dot(&qy) + self.linear.dot(y)
    }

    fn gradient(&self, y: &Vector) -> Vector {
        Vector::from_dvector(&(&self.hessian * y.to_dvector())).axpy(1.0, &self.linear)
    }

    fn is_diagonal(&self) -> bool {
        let n = self.hessian.nrows();
        (0..n).all(|i| (0..n).all(|j| i == j || self.hessian[(i, j)] == 0.0))
    }
}

impl Bifunction for PotentialDifference {
    fn dim(&self) -> usize {
        self.linear.dim()
    }

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.potential(y) - self.potential(x)
    }

    fn subgradient(&self, _x: &Vector, y: &Vector) -> Vector {
        self.gradient(y)
    }

    fn smoothness(&self, _x: &Vector) -> Option<f64> {
        Some(self.lipschitz)
    }

    fn separable_form(&self, _x: &Vector) -> Option<SeparableForm> {
        if !self.is_diagonal() {
            return None;
        }
        Some(SeparableForm {
            curvature: Vector::from(self.hessian.diagonal().iter().copied().collect::<Vec<_>>()),
            linear: self.linear.clone(),
        })
    }
}

/// Pointwise sum of bifunctions.
#[derive(Clone, Debug)]
pub struct SumBifunction {
    parts: Vec<Arc<dyn Bifunction>>,
}

impl SumBifunction {
    pub fn new(parts: Vec<Arc<dyn Bifunction>>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("sum of zero bifunctions"))?
            .dim();
        for p in &parts {
            check_dim(first, p.dim())?;
        }
        Ok(SumBifunction { parts })
    }
}

impl Bifunction for SumBifunction {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.parts.iter().map(|p| p.value(x, y)).sum()
    }

    fn subgradient(&self, x: &Vector, y: &Vector) -> Vector {
        self.parts
            .iter()
            .skip(1)
            .fold(self.parts[0].subgradient(x, y), |acc, p| {
                acc.axpy(1.0, &p.subgradient(x, y))
            })
    }

    fn diagonal_subgradient(&self, x: &Vector) -> Vector {
        self.parts
            .iter()
            .skip(1)
            .fold(self.parts[0].diagonal_subgradient(x), |acc, p| {
                acc.axpy(1.0, &p.diagonal_subgradient(x))
            })
    }

    fn smoothness(&self, x: &Vector) -> Option<f64> {
        self.parts.iter().map(|p| p.smoothness(x)).sum()
    }

    fn separable_form(&self, x: &Vector) -> Option<SeparableForm> {
        let mut forms = self.parts.iter().map(|p| p.separable_form(x));
        let first = forms.next()??;
        forms.try_fold(first, |acc, f| Some(acc.add(&f?)))
    }
}

/// The pair `(f1, f2)` with `f = f1 + f2`.
#[derive(Clone, Debug)]
pub struct SplitBifunction {
    pub f1: Arc<dyn Bifunction>,
    pub f2: Arc<dyn Bifunction>,
}

impl SplitBifunction {
    pub fn new(f1: Arc<dyn Bifunction>, f2: Arc<dyn Bifunction>) -> Result<Self> {
        check_dim(f1.dim(), f2.dim())?;
        Ok(SplitBifunction { f1, f2 })
    }

    /// `f1 = f`, `f2 ≡ 0`.
    pub fn single(f: Arc<dyn Bifunction>) -> Self {
        let dim = f.dim();
        SplitBifunction {
            f1: f,
            f2: Arc::new(ZeroBifunction::new(dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.f1.dim()
    }

    pub fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.f1.value(x, y) + self.f2.value(x, y)
    }

    /// `f1 + f2` as one bifunction.
    pub fn total(&self) -> SumBifunction {
        SumBifunction {
            parts: vec![self.f1.clone(), self.f2.clone()],
        }
    }

    /// The same total bifunction with nothing left in the second slot.
    pub fn lumped(&self) -> SplitBifunction {
        SplitBifunction::single(Arc::new(self.total()))
    }
}

/// Linear-quadratic oligopoly: player `i` chooses `x_i` and earns
/// `φ_i(x) = x_i (a_i − Σ_j b_ij x_j) − c_i x_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGame {
    pub a: Vector,
    pub b: DMatrix<f64>,
    pub c: Vector,
}

impl QuadraticGame {
    pub fn new(a: Vector, b: DMatrix<f64>, c: Vector) -> Result<Self> {
        let n = a.dim();
        check_dim(n, c.dim())?;
        if b.nrows() != n || b.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.nrows(),
            });
        }
        if !a.is_finite() || !c.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("game coefficients".into()));
        }
        if let Some(i) = (0..n).find(|&i| b[(i, i)] <= 0.0) {
            return Err(Error::invalid(format!(
                "b[{i}][{i}] = {} must be > 0 for the payoff to be concave in the own action",
                b[(i, i)]
            )));
        }
        Ok(QuadraticGame { a, b, c })
    }

    /// Symmetric Cournot market with common intercept and slope.
    pub fn cournot(a: f64, b: f64, c: Vector) -> Result<Self> {
        let n = c.dim();
        QuadraticGame::new(Vector::filled(n, a), DMatrix::from_element(n, n, b), c)
    }

    pub fn players(&self) -> usize {
        self.a.dim()
    }

    pub fn payoff(&self, i: usize, x: &Vector) -> f64 {
        let exposure: f64 = (0..self.players()).map(|j| self.b[(i, j)] * x[j]).sum();
        x[i] * (self.a[i] - exposure) - self.c[i] * x[i]
    }

    /// `Σ_i φ_i(x) − φ_i(x[y_i])` evaluated straight from the payoffs.
    pub fn nikaido_isoda_value(&self, x: &Vector, y: &Vector) -> f64 {
        (0..self.players())
            .map(|i| {
                let mut xi = x.clone().into_inner();
                xi[i] = y[i];
                self.payoff(i, x) - self.payoff(i, &Vector::from(xi))
            })
            .sum()
    }

    /// `-∂φ_i/∂x_i` for every player: the game's pseudo-gradient.
    pub fn pseudo_gradient(&self, x: &Vector) -> Vector {
        (0..self.players())
            .map(|i| {
                let exposure: f64 = (0..self.players()).map(|j| self.b[(i, j)] * x[j]).sum();
                exposure + self.b[(i, i)] * x[i] - self.a[i] + self.c[i]
            })
            .collect::<Vec<_>>()
            .into()
    }

    /// Revenue-difference part: `Σ b_ii (y_i² − x_i²) + (Σ_{j≠i} b_ij x_j − a_i)(y_i − x_i)`.
    pub fn revenue_part(&self) -> SeparableQuadratic {
        let n = self.players();
        let curvature = Vector::from((0..n).map(|i| 2.0 * self.b[(i, i)]).collect::<Vec<_>>());
        let mut off = self.b.clone();
        off.fill_diagonal(0.0);
        SeparableQuadratic {
            curvature,
            coupling: AffineMap {
                matrix: off,
                offset: -&self.a,
            },
        }
    }

    /// Cost-difference part: `Σ c_i (y_i − x_i)`.
    pub fn cost_part(&self) -> ViLinear {
        ViLinear::from_operator(AffineMap::constant(self.c.clone()))
    }

    /// The Nikaido–Isoda bifunction split as revenue part + cost part.
    pub fn nikaido_isoda(&self) -> SplitBifunction {
        SplitBifunction {
            f1: Arc::new(self.revenue_part()),
            f2: Arc::new(self.cost_part()),
        }
    }

    /// The whole Nikaido–Isoda bifunction as a single separable quadratic.
    pub fn nikaido_isoda_lumped(&self) -> SeparableQuadratic {
        let rev = self.revenue_part();
        SeparableQuadratic {
            curvature: rev.curvature,
            coupling: rev.coupling.plus(&AffineMap::constant(self.c.clone())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonotonicityVerdict {
    ConsistentWithMonotone,
    ConsistentWithPseudoMonotone,
    Violated,
}

impl fmt::Display for MonotonicityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MonotonicityVerdict::ConsistentWithMonotone => "consistent-with-monotone",
            MonotonicityVerdict::ConsistentWithPseudoMonotone => "consistent-with-pseudo-monotone",
            MonotonicityVerdict::Violated => "violated",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    /// `max f(x, y) + f(y, x)` over the sampled pairs.
    pub max_symmetric_sum: f64,
    pub monotone_violations: usize,
    /// Pairs with `f(x, y) >= 0` but `f(y, x) > 0`.
    pub pseudo_monotone_violations: usize,
    pub verdict: MonotonicityVerdict,
}

/// Sampled evidence about the monotonicity class of `f` on `set`.
///
/// Pairs are drawn from `region` (or from `set` itself when it is bounded)
/// and projected onto `set`. Only a `Violated` verdict is conclusive.
pub fn probe_monotonicity(
    f: &dyn Bifunction,
    set: &ConvexSet,
    region: Option<&ConvexSet>,
    samples: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if samples == 0 {
        return Err(Error::invalid("probe needs at least one sample"));
    }
    check_dim(f.dim(), set.dim())?;
    let sampler = region.unwrap_or(set);
    check_dim(set.dim(), sampler.dim())?;
    if sampler.bounding_box().is_none() {
        return Err(Error::invalid(
            "feasible set is unbounded; pass an explicit sampling region",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vector {
        let raw = sampler.sample(&mut rng).expect("bounded sampler");
        set.project_unchecked(&raw)
    };

    let mut max_sum = f64::NEG_INFINITY;
    let mut monotone_violations = 0;
    let mut pseudo_violations = 0;
    for _ in 0..samples {
        let x = draw();
        let y = draw();
        let fxy = f.value(&x, &y);
        let fyx = f.value(&y, &x);
        let sum = fxy + fyx;
        let tol = 1e-12 * (1.0 + fxy.abs() + fyx.abs());
        max_sum = max_sum.max(sum);
        if sum > tol {
            monotone_violations += 1;
        }
        if (fxy >= 0.0 && fyx > tol) || (fyx >= 0.0 && fxy > tol) {
            pseudo_violations += 1;
        }
    }
    let verdict = if pseudo_violations > 0 {
        MonotonicityVerdict::Violated
    } else if monotone_violations == 0 {
        MonotonicityVerdict::ConsistentWithMonotone
    } else {
        MonotonicityVerdict::ConsistentWithPseudoMonotone
    };
    Ok(MonotonicityReport {
        samples,
        max_symmetric_sum: max_sum,
        monotone_violations,
        pseudo_monotone_violations: pseudo_violations,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::from(x)
    }

    fn random_pairs(n: usize, count: usize, seed: u64) -> Vec<(Vector, Vector)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
                (Vector::from(x), Vector::from(y))
            })
            .collect()
    }

    fn families() -> Vec<Arc<dyn Bifunction>> {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, -1.0, 1.0, 0.5, 0.0, 0.3, 1.0]);
        let game = QuadraticGame::new(
            v(&[10.0, 8.0, 12.0]),
            DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.4, 2.0, 0.3, 0.1, 0.2, 1.5]),
            v(&[1.0, 2.0, 0.5]),
        )
        .unwrap();
        vec![
            Arc::new(ViLinear::new(m.clone(), v(&[1.0, -2.0, 0.0])).unwrap()),
            Arc::new(
                SeparableQuadratic::new(
                    v(&[2.0, 0.0, 1.0]),
                    AffineMap::new(m, v(&[0.5, 0.5, -1.0])).unwrap(),
                )
                .unwrap(),
            ),
            Arc::new(game.revenue_part()),
            Arc::new(game.cost_part()),
            Arc::new(game.nikaido_isoda_lumped()),
            Arc::new(game.nikaido_isoda().total()),
            Arc::new(
                PotentialDifference::new(
                    DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0]),
                    v(&[1.0, 0.0, -1.0]),
                )
                .unwrap(),
            ),
            Arc::new(ZeroBifunction::new(3)),
        ]
    }

    #[test]
    fn vi_linear_examples() {
        let f = ViLinear::new(DMatrix::identity(2, 2), Vector::zeros(2)).unwrap();
        assert_eq!(f.value(&v(&[1.0, 1.0]), &v(&[2.0, 2.0])), 2.0);
        let skew = ViLinear::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            Vector::zeros(2),
        )
        .unwrap();
        for (x, y) in random_pairs(2, 100, 3) {
            assert_eq!(f.value(&x, &x), 0.0);
            let s = skew.value(&x, &y) + skew.value(&y, &x);
            assert!(s.abs() < 1e-12, "skew sum {s}");
        }
        assert!(ViLinear::new(DMatrix::identity(2, 2), Vector::zeros(3)).is_err());
        assert!(ViLinear::new(DMatrix::zeros(2, 3), Vector::zeros(2)).is_err());
    }

    #[test]
    fn separable_quadratic_examples() {
        // q = 0 reduces to the VI bifunction with F = l.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let l = AffineMap::new(m.clone(), v(&[1.0, -1.0])).unwrap();
        let sq = SeparableQuadratic::new(Vector::zeros(2), l).unwrap();
        let vi = ViLinear::new(m, v(&[1.0, -1.0])).unwrap();
        for (x, y) in random_pairs(2, 50, 4) {
            assert!((sq.value(&x, &y) - vi.value(&x, &y)).abs() < 1e-12);
        }

        // (1 + λq) y = v − λ l  with q = 2, l = -4, v = 0, λ = 1  ->  y = 4/3
        let f = SeparableQuadratic::new(v(&[2.0]), AffineMap::constant(v(&[-4.0]))).unwrap();
        let whole = ConvexSet::whole_space(1).unwrap();
        let y = f.prox(&v(&[0.0]), &v(&[0.0]), 1.0, &whole).unwrap();
        assert!((y[0] - 4.0 / 3.0).abs() < 1e-15);

        assert!(SeparableQuadratic::new(v(&[-1.0]), AffineMap::constant(v(&[0.0]))).is_err());
    }

    #[test]
    fn diagonal_normalization_and_subgradient_inequality() {
        for f in families() {
            for (x, y) in random_pairs(3, 1000, 5) {
                assert!(f.value(&x, &x).abs() <= 1e-12, "{f:?}");
                let g = f.diagonal_subgradient(&x);
                let lower = g.dot(&(&y - &x));
                assert!(f.value(&x, &y) >= lower - 1e-10, "{f:?} at {x:?},{y:?}");
            }
        }
    }

    #[test]
    fn split_value_is_additive() {
        let game = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 4.0])).unwrap();
        let split = game.nikaido_isoda();
        for (x, y) in random_pairs(2, 1000, 6) {
            let total = split.value(&x, &y);
            let parts = split.f1.value(&x, &y) + split.f2.value(&x, &y);
            assert!((total - parts).abs() <= 1e-12);
            let direct = game.nikaido_isoda_value(&x, &y);
            assert!((total - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            let lumped = game.nikaido_isoda_lumped().value(&x, &y);
            assert!((lumped - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn nikaido_isoda_sign_at_cournot_equilibrium() {
        // x_i* = (a − 2c_i + c_j) / (3b) = 3 for a = 10, b = 1, c = (1, 1)
        let game = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 1.0])).unwrap();
        let split = game.nikaido_isoda();
        let xstar = v(&[3.0, 3.0]);
        let bx = ConvexSet::boxed(Vector::zeros(2), Vector::filled(2, 10.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let worst = (0..1000)
            .map(|_| split.value(&xstar, &bx.sample(&mut rng).unwrap()))
            .fold(f64::INFINITY, f64::min);
        assert!(worst >= -1e-8, "worst {worst}");
    }

    #[test]
    fn single_player_reduces_to_scalar_optimality() {
        // φ(x) = x(10 − 2x) − x is maximized at x = 9/4.
        let game = QuadraticGame::new(v(&[10.0]), DMatrix::from_element(1, 1, 2.0), v(&[1.0])).unwrap();
        let f = game.nikaido_isoda();
        let xstar = v(&[2.25]);
        for k in 0..=200 {
            let y = v(&[-5.0 + 0.05 * k as f64]);
            let expected = game.payoff(0, &xstar) - game.payoff(0, &y);
            assert!((f.value(&xstar, &y) - expected).abs() < 1e-12);
            assert!(f.value(&xstar, &y) >= -1e-12);
        }
    }

    #[test]
    fn game_rejects_nonconcave_payoff() {
        let r = QuadraticGame::new(v(&[1.0]), DMatrix::from_element(1, 1, 0.0), v(&[0.0]));
        assert!(r.is_err());
    }

    #[test]
    fn probe_identity_is_monotone() {
        let f = ViLinear::new(DMatrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let c = ConvexSet::boxed(Vector::filled(2, -1.0), Vector::filled(2, 1.0)).unwrap();
        let r = probe_monotonicity(&f, &c, None, 500, 1).unwrap();
        assert_eq!(r.verdict, MonotonicityVerdict::ConsistentWithMonotone);
        assert!(r.max_symmetric_sum <= 0.0);
    }

    #[test]
    fn probe_negative_identity_is_violated() {
        let f = ViLinear::new(-DMatrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let c = ConvexSet::boxed(Vector::filled(2, -1.0), Vector::filled(2, 1.0)).unwrap();
        let r = probe_monotonicity(&f, &c, None, 500, 2).unwrap();
        assert_eq!(r.verdict, MonotonicityVerdict::Violated);
        assert!(r.pseudo_monotone_violations > 0);
    }

    #[test]
    fn probe_potential_difference_telescopes() {
        let f = PotentialDifference::new(DMatrix::identity(2, 2) * 3.0, v(&[1.0, -1.0])).unwrap();
        let c = ConvexSet::boxed(Vector::filled(2, -1.0), Vector::filled(2, 1.0)).unwrap();
        let r = probe_monotonicity(&f, &c, None, 500, 3).unwrap();
        assert_eq!(r.max_symmetric_sum, 0.0);
        assert_eq!(r.verdict, MonotonicityVerdict::ConsistentWithMonotone);
    }

    #[test]
    fn probe_requires_region_for_unbounded_sets() {
        let f = ZeroBifunction::new(2);
        let whole = ConvexSet::whole_space(2).unwrap();
        assert!(probe_monotonicity(&f, &whole, None, 10, 0).is_err());
        let region = ConvexSet::boxed(Vector::zeros(2), Vector::filled(2, 1.0)).unwrap();
        assert!(probe_monotonicity(&f, &whole, Some(&region), 10, 0).is_ok());
        assert!(probe_monotonicity(&f, &region, None, 0, 0).is_err());
    }
}
