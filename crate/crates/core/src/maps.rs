//! Nonexpansive mappings: projections, convex combinations of nonexpansive
//! maps, and resolvents of affine monotone operators.

use nalgebra::{DMatrix, Dyn, LU};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, Vector};

/// Tolerance on `Σ μ_i = 1` for averaged maps.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Affine maximal monotone operator `A(z) = Mz + q`.
#[derive(Clone, Debug, PartialEq)]
pub enum MonotoneOperator {
    /// Any `M` with `M + Mᵀ` positive semidefinite (PSD plus skew part).
    LinearMonotone { m: DMatrix<f64>, q: Vector },
    /// `∂φ` for `φ(z) = ½ zᵀQz + qᵀz`, `Q` symmetric PSD.
    QuadraticSubdifferential { hessian: DMatrix<f64>, q: Vector },
}

impl MonotoneOperator {
    pub fn linear(m: DMatrix<f64>, q: Vector) -> Result<Self> {
        check_square(&m, q.dim())?;
        let sym = (&m + m.transpose()) * 0.5;
        check_psd(&sym, "M + Mᵀ")?;
        Ok(MonotoneOperator::LinearMonotone { m, q })
    }

    pub fn quadratic_subdifferential(hessian: DMatrix<f64>, q: Vector) -> Result<Self> {
        check_square(&hessian, q.dim())?;
        if (&hessian - hessian.transpose()).amax() > 1e-12 * (1.0 + hessian.amax()) {
            return Err(Error::invalid("quadratic hessian must be symmetric"));
        }
        check_psd(&hessian, "hessian")?;
        Ok(MonotoneOperator::QuadraticSubdifferential { hessian, q })
    }

    /// `∂(½‖z − a‖²)`, whose only zero is `a`.
    pub fn distance_to_point(a: &Vector) -> Self {
        MonotoneOperator::QuadraticSubdifferential {
            hessian: DMatrix::identity(a.dim(), a.dim()),
            q: -a,
        }
    }

    pub fn dim(&self) -> usize {
        self.affine_parts().1.dim()
    }

    /// `(M, q)` with `A(z) = Mz + q`.
    pub fn affine_parts(&self) -> (&DMatrix<f64>, &Vector) {
        match self {
            MonotoneOperator::LinearMonotone { m, q } => (m, q),
            MonotoneOperator::QuadraticSubdifferential { hessian, q } => (hessian, q),
        }
    }

    pub fn apply(&self, z: &Vector) -> Vector {
        let (m, q) = self.affine_parts();
        Vector::from_dvector(&(m * z.to_dvector())).axpy(1.0, q)
    }
}

fn check_square(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.nrows().max(m.ncols()),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("operator matrix".into()));
    }
    Ok(())
}

fn check_psd(sym: &DMatrix<f64>, what: &str) -> Result<()> {
    let eig = sym.clone().symmetric_eigen().eigenvalues;
    let min = eig.min();
    if min < -1e-12 * (1.0 + eig.amax()) {
        return Err(Error::invalid(format!(
            "{what} must be positive semidefinite (min eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// `J_{cA} = (I + cA)^{-1}` for an affine monotone `A`, with the factorization
/// of `I + cM` computed once.
#[derive(Clone, Debug)]
pub struct Resolvent {
    op: MonotoneOperator,
    c: f64,
    factor: LU<f64, Dyn, Dyn>,
}

impl Resolvent {
    pub fn new(op: MonotoneOperator, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(format!("resolvent parameter c = {c} must be > 0")));
        }
        let (m, _) = op.affine_parts();
        let n = m.nrows();
        let system = DMatrix::identity(n, n) + m * c;
        let factor = system.lu();
        if !factor.is_invertible() {
            return Err(Error::Singular(format!("I + {c}·M is not invertible")));
        }
        Ok(Resolvent { op, c, factor })
    }

    pub fn operator(&self) -> &MonotoneOperator {
        &self.op
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// The unique `z` with `x ∈ z + c·A(z)`.
    pub fn apply(&self, x: &Vector) -> Vector {
        let (_, q) = self.op.affine_parts();
        let rhs = x.axpy(-self.c, q).to_dvector();
        let z = self
            .factor
            .solve(&rhs)
            .expect("factorization checked invertible at construction");
        Vector::from_dvector(&z)
    }
}

/// Convenience wrapper around [`Resolvent::new`] + [`Resolvent::apply`].
pub fn resolvent(op: &MonotoneOperator, c: f64, x: &Vector) -> Result<Vector> {
    check_dim(op.dim(), x.dim())?;
    Ok(Resolvent::new(op.clone(), c)?.apply(x))
}

#[derive(Clone, Debug)]
pub enum NonexpansiveMap {
    Identity { dim: usize },
    Projection(ConvexSet),
    /// `Σ μ_i T_i`, `μ_i > 0`, `Σ μ_i = 1`.
    Averaged {
        weights: Vec<f64>,
        maps: Vec<NonexpansiveMap>,
    },
    Resolvent(Resolvent),
}

impl NonexpansiveMap {
    pub fn identity(dim: usize) -> Self {
        NonexpansiveMap::Identity { dim }
    }

    pub fn projection(set: ConvexSet) -> Self {
        NonexpansiveMap::Projection(set)
    }

    pub fn averaged(weights: Vec<f64>, maps: Vec<NonexpansiveMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::invalid("averaged map needs at least one component"));
        }
        if weights.len() != maps.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} maps",
                weights.len(),
                maps.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("averaging weight {w} must be > 0")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!(
                "averaging weights sum to {sum}, expected 1"
            )));
        }
        let dim = maps[0].dim();
        for m in &maps {
            check_dim(dim, m.dim())?;
        }
        Ok(NonexpansiveMap::Averaged { weights, maps })
    }

    /// Equal weights `1/m`.
    pub fn uniform_average(maps: Vec<NonexpansiveMap>) -> Result<Self> {
        let m = maps.len();
        NonexpansiveMap::averaged(vec![1.0 / m as f64; m], maps)
    }

    pub fn resolvent(op: MonotoneOperator, c: f64) -> Result<Self> {
        Ok(NonexpansiveMap::Resolvent(Resolvent::new(op, c)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            NonexpansiveMap::Identity { dim } => *dim,
            NonexpansiveMap::Projection(s) => s.dim(),
            NonexpansiveMap::Averaged { maps, .. } => maps[0].dim(),
            NonexpansiveMap::Resolvent(r) => r.op.dim(),
        }
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &Vector) -> Vector {
        match self {
            NonexpansiveMap::Identity { .. } => x.clone(),
            NonexpansiveMap::Projection(s) => s.project_unchecked(x),
            NonexpansiveMap::Averaged { weights, maps } => {
                let images: Vec<Vector> = maps.iter().map(|m| m.apply_unchecked(x)).collect();
                combine(weights, &images)
            }
            NonexpansiveMap::Resolvent(r) => r.apply(x),
        }
    }

    /// Same result as [`apply`](Self::apply), bit for bit, but evaluates the
    /// top-level components of an averaged map on separate threads.
    pub fn apply_parallel(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.dim())?;
        match self {
            NonexpansiveMap::Averaged { weights, maps } if maps.len() > 1 => {
                let images: Vec<Vector> = std::thread::scope(|s| {
                    let handles: Vec<_> = maps
                        .iter()
                        .map(|m| s.spawn(move || m.apply_unchecked(x)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("map evaluation panicked"))
                        .collect()
                });
                Ok(combine(weights, &images))
            }
            _ => Ok(self.apply_unchecked(x)),
        }
    }

    /// `‖T(x) − x‖`.
    pub fn fixed_point_residual(&self, x: &Vector) -> Result<f64> {
        Ok(self.apply(x)?.dist(x))
    }

    /// Exact membership test for `Fix(T)` when it is a known set: identity,
    /// projections, and averages of those (where `Fix(T)` is the intersection
    /// of the components' fixed sets). `None` for resolvents.
    pub fn fixed_set_contains(&self, y: &Vector, rel_tol: f64) -> Option<bool> {
        match self {
            NonexpansiveMap::Identity { .. } => Some(true),
            NonexpansiveMap::Projection(s) => Some(s.contains_within(y, rel_tol)),
            NonexpansiveMap::Averaged { maps, .. } => maps
                .iter()
                .map(|m| m.fixed_set_contains(y, rel_tol))
                .try_fold(true, |acc, r| Some(acc && r?)),
            NonexpansiveMap::Resolvent(_) => None,
        }
    }
}

/// `Σ μ_i v_i`, accumulated in index order.
fn combine(weights: &[f64], images: &[Vector]) -> Vector {
    let mut acc = images[0].scale(weights[0]);
    for (w, img) in weights.iter().zip(images).skip(1) {
        acc = acc.axpy(*w, img);
    }
    acc
}
