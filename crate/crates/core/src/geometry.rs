//! Points of `R^n` and closed convex sets with exact Euclidean projections.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Relative tolerance used by [`ConvexSet::contains`].
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Dense point of `R^n`.
///
/// Arithmetic through the operator impls assumes matching dimensions and
/// panics otherwise; the checked entry points ([`inner`], [`ConvexSet::project`])
/// return [`Error::DimensionMismatch`] instead.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting empty input and non-finite components.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("vector must have dimension >= 1"));
        }
        let v = Vector(components);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("vector {v:?}")));
        }
        Ok(v)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Vector(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dot");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dist");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, s: f64) -> Vector {
        self.map(|v| v * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in axpy");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    /// Convex combination `t * self + (1 - t) * other`.
    pub fn lerp(&self, t: f64, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in lerp");
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect(),
        )
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Vector {
        Vector(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Vector, mut f: impl FnMut(f64, f64) -> f64) -> Vector {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in zip_map");
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn slice(&self, start: usize, len: usize) -> Vector {
        Vector(self.0[start..start + len].to_vec())
    }

    pub(crate) fn concat(parts: impl IntoIterator<Item = Vector>) -> Vector {
        Vector(parts.into_iter().flat_map(|p| p.0).collect())
    }

    pub(crate) fn to_dvector(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_column_slice(&self.0)
    }

    pub(crate) fn from_dvector(v: &nalgebra::DVector<f64>) -> Vector {
        Vector(v.iter().copied().collect())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl From<Vec<f64>> for Vector {
    /// Unchecked conversion; see [`Vector::new`] for the validating constructor.
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(v: [f64; N]) -> Self {
        Vector(v.to_vec())
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;

    fn add(self, rhs: &Vector) -> Vector {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Vector {
    type Output = Vector;

    fn sub(self, rhs: &Vector) -> Vector {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Vector {
    type Output = Vector;

    fn mul(self, rhs: f64) -> Vector {
        self.scale(rhs)
    }
}

impl Neg for &Vector {
    type Output = Vector;

    fn neg(self) -> Vector {
        self.map(|v| -v)
    }
}

/// Euclidean inner product.
pub fn inner(x: &Vector, y: &Vector) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    Ok(x.dot(y))
}

/// `‖γx + (1−γ)y − z‖² − [γ‖x−z‖² + (1−γ)‖y−z‖² − γ(1−γ)‖x−y‖²]`.
///
/// The bracket is an exact identity in any inner-product space, so the
/// returned value only measures floating point error.
pub fn three_point_identity_residual(x: &Vector, y: &Vector, z: &Vector, gamma: f64) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    check_dim(x.dim(), z.dim())?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma = {gamma} outside [0, 1]")));
    }
    let lhs = (&x.lerp(gamma, y) - z).norm_sq();
    let rhs = gamma * x.dist(z).powi(2) + (1.0 - gamma) * y.dist(z).powi(2)
        - gamma * (1.0 - gamma) * x.dist(y).powi(2);
    Ok(lhs - rhs)
}

/// Nonempty closed convex subset of `R^n` with a closed-form projection.
///
/// Intersections of several sets are deliberately not representable here; they
/// are handled by averaging projections (see [`crate::maps::NonexpansiveMap`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConvexSet {
    Box { lo: Vector, hi: Vector },
    Ball { center: Vector, radius: f64 },
    /// `{x : <a, x> <= b}`; `a` is kept as given, not normalized.
    Halfspace { a: Vector, b: f64 },
    /// `{x >= 0 : sum(x) = scale}`.
    Simplex { dim: usize, scale: f64 },
    /// Cartesian product over consecutive coordinate blocks.
    Product { blocks: Vec<ConvexSet> },
    WholeSpace { dim: usize },
}

impl ConvexSet {
    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        let s = ConvexSet::Box { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        let s = ConvexSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn halfspace(a: Vector, b: f64) -> Result<Self> {
        let s = ConvexSet::Halfspace { a, b };
        s.validate()?;
        Ok(s)
    }

    pub fn simplex(dim: usize, scale: f64) -> Result<Self> {
        let s = ConvexSet::Simplex { dim, scale };
        s.validate()?;
        Ok(s)
    }

    pub fn product(blocks: Vec<ConvexSet>) -> Result<Self> {
        let s = ConvexSet::Product { blocks };
        s.validate()?;
        Ok(s)
    }

    pub fn whole_space(dim: usize) -> Result<Self> {
        let s = ConvexSet::WholeSpace { dim };
        s.validate()?;
        Ok(s)
    }

    /// Checks that the parameters describe a nonempty closed convex set.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Box { lo, hi } => {
                check_dim(lo.dim(), hi.dim())?;
                if lo.dim() == 0 {
                    return Err(Error::invalid("box must have dimension >= 1"));
                }
                if !lo.iter().chain(hi.iter()).all(|v| !v.is_nan()) {
                    return Err(Error::NonFinite("box bounds".into()));
                }
                if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
                    return Err(Error::invalid("box requires lo <= hi componentwise"));
                }
            }
            ConvexSet::Ball { center, radius } => {
                if !center.is_finite() || center.dim() == 0 {
                    return Err(Error::invalid("ball center must be a finite nonempty vector"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("ball radius must be positive"));
                }
            }
            ConvexSet::Halfspace { a, b } => {
                if !a.is_finite() || !b.is_finite() || a.dim() == 0 {
                    return Err(Error::NonFinite("halfspace parameters".into()));
                }
                if a.norm_sq() == 0.0 {
                    return Err(Error::invalid("halfspace normal must be nonzero"));
                }
            }
            ConvexSet::Simplex { dim, scale } => {
                if *dim == 0 {
                    return Err(Error::invalid("simplex must have dimension >= 1"));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::invalid("simplex scale must be positive"));
                }
            }
            ConvexSet::Product { blocks } => {
                if blocks.is_empty() {
                    return Err(Error::invalid("product set needs at least one block"));
                }
                for b in blocks {
                    b.validate()?;
                }
            }
            ConvexSet::WholeSpace { dim } => {
                if *dim == 0 {
                    return Err(Error::invalid("whole space must have dimension >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Box { lo, .. } => lo.dim(),
            ConvexSet::Ball { center, .. } => center.dim(),
            ConvexSet::Halfspace { a, .. } => a.dim(),
            ConvexSet::Simplex { dim, .. } | ConvexSet::WholeSpace { dim } => *dim,
            ConvexSet::Product { blocks } => blocks.iter().map(ConvexSet::dim).sum(),
        }
    }

    /// Nearest point of the set to `x`.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.project_unchecked(x))
    }

    /// Projection without the dimension check. Members are returned unchanged,
    /// bit for bit, for every variant except the simplex.
    pub(crate) fn project_unchecked(&self, x: &Vector) -> Vector {
        match self {
            ConvexSet::Box { lo, hi } => Vector(
                x.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(&v, (&l, &h))| v.max(l).min(h))
                    .collect(),
            ),
            ConvexSet::Ball { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r <= *radius {
                    x.clone()
                } else {
                    center.axpy(radius / r, &d)
                }
            }
            ConvexSet::Halfspace { a, b } => {
                let excess = a.dot(x) - b;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x.axpy(-excess / a.norm_sq(), a)
                }
            }
            ConvexSet::Simplex { scale, .. } => project_simplex(x, *scale),
            ConvexSet::Product { blocks } => {
                let mut start = 0;
                Vector::concat(blocks.iter().map(|b| {
                    let n = b.dim();
                    let p = b.project_unchecked(&x.slice(start, n));
                    start += n;
                    p
                }))
            }
            ConvexSet::WholeSpace { .. } => x.clone(),
        }
    }

    /// Amount by which `x` violates the set's defining constraints
    /// (zero for members).
    pub fn violation(&self, x: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), x.dim());
        match self {
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .fold(0.0, |m, (&v, (&l, &h))| m.max(l - v).max(v - h)),
            ConvexSet::Ball { center, radius } => (x.dist(center) - radius).max(0.0),
            ConvexSet::Halfspace { a, b } => ((a.dot(x) - b) / a.norm()).max(0.0),
            ConvexSet::Simplex { scale, .. } => {
                let neg = x.iter().fold(0.0f64, |m, &v| m.max(-v));
                let sum: f64 = x.iter().sum();
                neg.max((sum - scale).abs())
            }
            ConvexSet::Product { blocks } => {
                let mut start = 0;
                blocks.iter().fold(0.0, |m, b| {
                    let n = b.dim();
                    let v = b.violation(&x.slice(start, n));
                    start += n;
                    m.max(v)
                })
            }
            ConvexSet::WholeSpace { .. } => 0.0,
        }
    }

    /// Membership at the relative tolerance [`MEMBERSHIP_TOL`].
    pub fn contains(&self, x: &Vector) -> bool {
        self.contains_within(x, MEMBERSHIP_TOL)
    }

    pub fn contains_within(&self, x: &Vector, rel_tol: f64) -> bool {
        x.dim() == self.dim() && self.violation(x) <= rel_tol * (1.0 + x.norm())
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &Vector) -> f64 {
        self.project_unchecked(x).dist(x)
    }

    /// Smallest axis-aligned box known to contain the set, if bounded.
    pub fn bounding_box(&self) -> Option<(Vector, Vector)> {
        match self {
            ConvexSet::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            ConvexSet::Ball { center, radius } => Some((
                center.map(|c| c - radius),
                center.map(|c| c + radius),
            )),
            ConvexSet::Simplex { dim, scale } => {
                Some((Vector::zeros(*dim), Vector::filled(*dim, *scale)))
            }
            ConvexSet::Product { blocks } => {
                let boxes: Option<Vec<_>> = blocks.iter().map(ConvexSet::bounding_box).collect();
                let (lo, hi): (Vec<_>, Vec<_>) = boxes?.into_iter().unzip();
                Some((Vector::concat(lo), Vector::concat(hi)))
            }
            ConvexSet::Halfspace { .. } | ConvexSet::WholeSpace { .. } => None,
        }
        .filter(|(lo, hi)| lo.is_finite() && hi.is_finite())
    }

    /// Random member: a uniform draw from the bounding box, projected onto the
    /// set. `None` when the set is unbounded.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vector> {
        let (lo, hi) = self.bounding_box()?;
        let raw = uniform_in_box(rng, &lo, &hi);
        Some(self.project_unchecked(&raw))
    }

    /// Random member near `center`: the projection of a uniform draw from the
    /// cube of half-width `radius` around it. Works for unbounded sets.
    pub fn sample_near<R: Rng + ?Sized>(&self, rng: &mut R, center: &Vector, radius: f64) -> Vector {
        let raw = center.map(|c| c + radius * rng.gen_range(-1.0..=1.0));
        self.project_unchecked(&raw)
    }
}

pub(crate) fn uniform_in_box<R: Rng + ?Sized>(rng: &mut R, lo: &Vector, hi: &Vector) -> Vector {
    lo.zip_map(hi, |l, h| if l < h { rng.gen_range(l..=h) } else { l })
}

/// Sort-based exact projection onto `{x >= 0, sum(x) = scale}`.
fn project_simplex(x: &Vector, scale: f64) -> Vector {
    let mut sorted = x.0.clone();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - scale) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    x.map(|v| (v - theta).max(0.0))
}
