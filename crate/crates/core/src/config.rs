//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! x0 = [5.0, 5.0]            # or "project-random" / "project-random(11)"
//!
//! [problem]
//! kind = "cournot"           # cournot | sep-game | intersection-ep | inclusion-ep | custom
//! a = 10.0
//! b = 1.0
//! c = [1.0, 1.0]
//! actions = { lo = [0.0, 0.0], hi = [10.0, 10.0] }
//!
//! [solver]
//! gamma = 0.5
//! beta0 = 1.0
//! max_iters = 200000
//!
//! [output]
//! trace = "cournot.csv"
//! format = "csv"             # csv | json-lines
//! ```
//!
//! The full schema is documented in the README.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::bifunctions::{
    AffineMap, Bifunction, PotentialDifference, QuadraticGame, SeparableQuadratic, SplitBifunction,
    SumBifunction, ViLinear, ZeroBifunction,
};
use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, Vector};
use crate::maps::{MonotoneOperator, NonexpansiveMap};
use crate::problems::{
    ball_halfspace_projection, build_cournot, build_inclusion_ep, build_intersection_ep,
    build_sep_game, inclusion_oracle, ProblemInstance, SplitKind,
};
use crate::prox::ProxOptions;
use crate::solver::{Problem, SolverConfig, StepSchedule};
use crate::trace::TraceFormat;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub x0: StartSpec,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Point(Vec<f64>),
    Keyword(String),
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec::Keyword("project-random".into())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrVector {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrMatrix {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Cournot {
        a: ScalarOrVector,
        b: ScalarOrMatrix,
        c: Vec<f64>,
        actions: BoxSpec,
        #[serde(default)]
        split: SplitKind,
    },
    SepGame {
        a: ScalarOrVector,
        b: ScalarOrMatrix,
        c: Vec<f64>,
        actions: BoxSpec,
        #[serde(default)]
        split: SplitKind,
        #[serde(default)]
        constraints: Vec<ConstraintSpec>,
        weights: Option<Vec<f64>>,
    },
    IntersectionEp {
        f1: BifunctionSpec,
        f2: Option<BifunctionSpec>,
        sets: Vec<ConvexSet>,
        weights: Option<Vec<f64>>,
        common_point: Option<Vec<f64>>,
        oracle: Option<Vec<f64>>,
    },
    InclusionEp {
        f1: BifunctionSpec,
        f2: Option<BifunctionSpec>,
        operators: Vec<OperatorSpec>,
        #[serde(default = "one")]
        c: f64,
        weights: Option<Vec<f64>>,
        set: ConvexSet,
        oracle: Option<Vec<f64>>,
    },
    Custom {
        f1: BifunctionSpec,
        f2: Option<BifunctionSpec>,
        set: ConvexSet,
        map: Option<MapSpec>,
        oracle: Option<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

struct GameSpec<'a> {
    a: &'a ScalarOrVector,
    b: &'a ScalarOrMatrix,
    c: &'a [f64],
    actions: &'a BoxSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BifunctionSpec {
    Zero { dim: usize },
    /// `⟨Mx + q, y − x⟩`.
    ViLinear { m: Vec<Vec<f64>>, q: Vec<f64> },
    /// `Σ ½q_i(y_i² − x_i²) + (Lx + d)_i (y_i − x_i)`.
    SeparableQuadratic {
        curvature: Vec<f64>,
        coupling: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// `φ(y) − φ(x)` with `φ(y) = ½yᵀHy + hᵀy`.
    Potential { hessian: Vec<Vec<f64>>, linear: Vec<f64> },
    Sum { parts: Vec<BifunctionSpec> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Linear { m: Vec<Vec<f64>>, q: Vec<f64> },
    Quadratic { hessian: Vec<Vec<f64>>, q: Vec<f64> },
    DistanceToPoint { a: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    Projection { set: ConvexSet },
    Averaged { weights: Option<Vec<f64>>, maps: Vec<MapSpec> },
    Resolvent { operator: OperatorSpec, c: f64 },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub gamma: Option<f64>,
    pub beta0: Option<f64>,
    pub beta_exponent: Option<f64>,
    /// Explicit `β_k` sequence; overrides `beta0`/`beta_exponent`.
    pub betas: Option<Vec<f64>>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub fixed_residual_lambda: Option<f64>,
    pub inner_tol: Option<f64>,
    pub inner_max_iters: Option<usize>,
    #[serde(default)]
    pub record_wall_time: bool,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub trace: Option<String>,
    #[serde(default)]
    pub format: TraceFormat,
    pub trace_every: Option<usize>,
    pub summary: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let defaults = SolverConfig::default();
        let schedule = match &s.betas {
            Some(seq) => {
                if s.beta0.is_some() || s.beta_exponent.is_some() {
                    return Err(Error::Config(
                        "solver.betas cannot be combined with solver.beta0 / solver.beta_exponent".into(),
                    ));
                }
                StepSchedule::Explicit(seq.clone())
            }
            None => StepSchedule::Power {
                beta0: s.beta0.unwrap_or(1.0),
                exponent: s.beta_exponent.unwrap_or(1.0),
            },
        };
        let cfg = SolverConfig {
            gamma: s.gamma.unwrap_or(defaults.gamma),
            schedule,
            max_iters: s.max_iters.unwrap_or(defaults.max_iters),
            tol: s.tol.unwrap_or(defaults.tol),
            fixed_residual_lambda: s.fixed_residual_lambda.unwrap_or(defaults.fixed_residual_lambda),
            trace_every: self.output.trace_every.unwrap_or(1),
            prox: ProxOptions {
                inner_tol: s.inner_tol.unwrap_or(defaults.prox.inner_tol),
                inner_max_iters: s.inner_max_iters.unwrap_or(defaults.prox.inner_max_iters),
                ..defaults.prox
            },
            seed: self.seed,
            record_wall_time: s.record_wall_time,
        };
        Ok(cfg)
    }

    pub fn build_instance(&self) -> Result<ProblemInstance> {
        self.problem.build()
    }

    /// Starting point: the configured vector, or a seeded random point of
    /// the feasible set's bounding box (the unit box around the origin when
    /// unbounded) projected onto it.
    pub fn initial_point(&self, problem: &Problem) -> Result<Vector> {
        match &self.x0 {
            StartSpec::Point(p) => vector("x0", p),
            StartSpec::Keyword(k) => {
                let seed = parse_random_keyword(k).ok_or_else(|| {
                    Error::Config(format!(
                        "x0 = {k:?}: expected a list of numbers, \"project-random\" or \"project-random(N)\""
                    ))
                })?;
                let seed = seed.unwrap_or(self.seed);
                let set = &problem.set;
                let n = set.dim();
                let region = match set.bounding_box() {
                    Some((lo, hi)) if lo.is_finite() && hi.is_finite() => ConvexSet::boxed(lo, hi)?,
                    _ => ConvexSet::boxed(Vector::filled(n, -1.0), Vector::filled(n, 1.0))?,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let raw = region.sample(&mut rng).expect("bounded region");
                set.project(&raw)
            }
        }
    }
}

fn parse_random_keyword(k: &str) -> Option<Option<u64>> {
    let rest = k.strip_prefix("project-random")?;
    if rest.is_empty() {
        return Some(None);
    }
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    inner.trim().parse().ok().map(Some)
}

fn vector(field: &str, v: &[f64]) -> Result<Vector> {
    Vector::new(v.to_vec()).map_err(|e| Error::Config(format!("{field}: {e}")))
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Config(format!("{field}: matrix is empty")));
    }
    let m = rows[0].len();
    if let Some(r) = rows.iter().position(|r| r.len() != m) {
        return Err(Error::Config(format!(
            "{field}: row {r} has {} entries, expected {m}",
            rows[r].len()
        )));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn in_field<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(msg) => Error::Config(msg),
        other => Error::Config(format!("{field}: {other}")),
    })
}

fn checked_set(field: &str, set: &ConvexSet) -> Result<ConvexSet> {
    in_field(field, set.validate())?;
    Ok(set.clone())
}

impl BifunctionSpec {
    pub fn build(&self, field: &str) -> Result<Arc<dyn Bifunction>> {
        let f: Arc<dyn Bifunction> = match self {
            BifunctionSpec::Zero { dim } => {
                if *dim == 0 {
                    return Err(Error::Config(format!("{field}.dim must be >= 1")));
                }
                Arc::new(ZeroBifunction::new(*dim))
            }
            BifunctionSpec::ViLinear { m, q } => Arc::new(in_field(
                field,
                ViLinear::new(matrix(&format!("{field}.m"), m)?, vector(&format!("{field}.q"), q)?),
            )?),
            BifunctionSpec::SeparableQuadratic {
                curvature,
                coupling,
                offset,
            } => {
                let map = in_field(
                    field,
                    AffineMap::new(
                        matrix(&format!("{field}.coupling"), coupling)?,
                        vector(&format!("{field}.offset"), offset)?,
                    ),
                )?;
                Arc::new(in_field(
                    field,
                    SeparableQuadratic::new(vector(&format!("{field}.curvature"), curvature)?, map),
                )?)
            }
            BifunctionSpec::Potential { hessian, linear } => Arc::new(in_field(
                field,
                PotentialDifference::new(
                    matrix(&format!("{field}.hessian"), hessian)?,
                    vector(&format!("{field}.linear"), linear)?,
                ),
            )?),
            BifunctionSpec::Sum { parts } => {
                let built = parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p.build(&format!("{field}.parts[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                Arc::new(in_field(field, SumBifunction::new(built))?)
            }
        };
        Ok(f)
    }

    /// `(A, q)` when the bifunction is `⟨Ax + q, y − x⟩` (or zero).
    fn affine_field(&self) -> Option<(DMatrix<f64>, Vector)> {
        match self {
            BifunctionSpec::Zero { dim } => Some((DMatrix::zeros(*dim, *dim), Vector::zeros(*dim))),
            BifunctionSpec::ViLinear { m, q } => Some((matrix("", m).ok()?, Vector::new(q.clone()).ok()?)),
            _ => None,
        }
    }
}

fn build_split(f1: &BifunctionSpec, f2: Option<&BifunctionSpec>) -> Result<SplitBifunction> {
    let first = f1.build("problem.f1")?;
    match f2 {
        None => Ok(SplitBifunction::single(first)),
        Some(s) => in_field("problem.f2", SplitBifunction::new(first, s.build("problem.f2")?)),
    }
}

impl OperatorSpec {
    pub fn build(&self, field: &str) -> Result<MonotoneOperator> {
        match self {
            OperatorSpec::Linear { m, q } => in_field(
                field,
                MonotoneOperator::linear(matrix(&format!("{field}.m"), m)?, vector(&format!("{field}.q"), q)?),
            ),
            OperatorSpec::Quadratic { hessian, q } => in_field(
                field,
                MonotoneOperator::quadratic_subdifferential(
                    matrix(&format!("{field}.hessian"), hessian)?,
                    vector(&format!("{field}.q"), q)?,
                ),
            ),
            OperatorSpec::DistanceToPoint { a } => Ok(MonotoneOperator::distance_to_point(&vector(
                &format!("{field}.a"),
                a,
            )?)),
        }
    }
}

impl MapSpec {
    pub fn build(&self, field: &str, dim: usize) -> Result<NonexpansiveMap> {
        match self {
            MapSpec::Identity => Ok(NonexpansiveMap::identity(dim)),
            MapSpec::Projection { set } => Ok(NonexpansiveMap::projection(checked_set(
                &format!("{field}.set"),
                set,
            )?)),
            MapSpec::Averaged { weights, maps } => {
                let built = maps
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.build(&format!("{field}.maps[{i}]"), dim))
                    .collect::<Result<Vec<_>>>()?;
                in_field(
                    field,
                    match weights {
                        Some(w) => NonexpansiveMap::averaged(w.clone(), built),
                        None => NonexpansiveMap::uniform_average(built),
                    },
                )
            }
            MapSpec::Resolvent { operator, c } => in_field(
                field,
                NonexpansiveMap::resolvent(operator.build(&format!("{field}.operator"))?, *c),
            ),
        }
    }
}

impl GameSpec<'_> {
    fn build(&self) -> Result<(QuadraticGame, ConvexSet)> {
        let c = vector("problem.c", self.c)?;
        let n = c.dim();
        let a = match self.a {
            ScalarOrVector::Scalar(a) => Vector::filled(n, *a),
            ScalarOrVector::Vector(a) => vector("problem.a", a)?,
        };
        let b = match self.b {
            ScalarOrMatrix::Scalar(b) => DMatrix::from_element(n, n, *b),
            ScalarOrMatrix::Matrix(rows) => matrix("problem.b", rows)?,
        };
        let game = in_field("problem", QuadraticGame::new(a, b, c))?;
        let actions = in_field(
            "problem.actions",
            ConvexSet::boxed(
                vector("problem.actions.lo", &self.actions.lo)?,
                vector("problem.actions.hi", &self.actions.hi)?,
            ),
        )?;
        in_field("problem.actions", crate::error::check_dim(n, actions.dim()))?;
        Ok((game, actions))
    }
}

fn attach_oracle(
    instance: ProblemInstance,
    oracle: &Option<Vec<f64>>,
    provenance: &str,
) -> Result<ProblemInstance> {
    match oracle {
        Some(o) => in_field("problem.oracle", instance.with_oracle(vector("problem.oracle", o)?, provenance)),
        None => Ok(instance),
    }
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::Cournot { .. } => "cournot",
            ProblemSpec::SepGame { .. } => "sep-game",
            ProblemSpec::IntersectionEp { .. } => "intersection-ep",
            ProblemSpec::InclusionEp { .. } => "inclusion-ep",
            ProblemSpec::Custom { .. } => "custom",
        }
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            ProblemSpec::Cournot {
                a,
                b,
                c,
                actions,
                split,
            } => {
                let (g, actions) = GameSpec { a, b, c, actions }.build()?;
                in_field("problem", build_cournot(&g, actions, *split))
            }
            ProblemSpec::SepGame {
                a,
                b,
                c,
                actions,
                split,
                constraints,
                weights,
            } => {
                let (g, actions) = GameSpec { a, b, c, actions }.build()?;
                let cons = constraints
                    .iter()
                    .enumerate()
                    .map(|(i, c)| Ok((vector(&format!("problem.constraints[{i}].a"), &c.a)?, c.b)))
                    .collect::<Result<Vec<_>>>()?;
                in_field(
                    "problem",
                    build_sep_game(&g, actions, &cons, weights.clone(), *split),
                )
            }
            ProblemSpec::IntersectionEp {
                f1,
                f2,
                sets,
                weights,
                common_point,
                oracle,
            } => {
                let split = build_split(f1, f2.as_ref())?;
                let sets = sets
                    .iter()
                    .enumerate()
                    .map(|(i, s)| checked_set(&format!("problem.sets[{i}]"), s))
                    .collect::<Result<Vec<_>>>()?;
                let point = common_point
                    .as_ref()
                    .map(|p| vector("problem.common_point", p))
                    .transpose()?;
                let auto = match (oracle, f2, f1.affine_field(), sets.as_slice()) {
                    (None, None, Some((m, q)), [ConvexSet::Ball { center, radius }, ConvexSet::Halfspace { a, b }])
                        if m == DMatrix::identity(m.nrows(), m.ncols()) =>
                    {
                        Some(ball_halfspace_projection(center, *radius, a, *b, &(-&q))?)
                    }
                    _ => None,
                };
                let instance = in_field(
                    "problem",
                    build_intersection_ep(split, sets, weights.clone(), point),
                )?;
                match auto {
                    Some(x) => in_field(
                        "problem",
                        instance.with_oracle(x, "closed-form projection onto ball ∩ halfspace"),
                    ),
                    None => attach_oracle(instance, oracle, "supplied in config"),
                }
            }
            ProblemSpec::InclusionEp {
                f1,
                f2,
                operators,
                c,
                weights,
                set,
                oracle,
            } => {
                let split = build_split(f1, f2.as_ref())?;
                let ops = operators
                    .iter()
                    .enumerate()
                    .map(|(i, o)| o.build(&format!("problem.operators[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                let set = checked_set("problem.set", set)?;
                let field = match (f1.affine_field(), f2.as_ref().map(BifunctionSpec::affine_field)) {
                    (Some(a), None) => Some(a),
                    (Some((m1, q1)), Some(Some((m2, q2)))) => Some((m1 + m2, &q1 + &q2)),
                    _ => None,
                };
                let auto = match (oracle, field) {
                    (None, Some((m, q))) => inclusion_oracle(&ops, (&m, &q), &set).ok(),
                    _ => None,
                };
                let instance = in_field(
                    "problem",
                    build_inclusion_ep(split, ops, *c, weights.clone(), set),
                )?;
                match auto {
                    Some(x) => in_field(
                        "problem",
                        instance.with_oracle(x, "direct linear solve on the common zero set"),
                    ),
                    None => attach_oracle(instance, oracle, "supplied in config"),
                }
            }
            ProblemSpec::Custom {
                f1,
                f2,
                set,
                map,
                oracle,
            } => {
                let split = build_split(f1, f2.as_ref())?;
                let set = checked_set("problem.set", set)?;
                let n = set.dim();
                let map = match map {
                    Some(m) => m.build("problem.map", n)?,
                    None => NonexpansiveMap::identity(n),
                };
                let problem = in_field("problem", Problem::new(split, set, map))?;
                attach_oracle(ProblemInstance::new(format!("custom-{n}"), problem), oracle, "supplied in config")
            }
        }
    }
}
