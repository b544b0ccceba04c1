use std::path::Path;
use std::sync::Arc;

use eqsplit::bifunctions::{Bifunction, QuadraticGame, SplitBifunction, ZeroBifunction};
use eqsplit::config::RunConfig;
use eqsplit::geometry::{ConvexSet, Vector};
use eqsplit::maps::{MonotoneOperator, NonexpansiveMap};
use eqsplit::problems::{
    build_cournot, build_inclusion_ep, build_intersection_ep, build_sep_game, check_instance, inclusion_oracle,
    SplitKind,
};
use eqsplit::solver::{solve, step, Problem, SolveStatus, SolverConfig, SolverState};
use eqsplit::trace::{Trace, TraceRecord, CSV_HEADER};

fn v(x: &[f64]) -> Vector {
    Vector::from(x)
}

fn actions() -> ConvexSet {
    ConvexSet::boxed(Vector::zeros(2), Vector::filled(2, 10.0)).unwrap()
}

fn config(max_iters: usize) -> SolverConfig {
    SolverConfig {
        max_iters,
        trace_every: 1,
        ..SolverConfig::default()
    }
}

#[test]
fn shared_constraint_game_without_constraints_is_the_plain_game() {
    let game = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 2.0])).unwrap();
    let plain = build_cournot(&game, actions(), SplitKind::RevenueCost).unwrap();
    let sep = build_sep_game(&game, actions(), &[], None, SplitKind::RevenueCost).unwrap();
    let x0 = v(&[5.0, 5.0]);
    let a = solve(&plain.problem, &config(2000), &x0, plain.oracle.as_ref()).unwrap();
    let b = solve(&sep.problem, &config(2000), &x0, sep.oracle.as_ref()).unwrap();
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
    assert_eq!(a.x, b.x);
}

#[test]
fn two_point_inclusion_has_no_common_zero() {
    let (a, b) = (v(&[2.0, 0.0]), v(&[0.0, 2.0]));
    let ops = vec![MonotoneOperator::distance_to_point(&a), MonotoneOperator::distance_to_point(&b)];
    let set = ConvexSet::boxed(Vector::filled(2, -5.0), Vector::filled(2, 5.0)).unwrap();

    let zero_field = nalgebra::DMatrix::zeros(2, 2);
    let err = inclusion_oracle(&ops, (&zero_field, &Vector::zeros(2)), &set).unwrap_err();
    assert!(err.to_string().contains("no common zero"), "{err}");

    let split = SplitBifunction::single(Arc::new(ZeroBifunction::new(2)));
    let instance = build_inclusion_ep(split, ops.clone(), 1.0, None, set).unwrap();
    assert!(instance.oracle.is_none());
    let out = solve(&instance.problem, &config(10_000), &v(&[4.0, -3.0]), None).unwrap();

    // the average of the two resolvents fixes the midpoint, which is a zero
    // of neither operator
    let mid = v(&[1.0, 1.0]);
    assert!(out.x.dist(&mid) <= 1e-5, "{:?}", out.x);
    for op in &ops {
        assert!(op.apply(&out.x).norm() > 1.0);
    }
}

#[test]
fn stationary_start_converges_at_iteration_zero() {
    let set = actions();
    let split = SplitBifunction::single(Arc::new(ZeroBifunction::new(2)));
    let problem = Problem::new(split, set, NonexpansiveMap::identity(2)).unwrap();
    let x0 = v(&[2.0, 7.0]);
    let out = solve(&problem, &config(100), &x0, Some(&x0)).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    assert_eq!(out.iterations, 0);
    assert_eq!(out.x, x0);
    assert!(out.trace.is_empty());
    assert_eq!(out.trace.to_csv(), format!("{CSV_HEADER}\n"));

    // one forced step from the same point moves nothing
    let next = step(&SolverState::initial(x0.clone()), &problem, &config(100)).unwrap();
    let d = next.last.unwrap();
    let mut trace = Trace::default();
    trace.push(TraceRecord {
        k: d.k,
        beta: d.beta,
        lambda: d.lambda,
        norm_y_minus_x: d.y.dist(&x0),
        norm_z_minus_x: d.z.dist(&x0),
        fixed_point_residual: d.residual_t,
        prox_residual: 0.0,
        dist_to_oracle: None,
        wall_time_s: None,
    });
    let csv = trace.to_csv();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let cols: Vec<&str> = rows[0].split(',').collect();
    for col in &cols[3..7] {
        assert_eq!(col.parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(next.x, x0);
}

#[test]
fn lumped_cournot_converges_to_the_duopoly_solution() {
    let game = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 1.0])).unwrap();
    let instance = build_cournot(&game, actions(), SplitKind::Lumped).unwrap();
    let out = solve(&instance.problem, &config(200_000), &v(&[5.0, 5.0]), instance.oracle.as_ref()).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    // (a − 2c_i + c_j) / 3b
    assert!(out.x.dist(&v(&[3.0, 3.0])) <= 1e-3);
}

#[test]
fn zero_bifunction_intersection_lands_in_every_set() {
    let sets = vec![
        ConvexSet::ball(v(&[0.0, 0.0]), 2.0).unwrap(),
        ConvexSet::halfspace(v(&[1.0, 1.0]), 1.0).unwrap(),
        ConvexSet::boxed(v(&[-1.0, -3.0]), v(&[3.0, 3.0])).unwrap(),
    ];
    let split = SplitBifunction::single(Arc::new(ZeroBifunction::new(2)));
    let instance = build_intersection_ep(split, sets.clone(), None, None).unwrap();
    let out = solve(&instance.problem, &config(100_000), &v(&[3.0, 3.0]), None).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    for s in &sets {
        assert!(s.distance(&out.x) <= 1e-5, "{:?} misses {:?}", out.x, s);
    }
    assert!(out.invariants.feasible());
}

#[test]
fn shipped_oracles_pass_the_instance_check() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut checked = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let instance = RunConfig::from_path(&path).unwrap().build_instance().unwrap();
        let Some(oracle) = &instance.oracle else { continue };
        let report = check_instance(&instance.problem, oracle, 400, 11).unwrap();
        assert!(report.passed, "{}: {:?}", path.display(), report);
        checked += 1;
    }
    assert!(checked >= 8, "only {checked} configs carry an oracle");
}

#[test]
fn wrong_candidate_fails_the_instance_check() {
    let game = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 1.0])).unwrap();
    let instance = build_cournot(&game, actions(), SplitKind::RevenueCost).unwrap();
    let report = check_instance(&instance.problem, &v(&[2.0, 3.0]), 400, 3).unwrap();
    assert!(!report.passed);
    assert!(report.min_sampled_value < -1e-6);
}

#[test]
fn nikaido_isoda_split_sums_to_the_whole() {
    let game = QuadraticGame::cournot(10.0, 1.0, v(&[1.0, 4.0])).unwrap();
    let split = game.nikaido_isoda();
    let lumped = game.nikaido_isoda_lumped();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
    for _ in 0..200 {
        let x = actions().sample(&mut rng).unwrap();
        let y = actions().sample(&mut rng).unwrap();
        let direct = game.nikaido_isoda_value(&x, &y);
        assert!((split.value(&x, &y) - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        assert!((lumped.value(&x, &y) - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
    }
}
