//! Generators and property checks shared by the property suite and the
//! acceptance target.
#![allow(dead_code)]

use eqsplit::geometry::{three_point_identity_residual, ConvexSet, Vector};
use eqsplit::maps::{MonotoneOperator, NonexpansiveMap, Resolvent};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), TestCaseError>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vector {
    Vector::from((0..n).map(|_| rng.gen_range(-half_width..=half_width)).collect::<Vec<_>>())
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, kind: u32) -> ConvexSet {
    match kind {
        0 => {
            let lo = random_vector(rng, n, 5.0);
            let hi = lo.map(|l| l + rng.gen_range(0.0..5.0));
            ConvexSet::boxed(lo, hi).unwrap()
        }
        1 => ConvexSet::ball(random_vector(rng, n, 5.0), rng.gen_range(0.1..5.0)).unwrap(),
        _ => ConvexSet::simplex(n, rng.gen_range(0.1..5.0)).unwrap(),
    }
}

/// A random set of every supported shape, in dimension 1..=5.
pub fn random_set(seed: u64) -> ConvexSet {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=5);
    match rng.gen_range(0..6) {
        k @ 0..=2 => random_block(&mut rng, n, k),
        3 => {
            let mut a = random_vector(&mut rng, n, 1.0);
            if a.norm() < 0.1 {
                a = Vector::filled(n, 1.0);
            }
            ConvexSet::halfspace(a, rng.gen_range(-3.0..3.0)).unwrap()
        }
        4 => {
            let mut blocks = Vec::new();
            let mut left = n + 1;
            while left > 0 {
                let size = rng.gen_range(1..=left);
                let kind = rng.gen_range(0..3);
                blocks.push(random_block(&mut rng, size, kind));
                left -= size;
            }
            ConvexSet::product(blocks).unwrap()
        }
        _ => ConvexSet::whole_space(n).unwrap(),
    }
}

pub fn set_and_points() -> impl Strategy<Value = (ConvexSet, Vector, Vector, u64)> {
    any::<u64>().prop_map(|seed| {
        let set = random_set(seed);
        let mut r = rng(seed ^ 0xA5A5);
        let x = random_vector(&mut r, set.dim(), 10.0);
        let y = random_vector(&mut r, set.dim(), 10.0);
        (set, x, y, seed)
    })
}

fn scale(x: &Vector, y: &Vector) -> f64 {
    1.0 + x.norm_sq() + y.norm_sq()
}

pub fn projection_idempotent(set: &ConvexSet, x: &Vector) -> Check {
    let p = set.project(x).unwrap();
    prop_assert!(set.contains(&p), "projection {:?} not in {:?}", p, set);
    let pp = set.project(&p).unwrap();
    prop_assert!(pp.dist(&p) <= 1e-12 * (1.0 + p.norm()), "P(P(x)) moved by {}", pp.dist(&p));
    Ok(())
}

/// `‖Px − Py‖² <= ⟨Px − Py, x − y⟩`.
pub fn projection_firmly_nonexpansive(set: &ConvexSet, x: &Vector, y: &Vector) -> Check {
    let px = set.project(x).unwrap();
    let py = set.project(y).unwrap();
    let d = &px - &py;
    let gap = d.norm_sq() - d.dot(&(x - y));
    prop_assert!(gap <= 1e-10 * scale(x, y), "firm nonexpansiveness gap {gap}");
    Ok(())
}

/// `⟨x − Px, s − Px⟩ <= 0` for sampled `s ∈ C`.
pub fn projection_variational(set: &ConvexSet, x: &Vector, seed: u64) -> Check {
    let p = set.project(x).unwrap();
    let normal = x - &p;
    let mut r = rng(seed);
    for _ in 0..16 {
        let s = set.sample_near(&mut r, &p, 5.0);
        let v = normal.dot(&(&s - &p));
        prop_assert!(v <= 1e-9 * scale(x, &s), "variational inequality violated by {v}");
    }
    Ok(())
}

pub fn three_point(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.gen_range(1..=6);
    let x = random_vector(&mut r, n, 3.0);
    let y = random_vector(&mut r, n, 3.0);
    let z = random_vector(&mut r, n, 3.0);
    let gamma = r.gen_range(0.0..=1.0);
    let res = three_point_identity_residual(&x, &y, &z, gamma).unwrap();
    prop_assert!(res.abs() <= 1e-12, "identity residual {res}");
    Ok(())
}

/// Sets that all contain `common`, so their intersection is nonempty.
pub fn sets_through(rng: &mut ChaCha8Rng, common: &Vector, count: usize) -> Vec<ConvexSet> {
    let n = common.dim();
    (0..count)
        .map(|_| match rng.gen_range(0..3) {
            0 => {
                let lo = common.map(|c| c - rng.gen_range(0.0..3.0));
                let hi = common.map(|c| c + rng.gen_range(0.0..3.0));
                ConvexSet::boxed(lo, hi).unwrap()
            }
            1 => {
                let offset = random_vector(rng, n, 2.0);
                let center = common + &offset;
                let radius = offset.norm() + rng.gen_range(0.0..1.0);
                ConvexSet::ball(center, radius.max(1e-3)).unwrap()
            }
            _ => {
                let mut a = random_vector(rng, n, 1.0);
                if a.norm() < 0.1 {
                    a = Vector::filled(n, 1.0);
                }
                let b = a.dot(common) + rng.gen_range(0.0..1.0);
                ConvexSet::halfspace(a, b).unwrap()
            }
        })
        .collect()
}

/// `T = Σ μ_i P_{C_i}` fixes exactly the points of `∩ C_i`.
pub fn averaged_fixed_set_is_intersection(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.gen_range(1..=4);
    let common = random_vector(&mut r, n, 3.0);
    let m = r.gen_range(1..=4);
    let sets = sets_through(&mut r, &common, m);
    let raw: Vec<f64> = (0..m).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..m - 1].iter().sum();
    weights[m - 1] = 1.0 - head;
    let t = NonexpansiveMap::averaged(
        weights,
        sets.iter().cloned().map(NonexpansiveMap::projection).collect(),
    )
    .unwrap();

    let tc = t.apply(&common).unwrap();
    prop_assert!(tc.dist(&common) <= 1e-12 * (1.0 + common.norm()), "common point moved");
    for i in 0..8 {
        let x = if i % 2 == 0 {
            random_vector(&mut r, n, 6.0)
        } else {
            &common + &random_vector(&mut r, n, 0.5)
        };
        let inside = sets.iter().all(|s| s.contains_within(&x, 1e-12));
        let residual = t.apply(&x).unwrap().dist(&x);
        if inside {
            prop_assert!(residual <= 1e-12 * (1.0 + x.norm()), "member moved by {residual}");
        } else {
            prop_assert!(residual > 0.0, "non-member fixed by T");
        }
        prop_assert_eq!(t.fixed_set_contains(&x, 1e-12), Some(inside));
    }
    Ok(())
}

/// Random monotone `M = AᵀA + (S − Sᵀ)` with a planted zero.
pub fn planted_operator(r: &mut ChaCha8Rng, n: usize, rank: usize) -> (MonotoneOperator, Vector) {
    let a = DMatrix::from_fn(rank, n, |_, _| r.gen_range(-1.0..1.0));
    let s = DMatrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
    let m = a.transpose() * &a + (&s - s.transpose());
    let zero = random_vector(r, n, 3.0);
    let mz = &m * DVector::from_column_slice(zero.as_slice());
    let q = Vector::from(mz.iter().map(|v| -v).collect::<Vec<_>>());
    (MonotoneOperator::linear(m, q).unwrap(), zero)
}

/// `J(x) = x ⟺ A(x) = 0`, checked through `x − J(x) = c·A(J(x))`.
pub fn resolvent_zero_equivalence(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.gen_range(1..=5);
    let rank = r.gen_range(0..=n);
    let (op, zero) = planted_operator(&mut r, n, rank);
    let c = r.gen_range(0.1..5.0);
    let j = Resolvent::new(op.clone(), c).unwrap();

    let jz = j.apply(&zero);
    prop_assert!(jz.dist(&zero) <= 1e-10, "zero not fixed: {}", jz.dist(&zero));
    for _ in 0..4 {
        let x = random_vector(&mut r, n, 5.0);
        let jx = j.apply(&x);
        let lhs = &x - &jx;
        let rhs = op.apply(&jx).scale(c);
        prop_assert!(lhs.dist(&rhs) <= 1e-10 * (1.0 + x.norm()), "resolvent identity off by {}", lhs.dist(&rhs));
        // a fixed point is a zero and vice versa
        let fixed = x.dist(&jx) <= 1e-10;
        let is_zero = op.apply(&x).norm() <= 1e-10;
        prop_assert_eq!(fixed, is_zero);
    }
    Ok(())
}
