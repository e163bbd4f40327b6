use std::f64::consts::TAU;

use lingrowth::geometry::Domain;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn convex_domains() -> Vec<(Domain, [f64; 2])> {
    vec![
        (Domain::unit_square(), [0.5, 0.5]),
        (Domain::rectangle([0.0, 0.0], [2.0, 1.0]).unwrap(), [0.7, 0.4]),
        (Domain::disc([0.0, 0.0], 1.0).unwrap(), [0.2, -0.1]),
        (
            Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap(),
            [0.25, 0.25],
        ),
        (
            Domain::polygon(vec![[0.0, 0.0], [2.0, 0.0], [2.5, 1.0], [1.0, 2.0], [-0.5, 1.0]]).unwrap(),
            [1.0, 1.0],
        ),
    ]
}

/// Points of the boundary of `d + B_delta`, traced independently of the
/// support-function machinery: for every sampled boundary point and outward
/// angle, step `delta` outward and keep the points not inside `d`'s offset.
fn offset_points(d: &Domain, delta: f64) -> Vec<[f64; 2]> {
    let (lo, hi) = d.bbox();
    let mut pts = Vec::new();
    let steps = 400;
    for i in 0..steps {
        for j in 0..steps {
            let p = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / (steps - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (steps - 1) as f64,
            ];
            if !d.contains(p) {
                continue;
            }
            for k in 0..16 {
                let a = TAU * k as f64 / 16.0;
                let q = [p[0] + delta * a.cos(), p[1] + delta * a.sin()];
                if !d.contains(q) {
                    pts.push(q);
                }
            }
        }
    }
    pts
}

fn all_inside(d: &Domain, pts: &[[f64; 2]], slack: f64) -> bool {
    pts.iter().all(|p| d.signed_distance(*p) <= slack)
}

#[test]
fn convexity_examples() {
    assert!(Domain::unit_square().is_convex());
    assert!(!Domain::l_shape([0.0, 0.0], 1.0).unwrap().is_convex());
    assert!(Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap().is_convex());
    assert!(Domain::disc([0.0, 0.0], 1.0).unwrap().boundary_curvature_sign());
    assert!(Domain::unit_square().boundary_curvature_sign());
    assert!(!Domain::l_shape([0.0, 0.0], 1.0).unwrap().boundary_curvature_sign());
    assert!(Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0]]).is_err());
}

#[test]
fn dilation_examples() {
    let sq = Domain::unit_square();
    let big = sq.dilate(1.0, [0.5, 0.5]).unwrap();
    assert_eq!(big, Domain::rectangle([-0.5, -0.5], [1.5, 1.5]).unwrap());
    assert_eq!(sq.dilate(0.0, [0.5, 0.5]).unwrap(), sq);
    let disc = Domain::disc([1.0, 2.0], 1.0).unwrap();
    assert_eq!(disc.dilate(0.5, [1.0, 2.0]).unwrap(), Domain::disc([1.0, 2.0], 1.5).unwrap());
    assert!(sq.dilate(0.5, [0.0, 0.5]).is_err());
    assert!(sq.dilate(0.5, [2.0, 0.5]).is_err());
}

#[test]
fn smallest_dilation_examples() {
    for r in [0.5, 1.0, 3.0] {
        let disc = Domain::disc([0.3, -0.2], r).unwrap();
        for delta in [1e-3, 0.05, 0.4] {
            let mu = disc.smallest_dilation(delta, [0.3, -0.2]).unwrap();
            assert!((mu - delta / r).abs() <= 1e-8 * (delta / r), "{mu} vs {}", delta / r);
        }
    }
    let sq = Domain::unit_square();
    let mu = sq.smallest_dilation(0.1, [0.5, 0.5]).unwrap();
    assert!((mu - 0.2).abs() <= 1e-8 * 0.2);
    let pts = offset_points(&sq, 0.1);
    assert!(all_inside(&sq.dilate(0.2, [0.5, 0.5]).unwrap(), &pts, 1e-12));
    assert!(!all_inside(&sq.dilate(0.2 * (1.0 - 1e-3), [0.5, 0.5]).unwrap(), &pts, 0.0));
    assert_eq!(sq.smallest_dilation(0.0, [0.5, 0.5]).unwrap(), 0.0);
    let mut last = f64::INFINITY;
    for k in 1..20 {
        let mu = sq.smallest_dilation(0.5f64.powi(k), [0.3, 0.6]).unwrap();
        assert!(mu < last);
        last = mu;
    }
    assert!(last < 1e-5);
    assert!(Domain::l_shape([0.0, 0.0], 1.0)
        .unwrap()
        .smallest_dilation(0.1, [0.25, 0.25])
        .is_err());
}

#[test]
fn smallest_dilation_is_minimal() {
    for (d, x0) in convex_domains() {
        for delta in [0.02, 0.1] {
            let mu = d.smallest_dilation(delta, x0).unwrap();
            let pts = offset_points(&d, delta);
            assert!(d.offset_contained_in(delta, &d.dilate(mu, x0).unwrap(), x0));
            assert!(all_inside(&d.dilate(mu, x0).unwrap(), &pts, 1e-9), "{d} delta={delta}");
            let smaller = d.dilate(mu * (1.0 - 1e-3), x0).unwrap();
            assert!(!d.offset_contained_in(delta, &smaller, x0), "{d} delta={delta}");
        }
    }
}

#[test]
fn hausdorff_decreases_on_dyadic_dilations() {
    for (d, x0) in convex_domains() {
        let mut last = f64::INFINITY;
        for k in 0..30 {
            let mu = 0.5f64.powi(k);
            let dist = d.hausdorff_convex(&d.dilate(mu, x0).unwrap()).unwrap();
            assert!(dist < last, "{d}: {dist} at mu={mu}");
            last = dist;
        }
        assert!(last < 1e-8);
    }
}

#[test]
fn convexity_agrees_with_midpoint_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut shapes = convex_domains();
    shapes.push((Domain::l_shape([0.0, 0.0], 1.0).unwrap(), [0.25, 0.25]));
    for (d, _) in shapes {
        let (lo, hi) = d.bbox();
        let mut inside = Vec::new();
        while inside.len() < 2000 {
            let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
            if d.contains(p) {
                inside.push(p);
            }
        }
        let mut failures = 0;
        for _ in 0..10_000 {
            let a = inside[rng.random_range(0..inside.len())];
            let b = inside[rng.random_range(0..inside.len())];
            if !d.contains([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]) {
                failures += 1;
            }
        }
        assert_eq!(failures == 0, d.is_convex(), "{d}: {failures} midpoints outside");
    }
}

proptest! {
    #[test]
    fn dilation_contains_closure(mu in 1e-4f64..2.0, k in 0usize..5, t in 0.0f64..1.0) {
        let (d, x0) = convex_domains().swap_remove(k);
        let big = d.dilate(mu, x0).unwrap();
        prop_assert!(big.measure() > d.measure());
        let a = t * TAU;
        let p = d.project([x0[0] + 10.0 * a.cos(), x0[1] + 10.0 * a.sin()]);
        prop_assert!(big.is_interior(p));
    }
}
