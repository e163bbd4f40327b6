mod common;

use std::sync::Arc;

use lingrowth::bvtools::{singular_mass, BVFunction1D};
use lingrowth::discretize::{Grid, GridField};
use lingrowth::flow::*;
use lingrowth::geometry::Domain;
use lingrowth::integrand::{ConvexWeight, Integrand};
use lingrowth::solver::ContinuationSchedule;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::unit_step;

fn line(n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(Domain::interval(0.0, 1.0).unwrap(), n).unwrap())
}

fn abs() -> Integrand {
    Integrand::euclidean(1).unwrap()
}

fn step_field(n: usize) -> GridField {
    GridField::new(line(n), unit_step(n)).unwrap()
}

fn height(u: &GridField) -> f64 {
    u.values()[u.len() - 1] - u.values()[0]
}

/// Height after `k` resolvent steps of size `tau`: each step removes `4 tau`.
fn two_level_height(k: usize, tau: f64) -> f64 {
    (0..k).fold(1.0, |h: f64, _| (h - 4.0 * tau).max(0.0))
}

#[test]
fn resolvent_examples() {
    let grid = line(128);
    let c = GridField::constant(&grid, -0.3).unwrap();
    let schedule = ContinuationSchedule::default_for_spacing(grid.spacing());
    assert_eq!(resolvent_step(&c, 0.05, &abs(), &schedule).unwrap(), c);
    let f = step_field(256);
    let schedule = ContinuationSchedule::default_for_spacing(f.grid().spacing());
    let u = resolvent_step(&f, 0.05, &abs(), &schedule).unwrap();
    assert!((height(&u) - 0.8).abs() < 1e-3);
    assert!((u.mass() - f.mass()).abs() <= MASS_TOL);
    assert!(resolvent_step(&f, 0.0, &abs(), &schedule).is_err());
}

#[test]
fn step_height_follows_the_linear_law() {
    let n = 256;
    let f = step_field(n);
    let h = 1.0 / n as f64;
    let weights = [
        ConvexWeight::absolute(),
        ConvexWeight::shifted_positive_part(1e6).unwrap(),
    ];
    let traj = flow_solve(&f, 0.2, 8, &abs(), &weights).unwrap();
    for (k, state) in traj.states.iter().enumerate() {
        let expected = two_level_height(k, traj.tau);
        assert!((height(state) - expected).abs() <= 2.0 * h + 1e-3, "step {k}");
    }
    assert!((height(traj.final_state()) - 0.2).abs() <= 2.0 * h + 1e-3);
    let report = monitor_report(&traj);
    assert!(report.pass(), "{:?}", report.violations);
    assert_eq!(report.columns[0], "time");
    let tv = &report.rows.iter().map(|r| r[2]).collect::<Vec<_>>();
    assert!(tv.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL));
    assert!(report.rows.iter().all(|r| r[3] == 0.0));
    let mass0 = report.rows[0][1];
    assert!(report.rows.iter().all(|r| (r[1] - mass0).abs() <= MASS_TOL));
    let mut csv = Vec::new();
    write_trajectory_csv(&traj, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), traj.rows.len() + 1);
}

#[test]
fn flow_stops_at_extinction() {
    let f = step_field(128);
    let traj = flow_solve(&f, 0.4, 8, &abs(), &[]).unwrap();
    let u = traj.final_state();
    assert!(height(u).abs() < 1e-3);
    assert!((u.mean() - 0.5).abs() < 1e-12);
}

#[test]
fn constant_data_is_stationary_in_two_dimensions() {
    let grid = Arc::new(Grid::new(Domain::disc([0.0, 0.0], 1.0).unwrap(), 12).unwrap());
    let u0 = GridField::constant(&grid, 2.0).unwrap();
    let traj = flow_solve(&u0, 0.1, 3, &Integrand::euclidean(2).unwrap(), &[ConvexWeight::square()]).unwrap();
    assert!(traj.states.iter().all(|s| *s == u0));
    assert!(traj.rows.iter().all(|r| r.singular_mass.is_none()));
}

#[test]
fn doubling_the_step_count_is_first_order() {
    let n = 128;
    let f = step_field(n);
    let coarse = flow_solve(&f, 0.1, 2, &abs(), &[]).unwrap();
    let fine = flow_solve(&f, 0.1, 4, &abs(), &[]).unwrap();
    let finer = flow_solve(&f, 0.1, 8, &abs(), &[]).unwrap();
    let d1 = coarse.final_state().max_abs_difference(fine.final_state()).unwrap();
    let d2 = fine.final_state().max_abs_difference(finer.final_state()).unwrap();
    assert!(d1 <= 1.0 / 2.0, "{d1}");
    assert!(d2 <= 1.0 / 4.0, "{d2}");
}

#[test]
fn semigroup_property() {
    let f = step_field(128);
    let whole = flow_solve(&f, 0.12, 6, &abs(), &[]).unwrap();
    let first = flow_solve(&f, 0.06, 3, &abs(), &[]).unwrap();
    let second = flow_solve(first.final_state(), 0.06, 3, &abs(), &[]).unwrap();
    let gap = whole.final_state().max_abs_difference(second.final_state()).unwrap();
    assert!(gap <= 1e-6, "{gap}");
}

#[test]
fn monitors_do_not_increase_on_sampled_data() {
    let grid = line(128);
    let u0 = GridField::from_fn(&grid, |p| (4.0 * p[0]).sin() + 0.5 * p[0] * p[0]).unwrap();
    let weights = [
        ConvexWeight::absolute(),
        ConvexWeight::square(),
        ConvexWeight::shifted_positive_part(1.0).unwrap(),
    ];
    let traj = flow_solve(&u0, 0.05, 5, &Integrand::area(1).unwrap(), &weights).unwrap();
    let report = monitor_report(&traj);
    assert!(report.pass(), "{:?}", report.violations);
    let g: Vec<f64> = traj.rows.iter().map(|r| r.gradient_term).collect();
    assert!(g.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL));
}

#[test]
fn singular_mass_never_exceeds_the_initial_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 128;
    let grid = line(n);
    let h = grid.spacing();
    for _ in 0..3 {
        let mut breaks: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..0.9)).collect();
        breaks.sort_by(f64::total_cmp);
        let values = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = BVFunction1D::piecewise_constant(0.0, 1.0, breaks, values).unwrap();
        let u0 = f.to_grid_field(&grid).unwrap();
        let s0 = singular_mass(&f, &abs()).unwrap();
        let traj = flow_solve(&u0, 0.04, 4, &abs(), &[ConvexWeight::absolute()]).unwrap();
        for r in &traj.rows {
            assert!(r.singular_mass.unwrap() <= s0 + 2.0 * h, "{:?} vs {s0}", r.singular_mass);
        }
    }
}

#[test]
fn input_errors() {
    let f = step_field(64);
    assert!(flow_solve(&f, 0.1, 0, &abs(), &[]).is_err());
    assert!(flow_solve(&f, -0.1, 2, &abs(), &[]).is_err());
}
