mod common;

use std::f64::consts::PI;

use common::*;
use dronebs::geometry::{FleetGeometry, Vec2};
use dronebs::localization::{
    abstract_estimate, assign_serving_drone, estimates_from_csv, estimates_to_csv, generate_tdoa, solve_tdoa,
    tdoa_estimate, TdoaMeasurement, UserTruth,
};
use proptest::prelude::*;
use rand::Rng;

/// Sum of squared range-difference residuals, written from scratch.
fn cost(p: Vec2, meas: &[TdoaMeasurement; 2], drones: &[Vec2; 3]) -> f64 {
    meas.iter()
        .map(|m| {
            let r = p.distance(drones[m.other_drone]) - p.distance(drones[m.reference_drone]) - m.delta_range;
            r * r
        })
        .sum()
}

/// Grid search over a window around `around`, refined three times.
fn grid_minimum(meas: &[TdoaMeasurement; 2], drones: &[Vec2; 3], around: Vec2, half: f64) -> Vec2 {
    let mut best = around;
    let mut half = half;
    for _ in 0..4 {
        let step = half / 100.0;
        let center = best;
        let mut best_cost = f64::INFINITY;
        for i in -100..=100 {
            for j in -100..=100 {
                let p = center + Vec2::new(i as f64 * step, j as f64 * step);
                let c = cost(p, meas, drones);
                if c < best_cost {
                    best_cost = c;
                    best = p;
                }
            }
        }
        half = 3.0 * step;
    }
    best
}

#[test]
fn noisy_fix_matches_grid_search() {
    let mut r = rng(21);
    let fleet = FleetGeometry::new(Vec2::new(1000.0, 1000.0), 0.3, 500.0, 500.0).unwrap();
    let drones = fleet.drone_positions();
    for _ in 0..20 {
        let user = fleet.centroid + Vec2::from_angle(r.random_range(0.0..2.0 * PI)) * r.random_range(0.0..150.0);
        let serving = assign_serving_drone(user, &drones, 500.0).unwrap();
        let meas = generate_tdoa(user, &drones, serving, 5.0, &mut r).unwrap();
        let fix = solve_tdoa(&meas, &drones, fleet.centroid).unwrap();
        assert!(fix.converged);
        let oracle = grid_minimum(&meas, &drones, user, 100.0);
        assert!(
            fix.position.distance(oracle) < 0.05,
            "solver {:?} grid {:?}",
            fix.position,
            oracle
        );
    }
}

#[test]
fn measurement_noise_has_the_requested_moments() {
    let mut r = rng(22);
    let drones = FleetGeometry::new(Vec2::ZERO, 0.0, 50.0, 500.0).unwrap().drone_positions();
    let user = Vec2::new(30.0, -20.0);
    let truth = user.distance(drones[1]) - user.distance(drones[0]);
    let n = 20_000;
    let errs: Vec<f64> = (0..n)
        .map(|_| generate_tdoa(user, &drones, 0, 5.0, &mut r).unwrap()[0].delta_range - truth)
        .collect();
    let mean = errs.iter().sum::<f64>() / n as f64;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 4.0 * 5.0 / (n as f64).sqrt(), "mean {mean}");
    assert!((var.sqrt() - 5.0).abs() < 0.1, "std {}", var.sqrt());
}

#[test]
fn tdoa_estimates_carry_the_configured_radius() {
    let mut r = rng(23);
    let drones = FleetGeometry::new(Vec2::ZERO, 0.0, 300.0, 250.0).unwrap().drone_positions();
    let user = UserTruth { id: 4, position: Vec2::new(10.0, 20.0) };
    let e = tdoa_estimate(&user, &drones, 250.0, 0.0, 30.0, &mut r).unwrap();
    assert_eq!(e.user_id, 4);
    assert_eq!(e.radius, 30.0);
    assert!(e.center.distance(user.position) < 1e-6);
}

#[test]
fn abstract_centers_are_uniform_in_the_disk() {
    let mut r = rng(24);
    let user = UserTruth { id: 0, position: Vec2::new(5.0, 5.0) };
    let n = 20_000;
    let mut sum_r2 = 0.0;
    let mut sum = Vec2::ZERO;
    for _ in 0..n {
        let e = abstract_estimate(&user, 30.0, &mut r).unwrap();
        let off = e.center - user.position;
        sum_r2 += off.norm_sq();
        sum += off;
    }
    // Uniform on a disk of radius R: E[r²] = R²/2 and zero mean offset.
    assert!((sum_r2 / n as f64 / 450.0 - 1.0).abs() < 0.03);
    assert!((sum / n as f64).norm() < 0.5);
}

proptest! {
    #[test]
    fn serving_drone_is_a_nearest_one(
        heading in 0.0f64..(2.0 * PI), frac in 0.0f64..0.99, angle in 0.0f64..(2.0 * PI), t in 0.0f64..1.0,
    ) {
        let rc = 500.0;
        let fleet = FleetGeometry::new(Vec2::ZERO, heading, frac * 3f64.sqrt() * rc, rc).unwrap();
        let drones = fleet.drone_positions();
        let rho = fleet.guaranteed_footprint().radius;
        let user = Vec2::from_angle(angle) * (rho * t.sqrt());
        let s = assign_serving_drone(user, &drones, rc).unwrap();
        let nearest = drones.iter().map(|d| d.distance(user)).fold(f64::INFINITY, f64::min);
        prop_assert!(drones[s].distance(user) <= nearest + 1e-9);
    }

    #[test]
    fn abstract_error_is_bounded(x in -1e4f64..1e4, y in -1e4f64..1e4, r_e in 0.0f64..200.0, seed in any::<u64>()) {
        let user = UserTruth { id: 1, position: Vec2::new(x, y) };
        let e = abstract_estimate(&user, r_e, &mut rng(seed)).unwrap();
        prop_assert!(e.center.distance(user.position) <= r_e + 1e-9);
        prop_assert_eq!(e.radius, r_e);
    }

    #[test]
    fn estimate_csv_round_trips(cx in -1e5f64..1e5, cy in -1e5f64..1e5, r_e in 0.0f64..100.0, id in 0usize..1000) {
        let disks = vec![dronebs::localization::EstimateDisk { user_id: id, center: Vec2::new(cx, cy), radius: r_e }];
        prop_assert_eq!(estimates_from_csv(&estimates_to_csv(&disks)).unwrap(), disks);
    }
}
