mod common;

use common::*;
use dronebs::geometry::{ConvexPolygon, Vec2};
use dronebs::localization::UserTruth;
use dronebs::simulation::{
    generate_users, run, run_proposed_with_users, run_random_search_with_users, run_stage1, served_count, users_for,
    Algorithm, SimConfig, M2_PER_KM2,
};
use dronebs::sweep_planner::plan_sweep;

fn small() -> SimConfig {
    let mut cfg = SimConfig::desk_scale();
    cfg.user_density = 10.0 / M2_PER_KM2;
    cfg
}

#[test]
fn user_counts_have_poisson_moments() {
    let square = ConvexPolygon::rectangle(0.0, 0.0, 2000.0, 2000.0).unwrap();
    let mut r = rng(41);
    let n = 4000;
    let counts: Vec<f64> = (0..n)
        .map(|_| generate_users(&square, 10.0 / M2_PER_KM2, &mut r).len() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // Expected 40 users; the sample mean has standard error 0.1.
    assert!((mean - 40.0).abs() < 0.5, "mean {mean}");
    assert!((var / 40.0 - 1.0).abs() < 0.1, "variance {var}");
}

#[test]
fn users_fill_a_triangle_uniformly() {
    let tri = ConvexPolygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(3000.0, 0.0), Vec2::new(0.0, 3000.0)]).unwrap();
    let users = generate_users(&tri, 50.0 / M2_PER_KM2, &mut rng(42));
    assert!(users.iter().all(|u| inside_convex(tri.vertices(), u.position, 1e-9)));
    let mean = users.iter().fold(Vec2::ZERO, |s, u| s + u.position) / users.len() as f64;
    assert!(mean.distance(Vec2::new(1000.0, 1000.0)) < 40.0, "mean {mean:?}");
    assert!(users.iter().enumerate().all(|(i, u)| u.id == i));
}

#[test]
fn different_seeds_draw_different_users() {
    let mut a = small();
    let mut b = small();
    a.seed = 1;
    b.seed = 2;
    assert_ne!(users_for(&a), users_for(&b));
    assert_eq!(users_for(&a), users_for(&a));
}

#[test]
fn elapsed_time_is_the_longest_route() {
    let mut cfg = small();
    cfg.avoidance = false;
    cfg.proportions = vec![0.3, 0.7];
    let plan = plan_sweep(&cfg.sweep_request()).unwrap();
    let longest = plan.fleets.iter().map(|f| f.estimated_duration).fold(0.0, f64::max);
    let out = run_stage1(&cfg, &users_for(&cfg), &plan, false).unwrap();
    assert!(out.sweep_completed);
    assert!((out.elapsed - longest).abs() < 1e-6, "elapsed {} longest {longest}", out.elapsed);

    cfg.mission_time = 0.5 * longest;
    let cut = run_stage1(&cfg, &users_for(&cfg), &plan, false).unwrap();
    assert!(!cut.sweep_completed);
    assert_eq!(cut.elapsed, cfg.mission_time);
}

#[test]
fn longer_missions_detect_a_superset() {
    let mut cfg = small();
    let users = users_for(&cfg);
    let plan = plan_sweep(&cfg.sweep_request()).unwrap();
    let mut previous: Vec<_> = Vec::new();
    for t in [0.0, 100.0, 300.0, 600.0, 3600.0] {
        cfg.mission_time = t;
        let out = run_stage1(&cfg, &users, &plan, false).unwrap();
        assert!(out.estimates.len() >= previous.len());
        assert_eq!(&out.estimates[..previous.len()], &previous[..]);
        previous = out.estimates;
    }
    assert_eq!(previous.len(), users.len());
}

#[test]
fn every_covered_estimate_is_a_served_user() {
    for seed in 0..10 {
        for r_e in [0.0, 30.0] {
            let mut cfg = small();
            cfg.seed = seed;
            cfg.r_e = r_e;
            let out = run(&cfg, false).unwrap();
            assert!(out.metrics.served >= out.plan.total_covered, "seed {seed} r_e {r_e}");
            assert_eq!(out.metrics.detected, out.estimates.len());
        }
    }
}

#[test]
fn served_count_matches_direct_check() {
    let users: Vec<UserTruth> = (0..5)
        .map(|i| UserTruth { id: i, position: Vec2::new(100.0 * i as f64, 0.0) })
        .collect();
    assert_eq!(served_count(&users, &[Vec2::ZERO], 150.0), 2);
    assert_eq!(served_count(&users, &[Vec2::ZERO, Vec2::new(400.0, 0.0)], 100.0), 4);
    assert_eq!(served_count(&users, &[], 100.0), 0);
}

#[test]
fn drones_keep_their_distance() {
    for seed in 0..6 {
        for alg in [Algorithm::Proposed, Algorithm::RandomSearch] {
            let mut cfg = small();
            cfg.seed = seed;
            cfg.algorithm = alg;
            let out = run(&cfg, false).unwrap();
            assert!(
                out.min_drone_distance >= cfg.d_safe,
                "{alg} seed {seed}: {}",
                out.min_drone_distance
            );
        }
    }
}

#[test]
fn random_search_finds_a_lone_user() {
    let mut found = 0;
    for seed in 0..100 {
        let mut cfg = small();
        cfg.seed = seed;
        cfg.algorithm = Algorithm::RandomSearch;
        let user = UserTruth { id: 0, position: Vec2::new(1000.0, 1000.0) };
        let out = run_random_search_with_users(&cfg, &[user], false).unwrap();
        if out.metrics.served == 1 {
            found += 1;
        }
    }
    assert!(found >= 99, "found in {found} of 100 runs");
}

#[test]
fn proposed_serves_a_tight_group_with_one_drone() {
    let cfg = small();
    let users: Vec<UserTruth> = (0..7)
        .map(|i| UserTruth { id: i, position: Vec2::new(700.0 + 5.0 * i as f64, 1300.0) })
        .collect();
    let out = run_proposed_with_users(&cfg, &users, false).unwrap();
    assert_eq!(out.metrics.served, 7);
    assert_eq!(out.plan.placements[0].count(), 7);
}
