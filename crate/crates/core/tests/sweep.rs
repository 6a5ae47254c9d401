mod common;

use std::f64::consts::PI;

use common::*;
use dronebs::geometry::{ConvexPolygon, Vec2};
use dronebs::sweep_planner::{
    decompose, default_entry, plan_sweep, waypoints_from_text, waypoints_to_text, zigzag_path, DecompositionRequest,
    Formation, SweepRequest,
};
use proptest::prelude::*;

fn request(polygon: ConvexPolygon, proportions: Vec<f64>, drones: usize) -> SweepRequest {
    SweepRequest {
        polygon,
        proportions,
        drones,
        formation: Formation::new(50.0, 250.0).unwrap(),
        speed: 10.0,
        scale_factor: 1.0,
    }
}

fn square(side: f64) -> ConvexPolygon {
    ConvexPolygon::rectangle(0.0, 0.0, side, side).unwrap()
}

#[test]
fn fleets_follow_drone_count() {
    let two = plan_sweep(&request(square(2000.0), vec![0.5, 0.5], 6)).unwrap();
    assert_eq!(two.fleets.len(), 2);
    let one = plan_sweep(&request(square(2000.0), vec![1.0], 3)).unwrap();
    assert_eq!(one.fleets.len(), 1);
    assert!(plan_sweep(&request(square(2000.0), vec![1.0], 5)).is_err());
    assert!(plan_sweep(&request(square(2000.0), vec![1.0], 6)).is_err());
    assert!(plan_sweep(&request(square(2000.0), vec![0.7, 0.7], 6)).is_err());
}

#[test]
fn durations_are_route_length_over_speed() {
    let plan = plan_sweep(&request(square(2000.0), vec![0.3, 0.7], 6)).unwrap();
    for f in &plan.fleets {
        let length: f64 = f.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
        assert!((f.path_length - length).abs() < 1e-9 * length);
        assert!((f.estimated_duration - length / 10.0).abs() < 1e-9 * length);
    }
}

#[test]
fn waypoint_text_survives_a_round_trip() {
    let plan = plan_sweep(&request(square(2000.0), vec![0.5, 0.5], 6)).unwrap();
    let back = waypoints_from_text(&waypoints_to_text(&plan)).unwrap();
    assert_eq!(back.len(), 2);
    for ((id, pts), f) in back.iter().zip(&plan.fleets) {
        assert_eq!(*id, f.fleet_id);
        assert_eq!(pts, &f.waypoints);
    }
}

#[test]
fn a_thin_strip_needs_a_single_lane() {
    let strip = ConvexPolygon::rectangle(0.0, 0.0, 3000.0, 300.0).unwrap();
    let plan = plan_sweep(&request(strip, vec![1.0], 3)).unwrap();
    assert_eq!(plan.fleets[0].lane_count, 1);
}

fn arb_case() -> impl Strategy<Value = (ConvexPolygon, Vec<f64>)> {
    (any::<u64>(), 3usize..10, prop::collection::vec(0.05f64..1.0, 1..=4)).prop_map(|(seed, n, w)| {
        let total: f64 = w.iter().sum();
        (random_convex_polygon(&mut rng(seed), n, 3000.0), w.iter().map(|x| x / total).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sub_areas_partition_the_polygon((poly, props) in arb_case()) {
        let dec = decompose(&DecompositionRequest::new(poly.clone(), props.clone()).unwrap()).unwrap();
        prop_assert_eq!(dec.sub_areas.len(), props.len());
        let total = shoelace_poly(&poly);
        let sum: f64 = dec.sub_areas.iter().map(shoelace_poly).sum();
        prop_assert!((sum - total).abs() <= 1e-9 * total);
        for (s, p) in dec.sub_areas.iter().zip(&props) {
            prop_assert!((shoelace_poly(s) - p * total).abs() <= 1e-9 * p * total);
            for v in s.vertices() {
                prop_assert!(inside_convex(poly.vertices(), *v, 1e-6));
            }
        }
        // Consecutive slices meet along a cut perpendicular to the slicing axis.
        let mut axis = Vec2::from_angle(dec.sweep_direction).perp();
        if let [first, .., last] = dec.sub_areas.as_slice() {
            if (last.centroid() - first.centroid()).dot(axis) < 0.0 {
                axis = -axis;
            }
        }
        for w in dec.sub_areas.windows(2) {
            let (_, hi) = w[0].projection_range(axis);
            let (lo, _) = w[1].projection_range(axis);
            prop_assert!((hi - lo).abs() <= 1e-6 * (1.0 + hi.abs()));
        }
    }

    #[test]
    fn zigzag_covers_every_interior_point(
        seed in any::<u64>(), n in 3usize..8, dir in 0.0f64..PI, rho in 60.0f64..300.0,
    ) {
        let poly = random_convex_polygon(&mut rng(seed), n, 1500.0);
        let path = zigzag_path(&poly, dir, rho, default_entry(&poly, dir));
        let mut r = rng(seed ^ 0x5eed);
        let (lo, hi) = poly.bounding_box();
        let mut checked = 0;
        while checked < 400 {
            let q = Vec2::new(
                lo.x + (hi.x - lo.x) * rand::Rng::random::<f64>(&mut r),
                lo.y + (hi.y - lo.y) * rand::Rng::random::<f64>(&mut r),
            );
            if !inside_convex(poly.vertices(), q, 0.0) {
                continue;
            }
            checked += 1;
            prop_assert!(polyline_dist(q, &path.waypoints) <= rho + 1e-9);
        }
    }
}
