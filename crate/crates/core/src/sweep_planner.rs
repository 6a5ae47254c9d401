//! Area decomposition into proportional slices and boustrophedon lane
//! planning for each fleet.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{footprint_radius, overlap_area, validate_formation, ConvexPolygon, Vec2};

/// Scale factor behind the "area much larger than fleet footprints" check.
pub const DEFAULT_SCALE_FACTOR: f64 = 10.0;

const PROPORTION_TOL: f64 = 1e-9;
const WIDTH_TIE_REL: f64 = 1e-9;

/// Polygon plus the share of its area each fleet should sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRequest {
    pub polygon: ConvexPolygon,
    pub proportions: Vec<f64>,
}

impl DecompositionRequest {
    pub fn new(polygon: ConvexPolygon, proportions: Vec<f64>) -> Result<Self> {
        validate_proportions(&proportions)?;
        Ok(Self {
            polygon,
            proportions,
        })
    }
}

/// Checks that proportions are positive and sum to one.
pub fn validate_proportions(proportions: &[f64]) -> Result<()> {
    if proportions.is_empty() {
        return Err(Error::InvalidProportions("no proportions given".into()));
    }
    if let Some(p) = proportions.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidProportions(format!("proportion {p} is not positive")));
    }
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > PROPORTION_TOL {
        return Err(Error::InvalidProportions(format!("proportions sum to {sum}, not 1")));
    }
    Ok(())
}

/// Sub-areas in slicing order plus the common sweep direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub sub_areas: Vec<ConvexPolygon>,
    /// Lane direction in `[0, π)`, perpendicular to the minimum-width axis.
    pub sweep_direction: f64,
}

/// Direction in `[0, π)` of the axis across which the polygon is thinnest.
///
/// The minimum of the diameter function of a convex polygon is attained
/// along an edge normal, so only edge normals are candidates. Ties go to
/// the smallest angle.
pub fn min_width_direction(poly: &ConvexPolygon) -> f64 {
    let mut candidates: Vec<(f64, f64)> = poly
        .edges()
        .map(|(a, b)| {
            let theta = normalize_half_turn((b - a).perp().angle());
            (theta, poly.width(theta))
        })
        .collect();
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
    let min_w = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    candidates
        .iter()
        .find(|c| c.1 <= min_w * (1.0 + WIDTH_TIE_REL))
        .map(|c| c.0)
        .unwrap_or(0.0)
}

fn normalize_half_turn(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly π
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Slices the polygon with lines parallel to the optimal sweep direction so
/// that slice areas follow the requested proportions.
pub fn decompose(req: &DecompositionRequest) -> Result<Decomposition> {
    validate_proportions(&req.proportions)?;
    let poly = &req.polygon;
    let theta = min_width_direction(poly);
    let axis = Vec2::from_angle(theta);
    let sweep_direction = normalize_half_turn(theta + FRAC_PI_2);
    let (lo, hi) = poly.projection_range(axis);
    let total = poly.area();

    let area_below = |t: f64| poly.clip(axis, t).map_or(0.0, |p| p.area());

    let mut cuts = Vec::with_capacity(req.proportions.len() + 1);
    cuts.push(lo);
    let mut cumulative = 0.0;
    for p in &req.proportions[..req.proportions.len() - 1] {
        cumulative += p;
        let target = cumulative * total;
        let (mut a, mut b) = (*cuts.last().unwrap(), hi);
        // Bisect until the bracket stops shrinking.
        loop {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if area_below(mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let t = if (area_below(a) - target).abs() <= (area_below(b) - target).abs() {
            a
        } else {
            b
        };
        cuts.push(t);
    }
    cuts.push(hi);

    let mut sub_areas = Vec::with_capacity(req.proportions.len());
    for w in cuts.windows(2) {
        let mut piece = Some(poly.clone());
        if w[1] < hi {
            piece = piece.and_then(|p| p.clip(axis, w[1]));
        }
        if w[0] > lo {
            piece = piece.and_then(|p| p.clip(-axis, -w[0]));
        }
        let piece = piece.ok_or_else(|| {
            Error::DegeneratePolygon(format!("empty slice between offsets {} and {}", w[0], w[1]))
        })?;
        sub_areas.push(piece);
    }
    Ok(Decomposition {
        sub_areas,
        sweep_direction,
    })
}

/// Number of lanes needed to sweep a strip of width `width` with a
/// footprint of radius `rho`.
pub fn lane_count(width: f64, rho: f64) -> usize {
    if width <= 2.0 * rho {
        1
    } else {
        ((width - 2.0 * rho) / (2.0 * rho)).ceil() as usize + 1
    }
}

/// Lane count for sweeping the whole polygon with lanes along `sweep_direction`.
pub fn lane_count_for_direction(poly: &ConvexPolygon, sweep_direction: f64, rho: f64) -> usize {
    lane_count(poly.width(sweep_direction + FRAC_PI_2), rho)
}

/// A boustrophedon route for one sub-area.
#[derive(Debug, Clone, PartialEq)]
pub struct ZigzagPath {
    pub waypoints: Vec<Vec2>,
    pub lane_count: usize,
    /// Distance between consecutive lane centerlines (0 for a single lane).
    pub lane_spacing: f64,
}

/// Boustrophedon lanes parallel to `sweep_direction` covering `sub_area`
/// with a footprint of radius `rho`.
///
/// Outer lanes sit `rho` inside the extreme supporting lines and the rest
/// are evenly spaced, at most `2 * rho` apart. Each lane runs `rho` past its
/// boundary crossings, and further if the polygon bulges past that within
/// the strip the lane is responsible for. The route starts at whichever
/// outer lane end is nearest `entry`.
pub fn zigzag_path(sub_area: &ConvexPolygon, sweep_direction: f64, rho: f64, entry: Vec2) -> ZigzagPath {
    assert!(rho > 0.0, "footprint radius must be positive");
    let along = Vec2::from_angle(sweep_direction);
    let across = -along.perp();
    let (lo, hi) = sub_area.projection_range(across);
    let width = hi - lo;
    let count = lane_count(width, rho);

    let (offsets, spacing) = if count == 1 {
        (vec![0.5 * (lo + hi)], 0.0)
    } else {
        let spacing = (width - 2.0 * rho) / (count - 1) as f64;
        let offsets = (0..count)
            .map(|i| {
                if i == count - 1 {
                    hi - rho
                } else {
                    lo + rho + i as f64 * spacing
                }
            })
            .collect();
        (offsets, spacing)
    };

    let half = if count == 1 { f64::INFINITY } else { 0.5 * spacing };
    let lanes: Vec<(f64, f64, f64)> = offsets
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let chord = sub_area
                .slab_extent(across, c, c, along)
                .unwrap_or((0.0, 0.0));
            let band_lo = if i == 0 { lo } else { c - half };
            let band_hi = if i == count - 1 { hi } else { c + half };
            let band = sub_area
                .slab_extent(across, band_lo.max(lo), band_hi.min(hi), along)
                .unwrap_or(chord);
            let start = (chord.0 - rho).min(band.0);
            let end = (chord.1 + rho).max(band.1);
            (c, start, end)
        })
        .collect();

    let point = |c: f64, s: f64| across * c + along * s;
    let first = lanes[0];
    let last = lanes[count - 1];
    // (reverse lane order, first lane runs backwards)
    let options = [
        (false, false, point(first.0, first.1)),
        (false, true, point(first.0, first.2)),
        (true, false, point(last.0, last.1)),
        (true, true, point(last.0, last.2)),
    ];
    let (reverse_order, mut backwards, _) = options
        .iter()
        .copied()
        .min_by(|a, b| a.2.distance(entry).total_cmp(&b.2.distance(entry)))
        .unwrap();

    let mut waypoints = Vec::with_capacity(2 * count);
    let order: Box<dyn Iterator<Item = &(f64, f64, f64)>> = if reverse_order {
        Box::new(lanes.iter().rev())
    } else {
        Box::new(lanes.iter())
    };
    for &(c, s0, s1) in order {
        let (a, b) = if backwards { (s1, s0) } else { (s0, s1) };
        waypoints.push(point(c, a));
        waypoints.push(point(c, b));
        backwards = !backwards;
    }
    ZigzagPath {
        waypoints,
        lane_count: count,
        lane_spacing: spacing,
    }
}

/// Length of a polyline.
pub fn path_length(waypoints: &[Vec2]) -> f64 {
    waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Distance from `p` to the nearest point of a polyline.
pub fn distance_to_path(p: Vec2, waypoints: &[Vec2]) -> f64 {
    match waypoints {
        [] => f64::INFINITY,
        [only] => p.distance(*only),
        _ => waypoints
            .windows(2)
            .map(|w| crate::geometry::point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Returns the fleet count for `drones` drones (three per fleet).
pub fn fleet_count(drones: usize) -> Result<usize> {
    if drones == 0 || !drones.is_multiple_of(3) {
        return Err(Error::DroneCountNotDivisible(drones));
    }
    Ok(drones / 3)
}

/// Shape of every fleet: mutual drone distance and per-drone coverage radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Formation {
    pub side: f64,
    pub coverage_radius: f64,
}

impl Formation {
    pub fn new(side: f64, coverage_radius: f64) -> Result<Self> {
        validate_formation(side, coverage_radius)?;
        Ok(Self {
            side,
            coverage_radius,
        })
    }

    pub fn footprint_radius(&self) -> f64 {
        footprint_radius(self.side, self.coverage_radius)
    }

    pub fn overlap_area(&self) -> f64 {
        overlap_area(self.side, self.coverage_radius).unwrap_or(0.0)
    }
}

/// One fleet's route over its sub-area.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetPlan {
    pub fleet_id: usize,
    pub sub_area: ConvexPolygon,
    pub waypoints: Vec<Vec2>,
    pub lane_count: usize,
    pub lane_spacing: f64,
    pub path_length: f64,
    /// Seconds at the planning speed.
    pub estimated_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub fleets: Vec<FleetPlan>,
    pub sweep_direction: f64,
    pub footprint_radius: f64,
    /// Set when the area is not at least `scale_factor` times the combined
    /// fleet footprints.
    pub scale_warning: bool,
}

/// Sweep planning inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRequest {
    pub polygon: ConvexPolygon,
    pub proportions: Vec<f64>,
    pub drones: usize,
    pub formation: Formation,
    pub speed: f64,
    pub scale_factor: f64,
}

/// Default entry point for a sub-area: the vertex lowest along the slicing
/// axis, then lowest along the lanes.
pub fn default_entry(sub_area: &ConvexPolygon, sweep_direction: f64) -> Vec2 {
    let along = Vec2::from_angle(sweep_direction);
    let across = -along.perp();
    *sub_area
        .vertices()
        .iter()
        .min_by(|a, b| {
            across
                .dot(**a)
                .total_cmp(&across.dot(**b))
                .then(along.dot(**a).total_cmp(&along.dot(**b)))
        })
        .unwrap()
}

/// Decomposes the area and builds one zigzag route per fleet, fleets taking
/// sub-areas in slicing order.
pub fn plan_sweep(req: &SweepRequest) -> Result<SweepPlan> {
    let fleets = fleet_count(req.drones)?;
    if fleets != req.proportions.len() {
        return Err(Error::FleetProportionMismatch {
            fleets,
            proportions: req.proportions.len(),
        });
    }
    if !(req.speed > 0.0) {
        return Err(Error::InvalidConfig(format!("speed {} must be positive", req.speed)));
    }
    let rho = req.formation.footprint_radius();
    let required = req.scale_factor * fleets as f64 * req.formation.overlap_area();
    let scale_warning = req.polygon.area() < required;
    if scale_warning {
        warn!(
            "operating area {:.0} m^2 is below {}x the fleet footprints ({:.0} m^2)",
            req.polygon.area(),
            req.scale_factor,
            required
        );
    }
    let decomposition = decompose(&DecompositionRequest::new(
        req.polygon.clone(),
        req.proportions.clone(),
    )?)?;
    let fleets = decomposition
        .sub_areas
        .iter()
        .enumerate()
        .map(|(fleet_id, sub)| {
            let entry = default_entry(sub, decomposition.sweep_direction);
            let zz = zigzag_path(sub, decomposition.sweep_direction, rho, entry);
            let length = path_length(&zz.waypoints);
            FleetPlan {
                fleet_id,
                sub_area: sub.clone(),
                waypoints: zz.waypoints,
                lane_count: zz.lane_count,
                lane_spacing: zz.lane_spacing,
                path_length: length,
                estimated_duration: length / req.speed,
            }
        })
        .collect();
    Ok(SweepPlan {
        fleets,
        sweep_direction: decomposition.sweep_direction,
        footprint_radius: rho,
        scale_warning,
    })
}

/// Plain-text waypoint listing, one `fleet_id x_m y_m` triple per line.
pub fn waypoints_to_text(plan: &SweepPlan) -> String {
    let mut out = String::new();
    for f in &plan.fleets {
        for w in &f.waypoints {
            let _ = writeln!(out, "{} {} {}", f.fleet_id, w.x, w.y);
        }
    }
    out
}

/// Parses the output of [`waypoints_to_text`] back into per-fleet tracks.
pub fn waypoints_from_text(text: &str) -> Result<Vec<(usize, Vec<Vec2>)>> {
    let mut tracks: Vec<(usize, Vec<Vec2>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::InvalidConfig(format!("waypoint line {}: {line:?}", i + 1));
        if fields.len() != 3 {
            return Err(bad());
        }
        let id: usize = fields[0].parse().map_err(|_| bad())?;
        let x: f64 = fields[1].parse().map_err(|_| bad())?;
        let y: f64 = fields[2].parse().map_err(|_| bad())?;
        match tracks.last_mut() {
            Some((last, pts)) if *last == id => pts.push(Vec2::new(x, y)),
            _ => tracks.push((id, vec![Vec2::new(x, y)])),
        }
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: f64, h: f64) -> ConvexPolygon {
        ConvexPolygon::rectangle(0.0, 0.0, w, h).unwrap()
    }

    #[test]
    fn square_halves_along_x() {
        let req = DecompositionRequest::new(rect(1.0, 1.0), vec![0.5, 0.5]).unwrap();
        let d = decompose(&req).unwrap();
        assert!((d.sweep_direction - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(d.sub_areas.len(), 2);
        for s in &d.sub_areas {
            assert!((s.area() - 0.5).abs() < 1e-12);
        }
        let (lo, hi) = d.sub_areas[0].bounding_box();
        assert!(lo.x.abs() < 1e-12 && (hi.x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rectangle_splits_across_short_side() {
        let req = DecompositionRequest::new(rect(4000.0, 10_000.0), vec![0.5, 0.5]).unwrap();
        let d = decompose(&req).unwrap();
        assert!((d.sweep_direction - FRAC_PI_2).abs() < 1e-12);
        let (_, hi) = d.sub_areas[0].bounding_box();
        assert!((hi.x - 2000.0).abs() < 1e-6);
    }

    #[test]
    fn min_width_examples() {
        assert_eq!(min_width_direction(&rect(4.0, 10.0)), 0.0);
        assert!((min_width_direction(&rect(10.0, 4.0)) - FRAC_PI_2).abs() < 1e-12);
        let tri = ConvexPolygon::new(vec![
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 3f64.sqrt() / 2.0),
        ])
        .unwrap();
        let t = min_width_direction(&tri);
        assert!((tri.width(t) - 3f64.sqrt() / 2.0).abs() < 1e-12);
        // Edge normals of this triangle sit at π/6, π/2 and 5π/6.
        assert!((t - PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_proportions() {
        assert!(DecompositionRequest::new(rect(1.0, 1.0), vec![0.5, 0.4]).is_err());
        assert!(DecompositionRequest::new(rect(1.0, 1.0), vec![1.2, -0.2]).is_err());
        assert!(DecompositionRequest::new(rect(1.0, 1.0), vec![]).is_err());
    }

    #[test]
    fn lane_count_examples() {
        let rho = footprint_radius(50.0, 500.0);
        assert_eq!(lane_count(10_000.0, rho), 11);
        assert_eq!(lane_count(2.0 * rho, rho), 1);
        assert_eq!(lane_count(10.0, rho), 1);
    }

    #[test]
    fn single_swath_square() {
        let rho = 100.0;
        let sq = rect(2.0 * rho, 2.0 * rho);
        let zz = zigzag_path(&sq, FRAC_PI_2, rho, Vec2::ZERO);
        assert_eq!(zz.lane_count, 1);
        assert_eq!(zz.waypoints.len(), 2);
        assert!((zz.waypoints[0].x - rho).abs() < 1e-9);
    }

    #[test]
    fn lanes_evenly_spaced_and_alternating() {
        let rho = footprint_radius(50.0, 500.0);
        let sq = rect(10_000.0, 10_000.0);
        let zz = zigzag_path(&sq, FRAC_PI_2, rho, Vec2::ZERO);
        assert_eq!(zz.lane_count, 11);
        assert!(zz.lane_spacing <= 2.0 * rho);
        let xs: Vec<f64> = zz.waypoints.iter().step_by(2).map(|p| p.x).collect();
        assert!((xs[0] - rho).abs() < 1e-9);
        assert!((xs[10] - (10_000.0 - rho)).abs() < 1e-9);
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - zz.lane_spacing).abs() < 1e-6);
        }
        // starts at the bottom-left lane end and alternates
        assert!(zz.waypoints[0].y < zz.waypoints[1].y);
        assert!(zz.waypoints[2].y > zz.waypoints[3].y);
    }

    #[test]
    fn entry_corner_selects_start() {
        let sq = rect(1000.0, 1000.0);
        let zz = zigzag_path(&sq, FRAC_PI_2, 100.0, Vec2::new(1000.0, 1000.0));
        let start = zz.waypoints[0];
        assert!((start.x - 900.0).abs() < 1e-9 && start.y > 1000.0);
    }

    #[test]
    fn fleet_count_rules() {
        assert_eq!(fleet_count(6).unwrap(), 2);
        assert_eq!(fleet_count(3).unwrap(), 1);
        assert!(fleet_count(7).is_err());
        assert!(fleet_count(0).is_err());
    }

    #[test]
    fn plan_sweep_checks_counts() {
        let f = Formation::new(50.0, 500.0).unwrap();
        let mut req = SweepRequest {
            polygon: rect(10_000.0, 10_000.0),
            proportions: vec![0.5, 0.5],
            drones: 6,
            formation: f,
            speed: 10.0,
            scale_factor: DEFAULT_SCALE_FACTOR,
        };
        let plan = plan_sweep(&req).unwrap();
        assert_eq!(plan.fleets.len(), 2);
        assert!(!plan.scale_warning);
        req.drones = 9;
        assert!(matches!(plan_sweep(&req), Err(Error::FleetProportionMismatch { .. })));
        req.drones = 5;
        assert!(matches!(plan_sweep(&req), Err(Error::DroneCountNotDivisible(5))));
    }

    #[test]
    fn scale_warning_for_small_area() {
        let req = SweepRequest {
            polygon: rect(1000.0, 1000.0),
            proportions: vec![1.0],
            drones: 3,
            formation: Formation::new(50.0, 500.0).unwrap(),
            speed: 10.0,
            scale_factor: DEFAULT_SCALE_FACTOR,
        };
        let plan = plan_sweep(&req).unwrap();
        assert!(plan.scale_warning);
        assert_eq!(plan.fleets.len(), 1);
    }

    #[test]
    fn waypoint_text_round_trip() {
        let req = SweepRequest {
            polygon: rect(3000.0, 2000.0),
            proportions: vec![0.3, 0.7],
            drones: 6,
            formation: Formation::new(50.0, 250.0).unwrap(),
            speed: 10.0,
            scale_factor: DEFAULT_SCALE_FACTOR,
        };
        let plan = plan_sweep(&req).unwrap();
        let text = waypoints_to_text(&plan);
        let tracks = waypoints_from_text(&text).unwrap();
        assert_eq!(tracks.len(), 2);
        for (t, f) in tracks.iter().zip(&plan.fleets) {
            assert_eq!(t.0, f.fleet_id);
            assert_eq!(t.1, f.waypoints);
        }
        assert!(waypoints_from_text("0 1.0").is_err());
    }
}
