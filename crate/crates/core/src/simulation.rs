//! Experiment engine: user generation, the two-stage algorithm, the
//! random-search baseline and replicated comparisons.
//!
//! Every run is a pure function of its [`SimConfig`]. Randomness comes from
//! independent ChaCha streams keyed by the run seed, one per purpose, so the
//! user realization is shared between algorithms and estimate noise cannot
//! perturb anything else.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::collision_avoidance::{resolve_step, resolve_step_grouped, DroneState, SafetyParams};
use crate::deployment_optimizer::{greedy_deploy_with_fallback, DeploymentPlan, PlacementResult};
use crate::error::{Error, Result};
use crate::geometry::{validate_formation, ConvexPolygon, FleetGeometry, Vec2, GEOM_EPS};
use crate::localization::{make_estimate_disk, EstimateDisk, EstimateMode, UserTruth};
use crate::sweep_planner::{plan_sweep, Formation, SweepPlan, SweepRequest, DEFAULT_SCALE_FACTOR};

/// Refinement passes per avoidance evaluation.
const RESOLVE_ROUNDS: usize = 8;

const STREAM_USERS: u64 = 1;
const STREAM_ESTIMATES: u64 = 2;
const STREAM_RANDOM_SEARCH: u64 = 3;

/// Square meters per square kilometer.
pub const M2_PER_KM2: f64 = 1e6;

/// Deterministic random stream for one purpose within one run.
pub fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Proposed,
    RandomSearch,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::RandomSearch => "random_search",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "random_search" | "random" => Ok(Self::RandomSearch),
            _ => Err(Error::InvalidConfig(format!(
                "algorithm {s:?} (expected proposed or random_search)"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Full parameterization of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub polygon: ConvexPolygon,
    /// Number of drones.
    pub drones: usize,
    /// Mutual drone distance inside a fleet, m.
    pub side: f64,
    pub coverage_radius: f64,
    /// Flight speed, m/s.
    pub speed: f64,
    pub mission_time: f64,
    /// Position-estimate error radius, m.
    pub r_e: f64,
    /// Users per square meter.
    pub user_density: f64,
    /// Uncertainty radius of shared drone positions, m.
    pub position_uncertainty: f64,
    pub d_safe: f64,
    /// Lateral margin above `d_safe` targeted by avoidance; default `d_safe / 2`.
    pub target_margin: Option<f64>,
    /// Avoidance displacement bound; default `v τ + d_safe`.
    pub control_limit: Option<f64>,
    pub proportions: Vec<f64>,
    pub seed: u64,
    pub tick_dt: f64,
    pub estimate_mode: EstimateMode,
    /// TDOA range-difference noise, m (TDOA mode only).
    pub tdoa_sigma: f64,
    pub algorithm: Algorithm,
    pub avoidance: bool,
    pub scale_factor: f64,
}

impl SimConfig {
    /// Parameters of the published experiment: 10 km square, six drones in
    /// two fleets, Rc = 500 m, d = 50 m, 10 m/s, 100 minutes.
    pub fn table3() -> Self {
        Self {
            polygon: ConvexPolygon::rectangle(0.0, 0.0, 10_000.0, 10_000.0).expect("valid square"),
            drones: 6,
            side: 50.0,
            coverage_radius: 500.0,
            speed: 10.0,
            mission_time: 100.0 * 60.0,
            r_e: 30.0,
            user_density: 10.0 / M2_PER_KM2,
            position_uncertainty: 5.0,
            d_safe: 20.0,
            target_margin: None,
            control_limit: None,
            proportions: vec![0.5, 0.5],
            seed: 0,
            tick_dt: 1.0,
            estimate_mode: EstimateMode::Abstract,
            tdoa_sigma: 0.0,
            algorithm: Algorithm::Proposed,
            avoidance: true,
            scale_factor: DEFAULT_SCALE_FACTOR,
        }
    }

    /// Shrunken arena (2 km square, Rc = 250 m) with a budget long enough
    /// for the sweep to finish.
    pub fn desk_scale() -> Self {
        Self {
            polygon: ConvexPolygon::rectangle(0.0, 0.0, 2_000.0, 2_000.0).expect("valid square"),
            coverage_radius: 250.0,
            mission_time: 3_600.0,
            ..Self::table3()
        }
    }

    pub fn density_per_km2(&self) -> f64 {
        self.user_density * M2_PER_KM2
    }

    pub fn safety(&self) -> Result<SafetyParams> {
        let mut p = SafetyParams::new(self.position_uncertainty, self.d_safe, self.speed)?;
        if let Some(m) = self.target_margin {
            p.target_margin = m;
        }
        p.control_limit = self.control_limit;
        p.validate()?;
        Ok(p)
    }

    pub fn formation(&self) -> Result<Formation> {
        Formation::new(self.side, self.coverage_radius)
    }

    pub fn sweep_request(&self) -> SweepRequest {
        SweepRequest {
            polygon: self.polygon.clone(),
            proportions: self.proportions.clone(),
            drones: self.drones,
            formation: Formation {
                side: self.side,
                coverage_radius: self.coverage_radius,
            },
            speed: self.speed,
            scale_factor: self.scale_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.drones == 0 {
            return bad("at least one drone is required".into());
        }
        if self.algorithm == Algorithm::Proposed {
            crate::sweep_planner::fleet_count(self.drones)?;
            crate::sweep_planner::validate_proportions(&self.proportions)?;
            if self.drones / 3 != self.proportions.len() {
                return Err(Error::FleetProportionMismatch {
                    fleets: self.drones / 3,
                    proportions: self.proportions.len(),
                });
            }
        }
        validate_formation(self.side, self.coverage_radius)?;
        for (name, v) in [("speed", self.speed), ("tick_dt", self.tick_dt)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} {v} must be positive"));
            }
        }
        for (name, v) in [
            ("mission_time", self.mission_time),
            ("user_density", self.user_density),
            ("tdoa_sigma", self.tdoa_sigma),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} {v} must be non-negative"));
            }
        }
        if !(self.r_e >= 0.0) {
            return Err(Error::NegativeRadius(self.r_e));
        }
        if !(self.coverage_radius > self.r_e) {
            return Err(Error::NonPositiveEffectiveRadius {
                rc: self.coverage_radius,
                r_e: self.r_e,
            });
        }
        self.safety()?;
        Ok(())
    }
}

/// Users placed by a homogeneous Poisson process of `density` per m².
pub fn generate_users<R: Rng + ?Sized>(polygon: &ConvexPolygon, density: f64, rng: &mut R) -> Vec<UserTruth> {
    let mean = density * polygon.area();
    if !(mean > 0.0) {
        return Vec::new();
    }
    let n = Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0);
    let (lo, hi) = polygon.bounding_box();
    let mut users = Vec::with_capacity(n);
    while users.len() < n {
        let p = Vec2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        if polygon.contains(p) {
            users.push(UserTruth {
                id: users.len(),
                position: p,
            });
        }
    }
    users
}

/// Users drawn from the run's dedicated user stream.
pub fn users_for(config: &SimConfig) -> Vec<UserTruth> {
    generate_users(&config.polygon, config.user_density, &mut stream(config.seed, STREAM_USERS))
}

/// Number of users within `rc` of at least one center.
pub fn served_count(users: &[UserTruth], centers: &[Vec2], rc: f64) -> usize {
    users
        .iter()
        .filter(|u| centers.iter().any(|c| c.distance(u.position) <= rc + GEOM_EPS))
        .count()
}

/// One drone position in a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub tick: usize,
    pub drone_id: usize,
    pub position: Vec2,
}

/// CSV with header `tick,drone_id,x_m,y_m`.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("tick,drone_id,x_m,y_m\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.tick, r.drone_id, r.position.x, r.position.y);
    }
    out
}

/// Bucket grid over user positions.
struct UserIndex {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl UserIndex {
    fn new(users: &[UserTruth], cell: f64) -> Self {
        let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, u) in users.iter().enumerate() {
            map.entry(Self::key(u.position, cell)).or_default().push(i);
        }
        Self { cell, map }
    }

    fn key(p: Vec2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Sorted indices of users in cells meeting the box `[lo, hi]`.
    fn in_box(&self, lo: Vec2, hi: Vec2) -> Vec<usize> {
        let (x0, y0) = Self::key(lo, self.cell);
        let (x1, y1) = Self::key(hi, self.cell);
        let mut out = Vec::new();
        for x in x0..=x1 {
            for y in y0..=y1 {
                if let Some(v) = self.map.get(&(x, y)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// A fleet moving along its polyline.
struct FleetTrack {
    waypoints: Vec<Vec2>,
    /// Arc length at each waypoint.
    stations: Vec<f64>,
    traveled: f64,
    /// Deviation from the path commanded by collision avoidance.
    offset: Vec2,
}

impl FleetTrack {
    fn new(waypoints: Vec<Vec2>) -> Self {
        let mut stations = Vec::with_capacity(waypoints.len());
        let mut acc = 0.0;
        stations.push(0.0);
        for w in waypoints.windows(2) {
            acc += w[0].distance(w[1]);
            stations.push(acc);
        }
        Self {
            waypoints,
            stations,
            traveled: 0.0,
            offset: Vec2::ZERO,
        }
    }

    fn length(&self) -> f64 {
        *self.stations.last().unwrap_or(&0.0)
    }

    fn finished(&self) -> bool {
        self.traveled >= self.length()
    }

    /// Segment index holding arc length `s` (the next one at a vertex).
    fn segment_at(&self, s: f64) -> usize {
        let n = self.waypoints.len();
        if n < 2 {
            return 0;
        }
        let idx = self.stations.partition_point(|&x| x <= s);
        idx.saturating_sub(1).min(n - 2)
    }

    fn point_at(&self, s: f64) -> Vec2 {
        if self.waypoints.len() < 2 {
            return self.waypoints.first().copied().unwrap_or(Vec2::ZERO);
        }
        let i = self.segment_at(s);
        let (a, b) = (self.waypoints[i], self.waypoints[i + 1]);
        let len = self.stations[i + 1] - self.stations[i];
        if len <= 0.0 {
            return a;
        }
        a + (b - a) * ((s - self.stations[i]) / len).clamp(0.0, 1.0)
    }

    fn heading_at(&self, s: f64) -> f64 {
        if self.waypoints.len() < 2 {
            return 0.0;
        }
        let i = self.segment_at(s);
        (self.waypoints[i + 1] - self.waypoints[i]).angle()
    }

    /// Straight pieces `(start, end, heading)` covering arc range `[s0, s1]`.
    fn pieces(&self, s0: f64, s1: f64) -> Vec<(Vec2, Vec2, f64)> {
        let mut out = Vec::new();
        let mut s = s0;
        while s < s1 {
            let i = self.segment_at(s);
            let seg_end = self.stations.get(i + 1).copied().unwrap_or(s1);
            let e = seg_end.min(s1);
            out.push((self.point_at(s), self.point_at(e), self.heading_at(s)));
            if e <= s {
                break;
            }
            s = e;
        }
        out
    }
}

/// Lowest value of `max_k |u - (base_k + τ Δ)|` over `τ ∈ [0, 1]`, and its argument.
fn min_max_distance(u: Vec2, bases: &[Vec2; 3], delta: Vec2) -> (f64, f64) {
    let g = |t: f64| {
        bases
            .iter()
            .map(|b| u.distance(*b + delta * t))
            .fold(0.0, f64::max)
    };
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..100 {
        if b - a < 1e-12 {
            break;
        }
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if g(m1) <= g(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let mid = 0.5 * (a + b);
    [(g(0.0), 0.0), (g(1.0), 1.0), (g(mid), mid)]
        .into_iter()
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap()
}

/// Result of the sweep-and-locate stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Outcome {
    /// In detection order; at most one per user.
    pub estimates: Vec<EstimateDisk>,
    pub elapsed: f64,
    pub sweep_completed: bool,
    /// Closest approach between drones of different fleets.
    pub min_interfleet_distance: f64,
    /// Ticks in which any fleet received an avoidance command.
    pub avoidance_ticks: usize,
    pub trace: Vec<TraceRow>,
}

/// Flies every fleet along its route at the configured speed, locating each
/// user the first time it lies inside all three of a fleet's coverage disks.
/// Stops when every route is done or the mission time runs out.
pub fn run_stage1(config: &SimConfig, users: &[UserTruth], plan: &SweepPlan, record_trace: bool) -> Result<Stage1Outcome> {
    let mut rng = stream(config.seed, STREAM_ESTIMATES);
    let rc = config.coverage_radius;
    let formation = FleetGeometry::new(Vec2::ZERO, 0.0, config.side, rc)?;
    let safety = config.safety()?;
    let index = UserIndex::new(users, rc.max(1.0));
    let mut detected = vec![false; users.len()];
    let mut estimates = Vec::new();
    let mut tracks: Vec<FleetTrack> = plan
        .fleets
        .iter()
        .map(|f| FleetTrack::new(f.waypoints.clone()))
        .collect();
    let fleet_count = tracks.len();

    let drones_of = |track: &FleetTrack| {
        let s = track.traveled;
        formation
            .moved_to(track.point_at(s) + track.offset, track.heading_at(s))
            .drone_positions()
    };

    let mut trace = Vec::new();
    let record = |tick: usize, tracks: &[FleetTrack], trace: &mut Vec<TraceRow>| {
        if record_trace {
            for (f, t) in tracks.iter().enumerate() {
                for (k, p) in drones_of(t).into_iter().enumerate() {
                    trace.push(TraceRow { tick, drone_id: 3 * f + k, position: p });
                }
            }
        }
    };
    record(0, &tracks, &mut trace);

    let min_interfleet = |tracks: &[FleetTrack]| {
        let all: Vec<[Vec2; 3]> = tracks.iter().map(drones_of).collect();
        let mut best = f64::INFINITY;
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                for p in &all[i] {
                    for q in &all[j] {
                        best = best.min(p.distance(*q));
                    }
                }
            }
        }
        best
    };

    let mut min_distance = min_interfleet(&tracks);
    let mut avoidance_ticks = 0;
    let mut t = 0.0;
    let mut tick = 0;
    let mut completed = tracks.iter().all(FleetTrack::finished);
    while !completed && t < config.mission_time {
        let dt = config.tick_dt.min(config.mission_time - t);
        tick += 1;

        // Avoidance commands from the states at the start of the tick.
        let mut adjustments = vec![Vec2::ZERO; fleet_count];
        if config.avoidance && fleet_count > 1 {
            let states: Vec<DroneState> = tracks
                .iter()
                .enumerate()
                .flat_map(|(f, tr)| {
                    let v = if tr.finished() {
                        Vec2::ZERO
                    } else {
                        Vec2::from_angle(tr.heading_at(tr.traveled)) * config.speed
                    };
                    drones_of(tr)
                        .into_iter()
                        .enumerate()
                        .map(move |(k, p)| DroneState::new(3 * f + k, p, v))
                })
                .collect();
            let per_drone = resolve_step_grouped(&states, &safety, config.tick_dt, RESOLVE_ROUNDS, |i| i / 3);
            for (f, adj) in adjustments.iter_mut().enumerate() {
                *adj = per_drone[3 * f];
            }
            if adjustments.iter().any(|a| *a != Vec2::ZERO) {
                avoidance_ticks += 1;
            }
        }

        let mut finish_time: f64 = 0.0;
        for (f, track) in tracks.iter_mut().enumerate() {
            if track.finished() {
                continue;
            }
            let s0 = track.traveled;
            let s1 = (s0 + config.speed * dt).min(track.length());
            finish_time = finish_time.max((s1 - s0) / config.speed);
            for (p0, p1, heading) in track.pieces(s0, s1) {
                let offsets = formation.moved_to(Vec2::ZERO, heading).drone_positions();
                let start = p0 + track.offset;
                let delta = p1 - p0;
                let bases = offsets.map(|o| start + o);
                let (lo, hi) = (
                    Vec2::new(start.x.min(start.x + delta.x) - rc, start.y.min(start.y + delta.y) - rc),
                    Vec2::new(start.x.max(start.x + delta.x) + rc, start.y.max(start.y + delta.y) + rc),
                );
                for i in index.in_box(lo, hi) {
                    if detected[i] {
                        continue;
                    }
                    let u = users[i].position;
                    if crate::geometry::point_segment_distance(u, start, start + delta) > rc + GEOM_EPS {
                        continue;
                    }
                    let (worst, at) = min_max_distance(u, &bases, delta);
                    if worst > rc + GEOM_EPS {
                        continue;
                    }
                    detected[i] = true;
                    let drones = bases.map(|b| b + delta * at);
                    let disk = make_estimate_disk(
                        &users[i],
                        config.r_e,
                        config.estimate_mode,
                        &drones,
                        rc,
                        config.tdoa_sigma,
                        &mut rng,
                    )?;
                    estimates.push(disk);
                }
            }
            track.traveled = s1;
            let adj = adjustments[f];
            if adj != Vec2::ZERO {
                track.offset += adj * dt;
            } else if track.offset != Vec2::ZERO {
                // Drift back onto the planned path at half cruise speed.
                let back = 0.5 * config.speed * dt;
                let n = track.offset.norm();
                track.offset = if n <= back { Vec2::ZERO } else { track.offset * ((n - back) / n) };
            }
        }

        completed = tracks.iter().all(FleetTrack::finished);
        t += if completed { finish_time } else { dt };
        min_distance = min_distance.min(min_interfleet(&tracks));
        record(tick, &tracks, &mut trace);
    }

    Ok(Stage1Outcome {
        estimates,
        elapsed: t,
        sweep_completed: completed,
        min_interfleet_distance: min_distance,
        avoidance_ticks,
        trace,
    })
}

/// One output record.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub algorithm: Algorithm,
    pub density_per_km2: f64,
    pub r_e: f64,
    pub seed: u64,
    pub n_users: usize,
    pub detected: usize,
    pub served: usize,
    pub sweep_completed: bool,
    /// Simulated seconds.
    pub elapsed: f64,
    /// Host seconds; not written to CSV.
    pub wall_runtime: f64,
}

pub const METRICS_HEADER: &str =
    "algorithm,lambda_u_per_km2,r_e_m,seed,n_users,detected,served,sweep_completed,elapsed_s";

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.algorithm.label(),
            self.density_per_km2,
            self.r_e,
            self.seed,
            self.n_users,
            self.detected,
            self.served,
            self.sweep_completed,
            self.elapsed
        )
    }
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Everything a single run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub plan: DeploymentPlan,
    pub metrics: MetricsRow,
    /// Stage-one estimates (empty for random search).
    pub estimates: Vec<EstimateDisk>,
    pub sweep: Option<SweepPlan>,
    /// Closest approach between drones not sharing a formation.
    pub min_drone_distance: f64,
    /// Random search only: best served count after each evaluation.
    pub best_history: Vec<usize>,
    pub trace: Vec<TraceRow>,
}

/// The two-stage algorithm on the run's own user realization.
pub fn run_proposed(config: &SimConfig) -> Result<RunOutcome> {
    run_proposed_with_users(config, &users_for(config), false)
}

pub fn run_proposed_with_users(config: &SimConfig, users: &[UserTruth], record_trace: bool) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let sweep = plan_sweep(&config.sweep_request())?;
    let stage1 = run_stage1(config, users, &sweep, record_trace)?;
    let plan = greedy_deploy_with_fallback(
        &stage1.estimates,
        config.drones,
        config.coverage_radius,
        config.polygon.centroid(),
    )?;
    let served = served_count(users, &plan.centers(), config.coverage_radius);
    debug!(
        "proposed seed {}: {} users, {} located, {} served",
        config.seed,
        users.len(),
        stage1.estimates.len(),
        served
    );
    Ok(RunOutcome {
        metrics: MetricsRow {
            algorithm: Algorithm::Proposed,
            density_per_km2: config.density_per_km2(),
            r_e: config.r_e,
            seed: config.seed,
            n_users: users.len(),
            detected: stage1.estimates.len(),
            served,
            sweep_completed: stage1.sweep_completed,
            elapsed: stage1.elapsed,
            wall_runtime: started.elapsed().as_secs_f64(),
        },
        plan,
        estimates: stage1.estimates,
        sweep: Some(sweep),
        min_drone_distance: stage1.min_interfleet_distance,
        best_history: Vec::new(),
        trace: stage1.trace,
    })
}

/// Random-search baseline on the run's own user realization.
pub fn run_random_search(config: &SimConfig) -> Result<RunOutcome> {
    run_random_search_with_users(config, &users_for(config), false)
}

/// Drones wander from random starts in random directions, bouncing off the
/// boundary and turning away from each other when coverage disks touch. The
/// best joint snapshot seen during the mission is the deployment.
pub fn run_random_search_with_users(config: &SimConfig, users: &[UserTruth], record_trace: bool) -> Result<RunOutcome> {
    let mut check = config.clone();
    check.algorithm = Algorithm::RandomSearch;
    check.validate()?;
    let started = Instant::now();
    let mut rng = stream(config.seed, STREAM_RANDOM_SEARCH);
    let rc = config.coverage_radius;
    let poly = &config.polygon;
    let (lo, hi) = poly.bounding_box();

    let mut pos: Vec<Vec2> = Vec::with_capacity(config.drones);
    let mut attempts = 0usize;
    while pos.len() < config.drones {
        let p = Vec2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        attempts += 1;
        if !poly.contains(p) {
            continue;
        }
        // Start at least d_safe apart unless the area makes that impractical.
        if attempts < 100_000 && pos.iter().any(|q| q.distance(p) < config.d_safe) {
            continue;
        }
        pos.push(p);
    }
    let mut heading: Vec<f64> = (0..config.drones).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    let index = UserIndex::new(users, rc.max(1.0));
    let mut ever = vec![false; users.len()];
    let covered_now = |pos: &[Vec2], ever: &mut Vec<bool>| {
        let mut hit = vec![false; users.len()];
        for p in pos {
            let r = Vec2::new(rc, rc);
            for i in index.in_box(*p - r, *p + r) {
                if !hit[i] && users[i].position.distance(*p) <= rc + GEOM_EPS {
                    hit[i] = true;
                    ever[i] = true;
                }
            }
        }
        hit.iter().filter(|h| **h).count()
    };

    let mut trace = Vec::new();
    let record = |tick: usize, pos: &[Vec2], trace: &mut Vec<TraceRow>| {
        if record_trace {
            trace.extend(pos.iter().enumerate().map(|(k, p)| TraceRow { tick, drone_id: k, position: *p }));
        }
    };
    record(0, &pos, &mut trace);

    let pair_min = |pos: &[Vec2]| {
        let mut m = f64::INFINITY;
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                m = m.min(pos[i].distance(pos[j]));
            }
        }
        m
    };

    let mut best = covered_now(&pos, &mut ever);
    let mut best_pos = pos.clone();
    let mut history = vec![best];
    let mut min_distance = pair_min(&pos);
    let inward: Vec<(Vec2, Vec2)> = poly
        .edges()
        .map(|(a, b)| (a, (b - a).normalized().unwrap_or(Vec2::ZERO).perp()))
        .collect();

    let mut t = 0.0;
    let mut tick = 0;
    while t < config.mission_time {
        let dt = config.tick_dt.min(config.mission_time - t);
        tick += 1;
        for i in 0..pos.len() {
            let mut dir = Vec2::from_angle(heading[i]);
            for (a, n) in &inward {
                if n.dot(pos[i] - *a) <= rc + GEOM_EPS && dir.dot(*n) < 0.0 {
                    dir = dir - *n * (2.0 * dir.dot(*n));
                }
            }
            heading[i] = dir.angle();
            for j in 0..pos.len() {
                if j == i {
                    continue;
                }
                let away = pos[i] - pos[j];
                if away.norm() <= 2.0 * rc + GEOM_EPS && Vec2::from_angle(heading[i]).dot(away) < 0.0 {
                    heading[i] = away.angle() + rng.random_range(-PI / 2.0..PI / 2.0);
                }
            }
        }
        let before = pos.clone();
        for i in 0..pos.len() {
            pos[i] += Vec2::from_angle(heading[i]) * (config.speed * dt);
        }
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                min_distance = min_distance.min(segment_pair_min(before[i], pos[i], before[j], pos[j]));
            }
        }
        t += dt;
        let count = covered_now(&pos, &mut ever);
        if count > best {
            best = count;
            best_pos = pos.clone();
        }
        history.push(best);
        record(tick, &pos, &mut trace);
    }

    let mut taken = vec![false; users.len()];
    let placements: Vec<PlacementResult> = best_pos
        .iter()
        .map(|p| {
            let mut ids = Vec::new();
            for (i, u) in users.iter().enumerate() {
                if !taken[i] && u.position.distance(*p) <= rc + GEOM_EPS {
                    taken[i] = true;
                    ids.push(u.id);
                }
            }
            ids.sort_unstable();
            PlacementResult { center: *p, covered_ids: ids }
        })
        .collect();
    let total_covered = placements.iter().map(PlacementResult::count).sum();
    debug_assert_eq!(total_covered, best);

    Ok(RunOutcome {
        metrics: MetricsRow {
            algorithm: Algorithm::RandomSearch,
            density_per_km2: config.density_per_km2(),
            r_e: config.r_e,
            seed: config.seed,
            n_users: users.len(),
            detected: ever.iter().filter(|e| **e).count(),
            served: best,
            sweep_completed: false,
            elapsed: t,
            wall_runtime: started.elapsed().as_secs_f64(),
        },
        plan: DeploymentPlan {
            placements,
            total_covered,
            unplaced: 0,
        },
        estimates: Vec::new(),
        sweep: None,
        min_drone_distance: min_distance,
        best_history: history,
        trace,
    })
}

/// Runs whichever algorithm the config selects.
pub fn run(config: &SimConfig, record_trace: bool) -> Result<RunOutcome> {
    let users = users_for(config);
    match config.algorithm {
        Algorithm::Proposed => run_proposed_with_users(config, &users, record_trace),
        Algorithm::RandomSearch => run_random_search_with_users(config, &users, record_trace),
    }
}

/// Minimum distance between two points moving linearly over the same interval.
pub fn segment_pair_min(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    let r0 = b0 - a0;
    let dr = (b1 - b0) - (a1 - a0);
    let dd = dr.norm_sq();
    let t = if dd > 0.0 { (-r0.dot(dr) / dd).clamp(0.0, 1.0) } else { 0.0 };
    (r0 + dr * t).norm()
}

/// Both algorithms at every density for `replications` consecutive seeds
/// starting at `base.seed`. Both algorithms see the same users for a given
/// (density, seed). Rows are ordered by density, then algorithm, then seed.
pub fn run_comparison(base: &SimConfig, densities_per_km2: &[f64], replications: usize) -> Result<Vec<MetricsRow>> {
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    base.validate()?;
    let cells: Vec<(usize, f64, u64)> = densities_per_km2
        .iter()
        .enumerate()
        .flat_map(|(k, &d)| (0..replications as u64).map(move |r| (k, d, base.seed.wrapping_add(r))))
        .collect();
    let results: Vec<Result<(usize, MetricsRow, MetricsRow)>> = cells
        .par_iter()
        .map(|&(k, density, seed)| {
            let mut cfg = base.clone();
            cfg.user_density = density / M2_PER_KM2;
            cfg.seed = seed;
            let users = users_for(&cfg);
            let proposed = run_proposed_with_users(&cfg, &users, false)?.metrics;
            let random = run_random_search_with_users(&cfg, &users, false)?.metrics;
            Ok((k, proposed, random))
        })
        .collect();
    let mut rows = Vec::with_capacity(2 * cells.len());
    let results: Vec<(usize, MetricsRow, MetricsRow)> = results.into_iter().collect::<Result<_>>()?;
    for k in 0..densities_per_km2.len() {
        rows.extend(results.iter().filter(|r| r.0 == k).map(|r| r.1.clone()));
        rows.extend(results.iter().filter(|r| r.0 == k).map(|r| r.2.clone()));
    }
    Ok(rows)
}

/// Mean and standard error of served users for one (algorithm, density) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub algorithm: Algorithm,
    pub density_per_km2: f64,
    pub replications: usize,
    pub mean_served: f64,
    pub stderr_served: f64,
}

pub const CURVES_HEADER: &str = "algorithm,lambda_u_per_km2,replications,mean_served,stderr_served";

/// Aggregates rows per (density, algorithm) in first-appearance order.
pub fn curves(rows: &[MetricsRow]) -> Vec<CurvePoint> {
    let mut keys: Vec<(u64, Algorithm)> = Vec::new();
    for r in rows {
        let key = (r.density_per_km2.to_bits(), r.algorithm);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(bits, algorithm)| {
            let served: Vec<f64> = rows
                .iter()
                .filter(|r| r.density_per_km2.to_bits() == bits && r.algorithm == algorithm)
                .map(|r| r.served as f64)
                .collect();
            let n = served.len() as f64;
            let mean = served.iter().sum::<f64>() / n;
            let stderr = if served.len() > 1 {
                let var = served.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            CurvePoint {
                algorithm,
                density_per_km2: f64::from_bits(bits),
                replications: served.len(),
                mean_served: mean,
                stderr_served: stderr,
            }
        })
        .collect()
}

pub fn curves_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.algorithm.label(),
            p.density_per_km2,
            p.replications,
            p.mean_served,
            p.stderr_served
        );
    }
    out
}

/// Outcome of a point-to-point transit.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitOutcome {
    /// Closest approach between any two drones over the whole transit.
    pub min_distance: f64,
    pub arrived: bool,
    pub elapsed: f64,
    pub avoidance_ticks: usize,
    pub trace: Vec<TraceRow>,
}

/// Drones fly straight from `starts` to `goals` at `speed`; with `safety`
/// set, avoidance commands are re-evaluated every tick and added to the
/// nominal velocities.
pub fn simulate_transit(
    starts: &[Vec2],
    goals: &[Vec2],
    speed: f64,
    dt: f64,
    max_time: f64,
    safety: Option<&SafetyParams>,
) -> TransitOutcome {
    assert_eq!(starts.len(), goals.len());
    let n = starts.len();
    let mut pos = starts.to_vec();
    let mut min_distance = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            min_distance = min_distance.min(pos[i].distance(pos[j]));
        }
    }
    let mut trace: Vec<TraceRow> = pos
        .iter()
        .enumerate()
        .map(|(k, p)| TraceRow { tick: 0, drone_id: k, position: *p })
        .collect();
    let mut t = 0.0;
    let mut tick = 0;
    let mut avoidance_ticks = 0;
    let arrived = |pos: &[Vec2]| pos.iter().zip(goals).all(|(p, g)| p.distance(*g) <= 1e-6);
    while t < max_time && !arrived(&pos) {
        tick += 1;
        let nominal: Vec<Vec2> = pos
            .iter()
            .zip(goals)
            .map(|(p, g)| {
                let to = *g - *p;
                let d = to.norm();
                if d <= speed * dt {
                    to / dt
                } else {
                    to * (speed / d)
                }
            })
            .collect();
        let mut vel = nominal.clone();
        if let Some(params) = safety {
            let states: Vec<DroneState> = (0..n).map(|k| DroneState::new(k, pos[k], nominal[k])).collect();
            let adjust = resolve_step(&states, params, dt, RESOLVE_ROUNDS);
            if adjust.iter().any(|a| *a != Vec2::ZERO) {
                avoidance_ticks += 1;
            }
            for (v, a) in vel.iter_mut().zip(&adjust) {
                *v += *a;
            }
        }
        let next: Vec<Vec2> = pos.iter().zip(&vel).map(|(p, v)| *p + *v * dt).collect();
        for i in 0..n {
            for j in i + 1..n {
                min_distance = min_distance.min(segment_pair_min(pos[i], next[i], pos[j], next[j]));
            }
        }
        pos = next;
        t += dt;
        trace.extend(pos.iter().enumerate().map(|(k, p)| TraceRow { tick, drone_id: k, position: *p }));
    }
    if !arrived(&pos) {
        warn!("transit did not finish within {max_time} s");
    }
    TransitOutcome {
        min_distance,
        arrived: arrived(&pos),
        elapsed: t,
        avoidance_ticks,
        trace,
    }
}

/// `count` drones evenly spaced on a circle, each flying to the opposite
/// point, so that all paths meet at the center at the same time.
pub fn converging_ring(center: Vec2, radius: f64, count: usize) -> (Vec<Vec2>, Vec<Vec2>) {
    (0..count)
        .map(|k| {
            let dir = Vec2::from_angle(2.0 * PI * k as f64 / count as f64);
            (center + dir * radius, center - dir * radius)
        })
        .unzip()
}

/// Two fleets flying perpendicular routes through the arena center, timed
/// to reach it together. Drones `0..3` belong to the first fleet.
pub fn fleet_crossing(config: &SimConfig) -> Result<(Vec<Vec2>, Vec<Vec2>)> {
    let formation = FleetGeometry::new(Vec2::ZERO, 0.0, config.side, config.coverage_radius)?;
    let (lo, hi) = config.polygon.bounding_box();
    let center = (lo + hi) * 0.5;
    let reach = 0.4 * (hi.x - lo.x).min(hi.y - lo.y);
    let mut starts = Vec::new();
    let mut goals = Vec::new();
    for heading in [0.0, PI / 2.0] {
        let dir = Vec2::from_angle(heading);
        starts.extend(formation.moved_to(center - dir * reach, heading).drone_positions());
        goals.extend(formation.moved_to(center + dir * reach, heading).drone_positions());
    }
    Ok((starts, goals))
}
