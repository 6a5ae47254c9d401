//! UTDOA position fixes from a three-drone fleet.
//!
//! The serving drone (nearest to the user) acts as the time reference; the
//! two other drones each contribute one range difference. Positions are
//! recovered by Gauss–Newton on the hyperbolic residuals. For the bounded
//! error abstraction used by the optimizer, a fix is an [`EstimateDisk`]
//! guaranteed to contain the true position.

use std::f64::consts::PI;
use std::fmt::Write as _;

use log::debug;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Vec2, GEOM_EPS};

/// Gauss–Newton stops once a step is shorter than this, in meters.
pub const STEP_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 50;

/// A user and its true ground position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserTruth {
    pub id: usize,
    pub position: Vec2,
}

/// One range difference, `|p - other| - |p - reference|`, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdoaMeasurement {
    pub reference_drone: usize,
    pub other_drone: usize,
    pub delta_range: f64,
    pub noise_sigma: f64,
}

/// A position estimate with its error radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateDisk {
    pub user_id: usize,
    pub center: Vec2,
    pub radius: f64,
}

/// How estimate centers are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimateMode {
    /// True position plus a uniform offset inside the `r_e` disk.
    #[default]
    Abstract,
    /// Synthetic TDOA measurements solved by Gauss–Newton.
    Tdoa,
}

impl std::str::FromStr for EstimateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abstract" => Ok(Self::Abstract),
            "tdoa" => Ok(Self::Tdoa),
            _ => Err(Error::InvalidConfig(format!(
                "estimate mode {s:?} (expected abstract or tdoa)"
            ))),
        }
    }
}

impl std::fmt::Display for EstimateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Abstract => "abstract",
            Self::Tdoa => "tdoa",
        })
    }
}

/// Index of the drone nearest to `user`; lowest index wins ties. The user
/// must sit inside all three coverage disks.
pub fn assign_serving_drone(user: Vec2, drones: &[Vec2; 3], coverage_radius: f64) -> Result<usize> {
    if drones
        .iter()
        .any(|d| d.distance(user) > coverage_radius + GEOM_EPS)
    {
        return Err(Error::OutsideCoverage { x: user.x, y: user.y });
    }
    Ok(nearest_drone(user, drones))
}

fn nearest_drone(user: Vec2, drones: &[Vec2; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if drones[k].distance_sq(user) < drones[best].distance_sq(user) {
            best = k;
        }
    }
    best
}

fn check_distinct(drones: &[Vec2; 3]) -> Result<()> {
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        if drones[i].distance(drones[j]) <= GEOM_EPS {
            return Err(Error::CoincidentDrones(i, j));
        }
    }
    Ok(())
}

fn check_not_collinear(drones: &[Vec2; 3]) -> Result<()> {
    check_distinct(drones)?;
    let a = drones[1] - drones[0];
    let b = drones[2] - drones[0];
    if a.cross(b).abs() <= 1e-9 * a.norm() * b.norm() {
        return Err(Error::CollinearDrones);
    }
    Ok(())
}

/// Range differences at the non-reference drones, with Gaussian noise of
/// standard deviation `sigma` meters.
pub fn generate_tdoa<R: Rng + ?Sized>(
    user: Vec2,
    drones: &[Vec2; 3],
    reference: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<[TdoaMeasurement; 2]> {
    check_distinct(drones)?;
    if reference > 2 {
        return Err(Error::InvalidConfig(format!("reference drone {reference}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise sigma {sigma} must be non-negative")));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let others = other_drones(reference);
    let r_ref = user.distance(drones[reference]);
    Ok(others.map(|k| {
        let eps = if sigma > 0.0 { noise.sample(rng) } else { 0.0 };
        TdoaMeasurement {
            reference_drone: reference,
            other_drone: k,
            delta_range: user.distance(drones[k]) - r_ref + eps,
            noise_sigma: sigma,
        }
    }))
}

fn other_drones(reference: usize) -> [usize; 2] {
    match reference {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Hyperbolic residuals at `p`.
pub fn tdoa_residuals(p: Vec2, measurements: &[TdoaMeasurement; 2], drones: &[Vec2; 3]) -> [f64; 2] {
    measurements.map(|m| {
        p.distance(drones[m.other_drone]) - p.distance(drones[m.reference_drone]) - m.delta_range
    })
}

/// Euclidean norm of [`tdoa_residuals`].
pub fn residual_norm(p: Vec2, measurements: &[TdoaMeasurement; 2], drones: &[Vec2; 3]) -> f64 {
    let r = tdoa_residuals(p, measurements, drones);
    r[0].hypot(r[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdoaSolution {
    pub position: Vec2,
    pub iterations: usize,
    pub converged: bool,
}

fn unit_or_zero(v: Vec2) -> Vec2 {
    v.normalized().unwrap_or(Vec2::ZERO)
}

/// Gauss–Newton on the two range-difference residuals starting from
/// `initial_guess`, with step halving whenever a full step would raise the
/// cost. Non-convergence is reported through [`TdoaSolution::converged`].
pub fn solve_tdoa(
    measurements: &[TdoaMeasurement; 2],
    drones: &[Vec2; 3],
    initial_guess: Vec2,
) -> Result<TdoaSolution> {
    check_not_collinear(drones)?;
    if !initial_guess.is_finite() {
        return Err(Error::InvalidConfig("non-finite initial guess".into()));
    }
    let cost = |p: Vec2| {
        let r = tdoa_residuals(p, measurements, drones);
        r[0] * r[0] + r[1] * r[1]
    };
    let mut p = initial_guess;
    let mut current = cost(p);
    for iter in 1..=MAX_ITERATIONS {
        let r = tdoa_residuals(p, measurements, drones);
        let rows = measurements.map(|m| {
            unit_or_zero(p - drones[m.other_drone]) - unit_or_zero(p - drones[m.reference_drone])
        });
        // Normal equations of the 2x2 system.
        let (a11, a12, a22) = (
            rows[0].x * rows[0].x + rows[1].x * rows[1].x,
            rows[0].x * rows[0].y + rows[1].x * rows[1].y,
            rows[0].y * rows[0].y + rows[1].y * rows[1].y,
        );
        let g = rows[0] * r[0] + rows[1] * r[1];
        let det = a11 * a22 - a12 * a12;
        if !(det.abs() > 1e-300) {
            debug!("singular TDOA normal matrix at iteration {iter}");
            return Ok(TdoaSolution { position: p, iterations: iter, converged: false });
        }
        let step = -Vec2::new(a22 * g.x - a12 * g.y, a11 * g.y - a12 * g.x) / det;
        let mut scale = 1.0;
        let mut next = p + step;
        let mut next_cost = cost(next);
        while next_cost > current && scale > 1e-6 {
            scale *= 0.5;
            next = p + step * scale;
            next_cost = cost(next);
        }
        let moved = next.distance(p);
        if next_cost <= current {
            p = next;
            current = next_cost;
        }
        if moved < STEP_TOLERANCE {
            return Ok(TdoaSolution { position: p, iterations: iter, converged: true });
        }
    }
    Ok(TdoaSolution {
        position: p,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

/// Uniform draw from the disk of radius `radius` around the origin.
pub fn uniform_disk_offset<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Vec2 {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    Vec2::from_angle(phi) * r
}

/// Bounded-error estimate: center drawn uniformly from the `r_e` disk around
/// the true position.
pub fn abstract_estimate<R: Rng + ?Sized>(user: &UserTruth, r_e: f64, rng: &mut R) -> Result<EstimateDisk> {
    if !(r_e >= 0.0) {
        return Err(Error::NegativeRadius(r_e));
    }
    let center = if r_e > 0.0 {
        user.position + uniform_disk_offset(r_e, rng)
    } else {
        user.position
    };
    Ok(EstimateDisk {
        user_id: user.id,
        center,
        radius: r_e,
    })
}

/// TDOA fix reported with the configured radius `r_e`. Falls back to the
/// abstract estimate if Gauss–Newton does not converge.
pub fn tdoa_estimate<R: Rng + ?Sized>(
    user: &UserTruth,
    drones: &[Vec2; 3],
    coverage_radius: f64,
    sigma: f64,
    r_e: f64,
    rng: &mut R,
) -> Result<EstimateDisk> {
    if !(r_e >= 0.0) {
        return Err(Error::NegativeRadius(r_e));
    }
    let serving = assign_serving_drone(user.position, drones, coverage_radius)?;
    let measurements = generate_tdoa(user.position, drones, serving, sigma, rng)?;
    let centroid = (drones[0] + drones[1] + drones[2]) / 3.0;
    let solution = solve_tdoa(&measurements, drones, centroid)?;
    if !solution.converged {
        debug!("TDOA fix for user {} did not converge; using bounded-error estimate", user.id);
        return abstract_estimate(user, r_e, rng);
    }
    Ok(EstimateDisk {
        user_id: user.id,
        center: solution.position,
        radius: r_e,
    })
}

/// Produces one estimate disk for `user` as seen from the fleet at `drones`.
pub fn make_estimate_disk<R: Rng + ?Sized>(
    user: &UserTruth,
    r_e: f64,
    mode: EstimateMode,
    drones: &[Vec2; 3],
    coverage_radius: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<EstimateDisk> {
    match mode {
        EstimateMode::Abstract => abstract_estimate(user, r_e, rng),
        EstimateMode::Tdoa => tdoa_estimate(user, drones, coverage_radius, sigma, r_e, rng),
    }
}

/// CSV with header `user_id,center_x_m,center_y_m,r_e_m`.
pub fn estimates_to_csv(disks: &[EstimateDisk]) -> String {
    let mut out = String::from("user_id,center_x_m,center_y_m,r_e_m\n");
    for d in disks {
        let _ = writeln!(out, "{},{},{},{}", d.user_id, d.center.x, d.center.y, d.radius);
    }
    out
}

/// Parses [`estimates_to_csv`] output.
pub fn estimates_from_csv(text: &str) -> Result<Vec<EstimateDisk>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("user_id,center_x_m,center_y_m,r_e_m") => {}
        other => return Err(Error::InvalidConfig(format!("unexpected estimate header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let bad = || Error::InvalidConfig(format!("bad estimate row {l:?}"));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(EstimateDisk {
                user_id: f[0].parse().map_err(|_| bad())?,
                center: Vec2::new(f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?),
                radius: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
