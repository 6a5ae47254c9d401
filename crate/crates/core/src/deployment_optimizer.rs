//! Greedy sequential placement of drone coverage disks over estimate disks.
//!
//! Each round places one disk so that it entirely covers the largest number
//! of still-uncovered estimate disks, then removes them. A disk of radius
//! `Rc` entirely covers an estimate disk of radius `r_e` exactly when its
//! center is within `Rc - r_e` of the estimate's center, so each round is a
//! maximum point-cover problem with per-point radii. It is solved exactly:
//! some optimal center can always be slid until it sits on two of the
//! covered points' radius circles (or on a lone point), so the circle
//! centers and pairwise circle intersections are a complete candidate set.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Vec2, GEOM_EPS};
use crate::localization::EstimateDisk;

/// Whether a coverage disk of radius `rc` at `drone_center` entirely covers `target`.
pub fn covers_entirely(drone_center: Vec2, target: &EstimateDisk, rc: f64) -> Result<bool> {
    if !(rc > target.radius) {
        return Err(Error::NonPositiveEffectiveRadius { rc, r_e: target.radius });
    }
    Ok(within(drone_center, target.center, rc - target.radius))
}

fn within(p: Vec2, q: Vec2, radius: f64) -> bool {
    p.distance(q) <= radius + GEOM_EPS
}

/// Targets to cover with one disk of radius `coverage_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverInstance {
    targets: Vec<EstimateDisk>,
    coverage_radius: f64,
    /// Reported as the center when there is nothing to cover.
    pub fallback_center: Vec2,
}

impl CoverInstance {
    pub fn new(targets: Vec<EstimateDisk>, coverage_radius: f64) -> Result<Self> {
        for t in &targets {
            if !t.center.is_finite() {
                return Err(Error::InvalidConfig(format!("target {} has a non-finite center", t.user_id)));
            }
            if !(coverage_radius > t.radius) {
                return Err(Error::NonPositiveEffectiveRadius {
                    rc: coverage_radius,
                    r_e: t.radius,
                });
            }
        }
        Ok(Self {
            targets,
            coverage_radius,
            fallback_center: Vec2::ZERO,
        })
    }

    pub fn with_fallback_center(mut self, center: Vec2) -> Self {
        self.fallback_center = center;
        self
    }

    pub fn targets(&self) -> &[EstimateDisk] {
        &self.targets
    }

    pub fn coverage_radius(&self) -> f64 {
        self.coverage_radius
    }

    fn effective_radius(&self, i: usize) -> f64 {
        self.coverage_radius - self.targets[i].radius
    }
}

/// One placed drone and the targets it entirely covers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub center: Vec2,
    /// Sorted user ids.
    pub covered_ids: Vec<usize>,
}

impl PlacementResult {
    pub fn count(&self) -> usize {
        self.covered_ids.len()
    }
}

/// Uniform bucket grid over target centers.
struct Buckets {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl Buckets {
    fn new(points: impl Iterator<Item = Vec2>, cell: f64) -> Self {
        let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.enumerate() {
            map.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, map }
    }

    fn key(p: Vec2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Indices in cells within `reach` cells of `p`.
    fn near(&self, p: Vec2, reach: i64) -> impl Iterator<Item = usize> + '_ {
        let (cx, cy) = Self::key(p, self.cell);
        (cx - reach..=cx + reach).flat_map(move |x| {
            (cy - reach..=cy + reach).flat_map(move |y| {
                self.map.get(&(x, y)).into_iter().flatten().copied()
            })
        })
    }
}

/// Candidate centers for the exact search: every target center plus the
/// intersection points of every pair of effective-radius circles.
fn candidates_for(inst: &CoverInstance, buckets: &Buckets, i: usize) -> Vec<Vec2> {
    let ci = inst.targets[i].center;
    let ri = inst.effective_radius(i);
    let mut out = vec![ci];
    for j in buckets.near(ci, 2) {
        if j <= i {
            continue;
        }
        let cj = inst.targets[j].center;
        let rj = inst.effective_radius(j);
        let delta = cj - ci;
        let d = delta.norm();
        if d == 0.0 || d > ri + rj + GEOM_EPS || d < (ri - rj).abs() {
            continue;
        }
        let a = (d * d + ri * ri - rj * rj) / (2.0 * d);
        let h = (ri * ri - a * a).max(0.0).sqrt();
        let ux = delta / d;
        let base = ci + ux * a;
        if h == 0.0 {
            out.push(base);
        } else {
            out.push(base + ux.perp() * h);
            out.push(base - ux.perp() * h);
        }
    }
    out
}

fn covered_at(inst: &CoverInstance, buckets: &Buckets, p: Vec2) -> Vec<usize> {
    buckets
        .near(p, 1)
        .filter(|&k| within(p, inst.targets[k].center, inst.effective_radius(k)))
        .collect()
}

/// (count, center), better first: higher count, then lexicographically smaller center.
fn better(a: (usize, Vec2), b: (usize, Vec2)) -> (usize, Vec2) {
    match b.0.cmp(&a.0).then(a.1.lex_cmp(&b.1)) {
        std::cmp::Ordering::Greater => b,
        _ => a,
    }
}

/// Globally optimal single-disk placement.
pub fn best_single_disk(inst: &CoverInstance) -> PlacementResult {
    if inst.targets.is_empty() {
        return PlacementResult {
            center: inst.fallback_center,
            covered_ids: Vec::new(),
        };
    }
    let max_eff = (0..inst.targets.len())
        .map(|i| inst.effective_radius(i))
        .fold(0.0, f64::max);
    let buckets = Buckets::new(inst.targets.iter().map(|t| t.center), max_eff + GEOM_EPS);
    let best = (0..inst.targets.len())
        .into_par_iter()
        .map(|i| {
            candidates_for(inst, &buckets, i)
                .into_iter()
                .map(|p| {
                    let n = buckets
                        .near(p, 1)
                        .filter(|&k| within(p, inst.targets[k].center, inst.effective_radius(k)))
                        .count();
                    (n, p)
                })
                .fold((0, Vec2::new(f64::INFINITY, f64::INFINITY)), better)
        })
        .reduce(|| (0, Vec2::new(f64::INFINITY, f64::INFINITY)), better);
    let mut covered_ids: Vec<usize> = covered_at(inst, &buckets, best.1)
        .into_iter()
        .map(|k| inst.targets[k].user_id)
        .collect();
    covered_ids.sort_unstable();
    PlacementResult {
        center: best.1,
        covered_ids,
    }
}

/// Sequentially placed drones.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentPlan {
    pub placements: Vec<PlacementResult>,
    pub total_covered: usize,
    /// Drones left without a placement because every target was covered first.
    pub unplaced: usize,
}

impl DeploymentPlan {
    pub fn centers(&self) -> Vec<Vec2> {
        self.placements.iter().map(|p| p.center).collect()
    }

    /// CSV with header `drone_index,x_m,y_m,covered_count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("drone_index,x_m,y_m,covered_count\n");
        for (i, p) in self.placements.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", i, p.center.x, p.center.y, p.count());
        }
        out
    }
}

/// Places up to `m` drones one at a time, each covering the most remaining
/// targets. Stops early once every target is covered.
pub fn greedy_deploy(targets: &[EstimateDisk], m: usize, rc: f64) -> Result<DeploymentPlan> {
    greedy_deploy_with_fallback(targets, m, rc, Vec2::ZERO)
}

pub fn greedy_deploy_with_fallback(
    targets: &[EstimateDisk],
    m: usize,
    rc: f64,
    fallback_center: Vec2,
) -> Result<DeploymentPlan> {
    if m == 0 {
        return Err(Error::InvalidConfig("at least one drone is required".into()));
    }
    let mut remaining = CoverInstance::new(targets.to_vec(), rc)?.with_fallback_center(fallback_center);
    let mut placements = Vec::with_capacity(m);
    for _ in 0..m {
        if remaining.targets.is_empty() {
            break;
        }
        let placement = best_single_disk(&remaining);
        remaining
            .targets
            .retain(|t| placement.covered_ids.binary_search(&t.user_id).is_err());
        placements.push(placement);
    }
    let total_covered = placements.iter().map(PlacementResult::count).sum();
    Ok(DeploymentPlan {
        unplaced: m - placements.len(),
        placements,
        total_covered,
    })
}
