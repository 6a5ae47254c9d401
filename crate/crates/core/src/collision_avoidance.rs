//! Pairwise drone deconfliction by closest point of approach.
//!
//! For drones A and B with relative position `l = p_B - p_A` and relative
//! velocity `c = v_B - v_A`, the time of closest approach under constant
//! velocities is `τ = -(l·c)/(c·c)` and the pass vector `l_p = l + c τ` is
//! the component of `l` orthogonal to `c`. A pair is threatening when the
//! pass distance falls short of `d_safe` with `τ > 0`. The avoidance
//! maneuver moves the two drones apart along the pass vector, splitting the
//! lateral displacement in inverse proportion to their speed shares, and
//! expresses each command as a waypoint offset to reach after `τ` seconds.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Vec2, GEOM_EPS};

/// Relative speeds below this (m/s) are treated as no relative motion.
const STATIC_SPEED: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneState {
    pub id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
}

impl DroneState {
    pub fn new(id: usize, position: Vec2, velocity: Vec2) -> Self {
        Self { id, position, velocity }
    }
}

/// Whether the pair is closing, opening, or holding its distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncounterKind {
    Approaching,
    Separating,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncounterGeometry {
    /// `p_B - p_A`.
    pub relative_position: Vec2,
    /// `v_B - v_A`.
    pub relative_velocity: Vec2,
    pub pass_vector: Vec2,
    pub time_to_closest_approach: f64,
    /// Pass distance minus `d_safe`; negative predicts a violation.
    pub margin: f64,
    pub kind: EncounterKind,
}

impl EncounterGeometry {
    pub fn pass_distance(&self) -> f64 {
        self.pass_vector.norm()
    }

    /// Predicted violation ahead in time.
    pub fn is_threatening(&self) -> bool {
        self.margin < 0.0 && self.kind == EncounterKind::Approaching
    }
}

/// Closest-approach geometry of the pair.
pub fn encounter(a: &DroneState, b: &DroneState, d_safe: f64) -> EncounterGeometry {
    let l = b.position - a.position;
    let c = b.velocity - a.velocity;
    let cc = c.norm_sq();
    if cc.sqrt() <= STATIC_SPEED {
        return EncounterGeometry {
            relative_position: l,
            relative_velocity: c,
            pass_vector: l,
            time_to_closest_approach: 0.0,
            margin: l.norm() - d_safe,
            kind: EncounterKind::Static,
        };
    }
    let tau = -l.dot(c) / cc;
    let mut pass = l + c * tau;
    // Strip the residual component along c left by rounding.
    pass -= c * (pass.dot(c) / cc);
    EncounterGeometry {
        relative_position: l,
        relative_velocity: c,
        pass_vector: pass,
        time_to_closest_approach: tau,
        margin: pass.norm() - d_safe,
        kind: if tau > 0.0 {
            EncounterKind::Approaching
        } else {
            EncounterKind::Separating
        },
    }
}

/// Safety distance and avoidance tuning shared by all pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    /// Uncertainty radius of shared positions.
    pub position_uncertainty: f64,
    pub d_safe: f64,
    /// Margin above `d_safe` the maneuver aims for.
    pub target_margin: f64,
    /// Bound on commanded displacement magnitude; `None` uses `v τ + d_safe`.
    pub control_limit: Option<f64>,
    /// Cruise speed used for the default control limit.
    pub max_speed: f64,
}

impl SafetyParams {
    /// Requires `d_safe > 2 r_s` and a positive target margin.
    pub fn new(position_uncertainty: f64, d_safe: f64, max_speed: f64) -> Result<Self> {
        let p = Self {
            position_uncertainty,
            d_safe,
            target_margin: d_safe / 2.0,
            control_limit: None,
            max_speed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.position_uncertainty >= 0.0) {
            return Err(Error::InvalidSafety(format!(
                "position uncertainty {} must be non-negative",
                self.position_uncertainty
            )));
        }
        if !(self.d_safe > 2.0 * self.position_uncertainty) {
            return Err(Error::InvalidSafety(format!(
                "d_safe {} must exceed twice the position uncertainty {}",
                self.d_safe, self.position_uncertainty
            )));
        }
        if !(self.target_margin > 0.0) {
            return Err(Error::InvalidSafety(format!(
                "target margin {} must be positive",
                self.target_margin
            )));
        }
        if let Some(u) = self.control_limit {
            if !(u > 0.0) {
                return Err(Error::InvalidSafety(format!("control limit {u} must be positive")));
            }
        }
        Ok(())
    }

    pub fn control_limit_for(&self, tau: f64) -> f64 {
        self.control_limit
            .unwrap_or(self.max_speed * tau + self.d_safe)
    }
}

/// Commanded waypoint offsets for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidanceCommand {
    /// Lateral offsets away from the other drone.
    pub lateral_a: Vec2,
    pub lateral_b: Vec2,
    /// Displacements to fly over the next `horizon` seconds (`v τ + lateral`).
    pub displacement_a: Vec2,
    pub displacement_b: Vec2,
    pub clamped_a: bool,
    pub clamped_b: bool,
    pub horizon: f64,
}

/// Total lateral separation to add so that flying straight to the offset
/// waypoints over `τ` yields a closest approach of `pass_goal`.
///
/// With `a = |l_p|`, `L = |c| τ` and goal `K`, the new relative track runs
/// from `(a, -L)` to `(a + D, 0)` in pass/velocity coordinates, so its
/// distance from the origin is `L (a + D) / sqrt(D² + L²)`. Solving for `D`
/// gives the positive root below; it tends to `K - a` as `L` grows. Returns
/// `None` when `L <= K`, where no straight-line maneuver reaches the goal.
pub fn required_separation(pass: f64, closing: f64, pass_goal: f64) -> Option<f64> {
    let (a, l, k) = (pass, closing, pass_goal);
    if a >= k {
        return Some(0.0);
    }
    if l <= k {
        return None;
    }
    let disc = l * l + a * a - k * k;
    Some((l * k * disc.sqrt() - a * l * l) / (l * l - k * k))
}

/// Split of a lateral displacement between A and B: each drone's share is
/// the other drone's fraction of the combined speed.
pub fn speed_shares(speed_a: f64, speed_b: f64) -> Result<(f64, f64)> {
    let total = speed_a + speed_b;
    if !(total > 0.0) {
        return Err(Error::StationaryPair);
    }
    Ok((speed_b / total, speed_a / total))
}

/// Avoidance command for a threatening encounter.
///
/// Drone A is pushed along `-l_p` and B along `+l_p`, since `l_p` points
/// from A to B at closest approach. A perfect head-on pair (`l_p = 0`)
/// separates along the counter-clockwise perpendicular of `c`.
pub fn avoidance_command(
    a: &DroneState,
    b: &DroneState,
    geom: &EncounterGeometry,
    params: &SafetyParams,
) -> Result<AvoidanceCommand> {
    let tau = geom.time_to_closest_approach;
    let (share_a, share_b) = speed_shares(a.velocity.norm(), b.velocity.norm())?;
    let pass_dir = (geom.pass_distance() > GEOM_EPS)
        .then(|| geom.pass_vector.normalized())
        .flatten();
    let toward_b = match pass_dir {
        Some(u) => u,
        None => geom
            .relative_velocity
            .normalized()
            .ok_or(Error::DegenerateEncounter)?
            .perp(),
    };
    let limit = params.control_limit_for(tau);
    let closing = geom.relative_velocity.norm() * tau;
    let goal = params.d_safe + params.target_margin;
    let (lateral_a, lateral_b) = match required_separation(geom.pass_distance(), closing, goal) {
        Some(total) => (-toward_b * (total * share_a), toward_b * (total * share_b)),
        // Unreachable goal: saturate both commands laterally.
        None => {
            let active = |share: f64| if share > 0.0 { limit } else { 0.0 };
            (-toward_b * active(share_a), toward_b * active(share_b))
        }
    };
    let (displacement_a, clamped_a) = (a.velocity * tau + lateral_a).clamp_norm(limit);
    let (displacement_b, clamped_b) = (b.velocity * tau + lateral_b).clamp_norm(limit);
    Ok(AvoidanceCommand {
        lateral_a,
        lateral_b,
        displacement_a,
        displacement_b,
        clamped_a,
        clamped_b,
        horizon: tau,
    })
}

/// Per-drone result of [`deconflict`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeconflictCommand {
    /// Summed lateral offsets over all threatening pairs.
    pub lateral: Vec2,
    /// Velocity change realizing the offsets over each pair's horizon.
    pub velocity_adjustment: Vec2,
    pub clamped: bool,
    pub threats: usize,
    /// Shortest time to closest approach among this drone's threats.
    pub horizon: f64,
}

impl DeconflictCommand {
    pub fn is_active(&self) -> bool {
        self.threats > 0
    }

    /// Velocity change to hold for one step of length `dt`. A maneuver due
    /// sooner than `dt` is spread over the step instead of overshooting.
    pub fn step_velocity(&self, dt: f64) -> Vec2 {
        if !self.is_active() {
            return Vec2::ZERO;
        }
        self.velocity_adjustment * (self.horizon / dt).min(1.0)
    }
}

/// Evaluates every pair and accumulates avoidance offsets per drone, in
/// pair-index order. `exempt(i, j)` skips pairs whose spacing is held by
/// other means, e.g. drones of one rigid formation.
pub fn deconflict_with<F>(drones: &[DroneState], params: &SafetyParams, exempt: F) -> Vec<DeconflictCommand>
where
    F: Fn(usize, usize) -> bool,
{
    accumulate(drones, params, exempt, |_, _, g| g.is_threatening()).0
}

fn accumulate<F, G>(
    drones: &[DroneState],
    params: &SafetyParams,
    exempt: F,
    engage: G,
) -> (Vec<DeconflictCommand>, Vec<(usize, usize)>)
where
    F: Fn(usize, usize) -> bool,
    G: Fn(usize, usize, &EncounterGeometry) -> bool,
{
    let mut out = vec![DeconflictCommand::default(); drones.len()];
    let mut engaged = Vec::new();
    for i in 0..drones.len() {
        for j in i + 1..drones.len() {
            if exempt(i, j) {
                continue;
            }
            let (a, b) = (&drones[i], &drones[j]);
            let geom = encounter(a, b, params.d_safe);
            if !engage(i, j, &geom) {
                continue;
            }
            let Ok(cmd) = avoidance_command(a, b, &geom, params) else {
                continue;
            };
            engaged.push((i, j));
            for (k, lateral) in [(i, cmd.lateral_a), (j, cmd.lateral_b)] {
                let o = &mut out[k];
                o.horizon = if o.is_active() { o.horizon.min(cmd.horizon) } else { cmd.horizon };
                o.lateral += lateral;
                o.velocity_adjustment += lateral / cmd.horizon;
                o.threats += 1;
            }
        }
    }
    for cmd in out.iter_mut().filter(|c| c.is_active()) {
        let (lateral, clamped) = cmd.lateral.clamp_norm(params.control_limit_for(cmd.horizon));
        if clamped {
            cmd.velocity_adjustment = cmd.velocity_adjustment * (lateral.norm() / cmd.lateral.norm());
        }
        cmd.lateral = lateral;
        cmd.clamped = clamped;
    }
    (out, engaged)
}

/// Deconfliction for a discrete-time loop that re-plans every step.
///
/// Pairs are engaged as soon as their predicted pass distance falls short of
/// `d_safe + target_margin`, not only once it falls short of `d_safe`. A
/// re-planning loop that waits for an actual threat releases each pair right
/// at `d_safe`, lets it drift back onto its nominal course, and reacts again
/// only when the encounter is seconds away and needs a large maneuver.
pub fn deconflict_early<F>(drones: &[DroneState], params: &SafetyParams, exempt: F) -> Vec<DeconflictCommand>
where
    F: Fn(usize, usize) -> bool,
{
    let goal = params.d_safe + params.target_margin;
    accumulate(drones, params, exempt, |_, _, g| {
        g.is_threatening() || (g.kind == EncounterKind::Approaching && g.pass_distance() < goal)
    })
    .0
}

/// Velocity changes for one step of length `dt`, refined over up to
/// `rounds` passes. The first pass engages early as in
/// [`deconflict_early`]; later passes re-evaluate every pair with the
/// velocities adjusted so far and correct only actual threats, so a maneuver
/// that creates a new conflict is fixed before it is flown.
pub fn resolve_step(drones: &[DroneState], params: &SafetyParams, dt: f64, rounds: usize) -> Vec<Vec2> {
    resolve_step_grouped(drones, params, dt, rounds, |i| i)
}

/// [`resolve_step`] for drones flying in rigid groups: pairs within a group
/// are ignored and every member receives the mean adjustment of its
/// engaged members.
pub fn resolve_step_grouped<G>(drones: &[DroneState], params: &SafetyParams, dt: f64, rounds: usize, group: G) -> Vec<Vec2>
where
    G: Fn(usize) -> usize,
{
    let groups: Vec<usize> = (0..drones.len()).map(&group).collect();
    let mut adjusted = drones.to_vec();
    let mut total = vec![Vec2::ZERO; drones.len()];
    for round in 0..rounds {
        let exempt = |i: usize, j: usize| groups[i] == groups[j];
        let cmds = if round == 0 {
            deconflict_early(&adjusted, params, exempt)
        } else {
            deconflict_with(&adjusted, params, exempt)
        };
        if !cmds.iter().any(DeconflictCommand::is_active) {
            break;
        }
        let mut sums: HashMap<usize, (Vec2, usize)> = HashMap::new();
        for (g, cmd) in groups.iter().zip(&cmds).filter(|(_, c)| c.is_active()) {
            let e = sums.entry(*g).or_insert((Vec2::ZERO, 0));
            e.0 += cmd.step_velocity(dt);
            e.1 += 1;
        }
        for ((state, sum), g) in adjusted.iter_mut().zip(total.iter_mut()).zip(&groups) {
            if let Some((v, n)) = sums.get(g) {
                let dv = *v / *n as f64;
                state.velocity += dv;
                *sum += dv;
            }
        }
    }
    total
}

/// [`deconflict_with`] over all pairs.
pub fn deconflict(drones: &[DroneState], params: &SafetyParams) -> Vec<DeconflictCommand> {
    deconflict_with(drones, params, |_, _| false)
}
