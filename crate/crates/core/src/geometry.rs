//! Planar primitives: vectors, convex polygons, disks, and the fixed
//! three-drone formation with its overlapped coverage.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Absolute slack for geometric predicates, in meters.
pub const GEOM_EPS: f64 = 1e-9;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// A point or displacement in the ground plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn distance_sq(self, o: Vec2) -> f64 {
        (self - o).norm_sq()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rescales to at most `limit` in magnitude; reports whether it clamped.
    pub fn clamp_norm(self, limit: f64) -> (Vec2, bool) {
        let n = self.norm();
        if n > limit {
            (self * (limit / n), true)
        } else {
            (self, false)
        }
    }

    /// Total order on (x, then y); used for deterministic tie-breaks.
    pub fn lex_cmp(&self, o: &Vec2) -> std::cmp::Ordering {
        self.x.total_cmp(&o.x).then(self.y.total_cmp(&o.y))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Shoelace signed area; positive for counter-clockwise order.
pub fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    // Anchored at the first vertex to limit cancellation for far-off coordinates.
    let o = points[0];
    let mut twice = 0.0;
    for i in 1..n - 1 {
        twice += (points[i] - o).cross(points[i + 1] - o);
    }
    twice / 2.0
}

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
    area: f64,
}

impl ConvexPolygon {
    /// Builds a polygon from vertices in either orientation. Duplicate and
    /// collinear vertices are dropped; anything non-convex is rejected.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(format!(
                "{} vertices, need at least 3",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let mut pts = vertices;
        if signed_area(&pts) < 0.0 {
            pts.reverse();
        }
        let pts = simplify_ring(pts);
        if pts.len() < 3 {
            return Err(Error::DegeneratePolygon(
                "fewer than 3 distinct non-collinear vertices".into(),
            ));
        }
        let n = pts.len();
        let mut turning = 0.0;
        for i in 0..n {
            let e0 = pts[(i + 1) % n] - pts[i];
            let e1 = pts[(i + 2) % n] - pts[(i + 1) % n];
            if e0.cross(e1) <= 0.0 {
                return Err(Error::DegeneratePolygon(format!(
                    "not convex at vertex {}",
                    (i + 1) % n
                )));
            }
            turning += e0.cross(e1).atan2(e0.dot(e1));
        }
        if (turning - 2.0 * PI).abs() > 1e-6 {
            return Err(Error::DegeneratePolygon("self-intersecting ring".into()));
        }
        let area = signed_area(&pts);
        if !(area > 0.0) {
            return Err(Error::DegeneratePolygon("zero area".into()));
        }
        Ok(Self {
            vertices: pts,
            area,
        })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn centroid(&self) -> Vec2 {
        let o = self.vertices[0];
        let mut acc = Vec2::ZERO;
        let mut twice = 0.0;
        for w in self.vertices[1..].windows(2) {
            let (a, b) = (w[0] - o, w[1] - o);
            let c = a.cross(b);
            acc += (a + b) * c;
            twice += c;
        }
        o + acc / (3.0 * twice)
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = self.vertices[0];
        let mut hi = lo;
        for v in &self.vertices[1..] {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Closed containment with [`GEOM_EPS`] slack.
    pub fn contains(&self, p: Vec2) -> bool {
        self.edges().all(|(a, b)| {
            let e = b - a;
            e.cross(p - a) >= -GEOM_EPS * e.norm()
        })
    }

    /// Signed distance to the boundary: positive inside, negative outside
    /// (outside values are exact only up to the nearest edge line).
    pub fn boundary_clearance(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let e = b - a;
                e.cross(p - a) / e.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `(min, max)` of `axis · v` over the vertices.
    pub fn projection_range(&self, axis: Vec2) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|v| axis.dot(*v))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s), hi.max(s))
            })
    }

    /// Diameter function: extent of the projection onto the axis at `direction`.
    pub fn width(&self, direction: f64) -> f64 {
        let (lo, hi) = self.projection_range(Vec2::from_angle(direction));
        hi - lo
    }

    /// Intersection with the half-plane `normal · p <= offset`; `None` when
    /// nothing of positive area remains.
    pub fn clip(&self, normal: Vec2, offset: f64) -> Option<ConvexPolygon> {
        let pts = clip_ring(&self.vertices, normal, offset);
        ConvexPolygon::new(pts).ok()
    }

    /// Range of `along · p` over the part of the polygon inside the slab
    /// `lo <= across · p <= hi`. A zero-width slab gives the chord.
    pub fn slab_extent(&self, across: Vec2, lo: f64, hi: f64, along: Vec2) -> Option<(f64, f64)> {
        let pts = clip_ring(&self.vertices, across, hi);
        let pts = clip_ring(&pts, -across, -lo);
        if pts.is_empty() {
            return None;
        }
        Some(
            pts.iter()
                .map(|p| along.dot(*p))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| {
                    (a.min(s), b.max(s))
                }),
        )
    }
}

fn simplify_ring(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut removed = false;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let cur = pts[i];
            let next = pts[(i + 1) % n];
            if cur.distance(prev) <= GEOM_EPS {
                removed = true;
                continue;
            }
            let (e0, e1) = (cur - prev, next - cur);
            if e1.norm() > GEOM_EPS && e0.cross(e1).abs() <= 1e-12 * e0.norm() * e1.norm() && e0.dot(e1) > 0.0 {
                removed = true;
                continue;
            }
            out.push(cur);
        }
        pts = out;
        if !removed {
            return pts;
        }
    }
}

/// Sutherland–Hodgman against one half-plane; no validation of the result.
fn clip_ring(pts: &[Vec2], normal: Vec2, offset: f64) -> Vec<Vec2> {
    let n = pts.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let sa = normal.dot(a) - offset;
        let sb = normal.dot(b) - offset;
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Diameter function of `poly` at `direction`.
pub fn polygon_width(poly: &ConvexPolygon, direction: f64) -> f64 {
    poly.width(direction)
}

/// Closed disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Vec2, radius: f64) -> Self {
        debug_assert!(radius >= 0.0);
        Self { center, radius }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        disk_contains(self, p)
    }
}

/// Closed disk membership with [`GEOM_EPS`] slack.
pub fn disk_contains(disk: &Disk, p: Vec2) -> bool {
    p.distance(disk.center) <= disk.radius + GEOM_EPS
}

/// Area covered by all three disks of radius `rc` centred on an equilateral
/// triangle of side `d`.
pub fn overlap_area(d: f64, rc: f64) -> Result<f64> {
    let domain = Error::OverlapDomain { d, rc };
    if !(rc > 0.0) || !rc.is_finite() || !(d >= 0.0) || !d.is_finite() {
        return Err(domain);
    }
    let d_max = SQRT_3 * rc;
    if d > d_max * (1.0 + 1e-12) {
        return Err(domain);
    }
    let full = PI * rc * rc;
    if d == 0.0 {
        return Ok(full);
    }
    if d >= d_max {
        return Ok(0.0);
    }
    let alpha = (d / (2.0 * rc)).min(1.0).acos();
    let area = rc * rc * (3.0 * alpha - FRAC_PI_2) - 1.5 * d * (rc * rc - d * d / 4.0).max(0.0).sqrt()
        + SQRT_3 / 4.0 * d * d;
    Ok(area.clamp(0.0, full))
}

/// Pose and shape of a three-drone fleet flying a rigid equilateral triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetGeometry {
    pub centroid: Vec2,
    /// Direction of the leading vertex from the centroid, radians.
    pub heading: f64,
    pub side: f64,
    pub coverage_radius: f64,
}

impl FleetGeometry {
    pub fn new(centroid: Vec2, heading: f64, side: f64, coverage_radius: f64) -> Result<Self> {
        validate_formation(side, coverage_radius)?;
        if !centroid.is_finite() || !heading.is_finite() {
            return Err(Error::InvalidFormation("non-finite pose".into()));
        }
        Ok(Self {
            centroid,
            heading,
            side,
            coverage_radius,
        })
    }

    /// Same shape, different pose.
    pub fn moved_to(&self, centroid: Vec2, heading: f64) -> Self {
        Self {
            centroid,
            heading,
            ..*self
        }
    }

    pub fn drone_positions(&self) -> [Vec2; 3] {
        fleet_drone_positions(self)
    }

    pub fn guaranteed_footprint(&self) -> Disk {
        guaranteed_footprint(self)
    }

    pub fn overlap_area(&self) -> f64 {
        overlap_area(self.side, self.coverage_radius).unwrap_or(0.0)
    }
}

/// Checks `0 <= side < sqrt(3) * rc`.
pub fn validate_formation(side: f64, rc: f64) -> Result<()> {
    if !(rc > 0.0) || !rc.is_finite() {
        return Err(Error::InvalidFormation(format!("coverage radius {rc} must be positive")));
    }
    if !(side >= 0.0) || !side.is_finite() {
        return Err(Error::InvalidFormation(format!("side {side} must be non-negative")));
    }
    if side >= SQRT_3 * rc {
        return Err(Error::InvalidFormation(format!(
            "side {side} m leaves no triple overlap for Rc = {rc} m"
        )));
    }
    Ok(())
}

/// Drone ground positions; vertex 0 leads along the heading.
pub fn fleet_drone_positions(fg: &FleetGeometry) -> [Vec2; 3] {
    let r = fg.side / SQRT_3;
    let step = 2.0 * PI / 3.0;
    [0.0, 1.0, 2.0].map(|k| fg.centroid + Vec2::from_angle(fg.heading + k * step) * r)
}

/// Radius of the centred disk inside all three coverage disks.
pub fn footprint_radius(side: f64, rc: f64) -> f64 {
    (rc - side / SQRT_3).max(0.0)
}

/// Centred disk lying inside every drone's coverage disk.
pub fn guaranteed_footprint(fg: &FleetGeometry) -> Disk {
    Disk::new(fg.centroid, footprint_radius(fg.side, fg.coverage_radius))
}
