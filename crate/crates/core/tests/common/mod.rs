//! Helpers shared by the integration tests. Everything here is written
//! independently of the library so it can serve as an oracle.

#![allow(dead_code)]

use dronebs::geometry::{ConvexPolygon, Vec2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, no collinear points.
pub fn hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Random convex polygon: hull of `n` uniform points in a `size` square,
/// retried until the hull has at least three vertices and is not a sliver.
pub fn random_convex_polygon<R: Rng>(rng: &mut R, n: usize, size: f64) -> ConvexPolygon {
    loop {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..size), rng.random_range(0.0..size)))
            .collect();
        let h = hull(&pts);
        if h.len() < 3 || shoelace(&h) < 0.02 * size * size {
            continue;
        }
        if let Ok(p) = ConvexPolygon::new(h.iter().map(|&(x, y)| Vec2::new(x, y)).collect()) {
            return p;
        }
    }
}

/// Absolute polygon area by the shoelace formula.
pub fn shoelace(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * s.abs()
}

pub fn shoelace_poly(p: &ConvexPolygon) -> f64 {
    shoelace(&p.vertices().iter().map(|v| (v.x, v.y)).collect::<Vec<_>>())
}

/// Whether `q` is inside the counter-clockwise convex ring `pts`, with
/// tolerance `eps` in distance units.
pub fn inside_convex(pts: &[Vec2], q: Vec2, eps: f64) -> bool {
    let n = pts.len();
    (0..n).all(|i| {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let e = b - a;
        let len = (e.x * e.x + e.y * e.y).sqrt();
        (e.x * (q.y - a.y) - e.y * (q.x - a.x)) / len >= -eps
    })
}

/// Distance from `p` to segment `ab`.
pub fn seg_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let len2 = ex * ex + ey * ey;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (a.x + ex * t - p.x, a.y + ey * t - p.y);
    (dx * dx + dy * dy).sqrt()
}

pub fn polyline_dist(p: Vec2, path: &[Vec2]) -> f64 {
    if path.len() == 1 {
        return ((p.x - path[0].x).powi(2) + (p.y - path[0].y).powi(2)).sqrt();
    }
    path.windows(2)
        .map(|w| seg_dist(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Largest number of centers within `radius` of a single point on a
/// `step` grid, found by rasterizing each disk into a count raster.
pub fn grid_cover_count(centers: &[Vec2], radius: f64, step: f64) -> usize {
    if centers.is_empty() {
        return 0;
    }
    let min_x = centers.iter().map(|c| c.x).fold(f64::INFINITY, f64::min) - radius - step;
    let min_y = centers.iter().map(|c| c.y).fold(f64::INFINITY, f64::min) - radius - step;
    let max_x = centers.iter().map(|c| c.x).fold(f64::NEG_INFINITY, f64::max) + radius + step;
    let max_y = centers.iter().map(|c| c.y).fold(f64::NEG_INFINITY, f64::max) + radius + step;
    let nx = ((max_x - min_x) / step).ceil() as usize + 1;
    let ny = ((max_y - min_y) / step).ceil() as usize + 1;
    let mut raster = vec![0u16; nx * ny];
    let r2 = radius * radius;
    for c in centers {
        let i0 = (((c.x - radius - min_x) / step).floor().max(0.0)) as usize;
        let i1 = ((((c.x + radius - min_x) / step).ceil()) as usize).min(nx - 1);
        let j0 = (((c.y - radius - min_y) / step).floor().max(0.0)) as usize;
        let j1 = ((((c.y + radius - min_y) / step).ceil()) as usize).min(ny - 1);
        for j in j0..=j1 {
            let y = min_y + j as f64 * step;
            let dy2 = (y - c.y) * (y - c.y);
            if dy2 > r2 {
                continue;
            }
            for i in i0..=i1 {
                let x = min_x + i as f64 * step;
                if (x - c.x) * (x - c.x) + dy2 <= r2 {
                    raster[j * nx + i] += 1;
                }
            }
        }
    }
    raster.into_iter().max().unwrap_or(0) as usize
}

/// Minimum distance between two constant-velocity points over `[0, t_end]`
/// sampled on a uniform grid of `steps` intervals.
pub fn sampled_min_distance(pa: Vec2, va: Vec2, pb: Vec2, vb: Vec2, t_end: f64, steps: usize) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=steps {
        let t = t_end * k as f64 / steps as f64;
        let dx = (pb.x + vb.x * t) - (pa.x + va.x * t);
        let dy = (pb.y + vb.y * t) - (pa.y + va.y * t);
        let d = (dx * dx + dy * dy).sqrt();
        if d < best.0 {
            best = (d, t);
        }
    }
    best
}
