//! Flat `key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. Keys carry their unit:
//!
//! ```text
//! polygon_m = 0 0; 2000 0; 2000 2000; 0 2000
//! proportions = 0.5, 0.5
//! rc_m = 250
//! ```

use std::str::FromStr;

use dronebs::geometry::{ConvexPolygon, Vec2};
use dronebs::simulation::SimConfig;

/// Keys accepted in a config file, in documentation order.
pub const KEYS: &[&str] = &[
    "polygon_m",
    "drones",
    "d_m",
    "rc_m",
    "v_mps",
    "mission_time_s",
    "r_e_m",
    "lambda_u_per_km2",
    "r_s_m",
    "d_safe_m",
    "target_margin_m",
    "control_limit_m",
    "proportions",
    "seed",
    "tick_dt_s",
    "estimate_mode",
    "tdoa_sigma_m",
    "algorithm",
    "avoidance",
    "scale_factor",
];

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

/// `x y; x y; ...` with commas also accepted between coordinates.
pub fn parse_polygon(value: &str) -> Result<ConvexPolygon, String> {
    let mut vertices = Vec::new();
    for pair in value.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let coords: Vec<&str> = pair
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if coords.len() != 2 {
            return Err(format!("polygon_m: vertex {pair:?} needs two coordinates"));
        }
        vertices.push(Vec2::new(number("polygon_m", coords[0])?, number("polygon_m", coords[1])?));
    }
    ConvexPolygon::new(vertices).map_err(|e| format!("polygon_m: {e}"))
}

/// Comma- or whitespace-separated list of numbers.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| number(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {value:?}")),
    }
}

fn optional(key: &str, value: &str) -> Result<Option<f64>, String> {
    if value.eq_ignore_ascii_case("default") || value.is_empty() {
        Ok(None)
    } else {
        number(key, value).map(Some)
    }
}

/// Applies one setting to `cfg`.
pub fn apply(cfg: &mut SimConfig, key: &str, value: &str) -> Result<(), String> {
    let v = value.trim();
    match key {
        "polygon_m" => cfg.polygon = parse_polygon(v)?,
        "drones" => cfg.drones = number(key, v)?,
        "d_m" => cfg.side = number(key, v)?,
        "rc_m" => cfg.coverage_radius = number(key, v)?,
        "v_mps" => cfg.speed = number(key, v)?,
        "mission_time_s" => cfg.mission_time = number(key, v)?,
        "r_e_m" => cfg.r_e = number(key, v)?,
        "lambda_u_per_km2" => cfg.user_density = number::<f64>(key, v)? / dronebs::simulation::M2_PER_KM2,
        "r_s_m" => cfg.position_uncertainty = number(key, v)?,
        "d_safe_m" => cfg.d_safe = number(key, v)?,
        "target_margin_m" => cfg.target_margin = optional(key, v)?,
        "control_limit_m" => cfg.control_limit = optional(key, v)?,
        "proportions" => cfg.proportions = parse_list(key, v)?,
        "seed" => cfg.seed = number(key, v)?,
        "tick_dt_s" => cfg.tick_dt = number(key, v)?,
        "estimate_mode" => cfg.estimate_mode = v.parse().map_err(|e| format!("{key}: {e}"))?,
        "tdoa_sigma_m" => cfg.tdoa_sigma = number(key, v)?,
        "algorithm" => cfg.algorithm = v.parse().map_err(|e| format!("{key}: {e}"))?,
        "avoidance" => cfg.avoidance = parse_bool(key, v)?,
        "scale_factor" => cfg.scale_factor = number(key, v)?,
        _ => return Err(format!("unknown key {key:?} (expected one of {})", KEYS.join(", "))),
    }
    Ok(())
}

/// Applies every line of a config file on top of `cfg`.
pub fn apply_text(cfg: &mut SimConfig, text: &str) -> Result<(), String> {
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        apply(cfg, key.trim(), value).map_err(|e| format!("line {}: {e}", n + 1))?;
    }
    Ok(())
}

/// Renders `cfg` in the file format, so that parsing it back reproduces it.
pub fn render(cfg: &SimConfig) -> String {
    let polygon = cfg
        .polygon
        .vertices()
        .iter()
        .map(|p| format!("{} {}", p.x, p.y))
        .collect::<Vec<_>>()
        .join("; ");
    let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
    let opt = |v: Option<f64>| v.map_or_else(|| "default".to_string(), |x| x.to_string());
    [
        format!("polygon_m = {polygon}"),
        format!("drones = {}", cfg.drones),
        format!("d_m = {}", cfg.side),
        format!("rc_m = {}", cfg.coverage_radius),
        format!("v_mps = {}", cfg.speed),
        format!("mission_time_s = {}", cfg.mission_time),
        format!("r_e_m = {}", cfg.r_e),
        format!("lambda_u_per_km2 = {}", cfg.density_per_km2()),
        format!("r_s_m = {}", cfg.position_uncertainty),
        format!("d_safe_m = {}", cfg.d_safe),
        format!("target_margin_m = {}", opt(cfg.target_margin)),
        format!("control_limit_m = {}", opt(cfg.control_limit)),
        format!("proportions = {}", list(&cfg.proportions)),
        format!("seed = {}", cfg.seed),
        format!("tick_dt_s = {}", cfg.tick_dt),
        format!("estimate_mode = {}", cfg.estimate_mode),
        format!("tdoa_sigma_m = {}", cfg.tdoa_sigma),
        format!("algorithm = {}", cfg.algorithm),
        format!("avoidance = {}", cfg.avoidance),
        format!("scale_factor = {}", cfg.scale_factor),
    ]
    .join("\n")
        + "\n"
}
