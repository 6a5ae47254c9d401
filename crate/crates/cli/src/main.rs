//! `dronebs` batch front-end.
//!
//! Exit codes: 0 on success, 2 when the configuration is invalid (nothing is
//! written), 3 when a run or an output write fails. Failures print a single
//! `error[<kind>]: <reason>` line on stderr.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use dronebs::deployment_optimizer::DeploymentPlan;
use dronebs::localization::{estimates_to_csv, EstimateMode};
use dronebs::simulation::{
    self, curves, curves_to_csv, metrics_to_csv, trace_to_csv, Algorithm, SimConfig, M2_PER_KM2,
};
use dronebs::sweep_planner::plan_sweep;

#[derive(Parser, Debug)]
#[command(name = "dronebs", version, about = "Drone base station sweep, localization and deployment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose the area and write fleet sweep routes.
    Plan(Common),
    /// Run one simulation and write its metrics and deployment.
    Simulate(Common),
    /// Run both algorithms over a density sweep with replications.
    Compare {
        #[command(flatten)]
        common: Common,
        /// User densities in users/km², comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0])]
        densities: Vec<f64>,
        /// Replications per density; seeds run from the base seed upward.
        #[arg(long, default_value_t = 30)]
        replications: usize,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the full-size published parameters instead of the
    /// desk-scale defaults.
    #[arg(long)]
    table3_faithful: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// proposed or random_search.
    #[arg(long)]
    algorithm: Option<String>,
    /// Position-estimate error radius, m.
    #[arg(long = "r-e")]
    r_e: Option<f64>,
    /// abstract or tdoa.
    #[arg(long)]
    estimate_mode: Option<String>,
    /// TDOA range-difference noise, m.
    #[arg(long)]
    sigma: Option<f64>,
    /// User density, users/km².
    #[arg(long)]
    lambda_u: Option<f64>,
    /// Also write per-tick drone positions to trace.csv.
    #[arg(long)]
    trace: bool,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (kind, msg, code) = match self {
            Self::Validation(m) => ("validation", m, 2),
            Self::Runtime(m) => ("runtime", m, 3),
        };
        eprintln!("error[{kind}]: {}", msg.replace('\n', " "));
        ExitCode::from(code)
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn build_config(common: &Common) -> Result<SimConfig, Failure> {
    let mut cfg = if common.table3_faithful {
        SimConfig::table3()
    } else {
        SimConfig::desk_scale()
    };
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        config::apply_text(&mut cfg, &text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(a) = &common.algorithm {
        cfg.algorithm = a.parse().map_err(invalid)?;
    }
    if let Some(r) = common.r_e {
        cfg.r_e = r;
    }
    if let Some(m) = &common.estimate_mode {
        cfg.estimate_mode = m.parse::<EstimateMode>().map_err(invalid)?;
    }
    if let Some(s) = common.sigma {
        cfg.tdoa_sigma = s;
    }
    if let Some(l) = common.lambda_u {
        cfg.user_density = l / M2_PER_KM2;
    }
    Ok(cfg)
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_plan(common: &Common) -> Result<(), Failure> {
    let cfg = build_config(common)?;
    let mut check = cfg.clone();
    check.algorithm = Algorithm::Proposed;
    check.validate().map_err(invalid)?;
    let plan = plan_sweep(&cfg.sweep_request()).map_err(invalid)?;

    let mut decomposition = String::from("sub_area,vertex,x_m,y_m\n");
    let mut waypoints = String::from("fleet_id,x_m,y_m\n");
    for fleet in &plan.fleets {
        for (k, v) in fleet.sub_area.vertices().iter().enumerate() {
            let _ = writeln!(decomposition, "{},{},{},{}", fleet.fleet_id, k, v.x, v.y);
        }
        for w in &fleet.waypoints {
            let _ = writeln!(waypoints, "{},{},{}", fleet.fleet_id, w.x, w.y);
        }
    }
    let mut summary = String::from(
        "fleet_id,sub_area_m2,lane_count,lane_spacing_m,path_length_m,estimated_duration_s\n",
    );
    for f in &plan.fleets {
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{}",
            f.fleet_id,
            f.sub_area.area(),
            f.lane_count,
            f.lane_spacing,
            f.path_length,
            f.estimated_duration
        );
    }
    write_outputs(
        &common.out_dir,
        &[
            ("decomposition.csv", decomposition),
            ("waypoints.csv", waypoints),
            ("routes.csv", summary),
            ("config.txt", config::render(&cfg)),
        ],
    )?;
    println!(
        "{} fleets, sweep direction {:.6} rad, footprint radius {:.3} m{}",
        plan.fleets.len(),
        plan.sweep_direction,
        plan.footprint_radius,
        if plan.scale_warning { ", area small relative to fleet footprint" } else { "" }
    );
    Ok(())
}

fn report_shortfall(cfg: &SimConfig, completed: bool) {
    if cfg.algorithm == Algorithm::Proposed && !completed {
        if let Ok(plan) = plan_sweep(&cfg.sweep_request()) {
            let needed = plan.fleets.iter().map(|f| f.estimated_duration).fold(0.0, f64::max);
            warn!(
                "sweep not finished: needs {needed:.0} s, mission budget {:.0} s",
                cfg.mission_time
            );
        }
    }
}

/// Three receivers leave two candidate fixes for users near a narrow
/// formation; only wider spacing makes the nearest one unique.
fn warn_ambiguous_tdoa(cfg: &SimConfig) {
    if cfg.estimate_mode == EstimateMode::Tdoa && cfg.side < 1.2 * cfg.coverage_radius {
        warn!(
            "tdoa fixes can land on a mirror solution when d_m ({}) is below 1.2 x rc_m ({})",
            cfg.side, cfg.coverage_radius
        );
    }
}

fn cmd_simulate(common: &Common) -> Result<(), Failure> {
    let cfg = build_config(common)?;
    cfg.validate().map_err(invalid)?;
    warn_ambiguous_tdoa(&cfg);
    let out = simulation::run(&cfg, common.trace).map_err(runtime)?;
    report_shortfall(&cfg, out.metrics.sweep_completed);

    let mut files = vec![
        ("metrics.csv", metrics_to_csv(std::slice::from_ref(&out.metrics))),
        ("deployment.csv", DeploymentPlan::to_csv(&out.plan)),
        ("config.txt", config::render(&cfg)),
    ];
    if cfg.algorithm == Algorithm::Proposed {
        files.push(("estimates.csv", estimates_to_csv(&out.estimates)));
    }
    if common.trace {
        files.push(("trace.csv", trace_to_csv(&out.trace)));
    }
    write_outputs(&common.out_dir, &files)?;
    let m = &out.metrics;
    println!(
        "{} seed {}: {} users, {} detected, {} served, {:.1} s",
        m.algorithm, m.seed, m.n_users, m.detected, m.served, m.elapsed
    );
    Ok(())
}

fn cmd_compare(common: &Common, densities: &[f64], replications: usize) -> Result<(), Failure> {
    let cfg = build_config(common)?;
    if densities.is_empty() {
        return Err(invalid("at least one density is required"));
    }
    if let Some(d) = densities.iter().find(|d| **d < 0.0 || !d.is_finite()) {
        return Err(invalid(format!("density {d} must be non-negative")));
    }
    if replications == 0 {
        return Err(invalid("replications must be at least 1"));
    }
    let mut check = cfg.clone();
    check.algorithm = Algorithm::Proposed;
    check.validate().map_err(invalid)?;
    warn_ambiguous_tdoa(&cfg);
    let rows = simulation::run_comparison(&cfg, densities, replications).map_err(runtime)?;
    let points = curves(&rows);
    write_outputs(
        &common.out_dir,
        &[
            ("comparison.csv", metrics_to_csv(&rows)),
            ("curves.csv", curves_to_csv(&points)),
            ("config.txt", config::render(&cfg)),
        ],
    )?;
    for p in &points {
        println!(
            "{:>14} {:>6} users/km2: served {:.2} ± {:.2}",
            p.algorithm.label(),
            p.density_per_km2,
            p.mean_served,
            p.stderr_served
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(c) => cmd_plan(c),
        Command::Simulate(c) => cmd_simulate(c),
        Command::Compare {
            common,
            densities,
            replications,
        } => cmd_compare(common, densities, *replications),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
