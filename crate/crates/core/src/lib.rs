//! Deployment planning for drone base stations without prior knowledge of
//! where users are.
//!
//! Stage one sweeps the operating area with three-drone fleets that locate
//! users by uplink time difference of arrival; stage two places the drones
//! greedily so that each one entirely covers as many position-estimate
//! disks as possible. A random-search baseline and a batch experiment
//! driver are included for head-to-head comparison.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision_avoidance;
pub mod deployment_optimizer;
pub mod error;
pub mod geometry;
pub mod localization;
pub mod simulation;
pub mod sweep_planner;

pub use error::{Error, Result};
pub use geometry::{ConvexPolygon, Disk, FleetGeometry, Vec2};
