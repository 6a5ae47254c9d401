use thiserror::Error;

/// Errors raised by planning, localization, optimization and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("overlap area undefined for d = {d} m, Rc = {rc} m (need 0 <= d <= sqrt(3)*Rc, Rc > 0)")]
    OverlapDomain { d: f64, rc: f64 },

    #[error("invalid fleet formation: {0}")]
    InvalidFormation(String),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("invalid proportions: {0}")]
    InvalidProportions(String),

    #[error("drone count {0} is not divisible by 3")]
    DroneCountNotDivisible(usize),

    #[error("{fleets} fleets but {proportions} sub-area proportions")]
    FleetProportionMismatch { fleets: usize, proportions: usize },

    #[error("user at ({x}, {y}) is outside the fleet's overlapped coverage")]
    OutsideCoverage { x: f64, y: f64 },

    #[error("drones {0} and {1} coincide")]
    CoincidentDrones(usize, usize),

    #[error("drone formation is collinear")]
    CollinearDrones,

    #[error("negative estimate radius r_e = {0} m")]
    NegativeRadius(f64),

    #[error("coverage radius {rc} m does not exceed estimate radius {r_e} m")]
    NonPositiveEffectiveRadius { rc: f64, r_e: f64 },

    #[error("pass vector and relative velocity are both zero")]
    DegenerateEncounter,

    #[error("both drones are stationary")]
    StationaryPair,

    #[error("invalid safety parameters: {0}")]
    InvalidSafety(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
