//! Costmaps, global and local planning, and closed-loop episodes.

pub mod astar;
pub mod costmap;
pub mod episode;
pub mod local;

use thiserror::Error;

use crate::imagine::ImagineError;
use crate::sensor::SensorError;

pub use astar::{astar, astar_blocking, GridPath, PathCost};
pub use costmap::{build_global_costmap, fuse_imagination, Costmap, Inflation, InflationConfig};
pub use episode::{run_episode, EpisodeConfig, Imagination, Termination, Trajectory, TrajectoryState};
pub use local::{integrate, local_plan_step, local_plan_step_along, Command, PlannerConfig};

#[derive(Debug, Error)]
pub enum NavError {
    #[error("pose ({x:.3}, {y:.3}) lies outside the map")]
    PoseOutside { x: f64, y: f64 },
    #[error("{0} cell is blocked or outside the map")]
    InvalidEndpoint(&'static str),
    #[error("no path to the goal")]
    NoPath,
    #[error("invalid navigation config: {0}")]
    Config(String),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Imagine(#[from] ImagineError),
}
