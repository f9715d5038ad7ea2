//! Scene imagination from 2D semantic lidar, and navigation that uses it.
//!
//! The pipeline: a grid world ([`world`]) is scanned by a simulated semantic
//! lidar ([`sensor`]); scans become egocentric class images that a U-Net
//! ([`net`]) completes into full object footprints; a scan-derived Gaussian
//! mask gates and thresholds the prediction ([`imagine`]); the result is fused
//! into costmaps for A* and sampling-based local planning ([`nav`]); episodes
//! are measured and rendered by [`eval`].

pub mod config;
pub mod dataset;
pub mod eval;
pub mod geom;
pub mod imagine;
pub mod nav;
pub mod net;
pub mod sensor;
pub mod world;

pub use geom::Pose;
pub use sensor::{LidarConfig, LocalSemanticMap, SemanticScan};
pub use world::{ClassId, SemanticGrid, WorldSpec};
