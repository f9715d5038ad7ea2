//! Planar pose and angle helpers shared across modules.

use serde::{Deserialize, Serialize};

/// Robot pose in world meters; heading in radians, counter-clockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose { x, y, heading }
    }

    /// Maps a robot-frame point (`forward`, `left`) into the world.
    pub fn to_world(&self, forward: f64, left: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (
            self.x + forward * c - left * s,
            self.y + forward * s + left * c,
        )
    }

    /// Maps a world point into the robot frame as (`forward`, `left`).
    pub fn to_robot(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (x - self.x, y - self.y);
        (dx * c + dy * s, -dx * s + dy * c)
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r >= std::f64::consts::PI {
        r -= two_pi;
    }
    r
}
