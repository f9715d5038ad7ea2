//! Sampling local planner in the dynamic-window family.
//!
//! Every `(v, w)` on a fixed grid is rolled out with unicycle kinematics over
//! the horizon; rollouts that touch a blocking cell are dropped and the rest
//! are scored.

use serde::{Deserialize, Serialize};

use super::costmap::{Costmap, INSCRIBED, LETHAL};
use crate::geom::{normalize_angle, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub v_max: f64,
    pub w_max: f64,
    /// Control period in seconds.
    pub period: f64,
    /// Rollout horizon in seconds.
    pub horizon: f64,
    pub v_samples: usize,
    /// Odd, so that `w = 0` is sampled exactly.
    pub w_samples: usize,
    pub goal_tolerance: f64,
    /// Distance along the global path to the local target, in meters.
    pub lookahead: f64,
    /// Side of the square local costmap, in meters.
    pub local_window: f64,
    pub progress_weight: f64,
    pub heading_weight: f64,
    pub clearance_weight: f64,
    pub speed_weight: f64,
    /// Weight of the rollout end's distance to the global path.
    pub path_weight: f64,
    /// When no forward rollout stays clear for the full horizon, rollouts
    /// clear for this many seconds are admitted instead.
    pub creep_horizon: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            v_max: 0.26,
            w_max: 1.82,
            period: 0.1,
            horizon: 1.5,
            v_samples: 11,
            w_samples: 21,
            goal_tolerance: 0.05,
            lookahead: 0.5,
            local_window: 4.0,
            progress_weight: 1.0,
            heading_weight: 0.5,
            clearance_weight: 0.2,
            speed_weight: 0.1,
            path_weight: 0.6,
            creep_horizon: 0.5,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self, resolution: f64) -> Result<(), String> {
        let positive = [
            ("v_max", self.v_max),
            ("w_max", self.w_max),
            ("period", self.period),
            ("horizon", self.horizon),
            ("lookahead", self.lookahead),
            ("local_window", self.local_window),
            ("progress_weight", self.progress_weight),
            ("heading_weight", self.heading_weight),
            ("clearance_weight", self.clearance_weight),
            ("speed_weight", self.speed_weight),
            ("path_weight", self.path_weight),
            ("creep_horizon", self.creep_horizon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.v_samples < 2 {
            return Err("v_samples must be at least 2".into());
        }
        if self.w_samples < 3 || self.w_samples.is_multiple_of(2) {
            return Err("w_samples must be odd and at least 3".into());
        }
        if self.goal_tolerance.is_nan() || self.goal_tolerance < resolution {
            return Err(format!("goal_tolerance must be at least the resolution {resolution}"));
        }
        if self.horizon < self.period {
            return Err("horizon must cover at least one period".into());
        }
        if self.creep_horizon < self.period || self.creep_horizon > self.horizon {
            return Err("creep_horizon must lie between period and horizon".into());
        }
        Ok(())
    }

    pub fn rollout_steps(&self) -> usize {
        (self.horizon / self.period).round().max(1.0) as usize
    }

    pub fn creep_steps(&self) -> usize {
        (self.creep_horizon / self.period).round().max(1.0) as usize
    }

    pub fn velocities(&self) -> Vec<f64> {
        let n = self.v_samples - 1;
        (0..=n).map(|i| self.v_max * i as f64 / n as f64).collect()
    }

    pub fn rotations(&self) -> Vec<f64> {
        let n = self.w_samples - 1;
        let half = n / 2;
        (0..=n)
            .map(|j| {
                if j == half {
                    0.0
                } else {
                    self.w_max * ((j as f64 - half as f64) / half as f64)
                }
            })
            .collect()
    }
}

/// Exact unicycle motion under constant `(v, w)` for `dt` seconds.
pub fn integrate(pose: Pose, v: f64, w: f64, dt: f64) -> Pose {
    let th = pose.heading;
    let th1 = th + w * dt;
    let (x, y) = if w.abs() < 1e-12 {
        (pose.x + v * dt * th.cos(), pose.y + v * dt * th.sin())
    } else {
        let r = v / w;
        (pose.x + r * (th1.sin() - th.sin()), pose.y - r * (th1.cos() - th.cos()))
    };
    Pose::new(x, y, normalize_angle(th1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredRollout {
    pub command: Command,
    pub score: f64,
}

/// Outside the window counts as free.
fn cost_at(map: &Costmap, x: f64, y: f64) -> u8 {
    map.cost_at(x, y).unwrap_or(0)
}

/// Distance from a point to the nearest path point, capped at `cap`.
fn path_distance(path: &[(f64, f64)], x: f64, y: f64, cap: f64) -> f64 {
    path.iter()
        .map(|&(px, py)| (px - x).hypot(py - y))
        .fold(cap, f64::min)
}

/// Score of one command rolled out for `steps` periods, or `None` if the
/// rollout touches a cell with cost `>= block_at`. `path` may be empty.
#[allow(clippy::too_many_arguments)]
pub fn score_rollout(
    map: &Costmap,
    pose: Pose,
    target: (f64, f64),
    path: &[(f64, f64)],
    cmd: Command,
    steps: usize,
    block_at: u8,
    config: &PlannerConfig,
) -> Option<f64> {
    let d0 = pose.distance_to(target.0, target.1);
    let bearing = (target.1 - pose.y).atan2(target.0 - pose.x);
    let mut p = pose;
    let mut d_min = d0;
    let mut worst = 0u8;
    for _ in 0..steps {
        p = integrate(p, cmd.v, cmd.w, config.period);
        let c = cost_at(map, p.x, p.y);
        if c >= block_at {
            return None;
        }
        worst = worst.max(c);
        d_min = d_min.min(p.distance_to(target.0, target.1));
    }
    let reach = config.v_max * config.horizon;
    let progress = (d0 - d_min) / reach;
    let heading = normalize_angle(p.heading - bearing).cos();
    let clearance = 1.0 - worst.min(98) as f64 / 98.0;
    let speed = cmd.v / config.v_max;
    let off_path = if path.is_empty() {
        0.0
    } else {
        path_distance(path, p.x, p.y, reach) / reach
    };
    Some(
        config.progress_weight * progress + config.heading_weight * heading + config.clearance_weight * clearance
            + config.speed_weight * speed
            - config.path_weight * off_path,
    )
}

fn better(a: &ScoredRollout, b: &ScoredRollout) -> bool {
    if a.score != b.score {
        return a.score > b.score;
    }
    let (aw, bw) = (a.command.w.abs(), b.command.w.abs());
    if aw != bw {
        return aw < bw;
    }
    if a.command.v != b.command.v {
        return a.command.v < b.command.v;
    }
    a.command.w > b.command.w
}

/// Picks the command for one control cycle.
///
/// Only commands with `v > 0` are sampled; standing still is never scored,
/// since it can win a local optimum forever. Rollouts touching cost 99 or more are dropped, except that when the robot
/// already sits on an inscribed cell only lethal cells are avoided, so it can
/// back out. If no rollout with `v > 0` survives the full horizon, rollouts
/// clear for the creep horizon are tried; failing that, the robot turns in
/// place toward the target at full rate.
pub fn local_plan_step(map: &Costmap, pose: Pose, target: (f64, f64), config: &PlannerConfig) -> Command {
    local_plan_step_along(map, pose, target, &[], config)
}

/// [`local_plan_step`] with an extra penalty for ending away from `path`,
/// given as world points.
pub fn local_plan_step_along(
    map: &Costmap,
    pose: Pose,
    target: (f64, f64),
    path: &[(f64, f64)],
    config: &PlannerConfig,
) -> Command {
    if pose.distance_to(target.0, target.1) <= config.goal_tolerance {
        return Command { v: 0.0, w: 0.0 };
    }
    let here = cost_at(map, pose.x, pose.y);
    let block_at = if here >= INSCRIBED { LETHAL } else { INSCRIBED };
    for steps in [config.rollout_steps(), config.creep_steps()] {
        if let Some(cmd) = best_command(map, pose, target, path, steps, block_at, config) {
            return cmd;
        }
    }
    let bearing = (target.1 - pose.y).atan2(target.0 - pose.x);
    let turn = normalize_angle(bearing - pose.heading);
    Command {
        v: 0.0,
        w: if turn >= 0.0 { config.w_max } else { -config.w_max },
    }
}

/// Highest-scoring admissible command with `v > 0`.
fn best_command(
    map: &Costmap,
    pose: Pose,
    target: (f64, f64),
    path: &[(f64, f64)],
    steps: usize,
    block_at: u8,
    config: &PlannerConfig,
) -> Option<Command> {
    let mut best: Option<ScoredRollout> = None;
    for &v in config.velocities().iter().filter(|&&v| v > 0.0) {
        for &w in &config.rotations() {
            let command = Command { v, w };
            if let Some(score) = score_rollout(map, pose, target, path, command, steps, block_at, config) {
                let cand = ScoredRollout { command, score };
                if best.as_ref().is_none_or(|b| better(&cand, b)) {
                    best = Some(cand);
                }
            }
        }
    }
    best.map(|b| b.command)
}
