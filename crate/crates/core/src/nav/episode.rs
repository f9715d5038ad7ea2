//! Closed-loop navigation: sense, imagine, fuse, plan, act.

use serde::{Deserialize, Serialize};

use super::astar::astar_blocking;
use super::costmap::{build_global_costmap, fuse_imagination, Costmap, Inflation, InflationConfig, INSCRIBED, LETHAL};
use super::local::{integrate, local_plan_step_along, PlannerConfig};
use super::NavError;
use crate::dataset::{ground_truth, GroundTruthVariant, OccupancyPatch};
use crate::geom::Pose;
use crate::imagine::{imagine, imagine_from_raw, ImagineConfig};
use crate::net::Weights;
use crate::sensor::{project_egocentric, raycast_scan, LidarConfig, SemanticScan};
use crate::world::{cell_coord, SemanticGrid};

/// Source of imagined occupancy during an episode.
#[derive(Debug, Clone, Copy)]
pub enum Imagination<'a> {
    None,
    /// The ground-truth footprint stands in for the network output; mask and
    /// threshold still apply.
    Oracle { size: usize },
    Model(&'a Weights<f32>),
}

impl Imagination<'_> {
    pub fn name(&self) -> String {
        match self {
            Imagination::None => "none".into(),
            Imagination::Oracle { size } => format!("oracle{size}"),
            Imagination::Model(w) => format!("model{}", w.arch.input_size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub lidar: LidarConfig,
    pub imagine: ImagineConfig,
    pub planner: PlannerConfig,
    pub inflation: InflationConfig,
    /// Simulated seconds before the episode is abandoned.
    pub max_duration: f64,
    /// Imagined cells closer than this to the robot are not fused.
    pub keep_clear: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            lidar: LidarConfig::default().with_noise(0.005),
            imagine: ImagineConfig::default(),
            planner: PlannerConfig::default(),
            inflation: InflationConfig::default(),
            max_duration: 180.0,
            keep_clear: 0.1,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self, resolution: f64) -> Result<(), NavError> {
        self.lidar.validate()?;
        self.imagine.validate()?;
        self.planner.validate(resolution).map_err(NavError::Config)?;
        self.inflation.validate().map_err(NavError::Config)?;
        if !(self.max_duration.is_finite() && self.max_duration > 0.0) {
            return Err(NavError::Config("max_duration must be positive".into()));
        }
        if !(self.keep_clear.is_finite() && self.keep_clear >= 0.0) {
            return Err(NavError::Config("keep_clear must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GoalReached,
    Collision,
    Timeout,
    NoPath,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::GoalReached => "goal_reached",
            Termination::Collision => "collision",
            Termination::Timeout => "timeout",
            Termination::NoPath => "no_path",
        })
    }
}

/// Robot state at time `t` and the command issued from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub w: f64,
}

impl TrajectoryState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent: String,
    pub period: f64,
    pub states: Vec<TrajectoryState>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn reached(&self) -> bool {
        self.termination == Termination::GoalReached
    }
}

/// One line of a trajectory record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryRecord {
    Header { agent: String, period: f64 },
    State(TrajectoryState),
    End { termination: Termination, reached: bool },
}

impl Trajectory {
    /// Line-delimited JSON: a header, one line per state, and an end line.
    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![TrajectoryRecord::Header {
            agent: self.agent.clone(),
            period: self.period,
        }];
        lines.extend(self.states.iter().map(|s| TrajectoryRecord::State(*s)));
        lines.push(TrajectoryRecord::End {
            termination: self.termination,
            reached: self.reached(),
        });
        lines
            .iter()
            .map(|l| serde_json::to_string(l).expect("records serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Trajectory, String> {
        let mut header = None;
        let mut states = Vec::new();
        let mut end = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: TrajectoryRecord = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            match rec {
                TrajectoryRecord::Header { agent, period } => header = Some((agent, period)),
                TrajectoryRecord::State(s) => states.push(s),
                TrajectoryRecord::End { termination, .. } => end = Some(termination),
            }
        }
        let (agent, period) = header.ok_or("missing header line")?;
        let termination = end.ok_or("missing end line")?;
        Ok(Trajectory {
            agent,
            period,
            states,
            termination,
        })
    }
}

/// World cell (row, col) holding a point.
fn world_cell(x: f64, y: f64, res: f64) -> (i64, i64) {
    (cell_coord(y, res) as i64, cell_coord(x, res) as i64)
}

/// Square costmap around the robot from the static laser layer, the current
/// scan's hits and the current imagination.
pub fn build_local_costmap(
    grid: &SemanticGrid,
    pose: Pose,
    scan: &SemanticScan,
    imagined: Option<&OccupancyPatch>,
    config: &EpisodeConfig,
    inflation: &Inflation,
) -> Costmap {
    let res = grid.resolution;
    let side = ((config.planner.local_window + 2.0 * config.inflation.falloff_radius) / res).ceil() as usize;
    let (r, c) = world_cell(pose.x, pose.y, res);
    let half = (side / 2) as i64;
    let mut map = Costmap::new(side, side, res, r - half, c - half);
    for lr in 0..side {
        for lc in 0..side {
            let (wr, wc) = (map.origin_row + lr as i64, map.origin_col + lc as i64);
            if grid.contains(wr, wc) && grid.laser(wr as usize, wc as usize).is_obstacle() {
                map.add_lethal(lr, lc, inflation);
            }
        }
    }
    for (x, y, _) in scan.hits_world() {
        let (wr, wc) = world_cell(x, y, res);
        if let Some((lr, lc)) = map.local(wr, wc) {
            map.add_lethal(lr, lc, inflation);
        }
    }
    if let Some(patch) = imagined {
        fuse_imagination(&mut map, patch, pose, inflation, config.keep_clear).expect("robot lies at the window centre");
    }
    map
}

/// Point on `path` roughly `lookahead` meters from the robot, or the goal.
fn lookahead_point(map: &Costmap, cells: &[(usize, usize)], pose: Pose, goal: (f64, f64), lookahead: f64) -> (f64, f64) {
    for &(r, c) in cells.iter().skip(1) {
        let (x, y) = map.cell_center(r, c);
        if pose.distance_to(x, y) >= lookahead {
            return (x, y);
        }
    }
    goal
}

/// Centres of the leading path cells, up to the first one beyond `reach`.
fn near_path(map: &Costmap, cells: &[(usize, usize)], pose: Pose, reach: f64) -> Vec<(f64, f64)> {
    cells
        .iter()
        .map(|&(r, c)| map.cell_center(r, c))
        .take_while(|&(x, y)| pose.distance_to(x, y) <= reach)
        .collect()
}

fn plan(global: &Costmap, pose: Pose, goal: (f64, f64)) -> Result<Vec<(usize, usize)>, NavError> {
    let start = global.cell_at(pose.x, pose.y).ok_or(NavError::PoseOutside { x: pose.x, y: pose.y })?;
    let end = global.cell_at(goal.0, goal.1).ok_or(NavError::PoseOutside { x: goal.0, y: goal.1 })?;
    if global.get(start.0, start.1) < INSCRIBED {
        if let Ok(p) = astar_blocking(global, start, end, INSCRIBED) {
            return Ok(p.cells);
        }
    }
    Ok(astar_blocking(global, start, end, LETHAL)?.cells)
}

fn imagined_patch(
    grid: &SemanticGrid,
    pose: Pose,
    scan: &SemanticScan,
    imagination: &Imagination,
    config: &ImagineConfig,
) -> Result<Option<OccupancyPatch>, NavError> {
    Ok(match imagination {
        Imagination::None => None,
        Imagination::Oracle { size } => {
            let obs = project_egocentric(scan, *size)?;
            let gt = ground_truth(grid, pose, GroundTruthVariant { size: *size, extended: false });
            let raw = gt.cells.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
            Some(imagine_from_raw(&obs, raw, config).occupancy)
        }
        Imagination::Model(weights) => {
            let obs = project_egocentric(scan, weights.arch.input_size)?;
            Some(imagine(weights, &obs, config)?.occupancy)
        }
    })
}

/// Runs one episode from `start` to `goal` at the control period until the
/// goal is within tolerance, the robot centre enters an obstacle cell of the
/// laser layer, no path exists, or time runs out.
pub fn run_episode(
    grid: &SemanticGrid,
    start: Pose,
    goal: (f64, f64),
    imagination: Imagination,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<Trajectory, NavError> {
    config.validate(grid.resolution)?;
    for (name, (x, y)) in [("start", (start.x, start.y)), ("goal", goal)] {
        match grid.cell_at(x, y) {
            Some((r, c)) if !grid.laser(r, c).is_obstacle() => {}
            _ => return Err(NavError::InvalidEndpoint(name)),
        }
    }
    let inflation = Inflation::new(&config.inflation, grid.resolution);
    let mut global = build_global_costmap(grid, &config.inflation);
    let pc = &config.planner;
    let max_steps = (config.max_duration / pc.period).round() as usize;
    let mut pose = start;
    let mut states = Vec::new();
    let record = |states: &mut Vec<TrajectoryState>, step: usize, pose: Pose, v: f64, w: f64| {
        states.push(TrajectoryState {
            t: step as f64 * pc.period,
            x: pose.x,
            y: pose.y,
            heading: pose.heading,
            v,
            w,
        })
    };
    let mut termination = Termination::Timeout;
    for step in 0..=max_steps {
        if pose.distance_to(goal.0, goal.1) <= pc.goal_tolerance {
            record(&mut states, step, pose, 0.0, 0.0);
            termination = Termination::GoalReached;
            break;
        }
        if step == max_steps {
            record(&mut states, step, pose, 0.0, 0.0);
            break;
        }
        let scan_seed = seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let scan = raycast_scan(grid, pose, &config.lidar, scan_seed)?;
        let patch = imagined_patch(grid, pose, &scan, &imagination, &config.imagine)?;
        if let Some(p) = &patch {
            fuse_imagination(&mut global, p, pose, &inflation, config.keep_clear)?;
        }
        let cells = match plan(&global, pose, goal) {
            Ok(c) => c,
            Err(NavError::NoPath) | Err(NavError::InvalidEndpoint(_)) => {
                record(&mut states, step, pose, 0.0, 0.0);
                termination = Termination::NoPath;
                break;
            }
            Err(e) => return Err(e),
        };
        let local = build_local_costmap(grid, pose, &scan, patch.as_ref(), config, &inflation);
        let target = lookahead_point(&global, &cells, pose, goal, pc.lookahead);
        let near = near_path(&global, &cells, pose, pc.v_max * pc.horizon + pc.lookahead);
        let cmd = local_plan_step_along(&local, pose, target, &near, pc);
        record(&mut states, step, pose, cmd.v, cmd.w);
        pose = integrate(pose, cmd.v, cmd.w, pc.period);
        let hit = match grid.cell_at(pose.x, pose.y) {
            Some((r, c)) => grid.laser(r, c).is_obstacle(),
            None => true,
        };
        if hit {
            record(&mut states, step + 1, pose, 0.0, 0.0);
            termination = Termination::Collision;
            break;
        }
    }
    Ok(Trajectory {
        agent: imagination.name(),
        period: pc.period,
        states,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{load_world, rasterize, ClassId};

    fn corridor() -> SemanticGrid {
        let doc = r#"
[size]
width = 10.0
height = 2.0

[[walls]]
from = [0.0, 0.05]
to = [10.0, 0.05]

[[walls]]
from = [0.0, 1.95]
to = [10.0, 1.95]
"#;
        rasterize(&load_world(doc).unwrap())
    }

    #[test]
    fn straight_corridor_reaches_goal() {
        let grid = corridor();
        let cfg = EpisodeConfig::default();
        let traj = run_episode(&grid, Pose::new(1.0, 1.0, 0.0), (3.0, 1.0), Imagination::None, &cfg, 1).unwrap();
        assert_eq!(traj.termination, Termination::GoalReached);
        let len: f64 = traj
            .states
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum();
        let tol = cfg.planner.goal_tolerance;
        assert!(len >= 2.0 - tol && len <= 2.2, "{len}");
    }

    #[test]
    fn consecutive_states_follow_the_commands() {
        let grid = corridor();
        let cfg = EpisodeConfig::default();
        let traj = run_episode(&grid, Pose::new(1.0, 0.7, 1.0), (4.0, 1.3), Imagination::None, &cfg, 3).unwrap();
        assert!(traj.reached());
        for w in traj.states.windows(2) {
            let next = integrate(w[0].pose(), w[0].v, w[0].w, traj.period);
            assert!((next.x - w[1].x).abs() < 1e-9 && (next.y - w[1].y).abs() < 1e-9);
            assert!(crate::geom::normalize_angle(next.heading - w[1].heading).abs() < 1e-9);
            assert!((w[1].t - w[0].t - traj.period).abs() < 1e-9);
            assert!(w[0].v.abs() <= cfg.planner.v_max && w[0].w.abs() <= cfg.planner.w_max);
        }
    }

    #[test]
    fn walled_off_goal_has_no_path() {
        let mut grid = corridor();
        for r in 0..grid.rows {
            let i = grid.index(r, 100);
            grid.laser_layer[i] = ClassId::Wall;
            grid.footprint_layer[i] = ClassId::Wall;
        }
        let traj = run_episode(&grid, Pose::new(1.0, 1.0, 0.0), (8.0, 1.0), Imagination::None, &EpisodeConfig::default(), 0).unwrap();
        assert_eq!(traj.termination, Termination::NoPath);
    }

    #[test]
    fn endpoints_in_obstacles_are_rejected() {
        let grid = corridor();
        let r = run_episode(&grid, Pose::new(1.0, 0.05, 0.0), (3.0, 1.0), Imagination::None, &EpisodeConfig::default(), 0);
        assert!(matches!(r, Err(NavError::InvalidEndpoint("start"))));
    }

    #[test]
    fn record_round_trips() {
        let grid = corridor();
        let traj = run_episode(&grid, Pose::new(1.0, 1.0, 0.0), (2.0, 1.0), Imagination::None, &EpisodeConfig::default(), 0).unwrap();
        let text = traj.to_jsonl();
        assert!(text.lines().last().unwrap().contains("goal_reached"));
        assert_eq!(Trajectory::from_jsonl(&text).unwrap(), traj);
    }
}
