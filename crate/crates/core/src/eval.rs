//! Measuring runs: trajectory metrics, imagination pixel counts, SVG plots,
//! and the benchmark matrix over scripted scenarios.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ground_truth, sample_poses, DatasetError, GroundTruthVariant, OccupancyPatch};
use crate::geom::Pose;
use crate::imagine::{imagine, imagine_from_raw, ImagineError};
use crate::nav::{run_episode, EpisodeConfig, Imagination, NavError, Termination, Trajectory};
use crate::sensor::{project_egocentric, raycast_scan, SensorError};
use crate::world::{load_world, rasterize, ClassId, SemanticGrid, WorldError, WorldSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory has {0} states; metrics need at least 2")]
    TooFewStates(usize),
    #[error("patch is {patch}x{patch} but ground truth is {gt}x{gt}")]
    SizeMismatch { patch: usize, gt: usize },
    #[error("scenario file: {0}")]
    Suite(String),
    #[error("{path}: {source}")]
    World { path: PathBuf, source: WorldError },
    #[error("{context}: {source}")]
    Nav { context: String, source: NavError },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Imagine(#[from] ImagineError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub length: f64,
    pub duration: f64,
    pub avg_velocity: f64,
    pub reached: bool,
    pub termination: Termination,
}

pub fn trajectory_metrics(traj: &Trajectory) -> Result<EpisodeMetrics, EvalError> {
    let s = &traj.states;
    if s.len() < 2 {
        return Err(EvalError::TooFewStates(s.len()));
    }
    let length: f64 = s.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum();
    let duration = s[s.len() - 1].t - s[0].t;
    let avg_velocity = if duration > 0.0 { length / duration } else { 0.0 };
    Ok(EpisodeMetrics {
        length,
        duration,
        avg_velocity,
        reached: traj.reached(),
        termination: traj.termination,
    })
}

/// Imagined cells split by whether the ground truth marks them occupied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelStats {
    pub total: u64,
    pub in_object: u64,
    pub out_object: u64,
}

impl PixelStats {
    pub fn add(&mut self, other: PixelStats) {
        self.total += other.total;
        self.in_object += other.in_object;
        self.out_object += other.out_object;
    }
}

pub fn pixel_stats(patch: &OccupancyPatch, gt: &OccupancyPatch) -> Result<PixelStats, EvalError> {
    if patch.size != gt.size || patch.cells.len() != gt.cells.len() {
        return Err(EvalError::SizeMismatch {
            patch: patch.size,
            gt: gt.size,
        });
    }
    let total = patch.count() as u64;
    let in_object = patch.cells.iter().zip(&gt.cells).filter(|(p, g)| **p && **g).count() as u64;
    Ok(PixelStats {
        total,
        in_object,
        out_object: total - in_object,
    })
}

// ---------------------------------------------------------------------------
// SVG

const PX_PER_CELL: usize = 4;
const NO_IMAGINATION_COLOR: &str = "#d62728";
const PALETTE: [&str; 6] = ["#1f77b4", "#2ca02c", "#9467bd", "#17becf", "#ff7f0e", "#8c564b"];

fn class_fill(class: ClassId) -> &'static str {
    match class {
        ClassId::Wall => "#404040",
        ClassId::Chair => "#f2c76e",
        ClassId::Table => "#b7d7a8",
        ClassId::Free | ClassId::Unknown => "#ffffff",
    }
}

/// Stroke colour of the `index`-th agent; the agent without imagination is
/// always red.
pub fn agent_color(label: &str, index: usize) -> &'static str {
    if label == "none" {
        NO_IMAGINATION_COLOR
    } else {
        PALETTE[index % PALETTE.len()]
    }
}

/// Top view of `grid` with one polyline per labelled trajectory, start
/// markers at each first state, an optional goal marker and a legend.
pub fn render_svg(grid: &SemanticGrid, runs: &[(&str, &Trajectory)], goal: Option<(f64, f64)>) -> String {
    let w = grid.cols * PX_PER_CELL;
    let h = grid.rows * PX_PER_CELL;
    let scale = PX_PER_CELL as f64 / grid.resolution;
    let px = |x: f64, y: f64| (x * scale, h as f64 - y * scale);
    let legend_h = 16 * runs.len() + 8;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" viewBox="0 0 {w} {}">"#,
        h + legend_h,
        h + legend_h
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff" stroke="#000000"/>"##);

    // Footprints as horizontal runs of same-class cells, legs darker on top.
    for (layer, opacity) in [(&grid.footprint_layer, "1"), (&grid.laser_layer, "0.6")] {
        let _ = writeln!(out, r#"<g class="{}" opacity="{opacity}">"#, if opacity == "1" { "footprint" } else { "legs" });
        for r in 0..grid.rows {
            let mut c = 0;
            while c < grid.cols {
                let class = layer[grid.index(r, c)];
                let start = c;
                while c < grid.cols && layer[grid.index(r, c)] == class {
                    c += 1;
                }
                if class == ClassId::Free || (opacity != "1" && !class.is_object()) {
                    continue;
                }
                let fill = if opacity == "1" { class_fill(class) } else { "#000000" };
                let _ = writeln!(
                    out,
                    r#"<rect x="{}" y="{}" width="{}" height="{PX_PER_CELL}" fill="{fill}"/>"#,
                    start * PX_PER_CELL,
                    h - (r + 1) * PX_PER_CELL,
                    (c - start) * PX_PER_CELL
                );
            }
        }
        out.push_str("</g>\n");
    }

    for (i, (label, traj)) in runs.iter().enumerate() {
        let color = agent_color(label, i);
        let points: Vec<String> = traj
            .states
            .iter()
            .map(|s| {
                let (x, y) = px(s.x, s.y);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="agent-{label}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
    }
    if let Some(first) = runs.first().and_then(|(_, t)| t.states.first()) {
        let (x, y) = px(first.x, first.y);
        let _ = writeln!(out, r##"<circle class="start" cx="{x:.2}" cy="{y:.2}" r="6" fill="#000000"/>"##);
    }
    if let Some((gx, gy)) = goal {
        let (x, y) = px(gx, gy);
        let _ = writeln!(
            out,
            r##"<rect class="goal" x="{:.2}" y="{:.2}" width="12" height="12" fill="none" stroke="#000000" stroke-width="2"/>"##,
            x - 6.0,
            y - 6.0
        );
    }
    out.push_str("<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n");
    for (i, (label, _)) in runs.iter().enumerate() {
        let y = h + 12 + 16 * i;
        let _ = writeln!(
            out,
            r#"<line x1="8" y1="{y}" x2="28" y2="{y}" stroke="{}" stroke-width="3"/><text x="34" y="{}">{label}</text>"#,
            agent_color(label, i),
            y + 4
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

// ---------------------------------------------------------------------------
// Benchmark

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub start: [f64; 3],
    pub goal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Relative paths resolve against the scenario file's directory.
    pub world: PathBuf,
    pub eval_poses: usize,
    pub eval_seed: u64,
    pub paths: Vec<PathSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub scenario: Vec<Scenario>,
}

pub fn parse_suite(text: &str, base: &Path) -> Result<Suite, EvalError> {
    let mut suite: Suite = toml::from_str(text).map_err(|e| EvalError::Suite(e.to_string()))?;
    if suite.scenario.is_empty() {
        return Err(EvalError::Suite("no scenarios".into()));
    }
    for s in &mut suite.scenario {
        if s.paths.is_empty() {
            return Err(EvalError::Suite(format!("scenario `{}` has no paths", s.name)));
        }
        if s.world.is_relative() {
            s.world = base.join(&s.world);
        }
    }
    Ok(suite)
}

pub fn load_suite(path: &Path) -> Result<Suite, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_suite(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn load_world_file(path: &Path) -> Result<WorldSpec, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_owned(),
        source,
    })?;
    load_world(&text).map_err(|source| EvalError::World {
        path: path.to_owned(),
        source,
    })
}

/// A labelled imagination source taking part in the benchmark.
#[derive(Debug, Clone)]
pub struct Agent<'a> {
    pub label: String,
    pub imagination: Imagination<'a>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Paths taken from the front of each scenario's list.
    pub paths_per_map: usize,
    /// Evaluation poses lie within this distance of furniture.
    pub eval_max_dist: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            paths_per_map: 7,
            eval_max_dist: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub world: String,
    pub path: usize,
    pub agent: String,
    pub metrics: EpisodeMetrics,
    #[serde(skip)]
    pub trajectory: Trajectory,
    #[serde(skip)]
    pub goal: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PixelRecord {
    pub world: String,
    pub agent: String,
    pub poses: usize,
    pub stats: PixelStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSummary {
    pub agent: String,
    pub episodes: usize,
    pub reached: usize,
    pub mean_length: f64,
    pub mean_duration: f64,
    pub mean_velocity: f64,
    /// Absent for agents that imagine nothing.
    pub pixels: Option<PixelStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub episodes: Vec<EpisodeRecord>,
    pub pixels: Vec<PixelRecord>,
    pub summary: Vec<AgentSummary>,
}

/// Imagined occupancy of `agent` at `pose`, or `None` for the agent that
/// imagines nothing.
fn imagined_at(
    grid: &SemanticGrid,
    pose: Pose,
    agent: &Imagination,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<Option<OccupancyPatch>, EvalError> {
    let size = match agent {
        Imagination::None => return Ok(None),
        Imagination::Oracle { size } => *size,
        Imagination::Model(w) => w.arch.input_size,
    };
    let scan = raycast_scan(grid, pose, &config.lidar, seed)?;
    let obs = project_egocentric(&scan, size)?;
    let result = match agent {
        Imagination::Model(w) => imagine(w, &obs, &config.imagine)?,
        _ => {
            let gt = ground_truth(grid, pose, GroundTruthVariant { size, extended: false });
            let raw = gt.cells.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
            imagine_from_raw(&obs, raw, &config.imagine)
        }
    };
    Ok(Some(result.occupancy))
}

/// Pixel statistics of one agent summed over `poses`, against the normal
/// ground truth at the agent's patch size.
pub fn pixel_stats_over(
    grid: &SemanticGrid,
    poses: &[Pose],
    agent: &Imagination,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<Option<PixelStats>, EvalError> {
    let mut acc = PixelStats::default();
    for (i, &pose) in poses.iter().enumerate() {
        let Some(patch) = imagined_at(grid, pose, agent, config, seed.wrapping_add(i as u64))? else {
            return Ok(None);
        };
        let gt = ground_truth(grid, pose, GroundTruthVariant { size: patch.size, extended: false });
        acc.add(pixel_stats(&patch, &gt)?);
    }
    Ok(Some(acc))
}

/// Runs every agent on the first `paths_per_map` paths of every scenario and
/// gathers pixel statistics on each scenario's evaluation poses. Records are
/// ordered by (world, path, agent); agents keep the order given.
pub fn run_bench(suite: &Suite, agents: &[Agent], episode: &EpisodeConfig, bench: &BenchConfig) -> Result<BenchReport, EvalError> {
    let mut scenarios: Vec<&Scenario> = suite.scenario.iter().collect();
    scenarios.sort_by(|a, b| a.name.cmp(&b.name));
    let mut episodes = Vec::new();
    let mut pixels = Vec::new();
    for sc in scenarios {
        if sc.paths.len() < bench.paths_per_map {
            return Err(EvalError::Suite(format!(
                "scenario `{}` has {} paths, {} requested",
                sc.name,
                sc.paths.len(),
                bench.paths_per_map
            )));
        }
        let spec = load_world_file(&sc.world)?;
        let grid = rasterize(&spec);
        for (pi, path) in sc.paths.iter().take(bench.paths_per_map).enumerate() {
            let start = Pose::new(path.start[0], path.start[1], path.start[2]);
            let goal = (path.goal[0], path.goal[1]);
            let seed = bench.seed ^ (pi as u64).wrapping_mul(0x2545_F491_4F6C_DD1D);
            for agent in agents {
                let mut trajectory = run_episode(&grid, start, goal, agent.imagination, episode, seed).map_err(|source| {
                    EvalError::Nav {
                        context: format!("{} path {} agent {}", sc.name, pi, agent.label),
                        source,
                    }
                })?;
                trajectory.agent = agent.label.clone();
                episodes.push(EpisodeRecord {
                    world: sc.name.clone(),
                    path: pi,
                    agent: agent.label.clone(),
                    metrics: trajectory_metrics(&trajectory)?,
                    trajectory,
                    goal,
                });
            }
        }
        let poses = sample_poses(&spec, sc.eval_poses, bench.eval_max_dist, sc.eval_seed)?;
        for agent in agents {
            if let Some(stats) = pixel_stats_over(&grid, &poses, &agent.imagination, episode, sc.eval_seed)? {
                pixels.push(PixelRecord {
                    world: sc.name.clone(),
                    agent: agent.label.clone(),
                    poses: poses.len(),
                    stats,
                });
            }
        }
    }
    let summary = agents.iter().map(|a| summarize(&a.label, &episodes, &pixels)).collect();
    Ok(BenchReport {
        episodes,
        pixels,
        summary,
    })
}

fn summarize(agent: &str, episodes: &[EpisodeRecord], pixels: &[PixelRecord]) -> AgentSummary {
    let mine: Vec<&EpisodeMetrics> = episodes.iter().filter(|e| e.agent == agent).map(|e| &e.metrics).collect();
    let n = mine.len().max(1) as f64;
    let px: Vec<PixelStats> = pixels.iter().filter(|p| p.agent == agent).map(|p| p.stats).collect();
    AgentSummary {
        agent: agent.to_owned(),
        episodes: mine.len(),
        reached: mine.iter().filter(|m| m.reached).count(),
        mean_length: mine.iter().map(|m| m.length).sum::<f64>() / n,
        mean_duration: mine.iter().map(|m| m.duration).sum::<f64>() / n,
        mean_velocity: mine.iter().map(|m| m.avg_velocity).sum::<f64>() / n,
        pixels: (!px.is_empty()).then(|| {
            let mut acc = PixelStats::default();
            px.iter().for_each(|p| acc.add(*p));
            acc
        }),
    }
}

impl BenchReport {
    pub fn summary_of(&self, agent: &str) -> Option<&AgentSummary> {
        self.summary.iter().find(|s| s.agent == agent)
    }

    /// One JSON object per episode, in report order.
    pub fn metrics_jsonl(&self) -> String {
        self.episodes
            .iter()
            .map(|e| serde_json::to_string(e).expect("records serialize") + "\n")
            .collect()
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            agents: &'a [AgentSummary],
            pixels: &'a [PixelRecord],
        }
        serde_json::to_string_pretty(&Doc {
            agents: &self.summary,
            pixels: &self.pixels,
        })
        .expect("summary serializes")
            + "\n"
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>10} {:>10} {:>8} {:>10} {:>10} {:>10}",
            "agent", "episodes", "reached", "length_m", "duration_s", "vel_m/s", "px_total", "px_in", "px_out"
        );
        for s in &self.summary {
            let (t, i, o) = match s.pixels {
                Some(p) => (p.total.to_string(), p.in_object.to_string(), p.out_object.to_string()),
                None => ("-".into(), "-".into(), "-".into()),
            };
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>8} {:>10.3} {:>10.1} {:>8.3} {:>10} {:>10} {:>10}",
                s.agent, s.episodes, s.reached, s.mean_length, s.mean_duration, s.mean_velocity, t, i, o
            );
        }
        out
    }

    /// One SVG per (world, path) with every agent's trajectory.
    pub fn svgs(&self, suite: &Suite) -> Result<Vec<(String, String)>, EvalError> {
        let mut out = Vec::new();
        let mut scenarios: Vec<&Scenario> = suite.scenario.iter().collect();
        scenarios.sort_by(|a, b| a.name.cmp(&b.name));
        for sc in scenarios {
            let grid = rasterize(&load_world_file(&sc.world)?);
            let mut paths: Vec<usize> = self.episodes.iter().filter(|e| e.world == sc.name).map(|e| e.path).collect();
            paths.dedup();
            for p in paths {
                let runs: Vec<&EpisodeRecord> = self.episodes.iter().filter(|e| e.world == sc.name && e.path == p).collect();
                let labelled: Vec<(&str, &Trajectory)> = runs.iter().map(|e| (e.agent.as_str(), &e.trajectory)).collect();
                let goal = runs.first().map(|e| e.goal);
                out.push((format!("{}_path{}.svg", sc.name, p), render_svg(&grid, &labelled, goal)));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::TrajectoryState;
    use proptest::prelude::*;

    fn traj(points: &[(f64, f64, f64)]) -> Trajectory {
        Trajectory {
            agent: "none".into(),
            period: 0.1,
            states: points
                .iter()
                .map(|&(t, x, y)| TrajectoryState {
                    t,
                    x,
                    y,
                    heading: 0.0,
                    v: 0.0,
                    w: 0.0,
                })
                .collect(),
            termination: Termination::GoalReached,
        }
    }

    #[test]
    fn straight_line_metrics() {
        let m = trajectory_metrics(&traj(&[(0.0, 1.0, 1.0), (10.0, 3.0, 1.0)])).unwrap();
        assert_eq!((m.length, m.duration), (2.0, 10.0));
        assert!((m.avg_velocity - 0.2).abs() < 1e-15);
        assert!(m.reached);
    }

    #[test]
    fn stationary_and_square() {
        let m = trajectory_metrics(&traj(&[(0.0, 1.0, 1.0), (4.0, 1.0, 1.0)])).unwrap();
        assert_eq!((m.length, m.duration, m.avg_velocity), (0.0, 4.0, 0.0));
        let sq = [(0.0, 0.0, 0.0), (1.0, 1.0, 0.0), (2.0, 1.0, 1.0), (3.0, 0.0, 1.0), (4.0, 0.0, 0.0)];
        assert_eq!(trajectory_metrics(&traj(&sq)).unwrap().length, 4.0);
        assert!(matches!(trajectory_metrics(&traj(&sq[..1])), Err(EvalError::TooFewStates(1))));
    }

    proptest! {
        #[test]
        fn metrics_ignore_time_shift_and_rotation(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..20),
            shift in -100.0f64..100.0,
            angle in -3.2f64..3.2,
        ) {
            let base: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| (i as f64 * 0.1, x, y)).collect();
            let (s, c) = angle.sin_cos();
            let moved: Vec<_> = base.iter().map(|&(t, x, y)| (t + shift, c * x - s * y, s * x + c * y)).collect();
            let a = trajectory_metrics(&traj(&base)).unwrap();
            let b = trajectory_metrics(&traj(&moved)).unwrap();
            prop_assert!((a.length - b.length).abs() < 1e-9);
            prop_assert!((a.duration - b.duration).abs() < 1e-9);
        }

        #[test]
        fn pixel_totals_split(a in prop::collection::vec(any::<bool>(), 36), b in prop::collection::vec(any::<bool>(), 36)) {
            let p = OccupancyPatch { size: 6, cells: a };
            let g = OccupancyPatch { size: 6, cells: b };
            let s = pixel_stats(&p, &g).unwrap();
            prop_assert_eq!(s.total, s.in_object + s.out_object);
        }
    }

    #[test]
    fn pixel_stats_cases() {
        let gt = OccupancyPatch {
            size: 3,
            cells: vec![true, true, false, false, false, false, false, false, false],
        };
        assert_eq!(pixel_stats(&gt, &gt).unwrap().out_object, 0);
        assert_eq!(pixel_stats(&OccupancyPatch::empty(3), &gt).unwrap(), PixelStats::default());
        let patch = OccupancyPatch {
            size: 3,
            cells: vec![true, true, true, false, true, false, false, false, false],
        };
        let s = pixel_stats(&patch, &gt).unwrap();
        assert_eq!((s.total, s.in_object, s.out_object), (4, 2, 2));
        assert!(matches!(
            pixel_stats(&patch, &OccupancyPatch::empty(4)),
            Err(EvalError::SizeMismatch { patch: 3, gt: 4 })
        ));
    }

    #[test]
    fn svg_structure() {
        let grid = rasterize(&WorldSpec::empty(4.0, 3.0));
        let t = traj(&[(0.0, 1.0, 1.0), (0.1, 2.0, 1.5)]);
        let one = render_svg(&grid, &[("none", &t)], Some((2.0, 1.5)));
        assert_eq!(one.matches("<polyline").count(), 1);
        assert!(one.contains(r#"points="80.00,160.00 160.00,120.00""#), "{one}");
        assert_eq!(one.matches("<text").count(), 1);

        let mut u = t.clone();
        u.agent = "oracle60".into();
        let two = render_svg(&grid, &[("none", &t), ("oracle60", &u)], None);
        assert_eq!(two.matches("<polyline").count(), 2);
        assert!(two.contains("agent-none") && two.contains("agent-oracle60"));
        assert!(two.contains(NO_IMAGINATION_COLOR) && two.contains(PALETTE[1]));
        assert_eq!(two.matches("<text").count(), 2);
        assert_eq!(two, render_svg(&grid, &[("none", &t), ("oracle60", &u)], None));
    }

    #[test]
    fn suite_parsing() {
        let text = r#"
            [[scenario]]
            name = "a"
            world = "w.toml"
            eval_poses = 3
            eval_seed = 1
            paths = [{ start = [1.0, 1.0, 0.0], goal = [2.0, 1.0] }]
        "#;
        let s = parse_suite(text, Path::new("/base")).unwrap();
        assert_eq!(s.scenario[0].world, Path::new("/base/w.toml"));
        assert!(parse_suite("scenario = []", Path::new(".")).is_err());
        assert!(parse_suite(&text.replace("eval_seed", "seed"), Path::new(".")).is_err());
    }
}
