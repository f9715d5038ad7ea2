//! `semnav`: datasets, training, imagination, navigation and benchmarks from
//! one binary.

mod commands;
mod error;
mod images;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "semnav", version, about = "Semantic lidar scene imagination and navigation", arg_required_else_help = true)]
pub struct Cli {
    /// Run configuration (TOML). Unknown keys are rejected; missing keys keep
    /// their defaults. Flags below override the file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample poses near furniture and write a training dataset.
    GenData(GenDataArgs),
    /// Train one imagination network on one or more datasets.
    Train(TrainArgs),
    /// Run the imagination pipeline at one pose and write images.
    Imagine(ImagineArgs),
    /// Drive one episode and write its trajectory record.
    Navigate(NavigateArgs),
    /// Run the agent x scenario matrix and write metrics, trajectories and plots.
    Bench(BenchArgs),
    /// Render trajectory records over a world as SVG.
    Plot(PlotArgs),
    /// Print the effective configuration as TOML.
    ShowConfig,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// World file; repeat to spread the samples over several worlds.
    #[arg(long, required = true)]
    pub world: Vec<PathBuf>,
    /// Total sample count [config: dataset.count].
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Observation side stored, 60 or 100 [config: dataset.obs_size].
    #[arg(long)]
    pub obs_size: Option<usize>,
    /// Maximum distance to furniture in meters [config: dataset.max_dist].
    #[arg(long)]
    pub max_dist: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file; repeat to concatenate several.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// Ground truth to learn: 60, 60ext, 100 or 100ext.
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImagineArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub world: PathBuf,
    /// Robot pose as X,Y,HEADING (meters, radians).
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub pose: [f64; 3],
    /// Patch size; must match the weights.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Seed of the range noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for raw.pgm, mask.pgm, occupancy.pbm and observation.pgm.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct NavigateArgs {
    #[arg(long)]
    pub world: PathBuf,
    /// Start as X,Y or X,Y,HEADING.
    #[arg(long, value_parser = parse_start, allow_hyphen_values = true)]
    pub start: [f64; 3],
    /// Goal as X,Y.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub goal: [f64; 2],
    /// Imagine with this network.
    #[arg(long, conflicts_with = "oracle")]
    pub weights: Option<PathBuf>,
    /// Imagine with the ground-truth footprint instead of a network.
    #[arg(long)]
    pub oracle: bool,
    /// Patch size of the oracle, or expected size of the weights.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trajectory record (line-delimited JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also render the trajectory.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario file listing worlds, paths and evaluation poses.
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Trained network as LABEL=FILE; repeatable.
    #[arg(long = "model", value_parser = parse_model)]
    pub models: Vec<(String, PathBuf)>,
    /// Oracle imagination at this patch size; repeatable. Defaults to 60 when
    /// no model is given.
    #[arg(long = "oracle")]
    pub oracles: Vec<usize>,
    /// Paths per scenario [config: bench.paths_per_map].
    #[arg(long)]
    pub paths: Option<usize>,
    /// [config: bench.seed]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub world: PathBuf,
    /// Trajectory record; repeatable, one polyline each.
    #[arg(long = "traj", required = true)]
    pub trajectories: Vec<PathBuf>,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub goal: Option<[f64; 2]>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse::<f64>().map_err(|e| format!("`{p}`: {e}"))?;
        if !o.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(out)
}

fn parse_pose(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

fn parse_start(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s).or_else(|_| parse_floats::<2>(s).map(|[x, y]| [x, y, 0.0]))
}

fn parse_model(s: &str) -> Result<(String, PathBuf), String> {
    let (label, path) = s.split_once('=').ok_or_else(|| format!("expected LABEL=FILE, got `{s}`"))?;
    if label.is_empty() || label == "none" || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(format!("invalid model label `{label}`"));
    }
    Ok((label.to_owned(), PathBuf::from(path)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("semnav: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
