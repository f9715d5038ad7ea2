use std::path::{Path, PathBuf};

use semnav_core::config::RunConfig;
use semnav_core::dataset::{generate, read_dataset, write_dataset, DatasetError, GroundTruthVariant, TrainingSample};
use semnav_core::eval::{load_suite, render_svg, run_bench, trajectory_metrics, Agent, EvalError};
use semnav_core::imagine::imagine;
use semnav_core::nav::{run_episode, Imagination, Trajectory};
use semnav_core::net::train::log_lines;
use semnav_core::net::{load_weights, load_weights_for, save_weights, train, Architecture, NetError, TrainError, Weights};
use semnav_core::sensor::{project_egocentric, raycast_scan};
use semnav_core::world::{load_world, rasterize, WorldSpec};
use semnav_core::Pose;

use crate::error::CliError;
use crate::images::{pbm, pgm};
use crate::manifest::{beside, Manifest};
use crate::{BenchArgs, Cli, Command, GenDataArgs, ImagineArgs, NavigateArgs, PlotArgs, TrainArgs};

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::GenData(a) => gen_data(a, config),
        Command::Train(a) => train_cmd(a, config),
        Command::Imagine(a) => imagine_cmd(a, config),
        Command::Navigate(a) => navigate(a, config),
        Command::Bench(a) => bench(a, config),
        Command::Plot(a) => plot(a),
        Command::ShowConfig => {
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            RunConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

/// Re-validates after flag overrides.
fn checked(config: RunConfig) -> Result<RunConfig, CliError> {
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

fn read_world(path: &Path) -> Result<WorldSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    load_world(&text).map_err(|e| CliError::format(path, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn dataset_error(path: &Path, e: DatasetError) -> CliError {
    match e {
        DatasetError::Io(source) => CliError::io(path, source),
        other => CliError::format(path, other),
    }
}

fn net_error(path: &Path, e: NetError) -> CliError {
    match e {
        NetError::Io(source) => CliError::io(path, source),
        other => CliError::format(path, other),
    }
}

fn load_model(path: &Path, size: Option<usize>) -> Result<Weights<f32>, CliError> {
    match size {
        Some(s) => load_weights_for(path, &Architecture::full(s)),
        None => load_weights(path),
    }
    .map_err(|e| net_error(path, e))
}

fn gen_data(a: GenDataArgs, mut config: RunConfig) -> Result<(), CliError> {
    let d = &mut config.dataset;
    d.count = a.count.unwrap_or(d.count);
    d.obs_size = a.obs_size.unwrap_or(d.obs_size);
    d.max_dist = a.max_dist.unwrap_or(d.max_dist);
    let config = checked(config)?;
    let d = &config.dataset;
    if d.count < a.world.len() {
        return Err(CliError::Config(format!("count {} is less than the number of worlds", d.count)));
    }
    let mut manifest = Manifest::new("gen-data", config.to_toml());
    manifest.seed("seed", a.seed);
    let mut samples: Vec<TrainingSample> = Vec::with_capacity(d.count);
    for (i, path) in a.world.iter().enumerate() {
        let spec = read_world(path)?;
        let n = d.count / a.world.len() + usize::from(i < d.count % a.world.len());
        let seed = a.seed.wrapping_add((i as u64) << 32);
        let part = generate(&spec, n, d.max_dist, &d.lidar, d.obs_size, seed).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
        samples.extend(part);
        manifest.input(path)?;
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_dataset(&samples, &a.out).map_err(|e| dataset_error(&a.out, e))?;
    manifest.output(&a.out)?.write(&beside(&a.out))?;
    println!("wrote {} samples to {}", samples.len(), a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs, mut config: RunConfig) -> Result<(), CliError> {
    let variant: GroundTruthVariant = a.variant.parse().map_err(CliError::Config)?;
    let t = &mut config.train;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = a.learning_rate.unwrap_or(t.learning_rate);
    t.seed = a.seed.unwrap_or(t.seed);
    let config = checked(config)?;
    let mut manifest = Manifest::new("train", config.to_toml());
    manifest.seed("train.seed", config.train.seed);
    let mut samples = Vec::new();
    for path in &a.data {
        samples.extend(read_dataset(path).map_err(|e| dataset_error(path, e))?);
        manifest.input(path)?;
    }
    let log_path = a.out.with_extension("log.jsonl");
    let result = train(&samples, variant, &config.train, |e| {
        eprintln!(
            "epoch {:>4}  train {:.6}  val {}",
            e.epoch,
            e.train_loss,
            e.val_loss.map_or("-".into(), |v| format!("{v:.6}"))
        );
    });
    let (weights, log, failure) = match result {
        Ok(out) => (out.weights, out.log, None),
        Err(TrainError::Diverged { epoch, last_good, log }) => {
            (*last_good, log, Some(format!("training diverged in epoch {epoch}; last finite weights written")))
        }
        Err(TrainError::Net(e)) => return Err(CliError::Run(e.to_string())),
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    save_weights(&a.out, &weights).map_err(|e| net_error(&a.out, e))?;
    write_file(&log_path, log_lines(&log))?;
    manifest.output(&a.out)?.output(&log_path)?.write(&beside(&a.out))?;
    match failure {
        Some(msg) => Err(CliError::Run(msg)),
        None => {
            println!("wrote {} ({} epochs)", a.out.display(), log.len());
            Ok(())
        }
    }
}

fn start_pose(grid: &semnav_core::SemanticGrid, pose: Pose) -> Result<(), CliError> {
    match grid.cell_at(pose.x, pose.y) {
        Some((r, c)) if !grid.laser(r, c).is_obstacle() => Ok(()),
        _ => Err(CliError::Config(format!("pose ({}, {}) is outside the world or inside an obstacle", pose.x, pose.y))),
    }
}

fn imagine_cmd(a: ImagineArgs, mut config: RunConfig) -> Result<(), CliError> {
    let im = &mut config.episode.imagine;
    im.theta = a.theta.unwrap_or(im.theta);
    im.sigma = a.sigma.unwrap_or(im.sigma);
    let config = checked(config)?;
    let weights = load_model(&a.weights, a.size)?;
    let spec = read_world(&a.world)?;
    let grid = rasterize(&spec);
    let pose = Pose::new(a.pose[0], a.pose[1], a.pose[2]);
    start_pose(&grid, pose)?;
    let scan = raycast_scan(&grid, pose, &config.episode.lidar, a.seed).map_err(|e| CliError::Run(e.to_string()))?;
    let obs = project_egocentric(&scan, weights.arch.input_size).map_err(|e| CliError::Run(e.to_string()))?;
    let result = imagine(&weights, &obs, &config.episode.imagine).map_err(|e| CliError::Run(e.to_string()))?;
    let size = result.size;
    let classes: Vec<f64> = obs.cells.iter().map(|c| c.as_u8() as f64 / 4.0).collect();
    let files: [(&str, Vec<u8>); 4] = [
        ("observation.pgm", pgm(size, &classes)),
        ("raw.pgm", pgm(size, &result.raw)),
        ("mask.pgm", pgm(size, &result.mask)),
        ("occupancy.pbm", pbm(&result.occupancy)),
    ];
    let mut manifest = Manifest::new("imagine", config.to_toml());
    manifest.seed("noise", a.seed).input(&a.weights)?.input(&a.world)?;
    for (name, bytes) in &files {
        let path = a.out_dir.join(name);
        write_file(&path, bytes)?;
        manifest.output(&path)?;
    }
    manifest.write(&a.out_dir.join("manifest.json"))?;
    println!("{} occupied of {}x{}", result.occupancy.count(), size, size);
    Ok(())
}

fn navigate(a: NavigateArgs, mut config: RunConfig) -> Result<(), CliError> {
    let im = &mut config.episode.imagine;
    im.theta = a.theta.unwrap_or(im.theta);
    let config = checked(config)?;
    let spec = read_world(&a.world)?;
    let grid = rasterize(&spec);
    let model = a.weights.as_deref().map(|p| load_model(p, a.size)).transpose()?;
    let imagination = match (&model, a.oracle) {
        (Some(w), _) => Imagination::Model(w),
        (None, true) => Imagination::Oracle { size: a.size.unwrap_or(60) },
        (None, false) => Imagination::None,
    };
    let start = Pose::new(a.start[0], a.start[1], a.start[2]);
    let goal = (a.goal[0], a.goal[1]);
    let traj = run_episode(&grid, start, goal, imagination, &config.episode, a.seed).map_err(|e| CliError::Run(e.to_string()))?;
    let mut manifest = Manifest::new("navigate", config.to_toml());
    manifest.seed("seed", a.seed).input(&a.world)?;
    if let Some(p) = &a.weights {
        manifest.input(p)?;
    }
    write_file(&a.out, traj.to_jsonl())?;
    manifest.output(&a.out)?;
    if let Some(svg) = &a.svg {
        write_file(svg, render_svg(&grid, &[(traj.agent.as_str(), &traj)], Some(goal)))?;
        manifest.output(svg)?;
    }
    manifest.write(&beside(&a.out))?;
    let m = trajectory_metrics(&traj).map_err(|e| CliError::Run(e.to_string()))?;
    println!(
        "{}: {} length {:.3} m duration {:.1} s avg {:.3} m/s",
        traj.agent, m.termination, m.length, m.duration, m.avg_velocity
    );
    Ok(())
}

fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Io { path, source } => CliError::io(path, source),
        EvalError::World { path, source } => CliError::format(path, source),
        EvalError::Suite(m) => CliError::Config(m),
        other => CliError::Run(other.to_string()),
    }
}

fn bench(a: BenchArgs, mut config: RunConfig) -> Result<(), CliError> {
    let b = &mut config.bench;
    b.paths_per_map = a.paths.unwrap_or(b.paths_per_map);
    b.seed = a.seed.unwrap_or(b.seed);
    let im = &mut config.episode.imagine;
    im.theta = a.theta.unwrap_or(im.theta);
    let config = checked(config)?;
    let suite = load_suite(&a.scenarios).map_err(eval_error)?;
    let models: Vec<(String, PathBuf, Weights<f32>)> = a
        .models
        .iter()
        .map(|(label, path)| Ok((label.clone(), path.clone(), load_model(path, None)?)))
        .collect::<Result<_, CliError>>()?;
    let oracles = if a.oracles.is_empty() && models.is_empty() { vec![60] } else { a.oracles.clone() };
    let mut agents = vec![Agent {
        label: "none".into(),
        imagination: Imagination::None,
    }];
    for size in oracles {
        semnav_core::sensor::check_size(size).map_err(|e| CliError::Config(e.to_string()))?;
        agents.push(Agent {
            label: format!("oracle{size}"),
            imagination: Imagination::Oracle { size },
        });
    }
    for (label, _, w) in &models {
        agents.push(Agent {
            label: label.clone(),
            imagination: Imagination::Model(w),
        });
    }
    let mut labels: Vec<&str> = agents.iter().map(|a| a.label.as_str()).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("agent labels must be unique".into()));
    }

    let report = run_bench(&suite, &agents, &config.episode, &config.bench).map_err(eval_error)?;

    let mut manifest = Manifest::new("bench", config.to_toml());
    manifest.seed("bench.seed", config.bench.seed).input(&a.scenarios)?;
    for sc in &suite.scenario {
        manifest.seed(&format!("{}.eval_seed", sc.name), sc.eval_seed).input(&sc.world)?;
    }
    for (_, path, _) in &models {
        manifest.input(path)?;
    }
    let out = &a.out_dir;
    let mut written = Vec::new();
    for e in &report.episodes {
        let path = out.join("trajectories").join(format!("{}_path{}_{}.jsonl", e.world, e.path, e.agent));
        write_file(&path, e.trajectory.to_jsonl())?;
        written.push(path);
    }
    for (name, svg) in report.svgs(&suite).map_err(eval_error)? {
        let path = out.join("svg").join(name);
        write_file(&path, svg)?;
        written.push(path);
    }
    for (name, text) in [
        ("metrics.jsonl", report.metrics_jsonl()),
        ("summary.txt", report.summary_text()),
        ("summary.json", report.summary_json()),
    ] {
        let path = out.join(name);
        write_file(&path, text)?;
        written.push(path);
    }
    for p in &written {
        manifest.output(p)?;
    }
    manifest.write(&out.join("manifest.json"))?;
    print!("{}", report.summary_text());
    Ok(())
}

fn plot(a: PlotArgs) -> Result<(), CliError> {
    let spec = read_world(&a.world)?;
    let grid = rasterize(&spec);
    let mut trajs: Vec<Trajectory> = Vec::new();
    for p in &a.trajectories {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        trajs.push(Trajectory::from_jsonl(&text).map_err(|m| CliError::format(p, m))?);
    }
    let runs: Vec<(&str, &Trajectory)> = trajs.iter().map(|t| (t.agent.as_str(), t)).collect();
    write_file(&a.out, render_svg(&grid, &runs, a.goal.map(|[x, y]| (x, y))))?;
    println!("wrote {}", a.out.display());
    Ok(())
}
