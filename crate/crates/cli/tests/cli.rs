//! Drives the `semnav` binary end to end on small inputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn semnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semnav")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_subcommand_prints_usage() {
    let out = semnav(&[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = semnav(&["navigate", "--start", "1,2,3,4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.slid");
    let out = semnav(&["train", "--data", s(&missing), "--variant", "60", "--out", s(&dir.path().join("w.imgw"))]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.slid") && err.contains("not found"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[train]\nepochz = 3\n").unwrap();
    let out = semnav(&["--config", s(&cfg), "show-config"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn show_config_round_trips_through_config_flag() {
    let dir = tempfile::tempdir().unwrap();
    let first = semnav(&["show-config"]);
    ok(&first);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, &first.stdout).unwrap();
    let second = semnav(&["--config", s(&cfg), "show-config"]);
    ok(&second);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn data_train_imagine_navigate_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let hall = repo("worlds/train_hall.toml");
    let office = repo("worlds/test_office.toml");
    let data = d.join("hall.slid");
    ok(&semnav(&["gen-data", "--world", s(&hall), "--count", "6", "--obs-size", "60", "--seed", "2", "--out", s(&data)]));
    assert!(data.exists() && d.join("hall.slid.manifest.json").exists());

    let weights = d.join("w.imgw");
    ok(&semnav(&[
        "train", "--data", s(&data), "--variant", "60", "--epochs", "2", "--batch-size", "3", "--out", s(&weights),
    ]));
    let log = std::fs::read_to_string(d.join("w.log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);

    let images = d.join("img");
    ok(&semnav(&[
        "imagine", "--weights", s(&weights), "--world", s(&office), "--pose", "4.5,3.5,-1.2", "--out-dir", s(&images),
    ]));
    for name in ["observation.pgm", "raw.pgm", "mask.pgm"] {
        let bytes = std::fs::read(images.join(name)).unwrap();
        assert!(bytes.starts_with(b"P5\n60 60\n255\n"), "{name}");
        assert_eq!(bytes.len(), b"P5\n60 60\n255\n".len() + 3600);
    }
    assert!(std::fs::read(images.join("occupancy.pbm")).unwrap().starts_with(b"P4\n60 60\n"));

    let traj = d.join("oracle.jsonl");
    let svg = d.join("oracle.svg");
    let nav = semnav(&[
        "navigate", "--world", s(&office), "--start", "1,3.5", "--goal", "9,3.5", "--oracle", "--out", s(&traj), "--svg",
        s(&svg),
    ]);
    ok(&nav);
    assert!(String::from_utf8_lossy(&nav.stdout).contains("goal_reached"));
    let first = std::fs::read_to_string(&traj).unwrap();
    let header: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert!(header.is_object());

    let plot = d.join("plot.svg");
    ok(&semnav(&["plot", "--world", s(&office), "--traj", s(&traj), "--goal", "9,3.5", "--out", s(&plot)]));
    let text = std::fs::read_to_string(&plot).unwrap();
    assert!(text.starts_with("<svg") && text.contains("<polyline"));
}

#[test]
fn bench_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    ok(&semnav(&["bench", "--scenarios", s(&repo("scenarios/bench.toml")), "--paths", "1", "--out-dir", s(&out)]));
    for f in ["metrics.jsonl", "summary.txt", "summary.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let svgs = std::fs::read_dir(out.join("svg")).unwrap().count();
    let trajs = std::fs::read_dir(out.join("trajectories")).unwrap().count();
    let metrics = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap().lines().count();
    assert_eq!(trajs, metrics);
    assert_eq!(trajs, 2 * svgs);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.to_string().contains("oracle60"));
}
