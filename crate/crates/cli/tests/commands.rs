use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use shadowgame_cli::{cmd_fields, cmd_play, cmd_slice, cmd_solve, cmd_sweep, world, Fix, RunConfig, FIELD_NAMES};
use shadowgame_core::engine::replay;
use shadowgame_core::geometry::{Cell, Grid2D};
use shadowgame_core::io::read_field;
use shadowgame_core::visibility::AuxSource;

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes").join(name)
}

fn config(scene_name: &str, out: &Path) -> RunConfig {
    RunConfig {
        scene: Some(scene(scene_name)),
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

#[test]
fn fields_write_six_panels_with_a_shadow_behind_the_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("circle.json", dir.path());
    cfg.m = 64;
    let written = cmd_fields(&cfg, [0.125, 0.5], AuxSource::Visibility).unwrap();
    assert_eq!(written.len(), 18);
    for name in FIELD_NAMES {
        let pgm = fs::read(dir.path().join(format!("{name}.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5\n64 64\n255\n"));
        assert_eq!(pgm.len(), b"P5\n64 64\n255\n".len() + 64 * 64);
    }
    let (_, xi) = read_field(&dir.path().join("xi.json")).unwrap();
    let g = xi.grid();
    assert!(xi.get(g.nearest_cell([0.85, 0.5])) <= 0.0);
    assert!(xi.get(g.nearest_cell([0.85, 0.9])) > 0.0);
    assert!(xi.get(g.nearest_cell([0.2, 0.5])) > 0.0);
}

#[test]
fn empty_scene_is_fully_visible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("empty.json", dir.path());
    cmd_fields(&cfg, [0.3, 0.6], AuxSource::Visibility).unwrap();
    let (_, psi) = read_field(&dir.path().join("psi.json")).unwrap();
    assert!(psi.values().iter().all(|v| *v > 0.0));
}

#[test]
fn bad_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"shapes\": [\n  \"f_p\": 1\n}").unwrap();
    let mut cfg = config("circle.json", dir.path());
    cfg.scene = Some(bad);
    let err = format!("{:#}", cmd_fields(&cfg, [0.1, 0.1], AuxSource::Visibility).unwrap_err());
    assert!(err.contains("line 3"), "{err}");

    let cfg = config("circle.json", dir.path());
    assert!(cmd_fields(&cfg, [0.5, 0.5], AuxSource::Visibility).is_err());
}

#[test]
fn stationary_solve_converges_and_slices() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("circle.json", dir.path());
    cfg.f_p = Some(0.0);
    let (v, paths) = cmd_solve(&cfg).unwrap();
    assert_eq!(paths.len(), 3);
    let log = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let last: f64 = log.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last < 1e-5, "{last}");
    assert_eq!(log.lines().count(), v.iterations + 1);

    let g = Grid2D::new(16).unwrap();
    let p = g.nearest_cell([0.125, 0.5]);
    let files = cmd_slice(&cfg, &dir.path().join("value.json"), Fix::Pursuer(p)).unwrap();
    let (_, slice) = read_field(&files[1]).unwrap();
    assert_eq!(slice.get(g.nearest_cell([0.875, 0.5])), 0.0);
    assert!(slice.get(g.nearest_cell([0.125, 0.8])) > 0.0);

    let mut other = cfg.clone();
    other.scene = Some(scene("crescent.json"));
    assert!(cmd_slice(&other, &dir.path().join("value.json"), Fix::Pursuer(p)).is_err());
}

#[test]
fn sweep_has_one_row_per_unfiltered_start_and_is_idempotent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = config("circle.json", a.path());
    cfg.k_max = 30;
    let (stats, paths) = cmd_sweep(&cfg, None).unwrap();
    let w = world(&cfg).unwrap();
    let free = w.grid().cells().filter(|c| w.is_free(*c)).count();
    let csv = fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, stats.results.len());
    assert_eq!(stats.results.len() + stats.summary.n_filtered, free);

    cfg.out = b.path().to_path_buf();
    let (_, again) = cmd_sweep(&cfg, None).unwrap();
    for (x, y) in paths.iter().zip(&again) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn searched_game_replays_to_the_same_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("circle.json", dir.path());
    cfg.controller = "mcts:distance:100".into();
    cfg.k_max = 12;
    cfg.seed = 5;
    let (record, path) = cmd_play(&cfg, None).unwrap();
    let text = fs::read_to_string(path).unwrap();
    let parsed: shadowgame_core::engine::GameRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, record);
    let w = world(&cfg).unwrap();
    assert_eq!(&replay(&w, &parsed).unwrap(), record.final_state());
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shadowgame"))
}

#[test]
fn binary_help_and_exit_codes() {
    for sub in [
        "fields",
        "solve",
        "slice",
        "trajectory",
        "play",
        "sweep",
        "histogram",
        "serve",
    ] {
        let out = binary().args([sub, "--help"]).output().unwrap();
        assert!(out.status.success());
        let help = String::from_utf8(out.stdout).unwrap();
        assert!(help.contains("--workers") && help.contains("--seed"), "{sub}");
    }
    let dir = tempfile::tempdir().unwrap();
    let out = binary()
        .args([
            "play",
            "--scene",
            scene("circle.json").to_str().unwrap(),
            "--pursuers",
            "8,8",
            "--evaders",
            "1,8",
        ])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("inside an obstacle"));

    let out = binary()
        .args([
            "play",
            "--scene",
            scene("circle.json").to_str().unwrap(),
            "--k-max",
            "5",
            "--workers",
            "2",
        ])
        .args(["--controller", "shadow", "--pursuers", "8,3", "--evaders", "2,8"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record: shadowgame_core::engine::GameRecord =
        serde_json::from_slice(&fs::read(dir.path().join("game.json")).unwrap()).unwrap();
    assert_eq!(record.initial.pursuers, vec![Cell::new(8, 3)]);
}

#[test]
fn histogram_counts_every_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary()
        .args(["histogram", "--scene", scene("five_obstacles.json").to_str().unwrap()])
        .args(["--controller", "mcts:blend:300", "--bin-width", "100"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let h: shadowgame_core::engine::DepthHistogram =
        serde_json::from_slice(&fs::read(dir.path().join("histogram.json")).unwrap()).unwrap();
    assert_eq!(h.bins.len(), 3);
    assert_eq!(h.total(), 300);
}
