use std::path::Path;
use std::process::{Command, Output};

fn mrfmotion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrfmotion"))
        .args(args)
        .env_remove("MRFMOTION_SEED")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "width = 10\nheight = 10\nobject_x = 3\nobject_y = 3\nobject_width = 4\nobject_height = 4\n";

#[test]
fn generate_writes_frames_truth_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "spec.toml", SMALL);
    let out = tmp.path().join("scene");
    let o = mrfmotion(&["generate", "--spec", &spec, "--out", path(&out)]);
    assert!(o.status.success(), "{o:?}");
    for f in ["prev.pgm", "curr.pgm", "truth.csv", "manifest.json", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn generation_is_reproducible_from_the_stored_config() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "spec.toml", &format!("{SMALL}seed = 4\n"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(mrfmotion(&["generate", "--spec", &spec, "--out", path(&a)]).status.success());
    let stored = a.join("config.toml");
    assert!(mrfmotion(&["generate", "--spec", path(&stored), "--out", path(&b)]).status.success());
    for f in ["prev.pgm", "curr.pgm", "truth.csv", "manifest.json", "config.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_environment_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "spec.toml", SMALL);
    let out = tmp.path().join("s");
    let o = Command::new(env!("CARGO_BIN_EXE_mrfmotion"))
        .args(["generate", "--spec", &spec, "--out", path(&out)])
        .env("MRFMOTION_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success());
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 77"), "{manifest}");
}

#[test]
fn identical_frames_estimate_to_zero_motion() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "spec.toml", &format!("{SMALL}displacement_x = 0\ndisplacement_y = 0\n"));
    let scene = tmp.path().join("scene");
    assert!(mrfmotion(&["generate", "--spec", &spec, "--out", path(&scene)]).status.success());
    let est = tmp.path().join("est");
    let o = mrfmotion(&["estimate", "--frames", path(&scene), "--params", &spec, "--out", path(&est)]);
    assert!(o.status.success(), "{o:?}");
    let field = std::fs::read_to_string(est.join("field.csv")).unwrap();
    let site_rows = field.lines().skip(1).take_while(|l| !l.starts_with("x1"));
    for row in site_rows.filter(|r| !r.is_empty()) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(&cols[2..4], &["0", "0"], "{row}");
    }
    let status = std::fs::read_to_string(est.join("status.json")).unwrap();
    assert!(status.contains("\"converged\": true"), "{status}");
    assert!(est.join("quiver.svg").exists() && est.join("trace.csv").exists());

    let m = mrfmotion(&["metrics", "--est", path(&est.join("field.csv")), "--truth", path(&scene.join("truth.csv"))]);
    assert!(m.status.success());
    assert!(stdout(&m).contains("D1 0.000000"), "{}", stdout(&m));
}

#[test]
fn unit_scale_diverges_with_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    assert!(mrfmotion(&["generate", "--out", path(&scene)]).status.success());
    let est = tmp.path().join("est");
    let o = mrfmotion(&["estimate", "--frames", path(&scene), "--mu", "1", "--out", path(&est)]);
    assert_eq!(o.status.code(), Some(2), "{o:?}");
    let status = std::fs::read_to_string(est.join("status.json")).unwrap();
    assert!(status.contains("\"diverged\": true"));
}

#[test]
fn sweep_selects_a_converged_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "spec.toml", SMALL);
    let scene = tmp.path().join("scene");
    assert!(mrfmotion(&["generate", "--spec", &spec, "--out", path(&scene)]).status.success());
    let out = tmp.path().join("sweep");
    let truth = scene.join("truth.csv");
    let o = mrfmotion(&[
        "sweep-mu", "--frames", path(&scene), "--truth", path(&truth), "--grid", "1:9:2", "--params", &spec, "--workers", "2", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    assert!(out.join("mu_star.txt").exists());
}

#[test]
fn learn_with_zero_steps_emits_only_the_initial_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", &format!("{SMALL}steps = 0\n"));
    let scene = tmp.path().join("scene");
    assert!(mrfmotion(&["generate", "--spec", &cfg, "--out", path(&scene)]).status.success());
    let out = tmp.path().join("learn");
    let truth = scene.join("truth.csv");
    let o = mrfmotion(&["learn", "--frames", path(&scene), "--config", &cfg, "--truth", path(&truth), "--out", path(&out)]);
    assert!(o.status.success(), "{o:?}");
    let records = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 1);
    assert!(out.join("quiver_0000.svg").exists());
    assert!(out.join("params.json").exists());
}

#[test]
fn learn_snapshots_follow_the_cadence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", &format!("{SMALL}steps = 4\nsnapshot_every = 2\nsweeps = 20\nburn_in = 5\n"));
    let scene = tmp.path().join("scene");
    assert!(mrfmotion(&["generate", "--spec", &cfg, "--out", path(&scene)]).status.success());
    let out = tmp.path().join("learn");
    let o = mrfmotion(&["learn", "--frames", path(&scene), "--config", &cfg, "--out", path(&out)]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(std::fs::read_to_string(out.join("records.jsonl")).unwrap().lines().count(), 5);
    for step in [0, 2, 4] {
        assert!(out.join(format!("quiver_{step:04}.svg")).exists());
    }
    assert!(!out.join("quiver_0001.svg").exists());
}

#[test]
fn oracle_checks_pass_on_a_tiny_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let frames = tmp.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    std::fs::write(frames.join("prev.pgm"), "P2\n2 2\n255\n10 20\n30 5\n").unwrap();
    std::fs::write(frames.join("curr.pgm"), "P2\n2 2\n255\n12 18\n25 7\n").unwrap();
    let params = write(tmp.path(), "p.toml", "max_speed = 1\nb = 0.02\nlambda_d = 0.5\nlambda_s = 0.4\nalpha_l = 5.0\nbeta_d = 1.0\nt_s = 1.0\n");
    for check in ["gradients", "kl"] {
        let o = mrfmotion(&["oracle", "--frames", path(&frames), "--params", &params, "--check", check]);
        assert!(o.status.success(), "{check}: {}", stdout(&o));
        assert!(stdout(&o).trim_end().ends_with("PASS"));
    }
    let o = mrfmotion(&["oracle", "--frames", path(&frames), "--params", &params, "--check", "marginals", "--budget", "10"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(mrfmotion(&["estimate", "--bogus"]).status.code(), Some(64));
    assert_eq!(mrfmotion(&[]).status.code(), Some(64));
    assert_eq!(mrfmotion(&["--help"]).status.code(), Some(0));
    let missing = tmp.path().join("missing");
    assert_eq!(mrfmotion(&["estimate", "--frames", path(&missing), "--out", path(&out)]).status.code(), Some(66));
    let bad = write(tmp.path(), "bad.toml", "lambda_x = 1\n");
    assert_eq!(mrfmotion(&["generate", "--spec", &bad, "--out", path(&out)]).status.code(), Some(65));
    let frames = tmp.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    std::fs::write(frames.join("prev.pgm"), "P2\n2 2\n999\n1 2 3 4\n").unwrap();
    std::fs::write(frames.join("curr.pgm"), "P2\n2 2\n255\n1 2 3 4\n").unwrap();
    assert_eq!(mrfmotion(&["estimate", "--frames", path(&frames), "--out", path(&out)]).status.code(), Some(65));
    let help = stdout(&mrfmotion(&["--help"]));
    assert!(help.contains("Exit codes") && help.contains("MRFMOTION_SEED"));
}
