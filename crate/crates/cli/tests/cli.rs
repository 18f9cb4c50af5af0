use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

const SMOKE: &str = "\
task.name = band2
task.duration_s = 0.1
task.train_size = 16
task.val_size = 4
task.test_size = 4
init.n_filters = 8
frontend.kernel_width = 101
frontend.stride = 80
frontend.lp_width = 81
train.epochs = 2
train.batch_size = 4
train.hidden = 8
train.lr_max = 0.01
";

fn leafkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leafkit"))
        .args(args)
        .env("LEAFKIT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, format!("{SMOKE}{extra}")).unwrap();
    path.display().to_string()
}

#[test]
fn help_exits_zero_and_bad_usage_exits_one() {
    assert_eq!(code(&leafkit(&["--help"])), 0);
    assert_eq!(code(&leafkit(&["frobnicate"])), 1);
    assert_eq!(code(&leafkit(&["train", "--seed", "abc"])), 1);
}

#[test]
fn init_fb_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "init.kind = random\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = leafkit(&["init-fb", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = std::fs::read(a.join("filterbank.csv")).unwrap();
    let csv_b = std::fs::read(b.join("filterbank.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let svg = std::fs::read_to_string(a.join("filterbank.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn single_filter_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("one.cfg");
    std::fs::write(&cfg, "init.n_filters = 1\n").unwrap();
    let out = tmp.path().join("fb");
    let o = leafkit(&["init-fb", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "train.epochz = 3\n").unwrap();
    let o = leafkit(&["init-fb", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_config_file_is_a_runtime_error() {
    let o = leafkit(&["init-fb", "--config", "/nonexistent/leafkit.cfg"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn analyze_without_snapshots_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("fb");
    assert_eq!(code(&leafkit(&["init-fb", "--config", &cfg, "--out", out.to_str().unwrap()])), 0);
    let o = leafkit(&["analyze", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_ne!(code(&o), 0);
}

#[test]
fn smoke_train_analyze_and_rerun_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let run = tmp.path().join("run");
    let run_s = run.to_str().unwrap();
    let t = Instant::now();
    let o = leafkit(&["train", "--config", &cfg, "--out", run_s]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(t.elapsed().as_secs() < 60);
    for f in ["config.txt", "metrics.csv", "checkpoints/last.ckpt", "snapshots/epoch_000.csv", "snapshots/epoch_002.csv"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }

    let o = leafkit(&["train", "--config", &cfg, "--out", run_s]);
    assert_eq!(code(&o), 1, "existing run directory must be refused");
    let first = std::fs::read(run.join("metrics.csv")).unwrap();
    let o = leafkit(&["train", "--config", &cfg, "--out", run_s, "--overwrite"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(run.join("metrics.csv")).unwrap(), first);

    let o = leafkit(&["analyze", "--config", &cfg, "--out", run_s]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trajectory.csv", "summary.csv", "jsd.svg", "responses.svg"] {
        assert!(run.join("analysis").join(f).is_file(), "missing {f}");
    }
}

#[test]
fn seed_flag_changes_training() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&leafkit(&["train", "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "1"])), 0);
    assert_eq!(code(&leafkit(&["train", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "2"])), 0);
    assert_ne!(
        std::fs::read(a.join("metrics.csv")).unwrap(),
        std::fs::read(b.join("metrics.csv")).unwrap()
    );
}

#[test]
fn jsd_between_identical_filterbanks_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("fb");
    assert_eq!(code(&leafkit(&["init-fb", "--config", &cfg, "--out", out.to_str().unwrap()])), 0);
    let csv = out.join("filterbank.csv");
    let o = leafkit(&["jsd", csv.to_str().unwrap(), csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("filter")).collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        let v: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn grad_check_gate_passes() {
    let o = leafkit(&["grad-check", "--instances", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("filterbank.eta"));
}
