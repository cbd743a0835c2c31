use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = "\
[scenario]
episode_slots = 12

[reward]
mu_bps = 4.0e5
sigma_bps = 1.0e5

[baselines]
grid_step_km = 400.0

[dqn]
hidden = [8]
batch_size = 16
replay_capacity = 64
target_sync_period = 5
iterations = 60
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_satrelay"))
}

fn write_config(dir: &Path) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, SMALL).unwrap();
    p
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn assert_outputs_exist(dir: &Path) {
    let m = manifest(dir);
    assert_eq!(m["status"], "complete");
    for o in m["outputs"].as_array().unwrap() {
        assert!(dir.join(o.as_str().unwrap()).is_file(), "missing {o}");
    }
}

#[test]
fn missing_config_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["train", "--config", "/nonexistent/run.toml", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/run.toml"));
}

#[test]
fn invalid_config_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[kinematics]\naccel_levels = 1\n").unwrap();
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("accel_levels"));
}

#[test]
fn zero_iterations_writes_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("t0");
    run(bin()
        .args(["train", "--iterations", "0", "--seed", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out));
    let ck = satrelay::neural::MlpParams::load(&out.join("checkpoint.json")).unwrap();
    let rc = satrelay::config::RunConfig::load(&cfg).unwrap();
    let init = satrelay::neural::init_params(&rc.dqn.layer_dims(&rc.scenario), 4).unwrap();
    assert_eq!(ck, init);
    assert_eq!(
        fs::read_to_string(out.join("training_log.csv")).unwrap(),
        "iteration,loss,epsilon,episode,episode_mean_reward\n"
    );
    assert_outputs_exist(&out);
    assert_eq!(manifest(&out)["seed"], 4);
}

#[test]
fn training_logs_are_reproducible_and_config_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let before = fs::read(&cfg).unwrap();
    let logs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            run(bin()
                .args(["train", "--seed", "7", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out));
            assert_outputs_exist(&out);
            fs::read(out.join("training_log.csv")).unwrap()
        })
        .collect();
    assert_eq!(logs[0], logs[1]);
    assert!(!logs[0].contains(&b'\r'));
    assert_eq!(fs::read(&cfg).unwrap(), before);
}

#[test]
fn evaluate_writes_trace_and_consistent_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let train_out = dir.path().join("train");
    run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&train_out));
    let eval_out = dir.path().join("eval");
    run(bin()
        .args(["evaluate", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(train_out.join("checkpoint.json"))
        .arg("--out")
        .arg(&eval_out));
    assert_outputs_exist(&eval_out);

    let trace = fs::read_to_string(eval_out.join("trace.csv")).unwrap();
    let rows: Vec<&str> = trace.lines().skip(1).collect();
    assert_eq!(rows.len(), 12);
    let e2e: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(14).unwrap().parse().unwrap())
        .collect();
    let mean = e2e.iter().sum::<f64>() / e2e.len() as f64;
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval_out.join("summary.json")).unwrap()).unwrap();
    let se = summary["spectral_efficiency"].as_f64().unwrap();
    assert!((se - mean / 1e9).abs() <= 1e-12 * se.abs());
}

#[test]
fn evaluate_rejects_bad_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let corrupt = dir.path().join("corrupt.json");
    fs::write(&corrupt, "{\"format_version\": 1, \"layer_dims\": [").unwrap();
    let wrong = dir.path().join("wrong.json");
    satrelay::neural::init_params(&[3, 4, 5], 0)
        .unwrap()
        .save(&wrong)
        .unwrap();
    for ck in [&corrupt, &wrong] {
        let out = bin()
            .args(["evaluate", "--config"])
            .arg(&cfg)
            .arg("--checkpoint")
            .arg(ck)
            .arg("--out")
            .arg(dir.path().join("e"))
            .output()
            .unwrap();
        assert!(!out.status.success());
    }
}

#[test]
fn baselines_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());

    let one = dir.path().join("direct");
    run(bin()
        .args(["baselines", "--scheme", "direct", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&one));
    let csv = fs::read_to_string(one.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("direct,"));
    assert_outputs_exist(&one);

    let ck_dir = dir.path().join("train");
    run(bin()
        .args(["train", "--iterations", "0", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&ck_dir));
    let all = dir.path().join("all");
    run(bin()
        .args(["baselines", "--all", "--grid-step", "400000", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(ck_dir.join("checkpoint.json"))
        .arg("--out")
        .arg(&all));
    let csv = fs::read_to_string(all.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    for s in [
        "direct",
        "sat-only",
        "fixed-ground",
        "fixed-hap",
        "mobile-hap",
    ] {
        let trace = fs::read_to_string(all.join(format!("traces/{s}.csv"))).unwrap();
        assert_eq!(trace.lines().count(), 13, "{s}");
    }
    assert_outputs_exist(&all);
}

#[test]
fn unknown_scheme_lists_valid_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["baselines", "--scheme", "relay", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for s in ["direct", "sat-only", "fixed-ground", "fixed-hap"] {
        assert!(err.contains(s), "{err}");
    }
}
