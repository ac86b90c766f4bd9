use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn smoothrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothrace"))
        .args(args)
        .env("SMOOTHRACE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_default_config(dir: &Path) -> String {
    let o = smoothrace(&["default-config"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let text = text.replace("preset = \"s_curve\"", "preset = \"oval\"");
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn train_zero_steps_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_default_config(dir.path());
    let run = dir.path().join("run");
    let o = smoothrace(&["train", "--config", &cfg, "--steps", "0", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run.join("run_manifest.json").exists());
    assert!(run.join("checkpoint/params.bin").exists());

    let eval_dir = dir.path().join("eval");
    let ck = run.join("checkpoint");
    let o = smoothrace(&[
        "eval",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--config",
        &cfg,
        "--runs",
        "2",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("success_rate_pct"));
    let log = eval_dir.join("action_log.csv");
    assert!(log.exists());

    let fig = dir.path().join("fig");
    let o = smoothrace(&["export-figures", "--log", log.to_str().unwrap(), "--out", fig.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("series:"));

    let wide = fs::read_to_string(&cfg).unwrap().replace("width = 32", "width = 40");
    let other = dir.path().join("other.toml");
    fs::write(&other, wide).unwrap();
    let args = [
        "eval",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--config",
        other.to_str().unwrap(),
        "--runs",
        "1",
        "--out",
        eval_dir.to_str().unwrap(),
    ];
    assert_eq!(code(&smoothrace(&args)), 6);
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_default_config(dir.path());
    let text: String = fs::read_to_string(&cfg)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("tau "))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&cfg, text).unwrap();
    let o = smoothrace(&["train", "--config", &cfg, "--steps", "0"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sac.tau"));
}

#[test]
fn distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&smoothrace(&["train", "--config", missing.to_str().unwrap()])), 4);
    assert_eq!(code(&smoothrace(&["no-such-command"])), 2);
    let cfg = write_default_config(dir.path());
    let nope = dir.path().join("nope");
    let o = smoothrace(&["eval", "--checkpoint", nope.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(code(&o), 4);
}

#[test]
fn make_track_and_empty_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("track.csv");
    let o = smoothrace(&["make-track", "--preset", "s_curve", "--half-width", "0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(&out).unwrap().starts_with("# halfwidth=0.5"));

    let log = dir.path().join("empty.csv");
    fs::write(&log, "step,episode,steer,speed,reward,progress,terminated\n").unwrap();
    let o = smoothrace(&["export-figures", "--log", log.to_str().unwrap(), "--out", dir.path().join("f").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}
