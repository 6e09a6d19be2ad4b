use std::path::Path;
use std::process::{Command, Output};

fn bifcurrent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bifcurrent")).args(args).output().expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn enumerate_then_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = bifcurrent(&["enumerate", "--radius", "4", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("ball.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("word,d,trace_sq,length"));
    let m = manifest(&out);
    assert_eq!(m["config"]["enumerate"]["radius"], 4.0);
    assert_eq!(m["config"]["master_seed"], 3);

    let again = tmp.path().join("again");
    let o = bifcurrent(&["rerun", "--manifest", out.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("identical"));
}

#[test]
fn config_file_drives_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("census.toml");
    std::fs::write(
        &cfg,
        "pipeline = \"census\"\nmaster_seed = 5\noutput_dir = \"unused\"\n\n[census]\nradii = [5.0, 6.0]\nchi_ref = 0.5\n",
    )
    .unwrap();
    let out = tmp.path().join("census");
    let o = bifcurrent(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("census.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let o = bifcurrent(&["census", "--config", cfg.to_str().unwrap(), "--radius-ladder", "4,5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(manifest(&out)["config"]["census"]["radii"], serde_json::json!([4.0, 5.0]));
}

#[test]
fn failures_exit_nonzero_with_a_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("mu.toml");
    std::fs::write(&cfg, "[fls]\nchains = 1\nsteps = 10\n").unwrap();
    let out = tmp.path().join("mu");
    let o = bifcurrent(&["lyapunov", "--config", cfg.to_str().unwrap(), "--method", "mu", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(manifest(&out)["error"]["kind"], "estimator");

    let o = bifcurrent(&["grid"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("output directory"));

    let o = bifcurrent(&["lyapunov", "--method", "bogus", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
}
