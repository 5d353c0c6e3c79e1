use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simlab"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// The synthetic scenario shortened to one second.
fn short_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(scenario("synthetic_truth.cfg")).unwrap();
    let text = edit(text.replace("t_final = 10.0", "t_final = 1.0").replace("decimation = 1", "decimation = 50"));
    let path = dir.join("short.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn run_writes_all_artifacts() {
    let dir = scratch("run_ok");
    let cfg = short_config(&dir, |t| t);
    let out_dir = dir.join("out");
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trace.csv", "summary.json", "positions.svg", "r_norm.svg", "w_norms.svg", "v_norms_agent1.svg"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["completed"], true);
    assert_eq!(summary["seed"], 7);
    let rows = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 21);
}

#[test]
fn seed_override_changes_summary() {
    let dir = scratch("run_seed");
    let cfg = short_config(&dir, |t| t);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--seed", "99", "--format", "csv", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 99"));
    assert!(!out_dir.join("positions.svg").exists());
}

#[test]
fn initial_barrier_violation_exits_3_with_header_only_csv() {
    let dir = scratch("run_breach");
    let cfg = short_config(&dir, |t| t.replace("mu = 3.0", "mu = 0.1"));
    let out_dir = dir.join("out");
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(code(&out), 3);
    let csv = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("barrier_breach\": true"));
}

#[test]
fn validation_error_exits_2_and_names_module() {
    let dir = scratch("run_invalid");
    let cfg = short_config(&dir, |t| t.replace("mu = 3.0", "mu = -1.0"));
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.join("out")).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[barrier]"));
}

#[test]
fn check_gains_passes_and_fails() {
    let bounds = scenario("synthetic_truth_bounds.toml");
    let out = bin().arg("check-gains").arg(scenario("synthetic_truth.cfg")).arg("--bounds").arg(&bounds).output().unwrap();
    assert_eq!(code(&out), 0);
    let json = stdout_json(&out);
    assert_eq!(json["verdict"], true);
    assert!((json["certificate"]["gamma2_min"].as_f64().unwrap() - 3.535).abs() < 1e-2);

    let dir = scratch("check_gains_low");
    let cfg = short_config(&dir, |t| t.replace("gamma2 = 4.0", "gamma2 = 1.0"));
    let out = bin().arg("check-gains").arg(&cfg).arg("--bounds").arg(&bounds).output().unwrap();
    assert_eq!(code(&out), 4);
    assert_eq!(stdout_json(&out)["certificate"]["gamma2_ok"], false);
}

#[test]
fn graph_info_reports_chain() {
    let out = bin().arg("graph-info").arg(scenario("reference_sec5.cfg")).output().unwrap();
    assert_eq!(code(&out), 0);
    let json = stdout_json(&out);
    let q: Vec<f64> = serde_json::from_value(json["q"].clone()).unwrap();
    assert_eq!(q, vec![1.0, 2.0, 3.0, 4.0]);
    assert!(json["q_matrix_eigenvalue_range"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn graph_info_rejects_indefinite_weighting() {
    let dir = scratch("graph_indefinite");
    let cfg = short_config(&dir, |t| {
        t.replace(
            "[0.0, 0.0, 0.0],\n  [0.0, 0.0, 0.0],\n  [0.0, 0.0, 0.0],",
            "[0.0, 0.3, 0.0],\n  [1.7, 0.0, 0.2],\n  [0.0, 2.5, 0.0],",
        )
        .replace("pinning = [1.0, 1.0, 1.0]", "pinning = [0.4, 0.0, 0.0]")
    });
    let out = bin().arg("graph-info").arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Q"));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = scratch("sweep");
    let cfg = short_config(&dir, |t| t);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["sweep", cfg.to_str().unwrap(), "--axis", "gamma1=2,5", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for v in ["gamma1=2", "gamma1=5"] {
        assert!(out_dir.join(v).join("trace.csv").is_file());
    }
    assert!(out_dir.join("sweep.json").is_file());

    let bad = bin().args(["sweep", cfg.to_str().unwrap(), "--axis", "colour=1"]).output().unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn plot_redraws_from_trace() {
    let dir = scratch("plot");
    let cfg = short_config(&dir, |t| t);
    let run_dir = dir.join("run");
    let out = bin().args(["run", cfg.to_str().unwrap(), "--format", "csv", "--out"]).arg(&run_dir).output().unwrap();
    assert_eq!(code(&out), 0);
    let plot_dir = dir.join("plots");
    let out = bin()
        .arg("plot")
        .arg(run_dir.join("trace.csv"))
        .arg("--out")
        .arg(&plot_dir)
        .args(["--mu", "3"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(plot_dir.join("r_norm.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}
