use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn campaigns() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../campaigns")
}

fn aht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aht")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    edit_config("decoupling", dir, edit)
}

fn edit_config(campaign: &str, dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let text = fs::read_to_string(campaigns().join(campaign).join("config.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    edit(&mut v);
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&aht(&["--help"])), 0);
    assert_eq!(code(&aht(&["--version"])), 0);
    assert_eq!(code(&aht(&["frobnicate"])), 2);
    assert_eq!(code(&aht(&["cspace"])), 2, "missing --config");
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&aht(&["--threads", "0", "--out", s(tmp.path()), "cspace"])), 2);
}

#[test]
fn unknown_config_keys_exit_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |v| {
        v["control"]["dt"] = Value::from(2.0);
    });
    let out = aht(&["--config", s(&cfg), "--out", s(tmp.path()), "cspace"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn unreachable_target_exits_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = edit_config("cross", tmp.path(), |v| {
        v["design"]["graphs"]["{11,12}"] = serde_json::json!({"XYZ": 1});
    });
    let out_dir = tmp.path().join("out");
    let out = aht(&["--config", s(&cfg), "--out", s(&out_dir), "feasible"]);
    assert_eq!(code(&out), 3);
    assert!(out_dir.join("feasibility.json").exists());
    assert!(out_dir.join("feasible.record.json").exists());
}

#[test]
fn exhausted_budget_exits_not_converged_with_best_effort_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |v| {
        v["search"]["max_evals"] = Value::from(200);
        v["search"]["q_max"] = Value::from(12);
    });
    let out_dir = tmp.path().join("out");
    let out = aht(&["--config", s(&cfg), "--out", s(&out_dir), "design"]);
    assert_eq!(code(&out), 4);
    let csv = fs::read_to_string(out_dir.join("sequence.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "duration_us,omega1_khz,phi_rad,delta_omega_khz");
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("design.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], Value::Bool(false));
    assert!(fs::read_to_string(out_dir.join("trace.jsonl")).unwrap().lines().count() > 0);
}

#[test]
fn cspace_reports_component_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = aht(&["--config", s(&campaigns().join("cross/config.json")), "--out", s(tmp.path()), "cspace"]);
    assert_eq!(code(&out), 0);
    let dump: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("cspace_basis.json")).unwrap()).unwrap();
    assert_eq!(dump["composite_dim"], Value::from(11));
    let record: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("cspace.record.json")).unwrap()).unwrap();
    assert!(record["outputs"]["cspace_basis.json"].is_string());
}

#[test]
fn graphs_lists_second_order_graphs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = campaigns().join("cross/config.json");
    let out = aht(&["--config", s(&cfg), "--out", s(tmp.path()), "graphs", "--order", "2"]);
    assert_eq!(code(&out), 0);
    let list: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("graphs_r2.json")).unwrap()).unwrap();
    assert_eq!(list.as_array().unwrap().len(), 7);
    assert_eq!(code(&aht(&["--config", s(&cfg), "--out", s(tmp.path()), "graphs", "--order", "9"])), 2);
}

#[test]
fn verify_passes_shipped_decoupling_sequence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = campaigns().join("decoupling");
    let out = aht(&[
        "--config",
        s(&dir.join("config.json")),
        "--out",
        s(tmp.path()),
        "verify",
        "--sequence",
        s(&dir.join("sequence.csv")),
    ]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("verify.json")).unwrap()).unwrap();
    for g in report["graphs"].as_array().unwrap() {
        assert_eq!(g["pass"], Value::Bool(true), "{g}");
    }
    assert!(report["zeroth_residual"].as_f64().unwrap() <= 1e-3);
    assert!(report["oracle"]["relative"].as_f64().unwrap() <= 5e-3);
}

#[test]
fn symmetrize_writes_doubled_sequence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = campaigns().join("cross");
    let out = aht(&[
        "--config",
        s(&dir.join("config.json")),
        "--out",
        s(tmp.path()),
        "symmetrize",
        "--sequence",
        s(&dir.join("sequence.csv")),
    ]);
    assert_eq!(code(&out), 0);
    let sym = fs::read_to_string(tmp.path().join("sequence_sym.csv")).unwrap();
    let base = fs::read_to_string(dir.join("sequence.csv")).unwrap();
    assert_eq!(sym.lines().count() - 1, 2 * (base.lines().count() - 1));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("symmetrize.json")).unwrap()).unwrap();
    assert!(report["symmetrized_parity_r2"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn symmetrize_rejects_non_identity_cycles() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("pulse.csv");
    fs::write(&seq, "duration_us,omega1_khz,phi_rad,delta_omega_khz\n2,0,0,0\n2,125,0,0\n2,0,0,0\n").unwrap();
    let cfg = campaigns().join("cross/config.json");
    let out = aht(&["--config", s(&cfg), "--out", s(tmp.path()), "symmetrize", "--sequence", s(&seq)]);
    assert_ne!(code(&out), 0);
}

#[test]
fn probe_reports_rank() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = campaigns().join("decoupling/config.json");
    let out = aht(&["--config", s(&cfg), "--out", s(tmp.path()), "probe", "--samples", "40", "--q", "8"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("probe_r2.json")).unwrap()).unwrap();
    assert!(report["rank"].as_u64().unwrap() > 0);
    assert_eq!(report["graphs"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = campaigns().join("decoupling/config.json");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&aht(&["--config", s(&cfg), "--out", s(&a), "simulate"])), 0);
    assert_eq!(code(&aht(&["--config", s(&cfg), "--out", s(&b), "--threads", "1", "simulate"])), 0);
    for name in ["design.csv", "idle.csv", "design.meta.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("design.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t_ms,S_mean,S_stderr");
    assert!(lines.next().unwrap().starts_with("0.000000,1.000000000000e0,"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(a.join("design.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], Value::from(1));
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_override_changes_the_ensemble() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = campaigns().join("decoupling/config.json");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&aht(&["--config", s(&cfg), "--out", s(&a), "simulate"])), 0);
    assert_eq!(code(&aht(&["--config", s(&cfg), "--out", s(&b), "--seed", "99", "simulate"])), 0);
    assert_ne!(fs::read(a.join("design.csv")).unwrap(), fs::read(b.join("design.csv")).unwrap());
}

#[test]
fn replay_detects_tampered_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = campaigns().join("decoupling/config.json");
    let first = tmp.path().join("first");
    assert_eq!(code(&aht(&["--config", s(&cfg), "--out", s(&first), "simulate"])), 0);
    let record_path = first.join("simulate.record.json");
    let again = tmp.path().join("again");
    assert_eq!(code(&aht(&["--out", s(&again), "simulate", "--replay", s(&record_path)])), 0);

    let mut record: Value = serde_json::from_str(&fs::read_to_string(&record_path).unwrap()).unwrap();
    record["outputs"]["idle.csv"] = Value::from("0".repeat(64));
    fs::write(&record_path, serde_json::to_string(&record).unwrap()).unwrap();
    let out = aht(&["--out", s(&tmp.path().join("third")), "simulate", "--replay", s(&record_path)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("DIFFERS"));
}

#[test]
fn regime_sweep_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |v| {
        v["simulation"]["sigma_dip_khz"] = serde_json::json!([10, 5, 2.5]);
        v["simulation"]["horizons_ms"] = serde_json::json!([0.1, 0.5]);
        v["simulation"]["realizations"] = Value::from(8);
        let dir = campaigns().join("decoupling");
        v["simulation"]["sequences"] = serde_json::json!({
            "design": dir.join("sequence.csv"),
            "idle": dir.join("idle.csv"),
        });
    });
    let out_dir = tmp.path().join("out");
    assert_eq!(code(&aht(&["--config", s(&cfg), "--out", s(&out_dir), "simulate"])), 0);
    let sweep = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "sequence,sigma_dip_khz,t_1e_ms,S_at_0.1ms,S_at_0.5ms,dropped,error");
    assert_eq!(lines.len(), 7);
    assert!(out_dir.join("design_sdip2p5khz.csv").exists());
}
