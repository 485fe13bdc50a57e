use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use euler_poisson::equilibria::{shear_state, ShearFlowSpec};
use euler_poisson::io::{parse_diagnostics_csv, read_snapshot};
use euler_poisson::{Anisotropy, ModeSet, Truncation};
use serde_json::Value;

const SHEAR: &str = r#"shear={"p":[1,0,0],"G":[0,0,1],"profile":[{"n":1,"re":1.0}]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_euler-poisson")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn dir_arg(dir: &Path) -> String {
    format!("output.dir={}", dir.display())
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/configs"))
}

fn modes(n: u32) -> Arc<ModeSet> {
    Arc::new(ModeSet::build(Truncation::new(n).unwrap(), Anisotropy::ISOTROPIC))
}

#[test]
fn verify_default_passes() {
    let out = run(&["verify", "--set", "cases=200"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out);
    assert_eq!(r["passed"], Value::Bool(true));
    assert!(r["checks"].as_array().unwrap().len() >= 10);
}

#[test]
fn verify_bundled_config_passes() {
    let cfg = configs().join("verify.json");
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--set", "cases=100"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn injected_fault_fails_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify",
        "--set",
        "fault=flip_cross_term_sign",
        "--set",
        "cases=100",
        "--set",
        "output.report=report.json",
        "--set",
        &dir_arg(tmp.path()),
    ]);
    assert_eq!(code(&out), 1);
    let failed: Vec<String> = serde_json::from_value(report(&out)["failed"].clone()).unwrap();
    assert!(failed.iter().any(|f| f == "check_antisymmetry"), "{failed:?}");
    assert!(stderr(&out).contains("check_antisymmetry"));
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(saved, report(&out));
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"N\": 1,").unwrap();
    assert_eq!(code(&run(&["verify", "--config", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["verify", "--set", "bogus=1"])), 2);
    assert_eq!(code(&run(&["verify", "--set", "N=0"])), 2);
    assert_eq!(code(&run(&["simulate", "--set", "dt=0"])), 2);
    assert_eq!(code(&run(&["verify", "--set", "aniso=[1,-1,1]"])), 2);
    assert_eq!(code(&run(&["shear"])), 2);
    let missing = tmp.path().join("missing.json");
    assert_eq!(code(&run(&["verify", "--config", missing.to_str().unwrap()])), 2);
}

#[test]
fn invalid_shear_specs_exit_2() {
    let out = run(&["shear", "--set", r#"shear={"p":[2,0,0],"G":[0,0,1],"profile":[{"n":1,"re":1}]}"#]);
    assert_eq!(code(&out), 2);
    let out = run(&["shear", "--set", r#"shear={"p":[1,0,0],"G":[1,0,0],"profile":[{"n":1,"re":1}]}"#]);
    assert_eq!(code(&out), 2);
    let out = run(&["shear", "--set", r#"shear={"p":[1,0,0],"G":[0,0,1],"profile":[{"n":2,"re":1}]}"#]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("outside the truncation box"), "{}", stderr(&out));
}

#[test]
fn shear_report_has_zero_residuals() {
    let cfg = configs().join("shear_p100.json");
    let out = run(&["shear", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out);
    for s in ["direct", "simple", "projected", "reduced"] {
        assert!(r["equilibrium_residuals"][s].as_f64().unwrap() <= 1e-14, "{s}");
    }
    let span = &r["gradient_span"];
    assert_eq!(span["in_kernel"], Value::Bool(true));
    assert!(span["projection_residual_ratio"].as_f64().unwrap() > 0.5);
}

#[test]
fn rank_reports_kernel_enlargement() {
    let cfg = configs().join("shear_p100.json");
    let out = run(&["rank", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let c = &report(&out)["corank_comparison"];
    assert_eq!(c["shear"]["corank"], 50);
    assert_eq!(c["baseline_consistent"], Value::Bool(true));
    for b in c["baselines"].as_array().unwrap() {
        assert_eq!(b["corank"], 28);
    }
    assert_eq!(c["kernel_enlargement"], 22);
    assert_eq!(c["degenerate"], Value::Bool(false));
}

#[test]
fn zero_profile_is_flagged_degenerate() {
    let out = run(&["rank", "--set", r#"shear={"p":[1,0,0],"G":[0,0,1],"profile":[]}"#, "--set", "baseline_seeds=[0]"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out);
    assert_eq!(r["corank_comparison"]["degenerate"], Value::Bool(true));
    assert_eq!(r["gradient_span"]["degenerate"], Value::Bool(true));
}

#[test]
fn shear_flow_stays_fixed_under_simulation() {
    let tmp = tempfile::tempdir().unwrap();
    let out =
        run(&["simulate", "--set", "initial.kind=shear", "--set", SHEAR, "--set", "steps=1000", "--set", &dir_arg(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = modes(1);
    let spec: ShearFlowSpec = serde_json::from_str(r#"{"p":[1,0,0],"G":[0,0,1],"profile":[{"n":1,"re":1.0}]}"#).unwrap();
    let initial = shear_state(&spec, m.clone()).unwrap();
    let last = read_snapshot(&tmp.path().join("final.json"), m).unwrap();
    assert!(last.max_deviation(&initial) <= 1e-12);
    let recs = parse_diagnostics_csv(&std::fs::read_to_string(tmp.path().join("diagnostics.csv")).unwrap()).unwrap();
    assert_eq!(recs.len(), 11);
    for r in &recs {
        assert!((r.energy - recs[0].energy).abs() <= 1e-12);
    }
}

#[test]
fn reduced_simulation_conserves_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--set", "structure=reduced", "--set", "steps=300", "--set", &dir_arg(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out);
    assert!(r["energy_drift_rel"].as_f64().unwrap() < 1e-10);
    assert!(tmp.path().join("final.json").exists());
}

#[test]
fn resume_from_snapshot_is_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let common = ["--set", "seed=5", "--set", "N=2", "--set", "record_every=10"];
    let mut args = vec!["simulate", "--set", "steps=200", "--set", "output.snapshot_every=100"];
    args.extend(common);
    let da = dir_arg(a.path());
    args.extend(["--set", &da]);
    assert_eq!(code(&run(&args)), 0);
    let snap = a.path().join("snapshot_00000100.json");
    assert!(snap.exists());
    let init = format!(r#"initial={{"kind":"snapshot","path":"{}"}}"#, snap.display());
    let db = dir_arg(b.path());
    let mut args = vec!["simulate", "--set", "steps=100", "--set", &init, "--set", &db];
    args.extend(common);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fa = std::fs::read(a.path().join("final.json")).unwrap();
    let fb = std::fs::read(b.path().join("final.json")).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn outputs_are_identical_across_worker_counts() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut reports = Vec::new();
    for (dir, workers) in dirs.iter().zip(["1", "4", "1"]) {
        let w = format!("workers={workers}");
        let d = dir_arg(dir.path());
        let out = run(&["simulate", "--set", "N=2", "--set", "steps=100", "--set", "record_every=5", "--set", &w, "--set", &d]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let r = report(&out);
        reports.push((r["energy_drift_rel"].clone(), r["helicity_drift"].clone()));
    }
    for name in ["diagnostics.csv", "final.json"] {
        let first = std::fs::read(dirs[0].path().join(name)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(first, std::fs::read(d.path().join(name)).unwrap(), "{name}");
        }
    }
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn blow_up_exits_3_and_keeps_last_good_state() {
    let tmp = tempfile::tempdir().unwrap();
    let out =
        run(&["simulate", "--set", "dt=1000", "--set", "amplitude=100", "--set", "steps=20", "--set", &dir_arg(tmp.path())]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let last = read_snapshot(&tmp.path().join("last_good.json"), modes(1)).unwrap();
    assert!(last.amp_max().is_finite());
    assert!(!tmp.path().join("final.json").exists());
}

#[test]
fn export_writes_tensor_and_header() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["export", "--set", "seed=2", "--set", &dir_arg(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bin = std::fs::read(tmp.path().join("tensor.bin")).unwrap();
    assert_eq!(bin.len(), 78 * 78 * 16);
    let header: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("tensor.json")).unwrap()).unwrap();
    assert_eq!(header["rows"], 78);
    assert_eq!(header["modes"].as_array().unwrap().len(), 26);
    assert_eq!(code(&run(&["export", "--set", "structure=direct", "--set", &dir_arg(tmp.path())])), 2);
}
