use std::process::Command;

fn tailstrat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tailstrat"))
}

const CONFIG: &str = r#"
trials = 5
seed = 11
n = 500

[benchmark]
name = "four_branch"

[estimator]
kind = "tss"
m = 3
"#;

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let status = tailstrat()
        .args(["run", cfg.to_str().unwrap(), "--trials", "4", "--n", "400,800", "--output", out.to_str().unwrap()])
        .env("TSS_WORKERS", "1")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(out.join("trials_n800.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("trial,p_hat,var_hat,cov,bias_bound,n_g_evals"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary_n400.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"], 4);
    assert_eq!(summary["estimator"], "tss_dp_proportional_mcs");
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, CONFIG.replace("m = 3", "m = 3\np0 = 2.0")).unwrap();
    let out = tailstrat().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("p0"));

    let out = tailstrat().args(["design-point", "no_such_problem"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn list_benchmarks_prints_registry() {
    let out = tailstrat().arg("list-benchmarks").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("name,dim,reference_pf,source,reference_beta"));
    assert!(text.lines().any(|l| l.starts_with("black_swan,2,")));
}

#[test]
fn design_point_reports_beta() {
    let out = tailstrat().args(["design-point", "four_branch", "--starts", "4"]).output().unwrap();
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((r["beta"].as_f64().unwrap() - 3.0).abs() < 1e-3);
    assert_eq!(r["converged"], true);
}

#[test]
fn bias_study_and_convergence_emit_tables() {
    let out = tailstrat()
        .args(["bias-study", "wavy_circle", "--m", "1,2", "--per-stratum-n", "200", "--trials", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);

    let out = tailstrat()
        .args(["convergence", "wavy_circle", "--estimators", "tss,mcs", "--n", "300,900", "--trials", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("slope"));
}
