use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/scenarios")
        .join(name)
}

fn railtac(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_railtac"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_writes_kpis_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("tutorial.json");
    let out = railtac(
        &[
            "simulate",
            "--scenario",
            sc.to_str().unwrap(),
            "--p",
            "0.1",
            "--policy",
            "policy2",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "kpis.csv",
        "kpis.json",
        "objective.json",
        "trace.csv",
        "trips.csv",
        "throughput.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("event_id,packet_id,state,arc,fire_time_h"));
    assert!(trace.contains("STATE0") && trace.contains("STATE1"));
    assert_eq!(csv_rows(&dir.path().join("kpis.csv")).len(), 1);
    // No temporary files are left behind.
    assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .ends_with(".tmp")));
}

#[test]
fn simulate_reads_a_scheme_file() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = dir.path().join("scheme.json");
    fs::write(
        &scheme,
        r#"{ "kind": "path_based", "p": { "vlc-bcn": 0.2 } }"#,
    )
    .unwrap();
    let sc = scenario("tutorial.json");
    let out = railtac(
        &[
            "simulate",
            "--scenario",
            sc.to_str().unwrap(),
            "--scheme",
            scheme.to_str().unwrap(),
        ],
        &dir.path().join("out"),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn sweep_starts_at_zero_revenue() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("tutorial.json");
    let out = railtac(
        &[
            "sweep",
            "--scenario",
            sc.to_str().unwrap(),
            "--policy",
            "policy3",
            "--steps",
            "6",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[0][1], "0");
}

#[test]
fn optimize_agrees_with_sweep_at_grid_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("corridor.json");
    let sc = sc.to_str().unwrap();
    let sweep = railtac(
        &[
            "sweep",
            "--scenario",
            sc,
            "--policy",
            "policy3",
            "--steps",
            "26",
        ],
        &dir.path().join("sweep"),
    );
    assert!(sweep.status.success());
    let rows = csv_rows(&dir.path().join("sweep/sweep.csv"));
    let (argmax, _) = rows
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[3].parse::<f64>().unwrap()))
        .fold(
            (0.0, f64::NEG_INFINITY),
            |b, c| if c.1 > b.1 { c } else { b },
        );

    let opt = railtac(
        &[
            "optimize",
            "--scenario",
            sc,
            "--scheme-kind",
            "proportional",
            "--algo",
            "pattern-search",
            "--policy",
            "policy3",
        ],
        &dir.path().join("opt"),
    );
    assert!(
        opt.status.success(),
        "{}",
        String::from_utf8_lossy(&opt.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("opt/report.json")).unwrap())
            .unwrap();
    let best = report["best_vector"][0].as_f64().unwrap();
    assert!((best - argmax).abs() <= 0.01 + 1e-12, "{best} vs {argmax}");
    let log = csv_rows(&dir.path().join("opt/optimize_log.csv"));
    assert!(log.len() > 26);
    assert!(dir.path().join("opt/timing.json").exists());
    assert!(report.get("wall_time").is_none());
}

#[test]
fn appraise_against_itself_leaves_only_revenue() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("tutorial.json");
    let sim = railtac(
        &["simulate", "--scenario", sc.to_str().unwrap(), "--p", "0.1"],
        &dir.path().join("sim"),
    );
    assert!(sim.status.success());
    let kpis = dir.path().join("sim/kpis.json");
    let out = railtac(
        &[
            "appraise",
            "--kpis",
            kpis.to_str().unwrap(),
            "--baseline",
            kpis.to_str().unwrap(),
            "--annual-cost",
            "2880.4",
        ],
        &dir.path().join("app"),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("app/benefit.json")).unwrap())
            .unwrap();
    let r = &b["report"];
    assert_eq!(r["externality_saving"]["lower"], 0.0);
    assert_eq!(r["foc_benefit"], 0.0);
    assert_eq!(r["social_benefit"], 0.0);
    assert!(r["tac_revenue"].as_f64().unwrap() > 0.0);
    assert_eq!(csv_rows(&dir.path().join("app/bcr.csv")).len(), 1);
}

#[test]
fn bad_inputs_fail_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = railtac(&["simulate", "--scenario", "/nonexistent.json"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent.json"));

    let sc = scenario("tutorial.json");
    let out = railtac(
        &[
            "simulate",
            "--scenario",
            sc.to_str().unwrap(),
            "--policy",
            "policy9",
        ],
        dir.path(),
    );
    assert!(!out.status.success());

    let out = railtac(
        &[
            "optimize",
            "--scenario",
            sc.to_str().unwrap(),
            "--scheme-kind",
            "path-based",
            "--algo",
            "grid",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
}
