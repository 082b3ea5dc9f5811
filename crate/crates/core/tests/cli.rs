use std::path::Path;
use std::process::{Command, Output};

fn acbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acbm")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = acbm(args);
    assert!(
        out.status.success(),
        "{args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_fit_rasch_evaluate_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--design", "dgp1", "--n", "60", "--seed", "3", "--out", p(d)]);
    assert!(d.join("matrix.csv").exists() && d.join("truth.json").exists());

    let fit_dir = d.join("fit");
    let matrix = d.join("matrix.csv");
    ok(&["fit", "--matrix", p(&matrix), "--seed", "1", "--n-iter", "10", "--n-rep", "4", "--out", p(&fit_dir)]);
    for f in ["trace.ndjson", "summary.json", "summary_accuracy.csv"] {
        assert!(fit_dir.join(f).exists(), "missing {f}");
    }
    let trace = std::fs::read_to_string(fit_dir.join("trace.ndjson")).unwrap();
    assert_eq!(trace.lines().count(), 5, "n_iter=10 keeps the second half");

    ok(&["rasch", "--matrix", p(&matrix), "--out", p(&fit_dir)]);
    assert!(fit_dir.join("rasch.json").exists());

    let metrics = ok(&[
        "evaluate",
        "--summary",
        p(&fit_dir.join("summary.json")),
        "--truth",
        p(&d.join("truth.json")),
        "--rasch",
        p(&fit_dir.join("rasch.json")),
        "--dgp",
        "dgp1",
    ]);
    let mut lines = metrics.lines();
    assert_eq!(lines.next().unwrap(), "dgp,n,replication,cwri,adk,adw,adp,arwri,d1_acbm,d1_rasch");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], ["dgp1", "60", "0"]);
    let cwri: f64 = row[3].parse().unwrap();
    assert!((0.0..=1.0).contains(&cwri));
    assert!(row[9].parse::<f64>().unwrap() > 0.0);

    let report = ok(&["report", "--summary", p(&fit_dir.join("summary.json"))]);
    assert!(report.lines().count() >= 2, "{report}");
}

#[test]
fn same_seed_same_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--design", "dgp2", "--n", "30", "--seed", "8", "--out", p(d)]);
    let matrix = d.join("matrix.csv");
    let traces: Vec<String> = ["a", "b"]
        .iter()
        .map(|t| {
            let out = d.join(t);
            ok(&["fit", "--matrix", p(&matrix), "--seed", "5", "--n-iter", "6", "--n-rep", "3", "--out", p(&out)]);
            std::fs::read_to_string(out.join("trace.ndjson")).unwrap()
        })
        .collect();
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("sim.json");
    std::fs::write(&cfg, r#"{"design": "dgp3", "n": 25, "seed": 2}"#).unwrap();
    ok(&["simulate", "--config", p(&cfg), "--out", p(d)]);
    let csv = std::fs::read_to_string(d.join("matrix.csv")).unwrap();
    let data_rows = csv.lines().filter(|l| !l.is_empty() && l.starts_with(['0', '1'])).count();
    assert_eq!(data_rows, 25);
}

#[test]
fn exit_codes() {
    assert_eq!(acbm(&["simulate"]).status.code(), Some(2), "missing required flag");
    assert_eq!(acbm(&["no-such-command"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    assert_eq!(acbm(&["fit", "--matrix", p(&missing), "--out", p(dir.path())]).status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,0\n2,1\n").unwrap();
    let out = acbm(&["rasch", "--matrix", p(&bad), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1), "non-binary entry is a validation error");
    let out = acbm(&["simulate", "--design", "dgp9", "--n", "5", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2), "unknown design");
}
