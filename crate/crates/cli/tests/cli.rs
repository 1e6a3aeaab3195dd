use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sbm_opa::pipeline::{report_from_json, Report};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn sbmopa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbmopa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn scenario_list_has_six_orders() {
    let out = sbmopa(&[
        "scenarios",
        "list",
        "--policies",
        p(&data("policies.json")),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[1], "S1,P1 > P2 > P3");
    assert_eq!(lines[6], "S6,P3 > P2 > P1");
}

#[test]
fn opa_solve_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r.json");
    std::fs::write(&input, r#"{"experts":[{"rank":1,"item_ranks":{"a":1,"b":2,"c":3}}]}"#).unwrap();
    let out = sbmopa(&["opa", "solve", "--input", p(&input)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let w: Vec<f64> = v["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    // 11/18, 5/18, 2/18 at 12 significant digits.
    for (got, want) in w.iter().zip([11.0 / 18.0, 5.0 / 18.0, 2.0 / 18.0]) {
        assert!((got - want).abs() < 1e-11, "{got} vs {want}");
    }
}

#[test]
fn report_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = sbmopa(&["report", "--config", p(&data("run.json")), "--out", p(dir.path())]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let names = [
        "report.json",
        "records.csv",
        "tape.csv",
        "comparison.csv",
        "clusters.csv",
        "descriptive.csv",
    ];
    for name in names {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
    let text = std::fs::read_to_string(a.path().join("report.json")).unwrap();
    let report: Report = report_from_json(&text, "report.json").unwrap();
    assert_eq!(report.scenarios.len(), 6);
    assert_eq!(report.comparison.len(), 30);
}

#[test]
fn report_flags_override_the_config() {
    let out = sbmopa(&[
        "report",
        "--config",
        p(&data("run.json")),
        "--us",
        "1",
        "--k",
        "2",
        "--seed",
        "9",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = report_from_json(&stdout(&out), "stdout").unwrap();
    assert_eq!((report.meta.us, report.meta.up, report.meta.seed), (1.0, 0.0, 9));
    assert_eq!(report.scenarios[0].clusters.as_ref().unwrap().report.k, 2);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    std::fs::write(&panel, "dmu_id,L,K,T,E,Y,C\nA,1,2,3,4,5,6\nB,1,2,oops,4,5,6\n").unwrap();
    let out = sbmopa(&["sbm", "assess", "--panel", p(&panel), "--roles", p(&data("roles.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 2 column 'T'"), "{}", stderr(&out));

    let out = sbmopa(&[
        "sbm",
        "assess",
        "--panel",
        "missing.csv",
        "--roles",
        p(&data("roles.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = sbmopa(&[
        "hybrid",
        "run",
        "--panel",
        p(&data("panel.csv")),
        "--roles",
        p(&data("roles.json")),
        "--policies",
        p(&data("policies.json")),
        "--us",
        "0.7",
        "--up",
        "0.7",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = sbmopa(&[
        "sbm",
        "assess",
        "--panel",
        p(&panel),
        "--roles",
        p(&data("roles.json")),
        "--weight-rule",
        "median",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    let roles = dir.path().join("roles.json");
    let policies = dir.path().join("policies.json");
    std::fs::write(&panel, "dmu_id,x,y\nsolo,1,1\n").unwrap();
    std::fs::write(
        &roles,
        r#"{"variables":[{"name":"x","role":"input"},{"name":"y","role":"output"}]}"#,
    )
    .unwrap();
    std::fs::write(&policies, r#"{"policies":[{"name":"P","fixed_ranks":{"x":2,"y":1}}]}"#).unwrap();
    let out = sbmopa(&[
        "hybrid",
        "run",
        "--panel",
        p(&panel),
        "--roles",
        p(&roles),
        "--policies",
        p(&policies),
        "--epsilon",
        "0.9",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn csv_output_quotes_delimiters() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("m.csv");
    std::fs::write(
        &matrix,
        "dmu_id,a,b,gamma\n\"north, upper\",0.9,0.1,1\nsouth,0.85,0.15,0.8\neast,0.1,0.9,0.9\nwest,0.15,0.85,0.7\n",
    )
    .unwrap();
    let out = sbmopa(&["cluster", "--matrix", p(&matrix), "--k", "2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("\n\"north, upper\","), "{text}");
    assert!(!text.contains("NaN"));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].get(1), rows[1].get(1));
    assert_ne!(rows[0].get(1), rows[2].get(1));
}

#[test]
fn emissions_and_assessment_outputs() {
    let out = sbmopa(&[
        "emissions",
        "compute",
        "--factors",
        p(&data("fuel_factors.csv")),
        "--consumption",
        p(&data("consumption.csv")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 30);

    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("sbm.csv");
    let out = sbmopa(&[
        "sbm",
        "assess",
        "--panel",
        p(&data("panel.csv")),
        "--roles",
        p(&data("roles.json")),
        "--epsilon",
        "0",
        "--format",
        "csv",
        "--out",
        p(&target),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&target).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let gamma: f64 = rec[1].parse().unwrap();
        let eta: f64 = rec[2].parse().unwrap();
        assert!(gamma > 0.0 && gamma <= 1.0 + 1e-9);
        assert_eq!(eta, 1.0);
    }
}
