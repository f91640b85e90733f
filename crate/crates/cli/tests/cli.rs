use std::path::Path;
use std::process::{Command, Output};

fn certibif(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_certibif")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn farey_prints_smallest_denominator() {
    let o = certibif(&["farey", "0.126", "0.129"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "5/39");
    let o = certibif(&["farey", "--lo", "1/3", "--hi", "1/2"]);
    assert_eq!(stdout(&o).trim(), "1/2");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(certibif(&["farey", "0.5", "0.2"]).status.code(), Some(2));
    assert_eq!(certibif(&["farey", "abc", "0.2"]).status.code(), Some(2));
    assert_eq!(certibif(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(certibif(&["simulate"]).status.code(), Some(2));
    assert_eq!(certibif(&["simulate", "--R", "30", "--params", "/nonexistent/params.toml"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing").join("out.csv");
    assert_eq!(certibif(&["simulate", "--R", "30", "--out", path(&bad)]).status.code(), Some(2));
    assert_eq!(certibif(&["branch", "--max-steps", "3", "--csv", path(&bad)]).status.code(), Some(2));
    assert_eq!(certibif(&["transcritical", "--out", path(&bad)]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = certibif(&["simulate", "--R", "160.31", "--scale", "1.5", "--years", "200", "--out", path(p)]);
        assert!(o.status.success());
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("t,x1,x2,") && header.ends_with(",x13,P"));
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn parameter_file_changes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.toml");
    std::fs::write(&p, "c1 = 3.6e5\n").unwrap();
    let def = stdout(&certibif(&["transcritical"]));
    let alt = stdout(&certibif(&["transcritical", "--params", path(&p)]));
    assert!(def.contains("72.22"));
    assert!(alt.contains("36.11"), "{alt}");
}

#[test]
fn saddle_node_certificate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (c1, c2) = (dir.path().join("sn.json"), dir.path().join("sn2.json"));
    let o = certibif(&["validate-sn", "--out", path(&c1)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // a certificate is accepted as the anchor of a new validation
    let o = certibif(&["validate-sn", "--anchor", path(&c1), "--out", path(&c2)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&c2).unwrap()).unwrap();
    assert_eq!(v["kind"], "saddle_node");
    let lo: f64 = v["r"]["lo"].as_str().unwrap().parse().unwrap();
    assert!((lo - 12.28).abs() < 0.05);
    // a wrong-length anchor is a usage error
    let short = dir.path().join("short.json");
    std::fs::write(&short, "[1.0, 2.0]").unwrap();
    assert_eq!(certibif(&["validate-sn", "--anchor", path(&short)]).status.code(), Some(2));
}

#[test]
fn short_branch_writes_linked_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = (dir.path().join("b.csv"), dir.path().join("b.json"));
    let o = certibif(&["branch", "--max-steps", "25", "--csv", path(&csv), "--json", path(&json)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut rows = text.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    assert_eq!(header[0], "R");
    assert_eq!(header.last(), Some(&"linked"));
    let body: Vec<&str> = rows.collect();
    assert_eq!(body.len(), 25);
    let first_r: f64 = body[0].split(',').next().unwrap().parse().unwrap();
    assert!((first_r - 300.0).abs() < 1e-6);
    assert!(body[1..].iter().all(|r| r.ends_with("true")));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(v["run"]["boxes"].as_array().unwrap().len(), 25);
}

#[test]
fn step_budget_ends_the_run_cleanly() {
    let o = certibif(&["branch", "--max-steps", "5", "--to-R", "1", "--csv", "/dev/null"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("termination MaxSteps"));
}

#[test]
fn rotation_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rot.csv");
    let o = certibif(&["rotation", "--R-range", "200:220:2", "--iterates", "20000", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let rho: f64 = r[2].parse().unwrap();
        assert!(rho > 0.126 && rho < 0.129);
    }
    let o = certibif(&["rotation", "--R-range", "200:220"]);
    assert_eq!(o.status.code(), Some(2));
}
