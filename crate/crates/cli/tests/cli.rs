//! End-to-end runs of the `ctmcgrid` binary.

use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctmcgrid")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn value_of(csv: &str, prop_prefix: &str) -> f64 {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let rec = r.records().map(Result::unwrap).find(|rec| rec[0].starts_with(prop_prefix)).unwrap();
    rec[1].parse().unwrap()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn check_tower_with_time_bound() {
    let o = run(&["check", &fixture("tower.sm"), &fixture("tower.csl"), "--const", "T=100000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("property,value,method,iterations,wall_ms\n"));
    let m1 = value_of(&out, r#"R{"TotalNumberOfSensorsFailures"}=? [C"#);
    assert!((m1 - 0.9999001).abs() < 1e-6, "{m1}");
}

#[test]
fn missing_constant_is_named() {
    let o = run(&["check", &fixture("tower.sm"), &fixture("tower.csl")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`T`"), "{}", stderr(&o));
}

#[test]
fn check_compact_steady_state_as_json() {
    let o = run(&["check", &fixture("compact.sm"), &fixture("compact_steady.csl"), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let total = rows[0]["value"].as_f64().unwrap();
    assert!((total - 0.0030000).abs() < 1e-7, "{total}");
    assert_eq!(rows[0]["method"], "gauss-seidel");
}

#[test]
fn sweep_matches_recovery_grid_row() {
    let dir = tempfile::tempdir().unwrap();
    let props = write_temp(&dir, "p.csl", "S=? [failedSN>0 | failedBN>0]\n");
    let args = [
        "sweep",
        &fixture("compact.sm"),
        &props,
        "--sweep",
        "RECOVERYTIME_SN=12:12:72",
        "--const",
        "RECOVERYTIME_BN=36",
    ];
    let first = run(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let out = stdout(&first);
    let mut r = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["RECOVERYTIME_SN", "property", "value"]);
    let rows: Vec<(i64, f64)> =
        r.records().map(|rec| rec.unwrap()).map(|rec| (rec[0].parse().unwrap(), rec[2].parse().unwrap())).collect();
    let expected = [
        0.001499999899397662,
        0.0019999998978929077,
        0.002499999895384126,
        0.0029999998918698125,
        0.0034999998873484696,
        0.003999999881818639,
    ];
    assert_eq!(rows.len(), 6);
    for ((sn, v), (i, e)) in rows.iter().zip(expected.iter().enumerate()) {
        assert_eq!(*sn, 12 * (i as i64 + 1));
        assert!(((v - e) / e).abs() < 1e-3, "RT_SN={sn}: {v} vs {e}");
    }
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout, "sweeps are byte-for-byte reproducible");
}

#[test]
fn sweep_over_property_constant() {
    let args = ["sweep", &fixture("tower.sm"), &fixture("tower.csl"), "--sweep", "T=100:100:300", "--format", "json"];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len() % 3, 0);
    assert_eq!(rows[0]["T"], "100");
    assert_eq!(rows.last().unwrap()["T"], "300");
}

#[test]
fn energy_sweep_is_linear_in_days() {
    let o = run(&["sweep", &fixture("compact.sm"), &fixture("compact_energy.csl"), "--sweep", "T1=0:7:14"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut r = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<(String, String, f64)> = r
        .records()
        .map(|rec| rec.unwrap())
        .map(|rec| (rec[0].into(), rec[1].into(), rec[2].parse().unwrap()))
        .collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0].2, 0.0);
    assert!(rows[2].1.contains("AvgEnergyBN") && ((rows[2].2 - 4163.244775) / 4163.244775).abs() < 1e-6);
    assert!(((rows[4].2 - 2.0 * rows[2].2) / rows[4].2).abs() < 1e-6);
    assert!(((rows[5].2 - 2.0 * 1343.160845) / rows[5].2).abs() < 1e-6);
}

#[test]
fn empty_sweep_is_a_single_block() {
    let o = run(&["sweep", &fixture("compact.sm"), &fixture("compact_steady.csl")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("property,value\n"));
    assert_eq!(out.lines().count(), 4);
}

#[test]
fn failing_points_are_nan_and_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let props = write_temp(&dir, "p.csl", "S=? [failure=1]\n");
    let args = ["sweep", &fixture("tower.sm"), &props, "--sweep", "rRecover=0.01:0.01:0.02", "--method", "power"];
    let o = run(&[&args[..], &["--max-iters", "3"]].concat());
    assert_eq!(o.status.code(), Some(3));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.ends_with(",NaN")).count(), 2, "{out}");
    assert!(stderr(&o).contains("rRecover=0.01"), "{}", stderr(&o));
}

#[test]
fn sweep_rejects_unknown_constant() {
    let o = run(&["sweep", &fixture("compact.sm"), &fixture("compact_steady.csl"), "--sweep", "NOPE=1:1:2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("NOPE"));
}

#[test]
fn routes_use_backup_when_both_neighbours_fail() {
    let o = run(&["routes", "--n", "10", "--failed", "1,3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("T2: 2 =backup=> 4"), "{}", stdout(&o));

    let o = run(&["routes", "-n", "10", "--failed", "1,3", "--json"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["summary"]["backup_hops"], 1);
}

#[test]
fn routes_reject_unknown_tower() {
    let o = run(&["routes", "-n", "10", "--failed", "11"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn info_reports_state_counts() {
    for (model, states) in [("tower.sm", "states: 1024"), ("compact.sm", "states: 612")] {
        let o = run(&["info", &fixture(model)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).lines().any(|l| l == states), "{}", stdout(&o));
    }
}

#[test]
fn info_exports_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let tra = dir.path().join("tower.tra");
    let o = run(&["info", &fixture("tower.sm"), "--export-transitions", tra.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(tra).unwrap();
    assert!(text.lines().count() >= 15360);
}

#[test]
fn generated_tower_round_trips_through_check() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("tower3.sm");
    let o = run(&["gen", "tower", "--set", "sensors=3", "--output", model.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let props = write_temp(&dir, "p.csl", "S=? [failure=0]\n");
    let o = run(&["check", model.to_str().unwrap(), &props]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = value_of(&stdout(&o), "S=?");
    assert!(v > 0.99 && v < 1.0, "{v}");

    let o = run(&["gen", "tower", "--set", "bogus=1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let props = write_temp(&dir, "p.csl", "P=? [F<=T failure=1]\n");
    let args = ["simulate", &fixture("tower.sm"), &props, "--const", "T=10000", "--samples", "2000", "--seed", "5"];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let est = value_of(&stdout(&a), "P=?");
    assert!((est - 0.0951626).abs() < 0.03, "{est}");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["info", "/nonexistent/model.sm"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let broken = write_temp(&dir, "broken.sm", "ctmc\nmodule m\nx : [0..1 init 0;\nendmodule\n");
    assert_eq!(run(&["info", &broken]).status.code(), Some(2));

    let props = write_temp(&dir, "p.csl", "S=? [failure=1]\n");
    let o = run(&["check", &fixture("tower.sm"), &props, "--method", "power", "--max-iters", "3"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
