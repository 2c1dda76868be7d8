use std::path::Path;
use std::process::{Command, Output};

use opfrelax::bench::{read_csv, summary_path, RowStatus};
use opfrelax::netmodel::{generate_synthetic_instance, to_json};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opfrelax")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_a_report_from_an_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("inst.json");
    std::fs::write(&input, to_json(&generate_synthetic_instance(6, 3).unwrap())).unwrap();
    let out = dir.path().join("sol.json");
    let res = run(&["solve", "--input", input.to_str().unwrap(), "--relaxation", "jabr"], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = json(&out);
    assert_eq!(report["relaxation"], "jabr");
    assert!(report["welfare"].as_f64().unwrap().is_finite());
    assert!(report["total_time_s"].as_f64().unwrap() >= report["solver_time_s"].as_f64().unwrap());
    assert_eq!(report["voltages"][0].as_array().unwrap().len(), 6);
}

#[test]
fn usage_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    assert_eq!(run(&["solve", "--gen", "5", "--relaxation", "acopf"], &out).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    let res = run(&["solve", "--input", missing.to_str().unwrap(), "--relaxation", "dc"], &out);
    assert_eq!(res.status.code(), Some(2));
    let res = run(&["bench", "--gen", "5", "--sizes", "4:2:1"], &out);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn global_bounds_are_reproducible_and_feed_qc() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for path in [&a, &b] {
        let res = run(&["bounds", "--gen", "6", "--seed", "2", "--log2n", "12"], path);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(dir.path().join("a.report.json").exists());

    let out = dir.path().join("qc.json");
    let res = run(&["solve", "--gen", "6", "--seed", "2", "--relaxation", "qc", "--bounds", a.to_str().unwrap()], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(json(&out)["relaxation"], "qc");
}

#[test]
fn bench_writes_one_row_per_task_and_relaxation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let res = run(&["bench", "--gen", "12", "--sizes", "8", "--batch", "2", "--relaxations", "dc,jabr"], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = read_csv(&out).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.status != RowStatus::Failed && r.size == 8));
    assert!(summary_path(&out).exists());
}

#[test]
fn help_lists_defaults() {
    let res = Command::new(env!("CARGO_BIN_EXE_opfrelax")).args(["bench", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("[default: 10]"), "{text}");
    assert!(text.contains("dc,shor,chordal,jabr,qc"), "{text}");
}
