use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use levsketch::io::{read_matrix, read_report};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levsketch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gen_example1_records_rank() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "A.csv");
    let o = run(&[
        "gen", "--family", "example1", "--m", "1000", "--n", "100", "--zero", "70", "--seed", "7", "-o", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l == "# rank=30"));
    assert!(stdout(&o).contains("rank=30"));

    let again = path(dir.path(), "A2.csv");
    run(&[
        "gen", "--family", "example1", "--m", "1000", "--n", "100", "--zero", "70", "--seed", "7", "-o", &again,
    ]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn gen_example2_reports_unit_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "B.csv");
    let o = run(&[
        "gen", "--family", "example2", "--m", "200", "--n", "50", "--r", "10", "--kappa", "1", "--seed", "1", "-o",
        &out,
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("kappa=1.000000"), "{}", stdout(&o));
    let file = read_matrix(fs::read(&out).unwrap().as_slice()).unwrap();
    assert_eq!(file.get("rank"), Some("10"));
    assert_eq!(file.get("family"), Some("example2"));
}

#[test]
fn usage_and_validation_errors_exit_2() {
    let o = run(&["gen", "--family", "example1", "--m", "8", "--n", "4"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "gen",
        "--family",
        "example1",
        "--m",
        "10",
        "--n",
        "4",
        "-o",
        &path(dir.path(), "x.csv"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["bench", "--m", "100", "--trials", "0", "-o", &path(dir.path(), "b.csv")]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "compare",
        "-i",
        &path(dir.path(), "missing.csv"),
        "-o",
        &path(dir.path(), "r.csv"),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_rank_one_is_exact_and_restricts_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = path(dir.path(), "R1.csv");
    run(&[
        "gen", "--family", "example2", "--m", "120", "--n", "30", "--r", "1", "--seed", "3", "-o", &input,
    ]);
    let report = path(dir.path(), "rep.csv");
    let o = run(&[
        "compare", "-i", &input, "--k", "1", "--p", "4", "--trials", "3", "--seed", "2", "-o", &report,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_report(fs::read(&report).unwrap().as_slice()).unwrap();
    assert_eq!(rep.rows.len(), 120);
    assert!(rep.error_summary().unwrap().max <= 1e-6);
    assert!(stdout(&o).contains("oracle-assisted"));

    let subset = path(dir.path(), "sub.csv");
    let o = run(&[
        "compare", "-i", &input, "--k", "1", "--p", "4", "--rows", "5,17,99", "--seed", "2", "-o", &subset,
    ]);
    assert!(o.status.success());
    let rep = read_report(fs::read(&subset).unwrap().as_slice()).unwrap();
    assert_eq!(rep.rows, vec![4, 16, 98]);

    let again = path(dir.path(), "sub2.csv");
    run(&[
        "compare", "-i", &input, "--k", "1", "--p", "4", "--rows", "5,17,99", "--seed", "2", "-o", &again,
    ]);
    assert_eq!(fs::read(&subset).unwrap(), fs::read(&again).unwrap());

    let o = run(&[
        "compare", "-i", &input, "--k", "1", "--p", "4", "--rows", "0", "-o", &again,
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sketch_then_score() {
    let dir = tempfile::tempdir().unwrap();
    let input = path(dir.path(), "A.csv");
    run(&[
        "gen", "--family", "example1", "--m", "40", "--n", "12", "--zero", "4", "--seed", "5", "-o", &input,
    ]);
    let sketch = path(dir.path(), "S.txt");
    let o = run(&[
        "sketch", "-i", &input, "--k", "4", "--p", "20", "--seed", "1", "-o", &sketch,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&sketch).unwrap();
    for section in ["[cols]", "[rows]", "[V]", "[sigma]"] {
        assert!(text.contains(section));
    }
    let report = path(dir.path(), "rep.csv");
    let o = run(&[
        "score",
        "-i",
        &input,
        "--sketch",
        &sketch,
        "--k",
        "4",
        "--p",
        "20",
        "--mode",
        "sampled-dot",
        "--xi",
        "0.2",
        "-o",
        &report,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_report(fs::read(&report).unwrap().as_slice()).unwrap();
    assert_eq!(rep.approx.len(), 40);
    assert!(rep.approx.iter().all(|&s| s >= 0.0));
}

#[test]
fn concentration_runs_and_writes_stats() {
    let dir = tempfile::tempdir().unwrap();
    let input = path(dir.path(), "A.csv");
    run(&[
        "gen", "--family", "example2", "--m", "40", "--n", "30", "--r", "30", "--kappa", "3", "--seed", "8", "-o",
        &input,
    ]);
    let stats = path(dir.path(), "c.csv");
    let o = run(&[
        "concentration",
        "-i",
        &input,
        "--theta",
        "1",
        "--p",
        "1",
        "--trials",
        "5",
        "-o",
        &stats,
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("bound=1.0000"));
    let o = run(&[
        "concentration",
        "-i",
        &input,
        "--theta",
        "1e9",
        "--p",
        "50",
        "--trials",
        "20",
        "-o",
        &stats,
    ]);
    assert!(stdout(&o).contains("outer_exceedance=0.0000"));
    let text = fs::read_to_string(&stats).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 21);
}

#[test]
fn bench_writes_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "bench.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_levsketch"))
        .args([
            "bench", "--m", "400,800", "--n", "40", "--r", "10", "--p", "20", "--k", "5", "--trials", "2", "-o", &out,
        ])
        .env("LEVSKETCH_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,n,queries,wall_ms"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.len() == 4 && r[3].parse::<f64>().is_ok()));
}
