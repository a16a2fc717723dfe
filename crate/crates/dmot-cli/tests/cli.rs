//! End-to-end tests driving the `dmot` binary.

use std::path::Path;
use std::process::{Command, Output};

fn dmot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

#[test]
fn preprocess_two_points_and_query() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pts.txt");
    let structure = dir.path().join("s.dmot");
    let queries = dir.path().join("q.txt");
    write(&input, "0 0\n3 4\n");
    let o = dmot(&[
        "preprocess",
        "--input",
        input.to_str().unwrap(),
        "--output",
        structure.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    write(&queries, "0 1\n");
    let o = dmot(&[
        "--format",
        "json",
        "query",
        "steiner",
        "--structure",
        structure.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let edges = v["results"][0]["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 1, "steiner on k=2 is one edge");
}

#[test]
fn inadmissible_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let structure = dir.path().join("s.dmot");
    let o = dmot(&[
        "preprocess",
        "--generate",
        "uniform2d",
        "--n",
        "16",
        "--tau",
        "9.0",
        "--eta",
        "2",
        "--output",
        structure.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inadmissible"));
}

#[test]
fn tsp_triangle_and_matrix_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.txt");
    let structure = dir.path().join("s.dmot");
    let queries = dir.path().join("q.txt");
    write(&input, "3\n0 1 1\n1 0 1\n1 1 0\n");
    let o = dmot(&[
        "preprocess",
        "--input",
        input.to_str().unwrap(),
        "--input-format",
        "matrix",
        "--output",
        structure.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    write(&queries, "0 1 2\n");
    let o = dmot(&[
        "--format",
        "json",
        "query",
        "tsp",
        "--structure",
        structure.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["results"][0]["tour"].as_array().unwrap().len(), 3);
}

#[test]
fn query_phase_survives_input_deletion() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pts.txt");
    let structure = dir.path().join("s.dmot");
    let queries = dir.path().join("q.txt");
    let o = dmot(&[
        "preprocess",
        "--generate",
        "uniform2d",
        "--n",
        "64",
        "--seed",
        "5",
        "--save-input",
        input.to_str().unwrap(),
        "--output",
        structure.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    std::fs::remove_file(&input).unwrap();
    write(&queries, "1 8 21 40\n0 63\n");
    for kind in ["steiner", "tsp"] {
        let o = dmot(&[
            "query",
            kind,
            "--structure",
            structure.to_str().unwrap(),
            "--queries",
            queries.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{kind} after input deletion");
    }
}

#[test]
fn forest_and_spanner_dump() {
    let dir = tempfile::tempdir().unwrap();
    let structure = dir.path().join("s.dmot");
    let queries = dir.path().join("q.txt");
    let dump = dir.path().join("spanner.txt");
    assert!(dmot(&[
        "preprocess",
        "--generate",
        "uniform2d",
        "--n",
        "32",
        "--output",
        structure.to_str().unwrap(),
    ])
    .status
    .success());
    write(&queries, "0 5 9 13\n");
    let o = dmot(&[
        "--format",
        "json",
        "query",
        "forest",
        "--structure",
        structure.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--dump-spanner",
        dump.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["results"][0]["cost"].as_f64().unwrap() > 0.0);
    let dumped = std::fs::read_to_string(&dump).unwrap();
    // "u v weight" lines plus a per-query header.
    assert!(dumped.lines().any(|l| l.starts_with("# query 0")));
    assert!(dumped
        .lines()
        .filter(|l| !l.starts_with('#'))
        .all(|l| l.split_whitespace().count() == 3));

    // Odd id count is a usage error.
    write(&queries, "0 5 9\n");
    let o = dmot(&[
        "query",
        "forest",
        "--structure",
        structure.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn facility_location_queries() {
    let dir = tempfile::tempdir().unwrap();
    let structure = dir.path().join("s.dmot");
    let costs = dir.path().join("costs.txt");
    let queries = dir.path().join("q.txt");
    let cost_lines: String = (0..32).map(|i| format!("{}\n", 0.1 + (i % 7) as f64 * 0.05)).collect();
    write(&costs, &cost_lines);
    assert!(dmot(&[
        "preprocess",
        "--generate",
        "uniform2d",
        "--n",
        "32",
        "--fl-costs",
        costs.to_str().unwrap(),
        "--output",
        structure.to_str().unwrap(),
    ])
    .status
    .success());

    write(&queries, "0 5 9 / 2 11 17\n");
    let o = dmot(&[
        "--format",
        "json",
        "query",
        "fl-restricted",
        "--structure",
        structure.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--costs",
        costs.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(!v["results"][0]["open"].as_array().unwrap().is_empty());

    write(&queries, "0 5 9\n");
    let o = dmot(&[
        "--format",
        "json",
        "query",
        "fl-unrestricted",
        "--structure",
        structure.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["results"][0]["assignment"].as_array().unwrap().len(), 3);
}

#[test]
fn dynamic_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pts.txt");
    let structure = dir.path().join("s.dmot");
    let script = dir.path().join("ops.txt");
    assert!(dmot(&[
        "preprocess",
        "--generate",
        "uniform2d",
        "--n",
        "48",
        "--seed",
        "7",
        "--save-input",
        input.to_str().unwrap(),
        "--output",
        structure.to_str().unwrap(),
    ])
    .status
    .success());

    // Empty script: empty report, success.
    write(&script, "");
    let o = dmot(&[
        "--format",
        "json",
        "dynamic",
        "--structure",
        structure.to_str().unwrap(),
        "--script",
        script.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["ops"].as_array().unwrap().is_empty());

    // ins/del pair ends empty; verified script passes ratio checks.
    write(&script, "ins 3\nins 17\ncheck\ndel 3\ndel 17\ncheck\n");
    let o = dmot(&[
        "--format",
        "json",
        "dynamic",
        "--structure",
        structure.to_str().unwrap(),
        "--script",
        script.to_str().unwrap(),
        "--verify",
        "--input",
        input.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    let ops = v["ops"].as_array().unwrap();
    assert_eq!(ops.last().unwrap()["k"], 0);

    // Deleting an absent point is reported and fails the run.
    write(&script, "del 3\n");
    let o = dmot(&[
        "dynamic",
        "--structure",
        structure.to_str().unwrap(),
        "--script",
        script.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_passes_and_corruption_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = dmot(&[
        "verify",
        "--generate",
        "uniform2d",
        "--n",
        "64",
        "--seed",
        "2",
        "--trials",
        "10",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(stdout(&o).contains("pass"));

    // Corrupted structure file fails verification with exit 1.
    let structure = dir.path().join("s.dmot");
    assert!(dmot(&[
        "preprocess",
        "--generate",
        "uniform2d",
        "--n",
        "32",
        "--output",
        structure.to_str().unwrap(),
    ])
    .status
    .success());
    let mut bytes = std::fs::read(&structure).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(&structure, bytes).unwrap();
    let o = dmot(&[
        "verify",
        "--generate",
        "uniform2d",
        "--n",
        "32",
        "--trials",
        "4",
        "--structure",
        structure.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));

    // Querying the corrupted file also fails (exit 1, checksum).
    let queries = dir.path().join("q.txt");
    write(&queries, "0 1\n");
    let o = dmot(&[
        "query",
        "steiner",
        "--structure",
        structure.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));
}

#[test]
fn bench_renders_both_formats() {
    for fmt in ["human", "json"] {
        let o = dmot(&[
            "--format",
            fmt,
            "bench",
            "--sizes",
            "64,128",
            "--ks",
            "8",
            "--trials",
            "2",
        ]);
        assert!(o.status.success());
        if fmt == "json" {
            let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
            assert_eq!(v["rows"].as_array().unwrap().len(), 2);
        } else {
            assert!(stdout(&o).contains("query_median_ms"));
        }
    }
}
