use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn crack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crack"))
        .args(args)
        .env_remove("CRACK_THREADS")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_table(path: &Path, n: usize) {
    let mut text = String::from("a,b,c\n");
    for i in 0..n {
        let a = i % 4;
        let b = if i % 13 == 0 { (a + 1) % 4 } else { a };
        let c = ((i * 37) % 101) as f64 / 10.0;
        text.push_str(&format!("{a},{b},{c}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn infer_prints_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    write_table(&table, 300);
    let dag = dir.path().join("g.dot");
    let out = crack(&[
        "infer",
        "--x",
        "0",
        "--y",
        "1-2",
        "--types",
        "c,c,n",
        "--dag",
        dag.to_str().unwrap(),
        table.to_str().unwrap(),
    ]);
    let v = json_stdout(&out);
    assert_eq!(v["indicator"], "nci");
    let dir_s = v["direction"].as_str().unwrap();
    assert!(["X->Y", "Y->X", "inconclusive"].contains(&dir_s));
    let (xy, yx) = (
        v["score_xy"].as_f64().unwrap(),
        v["score_yx"].as_f64().unwrap(),
    );
    assert!((v["confidence"].as_f64().unwrap() - (xy - yx).abs()).abs() < 1e-12);
    assert_eq!(v["breakdown"].as_array().unwrap().len(), 3);
    assert!(fs::read_to_string(dag).unwrap().starts_with("digraph"));
}

#[test]
fn infer_with_swapped_selectors_flips() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    write_table(&table, 300);
    let t = table.to_str().unwrap();
    let a = json_stdout(&crack(&[
        "infer",
        "--indicator",
        "delta",
        "--x",
        "0",
        "--y",
        "1",
        t,
    ]));
    let b = json_stdout(&crack(&[
        "infer",
        "--indicator",
        "delta",
        "--x",
        "1",
        "--y",
        "0",
        t,
    ]));
    assert_eq!(a["score_xy"], b["score_yx"]);
    assert_eq!(a["confidence"], b["confidence"]);
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    write_table(&table, 20);
    let t = table.to_str().unwrap();
    let overlapping = crack(&["infer", "--x", "0", "--y", "0,1", t]);
    assert_eq!(overlapping.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&overlapping.stderr).contains("overlapping"));
    let missing = crack(&["infer", "--x", "0", "--y", "1", "/nonexistent/table.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    let out_of_range = crack(&["infer", "--x", "0", "--y", "7", t]);
    assert_eq!(out_of_range.status.code(), Some(2));
    let bad_flag = crack(&["infer", "--x", "0", "--y", "1", "--marginal", "bogus", t]);
    assert!(!bad_flag.status.success());
}

#[test]
fn generate_writes_pairs_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let v = json_stdout(&crack(&[
        "generate", "--pairs", "2", "--n", "50", "--type", "mixed", "--out", out,
    ]));
    let pairs = v["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 2);
    assert_eq!(pairs[0]["truth"], "X->Y");
    assert_eq!(pairs[1]["truth"], "Y->X");
    let sidecar: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pair_0001.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["ground_truth"]["swapped"], true);
    let csv = fs::read_to_string(dir.path().join("pair_0000.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);

    let again = tempfile::tempdir().unwrap();
    crack(&[
        "generate",
        "--pairs",
        "2",
        "--n",
        "50",
        "--type",
        "mixed",
        "--out",
        again.path().to_str().unwrap(),
    ]);
    assert_eq!(
        csv,
        fs::read_to_string(again.path().join("pair_0000.csv")).unwrap()
    );
}

#[test]
fn generated_pairs_round_trip_through_infer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    json_stdout(&crack(&[
        "generate", "--pairs", "1", "--n", "300", "--type", "mixed", "--out", out,
    ]));
    let sidecar: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pair_0000.json")).unwrap())
            .unwrap();
    let join = |key: &str| {
        sidecar[key]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let csv = dir.path().join("pair_0000.csv");
    let v = json_stdout(&crack(&[
        "infer",
        "--types",
        sidecar["types"].as_str().unwrap(),
        "--x",
        &join("x"),
        "--y",
        &join("y"),
        csv.to_str().unwrap(),
    ]));
    assert!(v["confidence"].as_f64().unwrap().is_finite());
}

#[test]
fn sweep_writes_one_row_per_phi() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    json_stdout(&crack(&[
        "sweep",
        "--phi",
        "0:1:0.25",
        "--pairs",
        "20",
        "--n",
        "200",
        "--type",
        "mixed",
        "--indicator",
        "nci",
        "--out",
        out,
    ]));
    let curves = fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 5);
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 5 * 20);
    assert!(dir.path().join("summary.json").is_file());
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        crack(&[
            "--threads",
            threads,
            "sweep",
            "--l-values",
            "1,2",
            "--pairs",
            "6",
            "--n",
            "150",
            "--out",
            out,
        ]);
        fs::read_to_string(dir.path().join("curves.csv")).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn sweep_needs_exactly_one_axis() {
    let out = crack(&["sweep", "--pairs", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = crack(&["sweep", "--phi", "0,1", "--l-values", "3", "--pairs", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_reads_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut meta = String::new();
    for id in 1..=3u32 {
        let mut rows = String::new();
        for i in 0..120 {
            let x = (i * 7 % 23) as f64 / 2.0;
            let y = 3.0 * x + ((i * 11 % 5) as f64) / 10.0;
            rows.push_str(&format!("{x} {y}\n"));
        }
        fs::write(dir.path().join(format!("pair{id:04}.txt")), rows).unwrap();
        meta.push_str(&format!("{id} 1 1 2 2 {}\n", id as f64 * 0.5));
    }
    meta.push_str("4 1 1 2 2 1\n");
    fs::write(dir.path().join("pairmeta.txt"), meta).unwrap();
    let out = dir.path().join("out");
    let v = json_stdout(&crack(&[
        "bench",
        dir.path().to_str().unwrap(),
        "--indicator",
        "delta",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(v["pairs"], 3);
    assert_eq!(v["skipped"].as_array().unwrap().len(), 1);
    let acc = v["weighted_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(out.join("curves.csv").is_file());
    assert!(out.join("results.csv").is_file());
}

#[test]
fn nml_table_matches_small_values() {
    let v = json_stdout(&crack(&["nml-table", "--n", "2", "--k", "2"]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1]["n"], 1);
    assert_eq!(rows[1]["k"], 2);
    assert!((rows[1]["regret"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((rows[3]["regret"].as_f64().unwrap() - 2.5f64.log2()).abs() < 1e-12);
}

#[test]
fn help_and_version() {
    assert!(crack(&["--version"]).status.success());
    let help = crack(&["--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    for sub in ["infer", "generate", "sweep", "bench", "nml-table"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}
