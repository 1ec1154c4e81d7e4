//! End-to-end tests of the `taxeval` binary: exit codes, file outputs, and
//! format agreements.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn taxeval(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taxeval"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_toy_taxonomy(dir: &Path) -> PathBuf {
    let path = dir.join("tax.tsv");
    fs::write(
        &path,
        "root\t\tLife\t\n\
         animals\troot\tAnimals\t\n\
         plants\troot\tPlants\t\n\
         cats\tanimals\tCats\t\n\
         dogs\tanimals\tDogs\t\n\
         pines\tplants\tPines\t\n\
         maples\tplants\tMaples\t\n",
    )
    .unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn validate_accepts_good_file() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    let out = taxeval(&["validate", "tax.tsv"], dir.path());
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("OK: 7 nodes"));
}

#[test]
fn validate_names_both_roots() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.tsv"),
        "r1\t\tR1\t\nr2\t\tR2\t\nx\tr1\tX\t\n",
    )
    .unwrap();
    let out = taxeval(&["validate", "bad.tsv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let text = stdout_of(&out);
    assert!(text.contains("r1") && text.contains("r2"), "{text}");
}

#[test]
fn validate_flags_planted_defects() {
    let base = [
        ("root", "", "Life"),
        ("a", "root", "A"),
        ("b", "root", "B"),
        ("c", "a", "C"),
    ];
    let render = |rows: &[(&str, &str, &str)]| {
        rows.iter()
            .map(|(id, parent, label)| format!("{id}\t{parent}\t{label}\t\n"))
            .collect::<String>()
    };
    // (mutated file, substring the diagnostic must contain)
    let cases: Vec<(String, &str)> = vec![
        // duplicate id
        (render(&[base[0], base[1], base[1], base[3]]), "duplicate"),
        // two roots
        (render(&[base[0], ("a", "", "A"), base[2], base[3]]), "multiple roots"),
        // no root at all
        (render(&[("root", "a", "Life"), base[1], base[2], base[3]]), "cycle"),
        // unknown parent
        (render(&[base[0], ("a", "ghost", "A"), base[2], base[3]]), "unknown parent"),
        // self parent
        (render(&[base[0], ("a", "a", "A"), base[2], base[3]]), "own parent"),
        // 2-cycle
        (
            render(&[base[0], ("a", "b", "A"), ("b", "a", "B"), base[3]]),
            "cycle",
        ),
        // 3-cycle
        (
            render(&[base[0], ("a", "c", "A"), ("b", "a", "B"), ("c", "b", "C")]),
            "cycle",
        ),
        // empty id
        (render(&[base[0], ("", "root", "Blank"), base[2], base[3]]), "empty node id"),
        // orphan subtree hanging off a cycle
        (
            render(&[base[0], ("a", "b", "A"), ("b", "a", "B"), ("c", "a", "C")]),
            "cycle",
        ),
        // duplicate root id and second root
        (render(&[base[0], ("root", "", "Other"), base[2], base[3]]), "duplicate"),
    ];
    for (i, (content, needle)) in cases.iter().enumerate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mut.tsv");
        fs::write(&path, content).unwrap();
        let out = taxeval(&["validate", "mut.tsv"], dir.path());
        assert_eq!(out.status.code(), Some(1), "case {i} must fail validation");
        let text = stdout_of(&out).to_lowercase();
        assert!(
            text.contains(needle),
            "case {i}: wanted `{needle}` in:\n{text}"
        );
    }
}

#[test]
fn eval_exact_labels_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    fs::write(
        dir.path().join("preds.jsonl"),
        r#"{"sample_id":"s1","prediction":"Cats","gt_node":"cats"}
{"sample_id":"s2","prediction":"Pines","gt_node":"pines"}
{"sample_id":"s3","prediction":"Maples","gt_node":"maples"}
"#,
    )
    .unwrap();
    let out = taxeval(
        &[
            "eval",
            "--taxonomy",
            "tax.tsv",
            "--predictions",
            "preds.jsonl",
            "--measure",
            "rouge1",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["overall"]["hp_mean"], 1.0);
    assert_eq!(report["overall"]["hr_mean"], 1.0);
    assert_eq!(report["overall"]["hf"], 1.0);
    assert_eq!(report["overall"]["node_accuracy"], 1.0);
}

#[test]
fn eval_parent_label_costs_recall_only() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    fs::write(
        dir.path().join("preds.jsonl"),
        r#"{"sample_id":"s1","prediction":"Cats","gt_node":"cats"}
{"sample_id":"s2","prediction":"Pines","gt_node":"pines"}
{"sample_id":"s3","prediction":"Plants","gt_node":"maples"}
"#,
    )
    .unwrap();
    let out = taxeval(
        &[
            "eval",
            "--taxonomy",
            "tax.tsv",
            "--predictions",
            "preds.jsonl",
            "--measure",
            "rouge1",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["overall"]["hp_mean"], 1.0);
    let hr = report["overall"]["hr_mean"].as_f64().unwrap();
    assert!(hr < 1.0);
    assert!((hr - (1.0 + 1.0 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
    let acc = report["overall"]["node_accuracy"].as_f64().unwrap();
    assert!((acc - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn eval_empty_predictions_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    fs::write(dir.path().join("preds.jsonl"), "").unwrap();
    let out = taxeval(
        &[
            "eval",
            "--taxonomy",
            "tax.tsv",
            "--predictions",
            "preds.jsonl",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("empty input"));
}

#[test]
fn eval_unresolvable_gt_lists_ids_unless_skipped() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    fs::write(
        dir.path().join("preds.jsonl"),
        r#"{"sample_id":"s1","prediction":"Cats","gt_node":"cats"}
{"sample_id":"s2","prediction":"Dogs","gt_node":"ghost"}
"#,
    )
    .unwrap();
    let args = [
        "eval",
        "--taxonomy",
        "tax.tsv",
        "--predictions",
        "preds.jsonl",
        "--out",
        "run",
    ];
    let out = taxeval(&args, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("ghost"));

    let mut with_skip: Vec<&str> = args.to_vec();
    with_skip.push("--skip-bad");
    let out = taxeval(&with_skip, dir.path());
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["overall"]["n"], 1);
    assert_eq!(report["skipped"].as_array().unwrap().len(), 1);
}

#[test]
fn csv_and_json_reports_agree_on_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    fs::write(
        dir.path().join("preds.jsonl"),
        r#"{"sample_id":"s1","prediction":"a cat I think","gt_node":"cats","dataset":"x"}
{"sample_id":"s2","prediction":"plants","gt_node":"pines","dataset":"y"}
{"sample_id":"s3","prediction":"dog","gt_node":"dogs","dataset":"x"}
"#,
    )
    .unwrap();
    let out = taxeval(
        &[
            "eval",
            "--taxonomy",
            "tax.tsv",
            "--predictions",
            "preds.jsonl",
            "--format",
            "csv",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.report.json")).unwrap())
            .unwrap();
    let csv_text = fs::read_to_string(dir.path().join("run.report.csv")).unwrap();
    let mut seen_scopes = 0;
    for line in csv_text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let stats = if fields[0] == "overall" {
            &report["overall"]
        } else {
            let name = fields[0].strip_prefix("dataset:").unwrap();
            &report["per_dataset"][name]
        };
        assert_eq!(fields[1].parse::<u64>().unwrap(), stats["n"].as_u64().unwrap());
        for (i, key) in ["hp_mean", "hr_mean", "hf", "node_accuracy", "label_accuracy"]
            .iter()
            .enumerate()
        {
            let csv_value: f64 = fields[i + 2].parse().unwrap();
            assert_eq!(csv_value, stats[*key].as_f64().unwrap(), "{key}");
        }
        seen_scopes += 1;
    }
    assert_eq!(seen_scopes, 3); // overall + datasets x, y
    // --format csv also wrote the per-record table as CSV
    assert!(dir.path().join("run.records.csv").exists());
    assert!(!dir.path().join("run.records.jsonl").exists());
}

#[test]
fn map_emits_traces() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    fs::write(
        dir.path().join("preds.jsonl"),
        r#"{"sample_id":"s1","prediction":"A: a maple"}
"#,
    )
    .unwrap();
    let out = taxeval(
        &[
            "map",
            "--taxonomy",
            "tax.tsv",
            "--predictions",
            "preds.jsonl",
            "--strip-prefix",
            "A:",
            "--out",
            "mapped.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let line = fs::read_to_string(dir.path().join("mapped.jsonl")).unwrap();
    let row: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(row["mapped_node"], "maples");
    assert_eq!(row["prediction"], "a maple");
    assert!(row["stage"].as_str().unwrap().contains("contains"));
    let topk = row["topk"].as_array().unwrap();
    assert!(!topk.is_empty());
    let sum: f64 = topk.iter().map(|e| e["softmax"].as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-9);
}

#[test]
fn map_quality_reports_gold_node_agreement() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    // gold nodes annotate the TEXT; "a plant" should land on plants, the
    // annotated gold node, while "Maples" lands on maples (gold animals is
    // deliberately wrong).
    fs::write(
        dir.path().join("gold.jsonl"),
        r#"{"sample_id":"s1","prediction":"a plant","gt_node":"plants"}
{"sample_id":"s2","prediction":"Maples","gt_node":"animals"}
"#,
    )
    .unwrap();
    let out = taxeval(
        &[
            "map-quality",
            "--taxonomy",
            "tax.tsv",
            "--predictions",
            "gold.jsonl",
            "--out",
            "mq",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("mq.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["overall"]["node_accuracy"], 0.5);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows[0]["mapped_node"], "plants");
    assert_eq!(rows[0]["node_match"], true);
    assert_eq!(rows[1]["node_match"], false);
}

#[test]
fn taxonomy_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    // canonical form: extract from the same file loaded + saved twice
    fs::write(
        dir.path().join("edges.tsv"),
        "animals\troot\nplants\troot\ncats\tanimals\npines\tplants\n",
    )
    .unwrap();
    for round in 0..2 {
        let out = taxeval(
            &[
                "extract",
                "--edges",
                "edges.tsv",
                "--root",
                "root",
                "--seed",
                "9",
                "--out",
                &format!("ext{round}.tsv"),
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    let a = fs::read(dir.path().join("ext0.tsv")).unwrap();
    let b = fs::read(dir.path().join("ext1.tsv")).unwrap();
    assert_eq!(a, b);

    // save(load(x)) == x for files already in canonical order
    let canon = fs::read_to_string(dir.path().join("ext0.tsv")).unwrap();
    fs::write(dir.path().join("reloaded.tsv"), &canon).unwrap();
    let out = taxeval(&["validate", "reloaded.tsv"], dir.path());
    assert!(out.status.success());
}

#[test]
fn bench_correlation_reports_oracle_and_undefined() {
    let dir = tempfile::tempdir().unwrap();
    // a deeper chain so hr varies
    fs::write(
        dir.path().join("chain.tsv"),
        "root\t\tRoot\t\na\troot\tA\t\nb\ta\tB\t\nc\tb\tC\t\nleaf\tc\tLeaf\t\n",
    )
    .unwrap();
    let out = taxeval(
        &[
            "sample-pairs",
            "--taxonomy",
            "chain.tsv",
            "--n",
            "200",
            "--max-dist",
            "4",
            "--mode",
            "hr",
            "--seed",
            "3",
            "--out",
            "pairs.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));

    // oracle score file: exactly hr per pair
    let mut scores = String::from("");
    let pairs_text = fs::read_to_string(dir.path().join("pairs.jsonl")).unwrap();
    let mut seen = std::collections::HashSet::new();
    for line in pairs_text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let key = (v["reference"].as_str().unwrap().to_owned(), v["candidate"].as_str().unwrap().to_owned());
        if seen.insert(key.clone()) {
            scores.push_str(&format!("{}\t{}\t{}\n", key.0, key.1, v["hr"].as_f64().unwrap()));
        }
    }
    fs::write(dir.path().join("oracle.tsv"), scores).unwrap();

    let out = taxeval(
        &[
            "bench-correlation",
            "--taxonomy",
            "chain.tsv",
            "--pairs",
            "pairs.jsonl",
            "--measures",
            "exact",
            "--scores",
            "oracle=oracle.tsv",
            "--out",
            "corr.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("corr.json")).unwrap()).unwrap();
    let entries = report["entries"].as_array().unwrap();
    let oracle = entries.iter().find(|e| e["measure"] == "oracle").unwrap();
    assert_eq!(oracle["tau"], 1.0);
    // exact match is constant 0 on a chain: undefined tau surfaces
    let exact = entries.iter().find(|e| e["measure"] == "exact").unwrap();
    assert!(exact["tau"].is_null());
    assert!(exact["error"].as_str().unwrap().contains("undefined"));
}

#[test]
fn unknown_measure_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_taxonomy(dir.path());
    fs::write(
        dir.path().join("preds.jsonl"),
        "{\"sample_id\":\"s1\",\"prediction\":\"x\",\"gt_node\":\"cats\"}\n",
    )
    .unwrap();
    let out = taxeval(
        &[
            "eval",
            "--taxonomy",
            "tax.tsv",
            "--predictions",
            "preds.jsonl",
            "--measure",
            "nope",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}
