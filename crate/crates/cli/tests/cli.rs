//! End-to-end tests of the `loco` binary: exit codes, file outputs, and
//! reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn loco(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loco"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

const TASKS: [&str; 7] = [
    "500hPa", "850hPa", "land", "rain", "phenom", "min_temp", "max_temp",
];

fn write_corpus(dir: &Path) {
    let mut lines = String::new();
    for (i, task) in TASKS.iter().enumerate() {
        lines.push_str(&format!(
            r#"{{"id":"{task}-0","task":"{task}","date":"2023-03-{:02}","question":"Q for {task}?","choices":{{"A":"first","B":"second","C":"third","D":"fourth"}},"answer":"B"}}"#,
            i + 1
        ));
        lines.push('\n');
    }
    fs::write(dir.join("corpus.jsonl"), lines).unwrap();
}

fn compliant(letter: char, marker: char) -> String {
    format!("<think>analysis [[SUPPORTS:{marker}]]</think><answer>{letter}</answer>")
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = loco(dir.path(), &["--help"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("train-toy"));
}

#[test]
fn unknown_flag_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = loco(dir.path(), &["score", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn score_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let outputs = format!(
        "{}\n{}\n{}\n",
        serde_json::json!({"item_id": "rain-0", "output": compliant('B', 'B')}),
        serde_json::json!({"item_id": "rain-0", "output": compliant('B', 'A')}),
        serde_json::json!({"item_id": "land-0", "output": "no structure"}),
    );
    fs::write(dir.path().join("outputs.jsonl"), outputs).unwrap();
    let out = loco(
        dir.path(),
        &[
            "score",
            "--corpus",
            "corpus.jsonl",
            "--outputs",
            "outputs.jsonl",
            "--out-dir",
            "out",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = fs::read_to_string(dir.path().join("out/reward_report.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = report
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["total"], 1.0);
    assert_eq!(rows[0]["response_index"], 0);
    assert_eq!(rows[1]["response_index"], 1);
    assert_eq!(rows[1]["r_loco"], 0.0);
    assert_eq!(rows[1]["fa_rp"], "A");
    assert_eq!(rows[2]["total"], 0.0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/reward_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["responses"], 3);
    assert_eq!(summary["items"], 2);
}

#[test]
fn score_missing_corpus_exits_one_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("outputs.jsonl"), "").unwrap();
    let out = loco(
        dir.path(),
        &["score", "--corpus", "nowhere.jsonl", "--outputs", "outputs.jsonl"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nowhere.jsonl"));
}

#[test]
fn score_malformed_corpus_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("corpus.jsonl"), "{broken\n").unwrap();
    fs::write(dir.path().join("outputs.jsonl"), "").unwrap();
    let out = loco(
        dir.path(),
        &["score", "--corpus", "corpus.jsonl", "--outputs", "outputs.jsonl"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn score_rft_weights_skip_judge() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let outputs = format!(
        "{}\n{}\n",
        serde_json::json!({"item_id": "rain-0", "output": compliant('B', 'B')}),
        serde_json::json!({"item_id": "rain-0", "output": compliant('A', 'A')}),
    );
    fs::write(dir.path().join("outputs.jsonl"), outputs).unwrap();
    let out = loco(
        dir.path(),
        &[
            "score",
            "--corpus",
            "corpus.jsonl",
            "--outputs",
            "outputs.jsonl",
            "--weights",
            "rft",
            "--out-dir",
            "out",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = fs::read_to_string(dir.path().join("out/reward_report.jsonl")).unwrap();
    for line in report.lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(row["r_loco"], 0.0);
        assert_eq!(row["fa_rp"], serde_json::Value::Null);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/reward_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["judge_backend_calls"], 0);
}

#[test]
fn audit_archetype_fixture() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    // gold for every item is B: consistent, lucky guess (type 2), flipped
    // answer (type 1), malformed.
    let outputs = format!(
        "{}\n{}\n{}\n{}\n",
        serde_json::json!({"item_id": "rain-0", "output": compliant('B', 'B')}),
        serde_json::json!({"item_id": "rain-0", "output": compliant('B', 'A')}),
        serde_json::json!({"item_id": "rain-0", "output": compliant('C', 'B')}),
        serde_json::json!({"item_id": "rain-0", "output": "<think>trails off</think>"}),
    );
    fs::write(dir.path().join("outputs.jsonl"), outputs).unwrap();
    let out = loco(
        dir.path(),
        &[
            "audit",
            "--corpus",
            "corpus.jsonl",
            "--outputs",
            "outputs.jsonl",
            "--judge",
            "mock",
            "--out-dir",
            "out",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/audit_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["total"], 4);
    assert_eq!(summary["consistent"], 1);
    assert_eq!(summary["type1"], 1);
    assert_eq!(summary["type2"], 1);
    assert_eq!(summary["type3"], 0);
    assert_eq!(summary["unauditable"], 1);
}

#[test]
fn audit_empty_outputs_is_ok() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    fs::write(dir.path().join("outputs.jsonl"), "").unwrap();
    let out = loco(
        dir.path(),
        &[
            "audit",
            "--corpus",
            "corpus.jsonl",
            "--outputs",
            "outputs.jsonl",
            "--out-dir",
            "out",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let audit = fs::read_to_string(dir.path().join("out/audit.jsonl")).unwrap();
    assert!(audit.is_empty());
}

#[test]
fn train_toy_is_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = loco(
            dir.path(),
            &[
                "train-toy",
                "--steps",
                "25",
                "--seed",
                "7",
                "--weights",
                "loco-rft",
                "--out-dir",
                run,
            ],
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = fs::read(dir.path().join("a/trace_loco_rft.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trace_loco_rft.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn train_toy_zero_steps_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = loco(
        dir.path(),
        &["train-toy", "--steps", "0", "--weights", "loco-rft", "--out-dir", "out"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("out/trace_loco_rft.csv")).unwrap();
    assert_eq!(
        csv,
        "step,mean_reward,consistency_proportion,p_cc,p_cw,p_gc,p_cw_fa,p_mf\n"
    );
}

fn consistency_column(csv: &str) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .map(|line| line.split(',').nth(2).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn train_toy_default_presets_show_opposite_trends() {
    let dir = tempfile::tempdir().unwrap();
    let out = loco(dir.path(), &["train-toy", "--out-dir", "out"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut trends = Vec::new();
    for name in ["trace_loco_rft.csv", "trace_rft.csv"] {
        let csv = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
        let cons = consistency_column(&csv);
        assert_eq!(cons.len(), 300);
        let first: f64 = cons[..10].iter().sum::<f64>() / 10.0;
        let last: f64 = cons[290..].iter().sum::<f64>() / 10.0;
        trends.push((first, last));
    }
    let (loco_first, loco_last) = trends[0];
    let (rft_first, rft_last) = trends[1];
    assert!(loco_last > loco_first, "{loco_last} vs {loco_first}");
    assert!(rft_last < rft_first, "{rft_last} vs {rft_first}");
}

fn write_pair_files(dir: &Path, skip: Option<(&str, &str)>) {
    let pairs = dir.join("pairs");
    fs::create_dir_all(&pairs).unwrap();
    for train in TASKS {
        for test in TASKS {
            if skip == Some((train, test)) {
                continue;
            }
            // Answer correctly iff the train task's index is even.
            let correct = TASKS.iter().position(|t| *t == train).unwrap() % 2 == 0;
            let letter = if correct { 'B' } else { 'A' };
            let row = serde_json::json!({
                "item_id": format!("{test}-0"),
                "output": compliant(letter, letter),
            });
            fs::write(pairs.join(format!("{train}__{test}.jsonl")), format!("{row}\n")).unwrap();
        }
    }
}

#[test]
fn eval_complete_grid() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    write_pair_files(dir.path(), None);
    fs::write(
        dir.path().join("baseline.json"),
        serde_json::to_string(
            &TASKS.iter().map(|t| (*t, 50.0)).collect::<std::collections::BTreeMap<_, _>>(),
        )
        .unwrap(),
    )
    .unwrap();
    let out = loco(
        dir.path(),
        &[
            "eval",
            "--corpus",
            "corpus.jsonl",
            "--outputs",
            "pairs",
            "--baseline",
            "baseline.json",
            "--out-dir",
            "out",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    // Four of seven training tasks answer correctly: every column mean is
    // 400/7 and so is the overall.
    let expected = 400.0 / 7.0;
    let overall = report["overall"].as_f64().unwrap();
    assert!((overall - expected).abs() < 1e-9);
    let per_task = report["per_task"].as_object().unwrap();
    assert_eq!(per_task.len(), 7);
    for value in per_task.values() {
        assert!((value.as_f64().unwrap() - expected).abs() < 1e-9);
    }
    // 3 of 7 rows score 0, below the 50.0 baseline, in every column.
    assert_eq!(report["degradation_count"], 21);
    assert!(dir.path().join("out/matrix.csv").exists());
    assert!(stdout(&out).contains("overall"));
}

#[test]
fn eval_missing_pair_exits_two_naming_pair() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    write_pair_files(dir.path(), Some(("850hPa", "min_temp")));
    let out = loco(
        dir.path(),
        &["eval", "--corpus", "corpus.jsonl", "--outputs", "pairs", "--out-dir", "out"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("(850hPa, min_temp)"));
}

#[test]
fn kappa_values_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "A\nB\nC\n").unwrap();
    fs::write(dir.path().join("b.txt"), "A\nB\nC\n").unwrap();
    let out = loco(dir.path(), &["kappa", "a.txt", "b.txt"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "1.0000");

    fs::write(dir.path().join("c.txt"), "A\nA\nB\nB\n").unwrap();
    fs::write(dir.path().join("d.txt"), "A\nB\nA\nB\n").unwrap();
    let out = loco(dir.path(), &["kappa", "c.txt", "d.txt"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.0000");

    fs::write(dir.path().join("e.txt"), "A\n").unwrap();
    let out = loco(dir.path(), &["kappa", "e.txt", "c.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_applies_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("loco.toml"),
        "steps = 9\nseed = 4\nweights = \"loco-rft\"\nout_dir = \"from_config\"\n",
    )
    .unwrap();
    let out = loco(
        dir.path(),
        &["train-toy", "--config", "loco.toml", "--steps", "3"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("from_config/trace_loco_rft.csv")).unwrap();
    // Flag wins over the file: 3 data rows, not 9.
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn bad_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("loco.toml"), "not_a_key = 1\n").unwrap();
    let out = loco(dir.path(), &["train-toy", "--config", "loco.toml"]);
    assert_eq!(out.status.code(), Some(1));
}
