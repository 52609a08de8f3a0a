//! End-to-end tests of the command-line interface: exit codes, output
//! shapes, config precedence, and the golden meta-evaluation report.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn goalcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goalcheck"))
        .args(args)
        .current_dir(workspace_root())
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

const DEMO: &str = "rules/multibypass_demo.rules";
const P5: &str = "rules/multibypass_p5.rules";

#[test]
fn check_valid_sequence_exits_zero() {
    let out = goalcheck(&[
        "--rules",
        P5,
        "check",
        "--phase",
        "P5",
        "--seq",
        "S22,S23,S24,S25",
    ]);
    assert_eq!(exit_code(&out), 0, "{out:?}");
    let verdict: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(verdict["valid"], serde_json::json!(true));
    assert_eq!(verdict["error_class"], serde_json::Value::Null);
}

#[test]
fn check_order_error_exits_one_with_oe_verdict() {
    let out = goalcheck(&[
        "--rules",
        P5,
        "check",
        "--phase",
        "P5",
        "--seq",
        "S22,S24,S23,S25",
    ]);
    assert_eq!(exit_code(&out), 1);
    let verdict: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(verdict["error_class"], serde_json::json!("OE"));
    assert_eq!(
        verdict["violations"][0]["kind"],
        serde_json::json!("DependencyOrder")
    );
}

#[test]
fn check_unknown_phase_exits_three() {
    let out = goalcheck(&["--rules", P5, "check", "--phase", "P99", "--seq", "S22"]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn malformed_rules_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.rules");
    std::fs::write(&bad, "step S1\nphase P1 {\n required S1\n}\n").unwrap();
    let out = goalcheck(&[
        "--rules",
        bad.to_str().unwrap(),
        "check",
        "--phase",
        "P1",
        "--seq",
        "S1",
    ]);
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(stderr.contains(":3:"), "position missing: {stderr}");
}

#[test]
fn validate_reports_diagnostics() {
    let out = goalcheck(&["--rules", DEMO, "validate"]);
    assert_eq!(exit_code(&out), 0);
    assert_eq!(stdout(&out).trim(), "[]");

    let dir = tempfile::tempdir().unwrap();
    let dirty = dir.path().join("dirty.rules");
    std::fs::write(
        &dirty,
        "step A1\nstep A2\nphase_decl P1\nphase P1 {\n required: A1, A2\n dep: A1 < A2\n dep: A2 < A1\n}\n",
    )
    .unwrap();
    let out = goalcheck(&["--rules", dirty.to_str().unwrap(), "validate"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stdout(&out).contains("DependencyCycle"));
}

#[test]
fn score_reports_the_similarity_trap() {
    // Rule-valid variation that fails the NED threshold.
    let out = goalcheck(&[
        "--rules",
        P5,
        "score",
        "--phase",
        "P5",
        "--seq",
        "S3,S22,S23,S39,S24,S25",
    ]);
    assert_eq!(exit_code(&out), 0);
    let scores: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(
        scores["canonical_reference"],
        serde_json::json!(["S22", "S23", "S24", "S25"])
    );
    assert_eq!(
        scores["scores"]["NED"]["decision"],
        serde_json::json!(false)
    );
    assert_eq!(scores["config"]["threshold"], serde_json::json!(0.7));
}

#[test]
fn gen_default_counts_split_191_199() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.jsonl");
    let out = goalcheck(&["--rules", DEMO, "gen", "--out", bench.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["counts"]["Valid"], serde_json::json!(191));
    let invalid = summary["counts"]["OE"].as_u64().unwrap()
        + summary["counts"]["CE"].as_u64().unwrap()
        + summary["counts"]["BE"].as_u64().unwrap();
    assert_eq!(invalid, 199);
    let text = std::fs::read_to_string(&bench).unwrap();
    assert_eq!(text.lines().count(), 390);
}

#[test]
fn gen_zero_counts_writes_an_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("empty.jsonl");
    let out = goalcheck(&[
        "--rules",
        DEMO,
        "gen",
        "--valid",
        "0",
        "--oe",
        "0",
        "--ce",
        "0",
        "--be",
        "0",
        "--out",
        bench.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    assert_eq!(std::fs::read_to_string(&bench).unwrap(), "");
}

#[test]
fn gen_unsatisfiable_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("tiny.rules");
    // Exactly one valid sequence exists within the length bound.
    std::fs::write(
        &rules,
        "step A1\nstep A2\nphase_decl P1\nphase P1 {\n required: A1, A2\n dep: A1 < A2\n}\n",
    )
    .unwrap();
    let bench = dir.path().join("bench.jsonl");
    let out = goalcheck(&[
        "--rules",
        rules.to_str().unwrap(),
        "gen",
        "--valid",
        "2",
        "--oe",
        "0",
        "--ce",
        "0",
        "--be",
        "0",
        "--max-len",
        "2",
        "--out",
        bench.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn metaeval_markdown_matches_the_golden_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.jsonl");
    let report = dir.path().join("report.md");
    let out = goalcheck(&[
        "--rules",
        DEMO,
        "--seed",
        "7",
        "gen",
        "--valid",
        "40",
        "--oe",
        "20",
        "--ce",
        "20",
        "--be",
        "20",
        "--out",
        bench.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let out = goalcheck(&[
        "--rules",
        DEMO,
        "--seed",
        "7",
        "metaeval",
        "--benchmark",
        bench.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let golden = std::fs::read_to_string(
        workspace_root().join("crates/goalcheck-cli/tests/fixtures/metaeval_golden.md"),
    )
    .unwrap();
    let produced = std::fs::read_to_string(&report).unwrap();
    assert_eq!(produced, golden);
}

#[test]
fn metaeval_threshold_one_counts_only_canonical_matches_for_ned() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.jsonl");
    goalcheck(&[
        "--rules",
        DEMO,
        "--seed",
        "3",
        "gen",
        "--valid",
        "36",
        "--oe",
        "9",
        "--ce",
        "9",
        "--be",
        "9",
        "--out",
        bench.to_str().unwrap(),
    ]);
    // Count the generated valid items that equal their phase's canonical
    // reference (provenance "canonical" marks them).
    let text = std::fs::read_to_string(&bench).unwrap();
    let canonical = text
        .lines()
        .filter(|l| l.contains("\"label\":\"Valid\"") && l.contains("\"mutation\":\"canonical\""))
        .count();
    assert!(canonical > 0);

    let out = goalcheck(&[
        "--rules",
        DEMO,
        "--threshold",
        "1.0",
        "--format",
        "json",
        "metaeval",
        "--benchmark",
        bench.to_str().unwrap(),
        "--evaluators",
        "ned",
    ]);
    assert_eq!(exit_code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let valid_stats = &report["columns"][0]["subsets"]["Valid"];
    assert_eq!(valid_stats["n"], serde_json::json!(36));
    assert_eq!(valid_stats["correct"], serde_json::json!(canonical));
}

#[test]
fn metaeval_rejects_malformed_benchmarks() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bad.jsonl");
    std::fs::write(&bench, "{\"phase\": \"P5\"}\n").unwrap();
    let out = goalcheck(&[
        "--rules",
        DEMO,
        "metaeval",
        "--benchmark",
        bench.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn planeval_scores_the_hand_built_fixture() {
    let out = goalcheck(&[
        "--rules",
        DEMO,
        "planeval",
        "--outputs",
        "crates/goalcheck-cli/tests/fixtures/plan_outputs.jsonl",
    ]);
    assert_eq!(exit_code(&out), 0);
    let md = stdout(&out);
    assert!(
        md.contains("| planner-a | task1 | 3 | 33.3 | 33.3 | 33.3 | 1 |"),
        "{md}"
    );
    assert!(md.contains("| planner-a | task2 | 3 | - | 66.7 | 33.3 | 0 |"));
    assert!(md.contains("| planner-b | task3.1 | 2 | - | 50.0 | 100.0 | 0 |"));
    assert!(md.contains("| planner-b | task3.2 | 2 | - | 50.0 | 50.0 | 0 |"));
    assert!(md.contains("| planner-b | task3.3 | 2 | - | 50.0 | 50.0 | 0 |"));
    assert!(md.contains("unreadable records: 0"));
}

#[test]
fn planeval_empty_input_renders_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = dir.path().join("empty.jsonl");
    std::fs::write(&outputs, "").unwrap();
    let out = goalcheck(&[
        "--rules",
        DEMO,
        "planeval",
        "--outputs",
        outputs.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let md = stdout(&out);
    assert!(md.starts_with("| Model | Task | N | StepAcc | Current | Next | Malformed |"));
    assert_eq!(md.lines().filter(|l| l.starts_with("| planner")).count(), 0);
}

#[test]
fn planeval_tallies_unreadable_records_and_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = dir.path().join("mixed.jsonl");
    let good = serde_json::json!({
        "context": {"phase": "P5", "completed": ["S22"], "current_step": "S23", "task": "task2"},
        "model": "m",
        "output": {"remaining_steps": ["S24", "S25"], "next_phase": "P6", "next_phase_steps": ["S26", "S27"]}
    });
    std::fs::write(&outputs, format!("{good}\nthis line is not a record\n")).unwrap();
    let out = goalcheck(&[
        "--rules",
        DEMO,
        "planeval",
        "--outputs",
        outputs.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stdout(&out).contains("unreadable records: 1"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    let rules_abs = workspace_root().join(P5);
    std::fs::write(
        &config,
        serde_json::json!({
            "rules": rules_abs,
            "threshold": 0.5,
            "format": "json"
        })
        .to_string(),
    )
    .unwrap();

    // No --rules flag: the config file supplies it.
    let out = goalcheck(&[
        "--config",
        config.to_str().unwrap(),
        "score",
        "--phase",
        "P5",
        "--seq",
        "S3,S22,S23,S39,S24,S25",
    ]);
    assert_eq!(exit_code(&out), 0);
    let scores: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // similarity 4/6 passes at the config file's 0.5 threshold
    assert_eq!(scores["config"]["threshold"], serde_json::json!(0.5));
    assert_eq!(scores["scores"]["NED"]["decision"], serde_json::json!(true));

    // The flag overrides the config file.
    let out = goalcheck(&[
        "--config",
        config.to_str().unwrap(),
        "--threshold",
        "0.7",
        "score",
        "--phase",
        "P5",
        "--seq",
        "S3,S22,S23,S39,S24,S25",
    ]);
    let scores: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(scores["config"]["threshold"], serde_json::json!(0.7));
    assert_eq!(
        scores["scores"]["NED"]["decision"],
        serde_json::json!(false)
    );
}

#[test]
fn missing_rules_everywhere_exits_two() {
    let out = goalcheck(&["validate"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn help_documents_every_subcommand() {
    let out = goalcheck(&["--help"]);
    assert_eq!(exit_code(&out), 0);
    let help = stdout(&out);
    for sub in ["check", "validate", "score", "gen", "metaeval", "planeval"] {
        assert!(help.contains(sub), "missing {sub}");
    }
    for flag in [
        "--rules",
        "--vocab",
        "--threshold",
        "--seed",
        "--format",
        "--judge-config",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
}

#[test]
fn external_vocabulary_merges_with_rule_declarations() {
    let dir = tempfile::tempdir().unwrap();
    // Rule file with phase blocks only; steps and phases come from the
    // vocabulary JSON.
    let rules = dir.path().join("slim.rules");
    std::fs::write(&rules, "phase P1 {\n required: A1, A2\n dep: A1 < A2\n}\n").unwrap();
    let vocab = dir.path().join("vocab.json");
    std::fs::write(
        &vocab,
        serde_json::json!({
            "steps": [{"code": "A1", "label": "alpha"}, {"code": "A2"}],
            "phases": [{"code": "P1", "label": "first phase"}]
        })
        .to_string(),
    )
    .unwrap();

    let out = goalcheck(&[
        "--rules",
        rules.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "check",
        "--phase",
        "P1",
        "--seq",
        "A1,A2",
    ]);
    assert_eq!(exit_code(&out), 0, "{out:?}");

    // Without the vocabulary the same rule file cannot resolve its steps.
    let out = goalcheck(&[
        "--rules",
        rules.to_str().unwrap(),
        "check",
        "--phase",
        "P1",
        "--seq",
        "A1,A2",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn unavailable_judge_column_forces_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.jsonl");
    goalcheck(&[
        "--rules", DEMO, "--seed", "2", "gen", "--valid", "2", "--oe", "2", "--ce", "2",
        "--be", "2", "--out", bench.to_str().unwrap(),
    ]);
    // An empty fixture file: every judge call is unavailable.
    let fixtures = dir.path().join("empty.jsonl");
    std::fs::write(&fixtures, "").unwrap();
    let judge_config = dir.path().join("judge.json");
    std::fs::write(
        &judge_config,
        serde_json::json!({
            "endpoint": "",
            "model": "ghost",
            "cache_dir": dir.path().join("cache"),
            "fixtures": fixtures,
        })
        .to_string(),
    )
    .unwrap();

    let out = goalcheck(&[
        "--rules",
        DEMO,
        "--judge-config",
        judge_config.to_str().unwrap(),
        "metaeval",
        "--benchmark",
        bench.to_str().unwrap(),
        "--evaluators",
        "rule,judge",
    ]);
    assert_eq!(exit_code(&out), 2, "{out:?}");
    assert!(stdout(&out).contains("absent"));
}
