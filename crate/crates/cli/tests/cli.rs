use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn epigate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epigate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = epigate(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    epigate(args).status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_emits_a_json_report() {
    let text = ok(&["run", "--scenario", path(&scenario("gettier"))]);
    let r: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(r["scenario"], "gettier");
    assert_eq!(r["trials"][0]["queries"][0]["verdict"], "Gettiered");
    assert_eq!(r["policy"]["thresholds"]["t_belief"], 0.9);
}

#[test]
fn seed_and_trial_overrides_are_honored() {
    let text = ok(&[
        "run",
        "--scenario",
        path(&scenario("jtb")),
        "--seed",
        "99",
        "--trials",
        "3",
    ]);
    let r: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(r["master_seed"], 99);
    assert_eq!(r["trials"].as_array().unwrap().len(), 3);
}

#[test]
fn runs_are_byte_identical_serial_or_parallel() {
    let s = scenario("spoofed_isr_corpus");
    let a = ok(&["run", "--scenario", path(&s)]);
    let b = ok(&["run", "--scenario", path(&s), "--parallel"]);
    assert_eq!(a, b);
}

#[test]
fn csv_output_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "run",
        "--scenario",
        path(&scenario("uav_withdrawal")),
        "--format",
        "csv",
        "--out",
        path(dir.path()),
    ]);
    for f in ["decisions.csv", "verdicts.csv", "metrics.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let decisions = std::fs::read_to_string(dir.path().join("decisions.csv")).unwrap();
    assert!(decisions.lines().nth(1).unwrap().contains("Withdraw"));
}

#[test]
fn redaction_drops_internal_state() {
    let r: Value = serde_json::from_str(&ok(&[
        "run",
        "--scenario",
        path(&scenario("jtb")),
        "--redact",
    ]))
    .unwrap();
    assert_eq!(r["redacted"], true);
    assert!(r["trials"][0]["doxastic"].is_null());
}

#[test]
fn named_policies_override_the_scenario() {
    let r: Value = serde_json::from_str(&ok(&[
        "run",
        "--scenario",
        path(&scenario("spoofed_isr_corpus")),
        "--policy",
        "AS2b",
    ]))
    .unwrap();
    assert_eq!(r["policy"]["kind"], "AS2b");
    assert_eq!(r["metrics"]["false_positive_lethal"], 60);
}

#[test]
fn compare_defaults_to_the_bayesian_and_virtue_pair() {
    let text = ok(&[
        "compare",
        "--scenario",
        path(&scenario("spoofed_isr_corpus")),
    ]);
    let review: Value = serde_json::from_str(&text).unwrap();
    let names: Vec<&str> = review["columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["policy"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["AS2b", "AS3bv"]);
    assert_eq!(
        review["winners"]["false_positive_lethal"]["policy"],
        "AS3bv"
    );
}

#[test]
fn compare_accepts_saved_reports() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("spoofed_isr_corpus");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&[
        "run",
        "--scenario",
        path(&s),
        "--policy",
        "AS1v",
        "--out",
        path(&a),
    ]);
    ok(&[
        "run",
        "--scenario",
        path(&s),
        "--policy",
        "AS3bv",
        "--out",
        path(&b),
    ]);
    let text = ok(&[
        "compare",
        "--report",
        path(&a),
        "--report",
        path(&b),
        "--format",
        "csv",
    ]);
    assert!(text.starts_with("metric,AS1v,AS3bv,winner"), "{text}");
}

#[test]
fn compare_rejects_reports_from_different_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&[
        "run",
        "--scenario",
        path(&scenario("jtb")),
        "--out",
        path(&a),
    ]);
    ok(&[
        "run",
        "--scenario",
        path(&scenario("gettier")),
        "--out",
        path(&b),
    ]);
    assert_eq!(
        code(&["compare", "--report", path(&a), "--report", path(&b)]),
        6
    );
}

#[test]
fn classify_prints_verdicts() {
    let s = scenario("false_belief");
    let r: Value = serde_json::from_str(&ok(&["classify", "--scenario", path(&s)])).unwrap();
    assert_eq!(r["trials"][0]["queries"][0]["verdict"], "FalseBelief");
    assert!(r["trials"][0]["decisions"].as_array().unwrap().is_empty());
    let text = ok(&["classify", "--scenario", path(&s), "--format", "summary"]);
    let header = text.lines().find(|l| l.starts_with("query")).unwrap();
    assert!(header.contains("safe, not lucky"));
    let row: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("p-is-civilian"))
        .unwrap()
        .split_whitespace()
        .collect();
    assert_eq!(row[1..], ["0", "0", "0", "0", "1", "0", "0", "0"]);
}

#[test]
fn assay_reports_competence_by_envelope() {
    let text = ok(&[
        "assay",
        "--scenario",
        path(&scenario("curriculum_strike")),
        "--envelopes",
        path(&scenario("curriculum_envelopes")),
        "--format",
        "csv",
    ]);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 5, "{text}");
    assert!(rows[1].starts_with("clear,"));
    let black_box = ok(&[
        "assay",
        "--scenario",
        path(&scenario("curriculum_strike")),
        "--envelopes",
        path(&scenario("curriculum_envelopes")),
        "--format",
        "csv",
        "--black-box",
    ]);
    assert_eq!(text, black_box);
}

#[test]
fn report_reformats_a_saved_run() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("run.json");
    ok(&[
        "run",
        "--scenario",
        path(&scenario("gettier")),
        "--out",
        path(&saved),
    ]);
    let summary = ok(&["report", path(&saved)]);
    assert!(summary.contains("safe, not lucky"));
    let json = ok(&["report", path(&saved), "--format", "json"]);
    assert_eq!(
        json.trim_end(),
        std::fs::read_to_string(&saved).unwrap().trim_end()
    );
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["run"]), 2);
    assert_eq!(
        code(&[
            "run",
            "--scenario",
            path(&scenario("gettier")),
            "--format",
            "xml"
        ]),
        2
    );
    assert_eq!(
        code(&["run", "--scenario", path(&dir.path().join("missing.json"))]),
        1
    );

    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(scenario("gettier")).unwrap()).unwrap();
    let mut no_seed = doc.clone();
    no_seed.as_object_mut().unwrap().remove("master_seed");
    let p = dir.path().join("no_seed.json");
    std::fs::write(&p, no_seed.to_string()).unwrap();
    assert_eq!(code(&["run", "--scenario", path(&p)]), 3);

    let mut dangling = doc.clone();
    dangling["agent"]["observations"][0]["subject"] = Value::String("ghost".into());
    let p = dir.path().join("dangling.json");
    std::fs::write(&p, dangling.to_string()).unwrap();
    assert_eq!(code(&["run", "--scenario", path(&p)]), 4);

    let reversed = dir.path().join("reversed.json");
    let mut env: Value =
        serde_json::from_str(&std::fs::read_to_string(scenario("curriculum_envelopes")).unwrap())
            .unwrap();
    env.as_array_mut().unwrap().reverse();
    std::fs::write(&reversed, env.to_string()).unwrap();
    assert_eq!(
        code(&[
            "assay",
            "--scenario",
            path(&scenario("curriculum_strike")),
            "--envelopes",
            path(&reversed)
        ]),
        5
    );
}
