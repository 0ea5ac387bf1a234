mod common;

use std::path::PathBuf;

use epigate::harness::{
    assay_know_how, canonical_json, compare_policies, run_trials, OperatingEnvelope, Parallelism,
};
use epigate::policy::PolicyKind;
use jsonschema::{Retrieve, Uri, Validator};
use serde_json::{json, Value};

const SCENARIO_ID: &str = "urn:epigate:schema:scenario:1";
const REPORT_ID: &str = "urn:epigate:schema:report:1";

fn schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../schema")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

struct Local;

impl Retrieve for Local {
    fn retrieve(
        &self,
        uri: &Uri<String>,
    ) -> Result<Value, Box<dyn std::error::Error + Send + Sync>> {
        match uri.as_str() {
            SCENARIO_ID => Ok(schema("scenario.schema.json")),
            REPORT_ID => Ok(schema("report.schema.json")),
            other => Err(format!("unknown schema {other}").into()),
        }
    }
}

fn validator(root: &str, pointer: &str) -> Validator {
    jsonschema::options()
        .with_retriever(Local)
        .build(&json!({"$ref": format!("{root}{pointer}")}))
        .unwrap()
}

fn assert_valid(v: &Validator, doc: &Value, what: &str) {
    let errors: Vec<String> = v
        .iter_errors(doc)
        .map(|e| format!("{}: {e}", e.instance_path()))
        .take(5)
        .collect();
    assert!(errors.is_empty(), "{what}: {errors:#?}");
}

#[test]
fn shipped_scenarios_match_the_schema() {
    let v = validator(SCENARIO_ID, "");
    let dir = common::scenarios_dir();
    for spec in common::all_scenarios() {
        let text = std::fs::read_to_string(dir.join(format!("{}.json", spec.name))).unwrap();
        assert_valid(&v, &serde_json::from_str(&text).unwrap(), &spec.name);
        let echoed: Value = serde_json::from_str(&spec.to_canonical_json()).unwrap();
        assert_valid(&v, &echoed, &format!("{} echo", spec.name));
    }
}

#[test]
fn envelope_lists_match_the_schema() {
    let v = validator(SCENARIO_ID, "#/$defs/OperatingEnvelope");
    let text =
        std::fs::read_to_string(common::scenarios_dir().join("curriculum_envelopes.json")).unwrap();
    let list: Vec<Value> = serde_json::from_str(&text).unwrap();
    for env in &list {
        assert_valid(&v, env, "envelope");
    }
}

#[test]
fn run_reports_match_the_schema() {
    let v = validator(REPORT_ID, "");
    for spec in common::all_scenarios() {
        let report = run_trials(&spec, None, Parallelism::Parallel).unwrap();
        for r in [report.clone(), report.redacted()] {
            let doc: Value = serde_json::from_str(&canonical_json(&r)).unwrap();
            assert_valid(&v, &doc, &spec.name);
        }
    }
    for seed in 0..40 {
        let spec = common::random_engagement(seed);
        let doc: Value = serde_json::from_str(&canonical_json(
            &run_trials(&spec, None, Parallelism::Serial).unwrap(),
        ))
        .unwrap();
        assert_valid(&v, &doc, &format!("random engagement {seed}"));
    }
}

#[test]
fn reviews_and_profiles_match_the_schema() {
    let spec = common::scenario("spoofed_isr_corpus");
    let runs: Vec<_> = [PolicyKind::AS1v, PolicyKind::AS2b, PolicyKind::AS3bv]
        .into_iter()
        .map(|k| run_trials(&spec, Some(&spec.policy.as_kind(k)), Parallelism::Serial).unwrap())
        .collect();
    let review = compare_policies(&runs, &spec.review).unwrap();
    let doc: Value = serde_json::from_str(&canonical_json(&review)).unwrap();
    assert_valid(
        &validator(REPORT_ID, "#/$defs/ReviewReport"),
        &doc,
        "review",
    );

    let strike = common::scenario("curriculum_strike");
    let envelopes = [
        OperatingEnvelope::new("clear", 0.0, 0.0, 1.0),
        OperatingEnvelope::new("smoke", 2.0, 0.5, 0.7),
    ];
    let profile = assay_know_how(&strike, &strike.policy, &envelopes, false).unwrap();
    let doc: Value = serde_json::from_str(&canonical_json(&profile)).unwrap();
    assert_valid(
        &validator(REPORT_ID, "#/$defs/CompetenceProfile"),
        &doc,
        "profile",
    );
}

#[test]
fn the_schema_rejects_a_seedless_scenario() {
    let v = validator(SCENARIO_ID, "");
    let text = std::fs::read_to_string(common::scenarios_dir().join("gettier.json")).unwrap();
    let mut doc: Value = serde_json::from_str(&text).unwrap();
    doc.as_object_mut().unwrap().remove("master_seed");
    assert!(!v.is_valid(&doc));
}
