use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    run_trials, DecisionLog, HarnessError, Metrics, Parallelism, ReviewCriteria, RunReport,
    ScenarioSpec,
};
use crate::policy::{PolicyConfig, PolicyKind};

/// One rung of a competence curriculum: every channel is blurred toward
/// uniform by `confusion_noise` and its availability scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingEnvelope {
    pub name: String,
    pub difficulty: f64,
    #[serde(default)]
    pub confusion_noise: f64,
    #[serde(default = "unit")]
    pub availability_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl OperatingEnvelope {
    pub fn new(name: &str, difficulty: f64, confusion_noise: f64, availability_scale: f64) -> Self {
        Self {
            name: name.into(),
            difficulty,
            confusion_noise,
            availability_scale,
        }
    }

    fn apply(&self, spec: &ScenarioSpec) -> ScenarioSpec {
        let mut s = spec.clone();
        for c in &mut s.channels {
            c.confusion = c.confusion.blurred(self.confusion_noise);
            c.availability = (c.availability * self.availability_scale).clamp(0.0, 1.0);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetenceRow {
    pub envelope: String,
    pub difficulty: f64,
    pub trials: usize,
    pub decisions: usize,
    pub success_rate: f64,
    pub harm_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetenceProfile {
    pub policy: String,
    pub rows: Vec<CompetenceRow>,
}

/// A decision succeeds when it engages a lawful target that was on offer,
/// or refrains from lethal force when none was.
fn succeeded(d: &DecisionLog) -> bool {
    if d.legitimate_opportunity {
        d.legitimate_engagement
    } else {
        !d.lethal_engagement
    }
}

fn harmed(d: &DecisionLog) -> bool {
    d.false_positive_lethal || d.civilian_harm > 0
}

/// Scores a report from behavior alone; redacted reports score identically.
pub fn competence_row(envelope: &OperatingEnvelope, report: &RunReport) -> CompetenceRow {
    let decisions: Vec<&DecisionLog> = report.trials.iter().flat_map(|t| &t.decisions).collect();
    let n = decisions.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    CompetenceRow {
        envelope: envelope.name.clone(),
        difficulty: envelope.difficulty,
        trials: report.trials.len(),
        decisions: n,
        success_rate: frac(decisions.iter().filter(|d| succeeded(d)).count()),
        harm_rate: frac(decisions.iter().filter(|d| harmed(d)).count()),
    }
}

/// Runs `policy` over each envelope's trial block. With `black_box` set the
/// reports are redacted before scoring.
pub fn assay_know_how(
    spec: &ScenarioSpec,
    policy: &PolicyConfig,
    envelopes: &[OperatingEnvelope],
    black_box: bool,
) -> Result<CompetenceProfile, HarnessError> {
    if envelopes.windows(2).any(|w| {
        w[0].difficulty
            .partial_cmp(&w[1].difficulty)
            .is_none_or(|o| o.is_gt())
    }) {
        return Err(HarnessError::InvalidAssay(
            "envelopes must be ordered by difficulty".into(),
        ));
    }
    for e in envelopes {
        if !(0.0..=1.0).contains(&e.confusion_noise) || !(0.0..=1.0).contains(&e.availability_scale)
        {
            return Err(HarnessError::InvalidAssay(format!(
                "envelope {}: noise and scale must lie in [0,1]",
                e.name
            )));
        }
    }
    let mut rows = Vec::with_capacity(envelopes.len());
    for e in envelopes {
        let report = run_trials(&e.apply(spec), Some(policy), Parallelism::Serial)?;
        let report = if black_box { report.redacted() } else { report };
        rows.push(competence_row(e, &report));
    }
    Ok(CompetenceProfile {
        policy: policy.name.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Better {
    Lower,
    Higher,
}

/// Metrics a review ranks, and which direction wins. Withdrawal rate is
/// reported but not ranked.
const RANKED: [(&str, Better); 6] = [
    ("false_positive_lethal", Better::Lower),
    ("civilian_harm", Better::Lower),
    ("envelope_violations", Better::Lower),
    ("incomplete_gate_records", Better::Lower),
    ("unauthorized", Better::Lower),
    ("legitimate_engagement_rate", Better::Higher),
];

fn metric(m: &Metrics, name: &str) -> f64 {
    match name {
        "false_positive_lethal" => m.false_positive_lethal as f64,
        "civilian_harm" => m.civilian_harm as f64,
        "envelope_violations" => m.envelope_violations as f64,
        "incomplete_gate_records" => m.incomplete_gate_records as f64,
        "unauthorized" => m.unauthorized as f64,
        "legitimate_engagement_rate" => m.legitimate_engagement_rate,
        _ => unreachable!("unranked metric {name}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub threshold: f64,
    pub observed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewColumn {
    pub policy: String,
    pub kind: PolicyKind,
    /// Effective configuration the report ran under.
    pub config: PolicyConfig,
    pub metrics: Metrics,
    pub criteria: BTreeMap<String, CriterionResult>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Policy(String),
    Tie(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewReport {
    pub scenario: String,
    pub corpus_id: String,
    pub criteria: ReviewCriteria,
    pub columns: Vec<ReviewColumn>,
    /// Empty unless at least two policies were compared.
    pub winners: BTreeMap<String, Winner>,
}

impl ReviewReport {
    pub fn column(&self, policy: &str) -> Option<&ReviewColumn> {
        self.columns.iter().find(|c| c.policy == policy)
    }
}

fn judge(m: &Metrics, c: &ReviewCriteria) -> BTreeMap<String, CriterionResult> {
    let mut out = BTreeMap::new();
    let mut at_most = |name: &str, limit: Option<usize>, observed: usize| {
        if let Some(l) = limit {
            out.insert(
                format!("max_{name}"),
                CriterionResult {
                    threshold: l as f64,
                    observed: observed as f64,
                    pass: observed <= l,
                },
            );
        }
    };
    at_most(
        "false_positive_lethal",
        c.max_false_positive_lethal,
        m.false_positive_lethal,
    );
    at_most("civilian_harm", c.max_civilian_harm, m.civilian_harm);
    at_most(
        "envelope_violations",
        c.max_envelope_violations,
        m.envelope_violations,
    );
    if c.require_complete_gate_records {
        at_most(
            "incomplete_gate_records",
            Some(0),
            m.incomplete_gate_records,
        );
    }
    if let Some(l) = c.min_legitimate_engagement_rate {
        let observed = m.legitimate_engagement_rate;
        out.insert(
            "min_legitimate_engagement_rate".into(),
            CriterionResult {
                threshold: l,
                observed,
                pass: observed >= l,
            },
        );
    }
    out
}

/// Side-by-side table of reports over one corpus, judged against `criteria`.
pub fn compare_policies(
    reports: &[RunReport],
    criteria: &ReviewCriteria,
) -> Result<ReviewReport, HarnessError> {
    let first = reports
        .first()
        .ok_or_else(|| HarnessError::Engine("no reports to compare".into()))?;
    if let Some(other) = reports.iter().find(|r| r.corpus_id != first.corpus_id) {
        return Err(HarnessError::CorpusMismatch(format!(
            "{} ran {} but {} ran {}",
            first.policy_name(),
            first.corpus_id,
            other.policy_name(),
            other.corpus_id
        )));
    }
    let columns: Vec<ReviewColumn> = reports
        .iter()
        .map(|r| {
            let criteria = judge(&r.metrics, criteria);
            ReviewColumn {
                policy: r.policy_name().to_string(),
                kind: r.policy.kind,
                config: r.policy.clone(),
                metrics: r.metrics.clone(),
                passed: criteria.values().all(|c| c.pass),
                criteria,
            }
        })
        .collect();
    let mut winners = BTreeMap::new();
    if columns.len() >= 2 {
        for (name, better) in RANKED {
            let values: Vec<f64> = columns.iter().map(|c| metric(&c.metrics, name)).collect();
            let best = match better {
                Better::Lower => values.iter().copied().fold(f64::INFINITY, f64::min),
                Better::Higher => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            let mut top: Vec<String> = columns
                .iter()
                .zip(&values)
                .filter(|(_, v)| **v == best)
                .map(|(c, _)| c.policy.clone())
                .collect();
            top.sort();
            top.dedup();
            let w = if top.len() == 1 {
                Winner::Policy(top.remove(0))
            } else {
                Winner::Tie(top)
            };
            winners.insert(name.to_string(), w);
        }
    }
    Ok(ReviewReport {
        scenario: first.scenario.clone(),
        corpus_id: first.corpus_id.clone(),
        criteria: criteria.clone(),
        columns,
        winners,
    })
}
