use std::fmt::Write as _;

use serde::Serialize;

use super::{CompetenceProfile, ReviewReport, RunReport};
use crate::epistemics::VerdictKind;
use crate::policy::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Summary,
}

/// One named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub name: String,
    pub body: String,
}

impl Document {
    fn new(name: &str, body: String) -> Self {
        Self {
            name: name.into(),
            body,
        }
    }
}

/// Sorted keys, shortest round-trip floats, no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .expect("reports serialize")
        .to_string()
}

pub fn outcome_label(o: &Outcome) -> &'static str {
    match o {
        Outcome::Execute => "Execute",
        Outcome::Withhold => "Withhold",
        Outcome::Withdraw => "Withdraw",
        Outcome::Abort => "Abort",
        Outcome::Retarget { .. } => "Retarget",
    }
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub const DECISION_COLUMNS: [&str; 16] = [
    "trial",
    "seed",
    "request",
    "tick",
    "action",
    "tier",
    "outcome",
    "retarget_action",
    "unauthorized",
    "legitimate_opportunity",
    "lethal_engagement",
    "false_positive_lethal",
    "legitimate_engagement",
    "civilian_harm",
    "envelope_violation",
    "gate_record_complete",
];

pub const VERDICT_COLUMNS: [&str; 12] = [
    "trial",
    "query",
    "tick",
    "verdict",
    "safe_not_lucky",
    "truth",
    "attitude",
    "justified",
    "condition_c_pass_rate",
    "condition_d_pass_rate",
    "apt",
    "reflective",
];

fn decisions_csv(r: &RunReport) -> String {
    let rows = r
        .trials
        .iter()
        .flat_map(|t| {
            t.decisions.iter().map(move |d| {
                let retarget = match &d.outcome {
                    Outcome::Retarget { action, .. } => action.clone(),
                    _ => String::new(),
                };
                vec![
                    t.index.to_string(),
                    t.seed.to_string(),
                    d.request.clone(),
                    d.tick.to_string(),
                    d.action.clone().unwrap_or_default(),
                    opt(d.tier),
                    outcome_label(&d.outcome).into(),
                    retarget,
                    d.unauthorized.to_string(),
                    d.legitimate_opportunity.to_string(),
                    d.lethal_engagement.to_string(),
                    d.false_positive_lethal.to_string(),
                    d.legitimate_engagement.to_string(),
                    d.civilian_harm.to_string(),
                    d.envelope_violation.to_string(),
                    d.gate_record_complete.to_string(),
                ]
            })
        })
        .collect();
    table(&DECISION_COLUMNS, rows)
}

fn verdicts_csv(r: &RunReport) -> String {
    let rows = r
        .trials
        .iter()
        .flat_map(|t| {
            t.queries.iter().map(move |q| {
                let d = q.diagnostics.as_ref().map(|v| &v.diagnostics);
                let tracking = d.and_then(|d| d.tracking.as_ref());
                vec![
                    t.index.to_string(),
                    q.query.clone(),
                    q.tick.to_string(),
                    q.verdict.to_string(),
                    q.safe_not_lucky.to_string(),
                    opt(d.map(|d| d.truth)),
                    opt(d.map(|d| format!("{:?}", d.attitude))),
                    opt(d.map(|d| d.justified)),
                    opt(tracking.map(|t| t.condition_c_pass_rate)),
                    opt(tracking.map(|t| t.condition_d_pass_rate)),
                    opt(d.and_then(|d| d.aaa).map(|a| a.apt())),
                    opt(d.and_then(|d| d.reflective.as_ref()).map(|x| x.reflective)),
                ]
            })
        })
        .collect();
    table(&VERDICT_COLUMNS, rows)
}

/// Flattened `metric,value` rows; histogram cells are `verdict_histogram.<query>.<kind>`.
fn metric_rows(report: &RunReport) -> Vec<(String, String)> {
    let v = serde_json::to_value(&report.metrics).expect("metrics serialize");
    let mut rows = Vec::new();
    fn walk(prefix: &str, v: &serde_json::Value, rows: &mut Vec<(String, String)>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, x, rows);
                }
            }
            other => rows.push((prefix.to_string(), other.to_string())),
        }
    }
    walk("", &v, &mut rows);
    rows
}

fn metrics_csv(r: &RunReport) -> String {
    table(
        &["metric", "value"],
        metric_rows(r)
            .into_iter()
            .map(|(k, v)| vec![k, v])
            .collect(),
    )
}

fn run_summary(r: &RunReport) -> String {
    let m = &r.metrics;
    let mut s = String::new();
    let _ = writeln!(s, "scenario   {}", r.scenario);
    let _ = writeln!(s, "policy     {} ({})", r.policy.name, r.policy.kind);
    let _ = writeln!(s, "corpus     {}", r.corpus_id);
    let _ = writeln!(s, "seed       {}", r.master_seed);
    let _ = writeln!(
        s,
        "trials     {}{}",
        m.trials,
        if r.redacted { "  (redacted)" } else { "" }
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "decisions {}: execute {}, withhold {}, withdraw {}, abort {}, retarget {}",
        m.decisions, m.executes, m.withholds, m.withdraws, m.aborts, m.retargets
    );
    let _ = writeln!(s, "lethal engagements        {}", m.lethal_engagements);
    let _ = writeln!(s, "false-positive lethal     {}", m.false_positive_lethal);
    let _ = writeln!(s, "civilian harm             {}", m.civilian_harm);
    let _ = writeln!(
        s,
        "legitimate engagements    {} of {} ({})",
        m.legitimate_engagements, m.legitimate_opportunities, m.legitimate_engagement_rate
    );
    let _ = writeln!(s, "withdrawal rate           {}", m.withdrawal_rate);
    let _ = writeln!(s, "envelope violations       {}", m.envelope_violations);
    let _ = writeln!(s, "unauthorized lethal       {}", m.unauthorized);
    let _ = writeln!(s, "incomplete gate records   {}", m.incomplete_gate_records);
    if !m.verdict_histogram.is_empty() {
        let _ = writeln!(s);
        let mut header = format!("{:<20}", "query");
        for k in VerdictKind::ALL {
            let _ = write!(header, " {:>8}", short(k));
        }
        let _ = writeln!(s, "{header} {:>16}", "safe, not lucky");
        for (q, row) in &m.verdict_histogram {
            let mut line = format!("{q:<20}");
            for k in VerdictKind::ALL {
                let _ = write!(line, " {:>8}", row.get(&k).copied().unwrap_or(0));
            }
            let _ = writeln!(
                s,
                "{line} {:>16}",
                m.safe_not_lucky.get(q).copied().unwrap_or(0)
            );
        }
    }
    s
}

fn short(k: VerdictKind) -> &'static str {
    match k {
        VerdictKind::Knowledge => "K",
        VerdictKind::Gettiered => "Gettier",
        VerdictKind::UnjustifiedTrueBelief => "UTB",
        VerdictKind::FalseBelief => "FalseB",
        VerdictKind::Suspension => "Suspend",
        VerdictKind::Disbelief => "Disbel",
        VerdictKind::Ignorance => "Ignor",
    }
}

pub fn emit_report(report: &RunReport, format: ReportFormat) -> Vec<Document> {
    match format {
        ReportFormat::Json => vec![Document::new("report.json", canonical_json(report))],
        ReportFormat::Csv => vec![
            Document::new("decisions.csv", decisions_csv(report)),
            Document::new("verdicts.csv", verdicts_csv(report)),
            Document::new("metrics.csv", metrics_csv(report)),
        ],
        ReportFormat::Summary => vec![Document::new("summary.txt", run_summary(report))],
    }
}

fn review_rows(r: &ReviewReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let flat: Vec<Vec<(String, String)>> = r
        .columns
        .iter()
        .map(|c| {
            let v = serde_json::to_value(&c.metrics).expect("metrics serialize");
            let mut out: Vec<(String, String)> = v
                .as_object()
                .expect("metrics is an object")
                .iter()
                .filter(|(_, x)| !x.is_object())
                .map(|(k, x)| (k.clone(), x.to_string()))
                .collect();
            for (k, cr) in &c.criteria {
                out.push((
                    format!("criterion.{k}"),
                    if cr.pass { "pass" } else { "fail" }.into(),
                ));
            }
            out.push(("criteria_passed".into(), c.passed.to_string()));
            out
        })
        .collect();
    let mut keys: Vec<String> = flat.iter().flatten().map(|(k, _)| k.clone()).collect();
    keys.sort();
    keys.dedup();
    for k in keys {
        let mut row = vec![k.clone()];
        for col in &flat {
            row.push(
                col.iter()
                    .find(|(x, _)| *x == k)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default(),
            );
        }
        let win = r.winners.get(&k).map(|w| match w {
            super::Winner::Policy(p) => p.clone(),
            super::Winner::Tie(ps) => format!("tie: {}", ps.join(" ")),
        });
        row.push(win.unwrap_or_default());
        rows.push(row);
    }
    rows
}

pub fn emit_review(review: &ReviewReport, format: ReportFormat) -> Vec<Document> {
    let mut header = vec!["metric".to_string()];
    header.extend(review.columns.iter().map(|c| c.policy.clone()));
    header.push("winner".into());
    match format {
        ReportFormat::Json => vec![Document::new("review.json", canonical_json(review))],
        ReportFormat::Csv => {
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            vec![Document::new("review.csv", table(&h, review_rows(review)))]
        }
        ReportFormat::Summary => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "review of {} over corpus {}",
                review.scenario, review.corpus_id
            );
            let _ = writeln!(s);
            let mut line = format!("{:<32}", header[0]);
            for h in &header[1..] {
                let _ = write!(line, " {h:>14}");
            }
            let _ = writeln!(s, "{line}");
            for row in review_rows(review) {
                let mut line = format!("{:<32}", row[0]);
                for v in &row[1..] {
                    let _ = write!(line, " {v:>14}");
                }
                let _ = writeln!(s, "{}", line.trim_end());
            }
            vec![Document::new("review.txt", s)]
        }
    }
}

pub fn emit_profile(profile: &CompetenceProfile, format: ReportFormat) -> Vec<Document> {
    let header = [
        "envelope",
        "difficulty",
        "trials",
        "decisions",
        "success_rate",
        "harm_rate",
    ];
    let rows: Vec<Vec<String>> = profile
        .rows
        .iter()
        .map(|r| {
            vec![
                r.envelope.clone(),
                r.difficulty.to_string(),
                r.trials.to_string(),
                r.decisions.to_string(),
                r.success_rate.to_string(),
                r.harm_rate.to_string(),
            ]
        })
        .collect();
    match format {
        ReportFormat::Json => vec![Document::new("competence.json", canonical_json(profile))],
        ReportFormat::Csv => vec![Document::new("competence.csv", table(&header, rows))],
        ReportFormat::Summary => {
            let mut s = format!("competence of {}\n\n", profile.policy);
            let _ = writeln!(
                s,
                "{:<16} {:>10} {:>7} {:>9} {:>8} {:>8}",
                header[0], header[1], header[2], header[3], "success", "harm"
            );
            for r in rows {
                let _ = writeln!(
                    s,
                    "{:<16} {:>10} {:>7} {:>9} {:>8} {:>8}",
                    r[0], r[1], r[2], r[3], r[4], r[5]
                );
            }
            vec![Document::new("competence.txt", s)]
        }
    }
}
