use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    envelope_check, expected_utility, ActionSpec, EnvelopePredicate, EnvelopeRecord, PolicyError,
    RiskTier, TrackState, UtilityModel,
};
use crate::doxastics::{CredenceFunction, Proposition, Subject};
use crate::epistemics::{EpistemicVerdict, JustificationRecord, ReflectiveRecord, VerdictKind};
use crate::evidence::EvidenceItem;

#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    AS1v,
    AS2b,
    AS3bv,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateMechanism {
    BayesianGate,
    ReflectiveGate,
}

/// Every threshold any gate may consult.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub theta_rel: f64,
    pub tau_track: f64,
    pub t_belief: f64,
    pub t_disbelief: f64,
    pub theta_meta: f64,
    pub theta_eu: f64,
    pub delta_coh: f64,
    /// Fraction of luck-stripped reruns an apt performance must survive.
    pub phi: f64,
    /// Multiplier on `theta_rel` applied to machine agents.
    pub competence_multiplier: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            theta_rel: 0.8,
            tau_track: 0.9,
            t_belief: 0.9,
            t_disbelief: 0.1,
            theta_meta: 0.95,
            theta_eu: 0.0,
            delta_coh: 0.05,
            phi: 0.9,
            competence_multiplier: 1.0,
        }
    }
}

impl Thresholds {
    pub fn effective_theta_rel(&self) -> f64 {
        (self.theta_rel * self.competence_multiplier).min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyRepr {
    name: Option<String>,
    kind: PolicyKind,
    #[serde(default)]
    thresholds: Thresholds,
    #[serde(default)]
    envelope: Vec<EnvelopePredicate>,
    #[serde(default)]
    tier_map: Option<BTreeMap<RiskTier, GateMechanism>>,
    #[serde(default)]
    human_authorization_required: BTreeMap<RiskTier, bool>,
    #[serde(default)]
    min_redundancy: Option<BTreeMap<RiskTier, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyRepr", into = "PolicyRepr")]
pub struct PolicyConfig {
    pub name: String,
    pub kind: PolicyKind,
    pub thresholds: Thresholds,
    pub envelope: Vec<EnvelopePredicate>,
    pub tier_map: BTreeMap<RiskTier, GateMechanism>,
    pub human_authorization_required: BTreeMap<RiskTier, bool>,
    pub min_redundancy: BTreeMap<RiskTier, usize>,
}

impl TryFrom<PolicyRepr> for PolicyConfig {
    type Error = PolicyError;

    fn try_from(r: PolicyRepr) -> Result<Self, Self::Error> {
        let mut p = PolicyConfig::of_kind(r.kind);
        if let Some(n) = r.name {
            p.name = n;
        }
        p.thresholds = r.thresholds;
        p.envelope = r.envelope;
        if let Some(m) = r.tier_map {
            p.tier_map.extend(m);
        }
        for t in RiskTier::ALL {
            p.human_authorization_required.insert(
                t,
                r.human_authorization_required
                    .get(&t)
                    .copied()
                    .unwrap_or(false),
            );
        }
        if let Some(m) = r.min_redundancy {
            p.min_redundancy.extend(m);
        }
        p.validate()?;
        Ok(p)
    }
}

impl From<PolicyConfig> for PolicyRepr {
    fn from(p: PolicyConfig) -> Self {
        PolicyRepr {
            name: Some(p.name),
            kind: p.kind,
            thresholds: p.thresholds,
            envelope: p.envelope,
            tier_map: Some(p.tier_map),
            human_authorization_required: p.human_authorization_required,
            min_redundancy: Some(p.min_redundancy),
        }
    }
}

impl PolicyConfig {
    /// Defaults for `kind`: AS1v and AS2b route every tier to their single
    /// mechanism, AS3bv routes only lethal effects to the reflective gate.
    pub fn of_kind(kind: PolicyKind) -> Self {
        let tier_map = RiskTier::ALL
            .into_iter()
            .map(|t| {
                let m = match kind {
                    PolicyKind::AS1v => GateMechanism::ReflectiveGate,
                    PolicyKind::AS2b => GateMechanism::BayesianGate,
                    PolicyKind::AS3bv if t == RiskTier::LethalEffect => {
                        GateMechanism::ReflectiveGate
                    }
                    PolicyKind::AS3bv => GateMechanism::BayesianGate,
                };
                (t, m)
            })
            .collect();
        let justification = crate::epistemics::JustificationPolicy::default();
        PolicyConfig {
            name: kind.to_string(),
            kind,
            thresholds: Thresholds::default(),
            envelope: Vec::new(),
            tier_map,
            human_authorization_required: RiskTier::ALL.into_iter().map(|t| (t, false)).collect(),
            min_redundancy: justification.min_redundancy,
        }
    }

    /// The same thresholds, envelope, authorization and redundancy settings
    /// under another architecture's routing.
    pub fn as_kind(&self, kind: PolicyKind) -> Self {
        let mut p = PolicyConfig::of_kind(kind);
        p.thresholds = self.thresholds;
        p.envelope = self.envelope.clone();
        p.human_authorization_required = self.human_authorization_required.clone();
        p.min_redundancy = self.min_redundancy.clone();
        p
    }

    pub fn with_envelope(mut self, envelope: Vec<EnvelopePredicate>) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn requiring_authorization(mut self, tier: RiskTier) -> Self {
        self.human_authorization_required.insert(tier, true);
        self
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: String| Err(PolicyError::InvalidConfig(m));
        for t in RiskTier::ALL {
            let m = self.tier_map.get(&t).copied();
            let ok = match self.kind {
                PolicyKind::AS1v => m == Some(GateMechanism::ReflectiveGate),
                PolicyKind::AS2b => m == Some(GateMechanism::BayesianGate),
                PolicyKind::AS3bv => {
                    m.is_some()
                        && (t != RiskTier::LethalEffect || m == Some(GateMechanism::ReflectiveGate))
                }
            };
            if !ok {
                return bad(format!("{} cannot route {t} to {m:?}", self.kind));
            }
        }
        let th = &self.thresholds;
        if !(0.0 < th.t_disbelief && th.t_disbelief < th.t_belief && th.t_belief < 1.0) {
            return bad("Lockean thresholds must satisfy 0 < t_disbelief < t_belief < 1".into());
        }
        for (name, v) in [
            ("theta_rel", th.theta_rel),
            ("tau_track", th.tau_track),
            ("theta_meta", th.theta_meta),
            ("phi", th.phi),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0,1]"));
            }
        }
        if th.delta_coh.is_nan()
            || th.delta_coh < 0.0
            || th.competence_multiplier.is_nan()
            || th.competence_multiplier <= 0.0
        {
            return bad("delta_coh must be non-negative and competence_multiplier positive".into());
        }
        Ok(())
    }

    pub fn justification_policy(&self) -> crate::epistemics::JustificationPolicy {
        crate::epistemics::JustificationPolicy {
            reliability_threshold: self.thresholds.effective_theta_rel(),
            min_redundancy: self.min_redundancy.clone(),
        }
    }

    pub fn rule_for(&self, tier: RiskTier) -> GateRule {
        match (self.kind, self.tier_map[&tier]) {
            (PolicyKind::AS1v, _) => GateRule::Virtue,
            (_, GateMechanism::BayesianGate) => GateRule::Bayesian,
            (_, GateMechanism::ReflectiveGate) => GateRule::Reflective,
        }
    }

    pub fn needs_authorization(&self, tier: RiskTier) -> bool {
        self.human_authorization_required
            .get(&tier)
            .copied()
            .unwrap_or(false)
    }
}

/// The test a candidate action must pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateRule {
    /// Envelope, Knowledge and aptness.
    Virtue,
    /// Expected utility at or above `theta_eu`.
    Bayesian,
    /// Lethal-tier justification, reflective knowledge, expected utility and authorization.
    Reflective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateResult {
    Pass,
    Fail,
    Withdraw,
    Unauthorized,
}

/// Supplies the epistemic state the gates consult, computed on demand.
pub trait EpistemicOracle {
    fn tick(&self) -> u64;
    fn credences(&self) -> &CredenceFunction;
    fn track_state(&self, action: &ActionSpec) -> Result<TrackState, PolicyError>;
    /// Verdict on `prop`, with aptness diagnostics attached.
    fn verdict(&self, prop: &Proposition) -> Result<EpistemicVerdict, PolicyError>;
    fn justification(
        &self,
        subject: &Subject,
        tier: RiskTier,
    ) -> Result<JustificationRecord, PolicyError>;
    fn reflective(&self, prop: &Proposition) -> Result<ReflectiveRecord, PolicyError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub action: String,
    pub tier: RiskTier,
    pub target: Option<Subject>,
    pub rule: GateRule,
    pub expected_utility: f64,
    pub envelope: Option<EnvelopeRecord>,
    pub verdict: Option<VerdictKind>,
    pub apt: Option<bool>,
    pub justification: Option<JustificationRecord>,
    pub reflective: Option<ReflectiveRecord>,
    pub authorization_required: bool,
    pub authorized: bool,
    /// Absent for candidates that were only ranked.
    pub result: Option<GateResult>,
}

impl CandidateRecord {
    /// The gate outcome implied by the recorded comparisons alone.
    pub fn judge(&self, th: &Thresholds) -> GateResult {
        match self.rule {
            GateRule::Bayesian if self.expected_utility >= th.theta_eu => GateResult::Pass,
            GateRule::Bayesian => GateResult::Fail,
            GateRule::Virtue => {
                let inside = self.envelope.as_ref().is_some_and(|e| e.passed);
                if inside && self.verdict == Some(VerdictKind::Knowledge) && self.apt == Some(true)
                {
                    GateResult::Pass
                } else {
                    GateResult::Fail
                }
            }
            GateRule::Reflective => {
                let Some(j) = &self.justification else {
                    return GateResult::Fail;
                };
                if !j.redundancy_met() {
                    return GateResult::Withdraw;
                }
                let reflective = self.reflective.as_ref().is_some_and(|r| r.reflective);
                if !j.reliability_met() || !reflective || self.expected_utility < th.theta_eu {
                    GateResult::Fail
                } else if self.authorization_required && !self.authorized {
                    GateResult::Unauthorized
                } else {
                    GateResult::Pass
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Execute,
    Withhold,
    Withdraw,
    Abort,
    Retarget { action: String, target: Subject },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub policy: PolicyKind,
    pub thresholds: Thresholds,
    pub candidates: Vec<CandidateRecord>,
    pub chosen: Option<String>,
    /// Re-gated in flight: the first candidate is the released action.
    pub in_flight: bool,
}

impl GateRecord {
    /// Re-derives the decision from the stored comparisons. Returns `None`
    /// when the record is incomplete or its stored results disagree with it.
    pub fn recompute(&self) -> Option<(Option<String>, Outcome)> {
        for c in &self.candidates {
            if c.result.is_some_and(|r| r != c.judge(&self.thresholds)) {
                return None;
            }
        }
        if self.in_flight {
            let (current, rest) = self.candidates.split_first()?;
            if current.result? != GateResult::Pass {
                return Some((Some(current.action.clone()), Outcome::Abort));
            }
            let better = rest.iter().filter(|c| {
                c.result == Some(GateResult::Pass) && c.expected_utility > current.expected_utility
            });
            let best = argmax(
                better
                    .clone()
                    .map(|c| (c.action.as_str(), c.expected_utility)),
            );
            return Some(
                match best.and_then(|b| better.clone().find(|c| c.action == b)) {
                    Some(c) => (
                        Some(current.action.clone()),
                        Outcome::Retarget {
                            action: c.action.clone(),
                            target: c.target.clone()?,
                        },
                    ),
                    None => (Some(current.action.clone()), Outcome::Execute),
                },
            );
        }
        match self.policy {
            PolicyKind::AS1v => {
                for c in &self.candidates {
                    match c.result? {
                        GateResult::Pass => {
                            return Some((Some(c.action.clone()), Outcome::Execute))
                        }
                        GateResult::Fail => {}
                        _ => return None,
                    }
                }
                Some((None, Outcome::Withhold))
            }
            PolicyKind::AS2b | PolicyKind::AS3bv => {
                let best = argmax(
                    self.candidates
                        .iter()
                        .map(|c| (c.action.as_str(), c.expected_utility)),
                )?;
                let c = self.candidates.iter().find(|c| c.action == best)?;
                let outcome = match c.result? {
                    GateResult::Pass => Outcome::Execute,
                    GateResult::Fail | GateResult::Unauthorized => Outcome::Withhold,
                    GateResult::Withdraw => Outcome::Withdraw,
                };
                Some((Some(best.to_owned()), outcome))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDecision {
    pub action_id: Option<String>,
    pub outcome: Outcome,
    pub gate_record: GateRecord,
    /// The scripted human input, present when the chosen action required it.
    pub authorization: Option<bool>,
}

/// Highest value, ties to the lexicographically smallest id.
pub fn argmax<'a>(items: impl IntoIterator<Item = (&'a str, f64)>) -> Option<&'a str> {
    let mut best: Option<(&str, f64)> = None;
    for (id, v) in items {
        best = match best {
            Some((bid, bv)) if bv > v || (bv == v && bid <= id) => Some((bid, bv)),
            _ => Some((id, v)),
        };
    }
    best.map(|(id, _)| id)
}

fn ranked(
    action: &ActionSpec,
    policy: &PolicyConfig,
    eu: f64,
    authorized: bool,
) -> CandidateRecord {
    CandidateRecord {
        action: action.id.clone(),
        tier: action.tier,
        target: action.target.clone(),
        rule: policy.rule_for(action.tier),
        expected_utility: eu,
        envelope: None,
        verdict: None,
        apt: None,
        justification: None,
        reflective: None,
        authorization_required: policy.needs_authorization(action.tier),
        authorized,
        result: None,
    }
}

/// Consults exactly what the candidate's gate rule needs and judges it.
pub fn evaluate_candidate(
    policy: &PolicyConfig,
    action: &ActionSpec,
    oracle: &dyn EpistemicOracle,
    utility: &UtilityModel,
    authorized: bool,
) -> Result<CandidateRecord, PolicyError> {
    let eu = expected_utility(oracle.credences(), action, utility, oracle.tick())?;
    let mut rec = ranked(action, policy, eu, authorized);
    match rec.rule {
        GateRule::Bayesian => {}
        GateRule::Virtue => {
            if let (Some(_), Some(prop)) = (&action.target, action.presumption()) {
                let env = envelope_check(&policy.envelope, &oracle.track_state(action)?)?;
                if env.passed {
                    let v = oracle.verdict(&prop)?;
                    rec.apt = Some(v.diagnostics.aaa.is_some_and(|a| a.apt()));
                    rec.verdict = Some(v.kind);
                }
                rec.envelope = Some(env);
            }
        }
        GateRule::Reflective => {
            if let (Some(subject), Some(prop)) = (&action.target, action.presumption()) {
                let j = oracle.justification(subject, RiskTier::LethalEffect)?;
                if j.redundancy_met() {
                    rec.reflective = Some(oracle.reflective(&prop)?);
                }
                rec.justification = Some(j);
            }
        }
    }
    rec.result = Some(rec.judge(&policy.thresholds));
    Ok(rec)
}

fn sorted(menu: &[ActionSpec]) -> Vec<&ActionSpec> {
    let mut v: Vec<&ActionSpec> = menu.iter().collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

/// Selects and gates one action from `menu`.
///
/// AS1v takes the first action in id order that passes the virtue gate.
/// AS2b and AS3bv take the expected-utility argmax and gate it with the
/// mechanism its tier maps to.
pub fn decide(
    policy: &PolicyConfig,
    menu: &[ActionSpec],
    oracle: &dyn EpistemicOracle,
    utility: &UtilityModel,
    authorized: bool,
) -> Result<ActionDecision, PolicyError> {
    let mut record = GateRecord {
        policy: policy.kind,
        thresholds: policy.thresholds,
        candidates: Vec::new(),
        chosen: None,
        in_flight: false,
    };
    let menu = sorted(menu);
    let finish =
        |record: GateRecord, action: Option<&ActionSpec>, outcome: Outcome| ActionDecision {
            action_id: action.map(|a| a.id.clone()),
            outcome,
            authorization: action
                .filter(|a| policy.needs_authorization(a.tier))
                .map(|_| authorized),
            gate_record: record,
        };
    match policy.kind {
        PolicyKind::AS1v => {
            for a in menu {
                let rec = evaluate_candidate(policy, a, oracle, utility, authorized)?;
                let pass = rec.result == Some(GateResult::Pass);
                record.candidates.push(rec);
                if pass {
                    record.chosen = Some(a.id.clone());
                    return Ok(finish(record, Some(a), Outcome::Execute));
                }
            }
            Ok(finish(record, None, Outcome::Withhold))
        }
        PolicyKind::AS2b | PolicyKind::AS3bv => {
            let mut eus = Vec::with_capacity(menu.len());
            for a in &menu {
                eus.push(expected_utility(
                    oracle.credences(),
                    a,
                    utility,
                    oracle.tick(),
                )?);
            }
            let Some(best) = argmax(menu.iter().zip(&eus).map(|(a, e)| (a.id.as_str(), *e))) else {
                return Ok(finish(record, None, Outcome::Withhold));
            };
            let chosen = menu
                .iter()
                .copied()
                .find(|a| a.id == best)
                .expect("argmax comes from the menu");
            for (a, eu) in menu.iter().zip(&eus) {
                if a.id != best {
                    record.candidates.push(ranked(a, policy, *eu, authorized));
                } else {
                    record
                        .candidates
                        .push(evaluate_candidate(policy, a, oracle, utility, authorized)?);
                }
            }
            record.chosen = Some(best.to_owned());
            let result = record
                .candidates
                .iter()
                .find(|c| c.action == best)
                .and_then(|c| c.result);
            let outcome = match result {
                Some(GateResult::Pass) => Outcome::Execute,
                Some(GateResult::Withdraw) => Outcome::Withdraw,
                Some(GateResult::Unauthorized) => {
                    return Err(PolicyError::UnauthorizedLethal {
                        action: best.to_owned(),
                        record: Box::new(record),
                    })
                }
                _ => Outcome::Withhold,
            };
            Ok(finish(record, Some(chosen), outcome))
        }
    }
}

/// Re-gates an in-flight Execute after new evidence arrives. `oracle` must
/// already reflect the new evidence.
pub fn abort_or_retarget(
    decision: &ActionDecision,
    new_evidence: &[EvidenceItem],
    policy: &PolicyConfig,
    menu: &[ActionSpec],
    oracle: &dyn EpistemicOracle,
    utility: &UtilityModel,
    authorized: bool,
) -> Result<ActionDecision, PolicyError> {
    if new_evidence.is_empty() || decision.outcome != Outcome::Execute {
        return Ok(decision.clone());
    }
    let Some(current) = decision
        .action_id
        .as_ref()
        .and_then(|id| menu.iter().find(|a| &a.id == id))
    else {
        return Ok(decision.clone());
    };
    let mut record = GateRecord {
        policy: policy.kind,
        thresholds: policy.thresholds,
        candidates: Vec::new(),
        chosen: None,
        in_flight: true,
    };
    let now = evaluate_candidate(policy, current, oracle, utility, authorized)?;
    let current_eu = now.expected_utility;
    let passes = now.result == Some(GateResult::Pass);
    record.candidates.push(now);
    let decision_with = |record: GateRecord, outcome: Outcome| ActionDecision {
        action_id: Some(current.id.clone()),
        outcome,
        authorization: decision.authorization.map(|_| authorized),
        gate_record: record,
    };
    if !passes {
        return Ok(decision_with(record, Outcome::Abort));
    }
    let mut better = Vec::new();
    for a in sorted(menu) {
        if a.id == current.id || a.target.is_none() || a.target == current.target {
            continue;
        }
        let rec = evaluate_candidate(policy, a, oracle, utility, authorized)?;
        if rec.result == Some(GateResult::Pass) && rec.expected_utility > current_eu {
            better.push((a, rec.expected_utility));
        }
        record.candidates.push(rec);
    }
    match argmax(better.iter().map(|(a, e)| (a.id.as_str(), *e))) {
        Some(best) => {
            let a = better
                .iter()
                .find(|(a, _)| a.id == best)
                .map(|(a, _)| *a)
                .expect("from list");
            record.chosen = Some(a.id.clone());
            let target = a.target.clone().expect("filtered to targeted actions");
            Ok(decision_with(
                record,
                Outcome::Retarget {
                    action: a.id.clone(),
                    target,
                },
            ))
        }
        None => {
            record.chosen = Some(current.id.clone());
            Ok(decision_with(record, Outcome::Execute))
        }
    }
}
