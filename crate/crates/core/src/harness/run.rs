use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HarnessError, RunConfig, ScenarioSpec};
use crate::agent::{truth_at, Assessor};
use crate::doxastics::{DoxasticReport, Proposition, Subject};
use crate::epistemics::{EpistemicVerdict, VerdictKind};
use crate::policy::{
    abort_or_retarget, decide, envelope_check, ActionDecision, ActionSpec, EpistemicOracle,
    Outcome, PolicyConfig, PolicyError, RiskTier,
};
use crate::rng::{derive_indexed, derive_seed};
use crate::worldsim::{EntityId, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLog {
    pub query: String,
    pub proposition: Proposition,
    pub tick: u64,
    pub verdict: VerdictKind,
    pub safe_not_lucky: bool,
    /// Dropped by redaction.
    pub diagnostics: Option<EpistemicVerdict>,
}

/// Behavioral facts about one engagement decision, judged against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub request: String,
    pub tick: u64,
    pub action: Option<String>,
    pub tier: Option<RiskTier>,
    pub outcome: Outcome,
    /// The human input was required and absent.
    pub unauthorized: bool,
    /// Whether a lethal-capable menu entry's presumption held, i.e. a lawful target was offered.
    pub legitimate_opportunity: bool,
    pub lethal_engagement: bool,
    pub false_positive_lethal: bool,
    pub legitimate_engagement: bool,
    /// Protected entities inside the effect of an executed lethal action.
    pub civilian_harm: usize,
    pub envelope_violation: bool,
    pub gate_record_complete: bool,
    /// Dropped by redaction.
    pub decision: Option<ActionDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub index: usize,
    pub seed: u64,
    pub queries: Vec<QueryLog>,
    pub decisions: Vec<DecisionLog>,
    pub doxastic: Option<DoxasticReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub trials: usize,
    pub decisions: usize,
    pub executes: usize,
    pub withholds: usize,
    pub withdraws: usize,
    pub aborts: usize,
    pub retargets: usize,
    pub unauthorized: usize,
    pub lethal_engagements: usize,
    pub false_positive_lethal: usize,
    pub legitimate_engagements: usize,
    pub legitimate_opportunities: usize,
    pub civilian_harm: usize,
    pub envelope_violations: usize,
    pub incomplete_gate_records: usize,
    pub withdrawal_rate: f64,
    pub legitimate_engagement_rate: f64,
    /// Query id to count per verdict; every row sums to `trials`.
    pub verdict_histogram: BTreeMap<String, BTreeMap<VerdictKind, usize>>,
    pub safe_not_lucky: BTreeMap<String, usize>,
}

fn rate(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

impl Metrics {
    pub fn from_trials(trials: &[TrialLog], query_ids: &[String]) -> Metrics {
        let mut m = Metrics {
            trials: trials.len(),
            ..Default::default()
        };
        for q in query_ids {
            m.verdict_histogram.insert(
                q.clone(),
                VerdictKind::ALL.into_iter().map(|k| (k, 0)).collect(),
            );
            m.safe_not_lucky.insert(q.clone(), 0);
        }
        for t in trials {
            for q in &t.queries {
                *m.verdict_histogram
                    .entry(q.query.clone())
                    .or_default()
                    .entry(q.verdict)
                    .or_default() += 1;
                if q.safe_not_lucky {
                    *m.safe_not_lucky.entry(q.query.clone()).or_default() += 1;
                }
            }
            for d in &t.decisions {
                m.decisions += 1;
                match d.outcome {
                    Outcome::Execute => m.executes += 1,
                    Outcome::Withhold => m.withholds += 1,
                    Outcome::Withdraw => m.withdraws += 1,
                    Outcome::Abort => m.aborts += 1,
                    Outcome::Retarget { .. } => m.retargets += 1,
                }
                m.unauthorized += usize::from(d.unauthorized);
                m.lethal_engagements += usize::from(d.lethal_engagement);
                m.false_positive_lethal += usize::from(d.false_positive_lethal);
                m.legitimate_engagements += usize::from(d.legitimate_engagement);
                m.legitimate_opportunities += usize::from(d.legitimate_opportunity);
                m.civilian_harm += d.civilian_harm;
                m.envelope_violations += usize::from(d.envelope_violation);
                m.incomplete_gate_records += usize::from(!d.gate_record_complete);
            }
        }
        m.withdrawal_rate = rate(m.withdraws, m.decisions);
        m.legitimate_engagement_rate = rate(m.legitimate_engagements, m.legitimate_opportunities);
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub corpus_id: String,
    pub master_seed: u64,
    /// Effective policy with every default filled in.
    pub policy: PolicyConfig,
    pub run: RunConfig,
    pub trials: Vec<TrialLog>,
    pub metrics: Metrics,
    pub redacted: bool,
}

impl RunReport {
    pub fn policy_name(&self) -> &str {
        &self.policy.name
    }

    /// Behavior only: gate records, verdict diagnostics and doxastic reports removed.
    pub fn redacted(&self) -> RunReport {
        let mut r = self.clone();
        for t in &mut r.trials {
            t.doxastic = None;
            for q in &mut t.queries {
                q.diagnostics = None;
            }
            for d in &mut t.decisions {
                d.decision = None;
            }
        }
        r.redacted = true;
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Serial,
    Parallel,
}

struct Trial<'a> {
    spec: &'a ScenarioSpec,
    policy: &'a PolicyConfig,
    channels: crate::evidence::ChannelSet,
    world: WorldState,
    seed: u64,
    agent_seed: u64,
}

impl<'a> Trial<'a> {
    fn assessor(&'a self, until: u64) -> Assessor<'a> {
        Assessor {
            spec: &self.spec.agent,
            channels: &self.channels,
            world: &self.world,
            policy: self.policy,
            until,
            tracking_samples: self.spec.run.tracking_samples,
            aaa_reruns: self.spec.run.aaa_reruns,
            verdict_tier: self.spec.run.verdict_tier,
            seed: self.agent_seed,
        }
    }
}

fn engine(index: usize, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Trial {
        index,
        message: e.to_string(),
    }
}

/// Protected entities exposed to an executed action at `world`'s tick.
fn harm_count(world: &WorldState, action: &ActionSpec) -> usize {
    let mut hit: Vec<&EntityId> = action.collateral.iter().collect();
    let target_ids: Vec<EntityId> = match &action.target {
        Some(Subject::Entity(id)) => vec![id.clone()],
        Some(Subject::Region(r)) => world
            .entities()
            .filter(|e| r.contains(e.position))
            .map(|e| e.id.clone())
            .collect(),
        None => vec![],
    };
    hit.extend(target_ids.iter());
    hit.sort();
    hit.dedup();
    hit.into_iter()
        .filter_map(|id| world.entity(id))
        .filter(|e| e.true_class.is_protected())
        .count()
}

fn run_one(
    spec: &ScenarioSpec,
    policy: &PolicyConfig,
    index: usize,
) -> Result<TrialLog, HarnessError> {
    let seed = derive_indexed(spec.master_seed, "trial", index as u64);
    let trial = Trial {
        spec,
        policy,
        channels: spec.channel_set()?,
        world: spec.world(derive_seed(seed, "world"))?,
        seed,
        agent_seed: derive_seed(seed, "agent"),
    };
    let err = |e: crate::epistemics::EpistemicError| engine(index, e);
    let mut queries = Vec::new();
    for q in &spec.queries {
        let assessor = trial.assessor(q.tick);
        let a = assessor.run().map_err(err)?;
        let v = a.verdict(&q.proposition).map_err(err)?;
        queries.push(QueryLog {
            query: q.id.clone(),
            proposition: q.proposition.clone(),
            tick: q.tick,
            verdict: v.kind,
            safe_not_lucky: v.diagnostics.safe_not_lucky(),
            diagnostics: Some(v),
        });
    }

    let mut decisions = Vec::new();
    let mut last_tick = spec.queries.iter().map(|q| q.tick).max().unwrap_or(0);
    for r in &spec.requests {
        let menu = spec.request_menu(r);
        let assessor = trial.assessor(r.tick);
        let a = assessor.run().map_err(err)?;
        let (mut decision, unauthorized) =
            match decide(policy, &menu, &a, &spec.utility, r.authorized) {
                Ok(d) => (d, false),
                Err(PolicyError::UnauthorizedLethal { action, record }) => (
                    ActionDecision {
                        action_id: Some(action),
                        outcome: Outcome::Withhold,
                        gate_record: *record,
                        authorization: Some(false),
                    },
                    true,
                ),
                Err(e) => return Err(engine(index, e)),
            };
        let mut world_at = a.world_now.clone();
        let mut tick = r.tick;
        if let (Some(flight), Outcome::Execute) = (r.in_flight, &decision.outcome) {
            let later_assessor = trial.assessor(flight.impact_tick);
            let later = later_assessor.run().map_err(err)?;
            let fresh: Vec<_> = later
                .state
                .evidence
                .iter()
                .filter(|e| e.tick > r.tick)
                .cloned()
                .collect();
            decision = abort_or_retarget(
                &decision,
                &fresh,
                policy,
                &menu,
                &later,
                &spec.utility,
                r.authorized,
            )
            .map_err(|e| engine(index, e))?;
            world_at = later.world_now.clone();
            tick = flight.impact_tick;
        }
        last_tick = last_tick.max(tick);
        decisions.push(judge_decision(
            &trial,
            r.id.clone(),
            tick,
            &menu,
            decision,
            unauthorized,
            &world_at,
            &a,
            index,
        )?);
    }

    let doxastic = if spec.queries.is_empty() && spec.requests.is_empty() {
        None
    } else {
        let assessor = trial.assessor(last_tick);
        Some(
            assessor
                .run()
                .and_then(|a| a.doxastic_report())
                .map_err(err)?,
        )
    };
    Ok(TrialLog {
        index,
        seed: trial.seed,
        queries,
        decisions,
        doxastic,
    })
}

#[allow(clippy::too_many_arguments)]
fn judge_decision(
    trial: &Trial<'_>,
    request: String,
    tick: u64,
    menu: &[ActionSpec],
    decision: ActionDecision,
    unauthorized: bool,
    world: &WorldState,
    oracle: &dyn EpistemicOracle,
    index: usize,
) -> Result<DecisionLog, HarnessError> {
    let engaged_id = match &decision.outcome {
        Outcome::Execute => decision.action_id.clone(),
        Outcome::Retarget { action, .. } => Some(action.clone()),
        _ => None,
    };
    let engaged = engaged_id
        .as_ref()
        .and_then(|id| menu.iter().find(|a| &a.id == id));
    let holds = |a: &ActionSpec| -> Result<bool, HarnessError> {
        match a.presumption() {
            Some(p) => truth_at(world, &p, world.time()).map_err(|e| engine(index, e)),
            None => Ok(false),
        }
    };
    let mut opportunity = false;
    for a in menu.iter().filter(|a| a.tier == RiskTier::LethalEffect) {
        if holds(a)? && harm_count(world, a) == 0 {
            opportunity = true;
        }
    }
    let lethal = engaged.is_some_and(|a| a.tier == RiskTier::LethalEffect);
    let (mut fp, mut legit, mut harm) = (false, false, 0);
    if let Some(a) = engaged.filter(|_| lethal) {
        let ok = holds(a)?;
        fp = !ok;
        harm = harm_count(world, a);
        legit = ok && harm == 0;
    }
    let mut violation = false;
    if let (Some(a), false) = (engaged, trial.policy.envelope.is_empty()) {
        if matches!(a.target, Some(Subject::Entity(_))) {
            if let Ok(track) = oracle.track_state(a) {
                violation = !envelope_check(&trial.policy.envelope, &track).is_ok_and(|r| r.passed);
            }
        }
    }
    let complete = decision.gate_record.recompute()
        == Some((decision.action_id.clone(), decision.outcome.clone()));
    Ok(DecisionLog {
        request,
        tick,
        action: decision.action_id.clone(),
        tier: decision
            .action_id
            .as_ref()
            .and_then(|id| menu.iter().find(|a| &a.id == id))
            .map(|a| a.tier),
        outcome: decision.outcome.clone(),
        unauthorized,
        legitimate_opportunity: opportunity,
        lethal_engagement: lethal,
        false_positive_lethal: fp,
        legitimate_engagement: legit,
        civilian_harm: harm,
        envelope_violation: violation,
        gate_record_complete: complete,
        decision: Some(decision),
    })
}

/// Runs every trial of `spec`, optionally under another policy. Trial `i`
/// is seeded from `(master_seed, i)` and results are merged in index order.
pub fn run_trials(
    spec: &ScenarioSpec,
    policy: Option<&PolicyConfig>,
    parallelism: Parallelism,
) -> Result<RunReport, HarnessError> {
    let policy = policy.unwrap_or(&spec.policy);
    policy
        .validate()
        .map_err(|e| HarnessError::Engine(e.to_string()))?;
    let trials: Vec<TrialLog> = match parallelism {
        Parallelism::Serial => (0..spec.trials)
            .map(|i| run_one(spec, policy, i))
            .collect::<Result<_, _>>()?,
        Parallelism::Parallel => (0..spec.trials)
            .into_par_iter()
            .map(|i| run_one(spec, policy, i))
            .collect::<Result<_, _>>()?,
    };
    let query_ids: Vec<String> = spec.queries.iter().map(|q| q.id.clone()).collect();
    Ok(RunReport {
        scenario: spec.name.clone(),
        corpus_id: spec.corpus_id(),
        master_seed: spec.master_seed,
        policy: policy.clone(),
        run: spec.run,
        metrics: Metrics::from_trials(&trials, &query_ids),
        trials,
        redacted: false,
    })
}
