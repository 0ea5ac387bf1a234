//! The observing agent: a replayable pipeline from channel reports to
//! credences and justification traces, and the verdicts computed over it.

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::doxastics::{
    attitude_of, CredenceFunction, DoxasticAttitude, DoxasticReport, JustificationStatus,
    LockeanThresholds, Partition, Predicate, Proposition, PropositionRecord, Subject,
};
use crate::epistemics::{
    aaa_evaluate, assess_justification, classify, reflective_or_animal, tracking_check, AaaConfig,
    CoherenceInput, EpistemicError, EpistemicVerdict, JustificationRecord, JustificationTrace,
    Performance, ProcessLedger, ReflectiveConfig, ReflectiveRecord, ReplayableAgent,
};
use crate::evidence::{ChannelId, ChannelSet, EvidenceError, EvidenceItem, TickWindow};
use crate::hnpm::ReliabilityHierarchy;
use crate::policy::{ActionSpec, EpistemicOracle, PolicyConfig, PolicyError, RiskTier, TrackState};
use crate::rng::derive_indexed;
use crate::worldsim::{EntityClass, EntityId, WorldError, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub subject: Subject,
    pub hypotheses: Vec<EntityClass>,
    /// Empty means uniform.
    #[serde(default)]
    pub prior: BTreeMap<EntityClass, f64>,
}

/// One channel watching one subject over a tick window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationPlan {
    pub channel: ChannelId,
    pub subject: EntityId,
    pub window: TickWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub partitions: Vec<PartitionSpec>,
    pub observations: Vec<ObservationPlan>,
    /// Per-channel trust in [0,1]; distrusted reports are flattened toward
    /// uninformative. Unlisted channels are fully trusted.
    #[serde(default)]
    pub trust: BTreeMap<ChannelId, f64>,
    #[serde(default)]
    pub ledger: ProcessLedger,
    #[serde(default)]
    pub hierarchy: Option<ReliabilityHierarchy>,
    /// The agent's own platform, the reference point for envelope kinematics.
    #[serde(default)]
    pub platform: Option<EntityId>,
}

impl AgentSpec {
    pub fn prior(&self) -> Result<CredenceFunction, EpistemicError> {
        let mut parts = Vec::with_capacity(self.partitions.len());
        let mut prior = BTreeMap::new();
        for p in &self.partitions {
            let part = Partition::new(p.subject.clone(), p.hypotheses.clone())?;
            for (h, v) in &p.prior {
                prior.insert(part.proposition(*h), *v);
            }
            parts.push(part);
        }
        Ok(CredenceFunction::prior_init(&parts, &prior)?)
    }

    pub fn trust_in(&self, channel: &ChannelId) -> f64 {
        self.trust.get(channel).copied().unwrap_or(1.0)
    }
}

/// `w l(h) + (1 - w) mean(l)`: full trust keeps the report, zero trust
/// makes it uninformative.
pub fn temper(item: &EvidenceItem, trust: f64) -> EvidenceItem {
    if trust >= 1.0 || item.likelihoods.is_empty() {
        return item.clone();
    }
    let mean = item.likelihoods.values().sum::<f64>() / item.likelihoods.len() as f64;
    let mut out = item.clone();
    for l in out.likelihoods.values_mut() {
        *l = trust * *l + (1.0 - trust) * mean;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub tick: u64,
    pub credences: CredenceFunction,
    pub evidence: Vec<EvidenceItem>,
    pub traces: BTreeMap<Subject, JustificationTrace>,
}

impl AgentState {
    pub fn trace(&self, subject: &Subject) -> JustificationTrace {
        self.traces
            .get(subject)
            .cloned()
            .unwrap_or_else(|| JustificationTrace::new(subject.clone()))
    }
}

/// Runs the observation-update pipeline from the world's current tick to
/// `until`, inclusive. Reports about absent subjects are lost.
pub fn run_pipeline(
    spec: &AgentSpec,
    world: &WorldState,
    channels: &ChannelSet,
    seed: u64,
    until: u64,
) -> Result<(AgentState, WorldState), EpistemicError> {
    let mut credences = spec.prior()?;
    let mut evidence = Vec::new();
    let mut traces: BTreeMap<Subject, JustificationTrace> = BTreeMap::new();
    let mut w = world.clone();
    loop {
        let tick = w.time();
        for (k, plan) in spec.observations.iter().enumerate() {
            if !plan.window.contains(tick) {
                continue;
            }
            let channel =
                channels
                    .at(&plan.channel, tick)
                    .ok_or_else(|| EvidenceError::InvalidChannel {
                        channel: plan.channel.clone(),
                        reason: "not declared".into(),
                    })?;
            let s = derive_indexed(seed, &format!("obs/{k}"), tick);
            let item = match channel.observe(&w, &plan.subject, s) {
                Ok(Some(item)) => item,
                Ok(None) | Err(EvidenceError::UnknownEntity(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            credences = credences.update_credence(&temper(&item, spec.trust_in(&plan.channel)))?;
            traces
                .entry(item.subject.clone())
                .or_insert_with(|| JustificationTrace::new(item.subject.clone()))
                .push(&item);
            evidence.push(item);
        }
        if tick >= until {
            break;
        }
        w = w.advance(1);
    }
    Ok((
        AgentState {
            tick: w.time(),
            credences,
            evidence,
            traces,
        },
        w,
    ))
}

/// Everything a verdict depends on besides the proposition.
#[derive(Debug, Clone)]
pub struct Assessor<'a> {
    pub spec: &'a AgentSpec,
    pub channels: &'a ChannelSet,
    /// World at the start of the observation run.
    pub world: &'a WorldState,
    pub policy: &'a PolicyConfig,
    pub until: u64,
    pub tracking_samples: usize,
    pub aaa_reruns: usize,
    /// Tier at which standalone verdict queries judge justification.
    pub verdict_tier: RiskTier,
    pub seed: u64,
}

impl Assessor<'_> {
    pub fn lockean(&self) -> Result<LockeanThresholds, EpistemicError> {
        Ok(LockeanThresholds::new(
            self.policy.thresholds.t_belief,
            self.policy.thresholds.t_disbelief,
        )?)
    }

    pub fn reflective_config(&self) -> ReflectiveConfig {
        let t = &self.policy.thresholds;
        ReflectiveConfig {
            meta_threshold: t.theta_meta,
            coherence_tolerance: t.delta_coh,
            reliability_threshold: t.effective_theta_rel(),
        }
    }

    pub fn aaa_config(&self) -> AaaConfig {
        AaaConfig {
            reruns: self.aaa_reruns,
            persistence: self.policy.thresholds.phi,
            reliability_threshold: self.policy.thresholds.effective_theta_rel(),
        }
    }

    pub fn run(&self) -> Result<Assessment<'_>, EpistemicError> {
        let (state, world_now) =
            run_pipeline(self.spec, self.world, self.channels, self.seed, self.until)?;
        Ok(Assessment {
            assessor: self.clone(),
            state,
            world_now,
            verdicts: RefCell::new(BTreeMap::new()),
        })
    }
}

impl ReplayableAgent for Assessor<'_> {
    fn replay_attitude(
        &self,
        world: &WorldState,
        prop: &Proposition,
        seed: u64,
    ) -> Result<DoxasticAttitude, EpistemicError> {
        let (state, _) = run_pipeline(self.spec, world, self.channels, seed, self.until)?;
        Ok(attitude_of(&state.credences, prop, self.lockean()?))
    }

    fn rival_classes(&self, prop: &Proposition) -> Vec<EntityClass> {
        let held = prop.class();
        let in_partition: Vec<EntityClass> = self
            .spec
            .partitions
            .iter()
            .find(|p| p.subject == prop.subject)
            .map(|p| p.hypotheses.clone())
            .unwrap_or_else(|| EntityClass::ALL.to_vec());
        in_partition
            .into_iter()
            .filter(|c| Some(*c) != held)
            .collect()
    }
}

/// Forming a belief in `prop` is the performance; it succeeds when the
/// replayed pipeline believes `prop` and `prop` is true.
pub struct BeliefPerformance<'a, 'b> {
    pub assessor: &'b Assessor<'a>,
    pub prop: Proposition,
}

impl Performance for BeliefPerformance<'_, '_> {
    fn accurate(&self, world: &WorldState, seed: u64) -> Result<bool, EpistemicError> {
        let att = self.assessor.replay_attitude(world, &self.prop, seed)?;
        Ok(att == DoxasticAttitude::Belief && truth_at(world, &self.prop, self.assessor.until)?)
    }
}

/// Truth at `tick`; attributions to absent entities are false.
pub fn truth_at(world: &WorldState, prop: &Proposition, tick: u64) -> Result<bool, EpistemicError> {
    match world.advance_to(tick).truth_of(prop) {
        Ok(t) => Ok(t),
        Err(WorldError::UnknownEntity(_)) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// One completed observation run and the verdicts derived from it.
pub struct Assessment<'a> {
    pub assessor: Assessor<'a>,
    pub state: AgentState,
    pub world_now: WorldState,
    verdicts: RefCell<BTreeMap<Proposition, EpistemicVerdict>>,
}

impl Assessment<'_> {
    pub fn justification_at(
        &self,
        subject: &Subject,
        tier: RiskTier,
    ) -> Result<JustificationRecord, EpistemicError> {
        let policy = self.assessor.policy.justification_policy();
        assess_justification(
            &self.state.trace(subject),
            &self.assessor.spec.ledger,
            &policy,
            tier,
        )
    }

    fn first_order(&self, prop: &Proposition) -> f64 {
        self.state.credences.credence(prop).unwrap_or(0.0)
    }

    /// Verdict with tracking, aptness and reflective diagnostics.
    ///
    /// Tracking is sampled only for justified true beliefs, the one case in
    /// which it decides the verdict.
    pub fn verdict(&self, prop: &Proposition) -> Result<EpistemicVerdict, EpistemicError> {
        if let Some(v) = self.verdicts.borrow().get(prop) {
            return Ok(v.clone());
        }
        let a = &self.assessor;
        let truth = truth_at(a.world, prop, a.until)?;
        let attitude = attitude_of(&self.state.credences, prop, a.lockean()?);
        let trace = self.state.trace(&prop.subject);
        let justified = !trace.is_empty()
            && self
                .justification_at(&prop.subject, a.verdict_tier)?
                .justified;
        let tracking = if truth && attitude == DoxasticAttitude::Belief && justified {
            Some(tracking_check(
                a,
                prop,
                a.world,
                a.tracking_samples,
                derive_indexed(a.seed, "tracking", 0),
            )?)
        } else {
            None
        };
        let aaa = if trace.is_empty() {
            crate::epistemics::AaaResult::new(
                attitude == DoxasticAttitude::Belief && truth,
                false,
                0.0,
                a.policy.thresholds.phi,
            )
        } else {
            let perf = BeliefPerformance {
                assessor: a,
                prop: prop.clone(),
            };
            aaa_evaluate(
                &perf,
                &trace,
                &a.spec.ledger,
                a.world,
                &a.aaa_config(),
                a.seed,
            )?
        };
        let reflective = self.reflective_with(prop, &aaa, &trace)?;
        let v = classify(
            truth,
            attitude,
            justified,
            tracking,
            a.policy.thresholds.tau_track,
        )
        .with_aaa(aaa)
        .with_reflective(reflective);
        self.verdicts.borrow_mut().insert(prop.clone(), v.clone());
        Ok(v)
    }

    fn reflective_with(
        &self,
        prop: &Proposition,
        aaa: &crate::epistemics::AaaResult,
        trace: &JustificationTrace,
    ) -> Result<ReflectiveRecord, EpistemicError> {
        let a = &self.assessor;
        let prior = a.spec.prior()?;
        let target = match prop.predicate {
            Predicate::Class(c) => c,
            Predicate::Within(_) => {
                return Ok(ReflectiveRecord::animal_only(
                    aaa,
                    self.first_order(prop),
                    &a.reflective_config(),
                ))
            }
        };
        let dist = prior
            .partition_containing(prop)
            .map(|p| prior.distribution(p).into_iter().collect())
            .unwrap_or_default();
        let input = CoherenceInput {
            prior: dist,
            target,
            first_order: self.first_order(prop),
        };
        reflective_or_animal(
            aaa,
            trace,
            &a.spec.ledger,
            &input,
            a.spec.hierarchy.as_ref(),
            &a.reflective_config(),
        )
    }

    pub fn reflective_record(
        &self,
        prop: &Proposition,
    ) -> Result<ReflectiveRecord, EpistemicError> {
        let v = self.verdict(prop)?;
        Ok(v.diagnostics
            .reflective
            .expect("verdict always carries a reflective record"))
    }

    /// Snapshot of every partition proposition the agent holds a credence in.
    pub fn doxastic_report(&self) -> Result<DoxasticReport, EpistemicError> {
        let lockean = self.assessor.lockean()?;
        let mut records = Vec::new();
        for (prop, c) in self.state.credences.entries() {
            let trace = self.state.trace(&prop.subject);
            let justification = if trace.is_empty() {
                JustificationStatus::NoTrace
            } else {
                match self.justification_at(&prop.subject, self.assessor.verdict_tier) {
                    Ok(r) if r.justified => JustificationStatus::Justified,
                    Ok(_) => JustificationStatus::Unjustified,
                    Err(EpistemicError::NoHistory(_)) => JustificationStatus::NoHistory,
                    Err(e) => return Err(e),
                }
            };
            records.push(PropositionRecord {
                proposition: prop.clone(),
                credence: c,
                attitude: lockean.classify(c),
                channels: trace.channels.iter().cloned().collect(),
                justification,
            });
        }
        Ok(DoxasticReport {
            agent: self.assessor.spec.id.clone(),
            tick: self.state.tick,
            records,
        })
    }
}

impl EpistemicOracle for Assessment<'_> {
    fn tick(&self) -> u64 {
        self.state.tick
    }

    fn credences(&self) -> &CredenceFunction {
        &self.state.credences
    }

    fn track_state(&self, action: &ActionSpec) -> Result<TrackState, PolicyError> {
        let platform = self
            .assessor
            .spec
            .platform
            .as_ref()
            .ok_or_else(|| PolicyError::MissingKinematics("agent has no platform".into()))?;
        match &action.target {
            Some(Subject::Entity(id)) => TrackState::from_world(&self.world_now, platform, id),
            _ => Err(PolicyError::MissingKinematics(format!(
                "{} has no entity target",
                action.id
            ))),
        }
    }

    fn verdict(&self, prop: &Proposition) -> Result<EpistemicVerdict, PolicyError> {
        Ok(Assessment::verdict(self, prop)?)
    }

    fn justification(
        &self,
        subject: &Subject,
        tier: RiskTier,
    ) -> Result<JustificationRecord, PolicyError> {
        Ok(self.justification_at(subject, tier)?)
    }

    fn reflective(&self, prop: &Proposition) -> Result<ReflectiveRecord, PolicyError> {
        Ok(self.reflective_record(prop)?)
    }
}
