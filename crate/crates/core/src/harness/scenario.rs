use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::agent::AgentSpec;
use crate::doxastics::{Proposition, Subject};
use crate::evidence::{Channel, ChannelSet, ScheduledChange};
use crate::policy::{ActionSpec, PolicyConfig, RiskTier, UtilityModel};
use crate::worldsim::{Entity, EntityId, EventEffect, ExogenousEvent, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub events: Vec<ExogenousEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    pub id: String,
    pub proposition: Proposition,
    pub tick: u64,
}

/// Missile already released: the decision stays revisable until impact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InFlight {
    pub impact_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub id: String,
    pub tick: u64,
    /// Menu subset offered; empty offers the whole menu.
    #[serde(default)]
    pub actions: Vec<String>,
    /// Scripted human authorization input.
    #[serde(default)]
    pub authorized: bool,
    #[serde(default)]
    pub in_flight: Option<InFlight>,
}

fn thirty_two() -> usize {
    32
}

fn sixteen() -> usize {
    16
}

fn surveil() -> RiskTier {
    RiskTier::Surveil
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "thirty_two")]
    pub tracking_samples: usize,
    #[serde(default = "sixteen")]
    pub aaa_reruns: usize,
    /// Tier used to judge justification for standalone queries.
    #[serde(default = "surveil")]
    pub verdict_tier: RiskTier,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tracking_samples: thirty_two(),
            aaa_reruns: sixteen(),
            verdict_tier: surveil(),
        }
    }
}

/// Review thresholds; unset criteria are not judged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewCriteria {
    #[serde(default)]
    pub max_false_positive_lethal: Option<usize>,
    #[serde(default)]
    pub max_civilian_harm: Option<usize>,
    #[serde(default)]
    pub max_envelope_violations: Option<usize>,
    #[serde(default)]
    pub min_legitimate_engagement_rate: Option<f64>,
    /// Explainability: every gate record must reproduce its decision.
    #[serde(default)]
    pub require_complete_gate_records: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub master_seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    pub world: WorldSpec,
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub schedule: Vec<ScheduledChange>,
    pub agent: AgentSpec,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub menu: Vec<ActionSpec>,
    #[serde(default)]
    pub utility: UtilityModel,
    #[serde(default)]
    pub queries: Vec<Query>,
    #[serde(default)]
    pub requests: Vec<DecisionRequest>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub review: ReviewCriteria,
}

fn one() -> usize {
    1
}

impl ScenarioSpec {
    pub fn channel_set(&self) -> Result<ChannelSet, HarnessError> {
        ChannelSet::new(self.channels.clone(), self.schedule.clone())
            .map_err(|e| HarnessError::Engine(e.to_string()))
    }

    pub fn world(&self, seed: u64) -> Result<WorldState, HarnessError> {
        WorldState::new(self.world.entities.clone(), self.world.events.clone(), seed)
            .map_err(|e| HarnessError::Engine(e.to_string()))
    }

    /// Hash of everything but the policy: reports with equal ids ran the same corpus.
    pub fn corpus_id(&self) -> String {
        let mut v = serde_json::to_value(self).expect("scenario serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("policy");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_policy(&self, policy: PolicyConfig) -> ScenarioSpec {
        ScenarioSpec {
            policy,
            ..self.clone()
        }
    }

    /// Every cross-reference resolves and the engine accepts the pieces.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let dangling = |m: String| Err(HarnessError::DanglingReference(m));
        self.world(self.master_seed)?;
        let channels = self.channel_set()?;
        let mut known: BTreeSet<EntityId> =
            self.world.entities.iter().map(|e| e.id.clone()).collect();
        for ev in &self.world.events {
            if let EventEffect::Spawn(entity) = &ev.effect {
                known.insert(entity.id.clone());
            }
        }
        let entity_ok = |s: &Subject| match s {
            Subject::Entity(id) => known.contains(id),
            Subject::Region(_) => true,
        };
        for plan in &self.agent.observations {
            if channels.get(&plan.channel).is_none() {
                return dangling(format!(
                    "agent.observations: channel {} is not declared",
                    plan.channel
                ));
            }
            if !known.contains(&plan.subject) {
                return dangling(format!(
                    "agent.observations: entity {} is not in the world",
                    plan.subject
                ));
            }
        }
        for c in self.agent.trust.keys() {
            if channels.get(c).is_none() {
                return dangling(format!("agent.trust: channel {c} is not declared"));
            }
        }
        for p in &self.agent.partitions {
            if !entity_ok(&p.subject) {
                return dangling(format!(
                    "agent.partitions: subject {} is not in the world",
                    p.subject
                ));
            }
        }
        if let Some(platform) = &self.agent.platform {
            if !known.contains(platform) {
                return dangling(format!(
                    "agent.platform: entity {platform} is not in the world"
                ));
            }
        }
        self.agent
            .prior()
            .map_err(|e| HarnessError::Engine(format!("agent prior: {e}")))?;
        let mut ids = BTreeSet::new();
        for a in &self.menu {
            if !ids.insert(a.id.as_str()) {
                return dangling(format!("menu: duplicate action id {}", a.id));
            }
            if let Some(t) = &a.target {
                if !entity_ok(t) {
                    return dangling(format!("menu.{}: target {t} is not in the world", a.id));
                }
            }
            for b in &a.collateral {
                if !known.contains(b) {
                    return dangling(format!("menu.{}: collateral {b} is not in the world", a.id));
                }
            }
        }
        self.utility
            .validate(&self.menu)
            .map_err(|e| HarnessError::Engine(e.to_string()))?;
        for r in &self.requests {
            for a in &r.actions {
                if !ids.contains(a.as_str()) {
                    return dangling(format!("requests.{}: action {a} is not in the menu", r.id));
                }
            }
            if r.in_flight.is_some_and(|f| f.impact_tick < r.tick) {
                return Err(HarnessError::Engine(format!(
                    "requests.{}: impact precedes release",
                    r.id
                )));
            }
        }
        for q in &self.queries {
            if !entity_ok(&q.proposition.subject) {
                return dangling(format!("queries.{}: subject is not in the world", q.id));
            }
        }
        self.policy
            .validate()
            .map_err(|e| HarnessError::Engine(e.to_string()))?;
        Ok(())
    }

    pub fn request_menu(&self, r: &DecisionRequest) -> Vec<ActionSpec> {
        if r.actions.is_empty() {
            return self.menu.clone();
        }
        self.menu
            .iter()
            .filter(|a| r.actions.contains(&a.id))
            .cloned()
            .collect()
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_value(self)
            .expect("scenario serializes")
            .to_string()
    }
}

/// Deserializes any harness document, reporting the failing field path.
pub fn parse_document<T: serde::de::DeserializeOwned>(document: &str) -> Result<T, HarnessError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Parses and validates a scenario document.
pub fn load_scenario(document: &str) -> Result<ScenarioSpec, HarnessError> {
    let spec: ScenarioSpec = parse_document(document)?;
    spec.validate()?;
    Ok(spec)
}
