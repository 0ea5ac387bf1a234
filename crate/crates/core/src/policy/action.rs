use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::doxastics::{CredenceFunction, Proposition, Subject};
use crate::worldsim::{EntityClass, EntityId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskTier {
    Navigate,
    Surveil,
    NonLethalEffect,
    LethalEffect,
}

impl RiskTier {
    pub const ALL: [RiskTier; 4] = [
        RiskTier::Navigate,
        RiskTier::Surveil,
        RiskTier::NonLethalEffect,
        RiskTier::LethalEffect,
    ];
}

impl fmt::Display for RiskTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ActionRepr {
    id: String,
    tier: RiskTier,
    #[serde(default)]
    target: Option<Subject>,
    #[serde(default)]
    presumed_class: Option<EntityClass>,
    #[serde(default)]
    collateral: Vec<EntityId>,
    #[serde(default)]
    effects: Vec<String>,
}

/// One entry of an action menu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActionRepr", into = "ActionRepr")]
pub struct ActionSpec {
    pub id: String,
    pub tier: RiskTier,
    pub target: Option<Subject>,
    /// Class the action presupposes of its target, e.g. Belligerent for a strike.
    pub presumed_class: Option<EntityClass>,
    /// Entities exposed to the action's effects besides the target.
    pub collateral: Vec<EntityId>,
    /// Free-form description of the world mutation.
    pub effects: Vec<String>,
}

impl TryFrom<ActionRepr> for ActionSpec {
    type Error = PolicyError;

    fn try_from(r: ActionRepr) -> Result<Self, Self::Error> {
        if r.tier == RiskTier::LethalEffect && r.target.is_none() {
            return Err(PolicyError::InvalidConfig(format!(
                "lethal action {} names no target",
                r.id
            )));
        }
        Ok(ActionSpec {
            id: r.id,
            tier: r.tier,
            target: r.target,
            presumed_class: r.presumed_class,
            collateral: r.collateral,
            effects: r.effects,
        })
    }
}

impl From<ActionSpec> for ActionRepr {
    fn from(a: ActionSpec) -> Self {
        ActionRepr {
            id: a.id,
            tier: a.tier,
            target: a.target,
            presumed_class: a.presumed_class,
            collateral: a.collateral,
            effects: a.effects,
        }
    }
}

impl ActionSpec {
    pub fn untargeted(id: &str, tier: RiskTier) -> Result<Self, PolicyError> {
        ActionRepr {
            id: id.into(),
            tier,
            target: None,
            presumed_class: None,
            collateral: vec![],
            effects: vec![],
        }
        .try_into()
    }

    pub fn targeted(
        id: &str,
        tier: RiskTier,
        target: impl Into<Subject>,
        presumed: EntityClass,
    ) -> Self {
        ActionSpec {
            id: id.into(),
            tier,
            target: Some(target.into()),
            presumed_class: Some(presumed),
            collateral: vec![],
            effects: vec![],
        }
    }

    pub fn with_collateral(mut self, ids: &[&str]) -> Self {
        self.collateral = ids.iter().map(|s| EntityId::new(*s)).collect();
        self
    }

    /// What the action takes to be true of its target.
    pub fn presumption(&self) -> Option<Proposition> {
        match (&self.target, self.presumed_class) {
            (Some(s), Some(c)) => Some(Proposition::new(
                s.clone(),
                crate::doxastics::Predicate::Class(c),
            )),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionUtility {
    #[serde(default)]
    pub by_class: BTreeMap<EntityClass, f64>,
    /// Fallback for any class, and the only entry untargeted actions use.
    #[serde(default)]
    pub any: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    pub actions: BTreeMap<String, ActionUtility>,
    /// Added per unit of credence that a collateral entity has the class.
    #[serde(default)]
    pub harm_weights: BTreeMap<EntityClass, f64>,
    /// Utility of an engagement that achieves nothing.
    #[serde(default)]
    pub miss_utility: f64,
}

impl UtilityModel {
    pub fn with(mut self, action: &str, class: EntityClass, u: f64) -> Self {
        self.actions
            .entry(action.into())
            .or_default()
            .by_class
            .insert(class, u);
        self
    }

    pub fn with_any(mut self, action: &str, u: f64) -> Self {
        self.actions.entry(action.into()).or_default().any = Some(u);
        self
    }

    pub fn with_harm(mut self, class: EntityClass, w: f64) -> Self {
        self.harm_weights.insert(class, w);
        self
    }

    pub fn utility(&self, action: &str, class: Option<EntityClass>) -> Result<f64, PolicyError> {
        let missing = || PolicyError::MissingUtilityEntry {
            action: action.into(),
            outcome: class.map_or("Any".into(), |c| c.to_string()),
        };
        let entry = self.actions.get(action).ok_or_else(missing)?;
        class
            .and_then(|c| entry.by_class.get(&c).copied())
            .or(entry.any)
            .ok_or_else(missing)
    }

    /// Harm weights on protected classes are non-positive and hitting a
    /// civilian with a lethal action is strictly worse than missing.
    pub fn validate(&self, menu: &[ActionSpec]) -> Result<(), PolicyError> {
        for (c, w) in &self.harm_weights {
            if c.is_protected() && *w > 0.0 {
                return Err(PolicyError::InvalidConfig(format!(
                    "harm weight for {c} is positive"
                )));
            }
        }
        for a in menu.iter().filter(|a| a.tier == RiskTier::LethalEffect) {
            if let Ok(u) = self.utility(&a.id, Some(EntityClass::Civilian)) {
                if u >= self.miss_utility {
                    return Err(PolicyError::InvalidConfig(format!(
                        "{}: civilian utility {u} is not below the miss utility {}",
                        a.id, self.miss_utility
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `sum_h c(target is h) u(action, h)` over the target's partition, plus the
/// harm weight of each collateral entity's possible classes.
pub fn expected_utility(
    c: &CredenceFunction,
    action: &ActionSpec,
    u: &UtilityModel,
    tick: u64,
) -> Result<f64, PolicyError> {
    let mut eu = match &action.target {
        None => u.utility(&action.id, None)?,
        Some(subject) => {
            let part = c
                .partition_for(subject, tick)
                .ok_or_else(|| PolicyError::NoPartition(subject.clone()))?;
            let mut sum = 0.0;
            for (h, p) in c.distribution(part) {
                sum += p * u.utility(&action.id, Some(h))?;
            }
            sum
        }
    };
    for b in &action.collateral {
        let subject = Subject::Entity(b.clone());
        let part = c
            .partition_for(&subject, tick)
            .ok_or(PolicyError::NoPartition(subject.clone()))?;
        for (h, p) in c.distribution(part) {
            eu += p * u.harm_weights.get(&h).copied().unwrap_or(0.0);
        }
    }
    Ok(eu)
}
