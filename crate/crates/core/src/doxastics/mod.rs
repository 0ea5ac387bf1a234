//! The belief core: propositions, credence functions, conditionalization,
//! Lockean attitude mapping and machine-readable doxastic reports.

mod credence;
mod proposition;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use credence::{CredenceFunction, Partition, NORMALIZATION_TOL};
pub use proposition::{Predicate, Proposition, Subject, TimeScope};

use crate::evidence::ChannelId;
use crate::worldsim::EntityClass;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DoxasticError {
    #[error("prior for `{subject}` sums to {sum}, not 1")]
    NonNormalizedPrior { subject: String, sum: f64 },
    #[error("contingent proposition `{0}` given prior 0 or 1")]
    ZeroPriorOnContingent(Proposition),
    #[error("prior names undeclared proposition `{0}`")]
    UndeclaredProposition(Proposition),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("no declared partition covers subject `{0}`")]
    NoPartition(String),
    #[error("evidence on `{subject}` lacks a likelihood for hypothesis {missing}")]
    PartitionMismatch {
        subject: String,
        missing: EntityClass,
    },
    #[error("evidence on `{0}` has zero likelihood under every hypothesis")]
    IncoherentEvidence(String),
    #[error("invalid thresholds: need 0 < disbelief ({disbelief}) < belief ({belief}) < 1")]
    InvalidThresholds { belief: f64, disbelief: f64 },
}

/// Lockean cutoffs from credence to binary attitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThresholdRepr")]
pub struct LockeanThresholds {
    belief: f64,
    disbelief: f64,
}

#[derive(Deserialize)]
struct ThresholdRepr {
    belief: f64,
    disbelief: f64,
}

impl TryFrom<ThresholdRepr> for LockeanThresholds {
    type Error = DoxasticError;

    fn try_from(r: ThresholdRepr) -> Result<Self, Self::Error> {
        LockeanThresholds::new(r.belief, r.disbelief)
    }
}

impl Default for LockeanThresholds {
    fn default() -> Self {
        Self {
            belief: 0.9,
            disbelief: 0.1,
        }
    }
}

impl LockeanThresholds {
    pub fn new(belief: f64, disbelief: f64) -> Result<Self, DoxasticError> {
        if !(0.0 < disbelief && disbelief < belief && belief < 1.0) {
            return Err(DoxasticError::InvalidThresholds { belief, disbelief });
        }
        Ok(Self { belief, disbelief })
    }

    pub fn belief(&self) -> f64 {
        self.belief
    }

    pub fn disbelief(&self) -> f64 {
        self.disbelief
    }

    pub fn classify(&self, credence: f64) -> DoxasticAttitude {
        if credence >= self.belief {
            DoxasticAttitude::Belief
        } else if credence <= self.disbelief {
            DoxasticAttitude::Disbelief
        } else {
            DoxasticAttitude::Suspension
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DoxasticAttitude {
    Belief,
    Disbelief,
    Suspension,
    /// No credence entry at all.
    Ignorance,
}

pub fn attitude_of(
    c: &CredenceFunction,
    prop: &Proposition,
    thresholds: LockeanThresholds,
) -> DoxasticAttitude {
    match c.credence(prop) {
        Some(x) => thresholds.classify(x),
        None => DoxasticAttitude::Ignorance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JustificationStatus {
    Justified,
    Unjustified,
    /// A contributing process has no track record.
    NoHistory,
    /// Nothing has contributed to this belief yet.
    NoTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionRecord {
    pub proposition: Proposition,
    pub credence: f64,
    pub attitude: DoxasticAttitude,
    pub channels: Vec<ChannelId>,
    pub justification: JustificationStatus,
}

/// Snapshot of what an agent believes and why, at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoxasticReport {
    pub agent: String,
    pub tick: u64,
    pub records: Vec<PropositionRecord>,
}

impl DoxasticReport {
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }
}
