use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EpistemicError, ProcessLedger};
use crate::doxastics::Subject;
use crate::evidence::{ChannelId, EvidenceItem, ProcessId};
use crate::policy::RiskTier;
use crate::worldsim::EntityClass;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub process_id: ProcessId,
    pub channel_id: ChannelId,
    pub evidence: Vec<String>,
    pub output: EntityClass,
}

/// Which processes and channels produced the credences over one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JustificationTrace {
    pub subject: Subject,
    pub steps: Vec<TraceStep>,
    pub channels: BTreeSet<ChannelId>,
    sources: BTreeSet<String>,
}

impl JustificationTrace {
    pub fn new(subject: Subject) -> Self {
        Self {
            subject,
            steps: Vec::new(),
            channels: BTreeSet::new(),
            sources: BTreeSet::new(),
        }
    }

    pub fn push(&mut self, item: &EvidenceItem) {
        self.steps.push(TraceStep {
            process_id: item.process_id.clone(),
            channel_id: item.channel_id.clone(),
            evidence: vec![item.id()],
            output: item.reported_class,
        });
        self.channels.insert(item.channel_id.clone());
        self.sources.insert(item.source_key());
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of mutually independent sources that contributed.
    pub fn redundancy_count(&self) -> usize {
        self.sources.len()
    }

    pub fn processes(&self) -> BTreeSet<&ProcessId> {
        self.steps.iter().map(|s| &s.process_id).collect()
    }
}

/// Reliability floor and per-tier redundancy minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JustificationPolicy {
    pub reliability_threshold: f64,
    pub min_redundancy: BTreeMap<RiskTier, usize>,
}

impl Default for JustificationPolicy {
    fn default() -> Self {
        Self {
            reliability_threshold: 0.8,
            min_redundancy: [
                (RiskTier::Navigate, 1),
                (RiskTier::Surveil, 1),
                (RiskTier::NonLethalEffect, 1),
                (RiskTier::LethalEffect, 2),
            ]
            .into_iter()
            .collect(),
        }
    }
}

impl JustificationPolicy {
    pub fn min_for(&self, tier: RiskTier) -> usize {
        self.min_redundancy.get(&tier).copied().unwrap_or(1)
    }
}

/// Every comparison behind one justification verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JustificationRecord {
    pub tier: RiskTier,
    pub reliability_threshold: f64,
    pub reliabilities: BTreeMap<ProcessId, f64>,
    pub redundancy: usize,
    pub min_redundancy: usize,
    pub justified: bool,
}

impl JustificationRecord {
    pub fn reliability_met(&self) -> bool {
        !self.reliabilities.is_empty()
            && self
                .reliabilities
                .values()
                .all(|r| *r >= self.reliability_threshold)
    }

    pub fn redundancy_met(&self) -> bool {
        self.redundancy >= self.min_redundancy
    }
}

/// Reliabilist justification: every process reliable enough, and enough
/// independent channels for the tier. An empty trace is never justified.
pub fn assess_justification(
    trace: &JustificationTrace,
    ledger: &ProcessLedger,
    policy: &JustificationPolicy,
    tier: RiskTier,
) -> Result<JustificationRecord, EpistemicError> {
    let mut reliabilities = BTreeMap::new();
    for p in trace.processes() {
        reliabilities.insert(p.clone(), ledger.estimate_reliability(p)?);
    }
    let mut rec = JustificationRecord {
        tier,
        reliability_threshold: policy.reliability_threshold,
        reliabilities,
        redundancy: trace.redundancy_count(),
        min_redundancy: policy.min_for(tier),
        justified: false,
    };
    rec.justified = rec.reliability_met() && rec.redundancy_met();
    Ok(rec)
}

pub fn justified(
    trace: &JustificationTrace,
    ledger: &ProcessLedger,
    policy: &JustificationPolicy,
    tier: RiskTier,
) -> Result<bool, EpistemicError> {
    Ok(assess_justification(trace, ledger, policy, tier)?.justified)
}
