use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AaaResult, EpistemicError, JustificationTrace, ProcessLedger};
use crate::evidence::ProcessId;
use crate::hnpm::ReliabilityHierarchy;
use crate::worldsim::EntityClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectiveConfig {
    pub meta_threshold: f64,
    pub coherence_tolerance: f64,
    /// Bin floor counted as "reliable" when computing meta-credence.
    pub reliability_threshold: f64,
}

impl Default for ReflectiveConfig {
    fn default() -> Self {
        Self {
            meta_threshold: 0.95,
            coherence_tolerance: 0.05,
            reliability_threshold: 0.8,
        }
    }
}

/// The agent's first-order state for the proposition under review.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceInput {
    /// Prior over the subject's partition, keyed by class.
    pub prior: BTreeMap<EntityClass, f64>,
    pub target: EntityClass,
    pub first_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectiveRecord {
    pub apt: bool,
    pub hierarchy_configured: bool,
    pub meta_credence: Option<f64>,
    pub meta_threshold: f64,
    pub first_order: f64,
    pub predicted_credence: Option<f64>,
    pub coherence_gap: Option<f64>,
    pub coherence_tolerance: f64,
    pub reflective: bool,
}

impl ReflectiveRecord {
    /// Record for an agent with no meta-model: animal knowledge at most.
    pub fn animal_only(aaa: &AaaResult, first_order: f64, config: &ReflectiveConfig) -> Self {
        Self {
            apt: aaa.apt(),
            hierarchy_configured: false,
            meta_credence: None,
            meta_threshold: config.meta_threshold,
            first_order,
            predicted_credence: None,
            coherence_gap: None,
            coherence_tolerance: config.coherence_tolerance,
            reflective: false,
        }
    }

    /// Recomputes the verdict from the stored comparisons.
    pub fn recompute(&self) -> bool {
        self.apt
            && self.meta_credence.is_some_and(|m| m >= self.meta_threshold)
            && self
                .coherence_gap
                .is_some_and(|g| g <= self.coherence_tolerance)
    }
}

/// Credence in `target` recomputed from the trace's reports, treating each
/// process as a symmetric channel whose accuracy is its predicted reliability.
pub fn predicted_credence(
    input: &CoherenceInput,
    trace: &JustificationTrace,
    reliabilities: &BTreeMap<ProcessId, f64>,
) -> f64 {
    let k = input.prior.len().max(2) as f64;
    let weights: BTreeMap<EntityClass, f64> = input
        .prior
        .iter()
        .map(|(h, p)| {
            let lik: f64 = trace
                .steps
                .iter()
                .map(|s| {
                    let r = reliabilities[&s.process_id];
                    if s.output == *h {
                        r
                    } else {
                        (1.0 - r) / (k - 1.0)
                    }
                })
                .product();
            (*h, p * lik)
        })
        .collect();
    let z: f64 = weights.values().sum();
    if z == 0.0 {
        return 0.0;
    }
    weights.get(&input.target).copied().unwrap_or(0.0) / z
}

/// Reflective knowledge: apt, confident in the reliability of its own
/// processes, and coherent with what the meta-model predicts.
///
/// Returns `HnpmUnavailable` without a hierarchy; callers that want the
/// animal-only reading use [`reflective_or_animal`].
pub fn reflective_check(
    aaa: &AaaResult,
    trace: &JustificationTrace,
    ledger: &ProcessLedger,
    input: &CoherenceInput,
    hierarchy: Option<&ReliabilityHierarchy>,
    config: &ReflectiveConfig,
) -> Result<ReflectiveRecord, EpistemicError> {
    let h = hierarchy.ok_or(EpistemicError::HnpmUnavailable)?;
    let processes = trace.processes();
    let meta = h.meta_credence(
        ledger,
        processes.iter().copied(),
        config.reliability_threshold,
    )?;
    let reliabilities = h.predictive_reliability(ledger, processes.iter().copied())?;
    let predicted = predicted_credence(input, trace, &reliabilities);
    let mut rec = ReflectiveRecord {
        apt: aaa.apt(),
        hierarchy_configured: true,
        meta_credence: Some(meta),
        meta_threshold: config.meta_threshold,
        first_order: input.first_order,
        predicted_credence: Some(predicted),
        coherence_gap: Some((input.first_order - predicted).abs()),
        coherence_tolerance: config.coherence_tolerance,
        reflective: false,
    };
    rec.reflective = rec.recompute();
    Ok(rec)
}

pub fn reflective_or_animal(
    aaa: &AaaResult,
    trace: &JustificationTrace,
    ledger: &ProcessLedger,
    input: &CoherenceInput,
    hierarchy: Option<&ReliabilityHierarchy>,
    config: &ReflectiveConfig,
) -> Result<ReflectiveRecord, EpistemicError> {
    match reflective_check(aaa, trace, ledger, input, hierarchy, config) {
        Err(EpistemicError::HnpmUnavailable) => Ok(ReflectiveRecord::animal_only(
            aaa,
            input.first_order,
            config,
        )),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{ChannelId, EvidenceItem};
    use crate::hnpm::{RegimeSpec, ReliabilityHierarchySpec};

    fn hierarchy() -> ReliabilityHierarchy {
        ReliabilityHierarchy::new(ReliabilityHierarchySpec {
            bins: vec![0.5, 0.7, 0.95],
            regimes: vec![
                RegimeSpec {
                    name: "reliable".into(),
                    prior: 0.5,
                    bin_weights: vec![0.05, 0.15, 0.8],
                },
                RegimeSpec {
                    name: "unreliable".into(),
                    prior: 0.5,
                    bin_weights: vec![0.6, 0.3, 0.1],
                },
            ],
        })
        .unwrap()
    }

    fn trace() -> JustificationTrace {
        let mut t = JustificationTrace::new("p".into());
        t.push(&EvidenceItem {
            channel_id: ChannelId::new("isr"),
            process_id: ProcessId::new("isr"),
            tick: 0,
            subject: "p".into(),
            reported_class: EntityClass::Civilian,
            likelihoods: Default::default(),
            shared_source: None,
        });
        t
    }

    fn input(first_order: f64) -> CoherenceInput {
        CoherenceInput {
            prior: [
                (EntityClass::Civilian, 0.5),
                (EntityClass::Belligerent, 0.5),
            ]
            .into_iter()
            .collect(),
            target: EntityClass::Civilian,
            first_order,
        }
    }

    #[test]
    fn coherent_confident_apt_agent_is_reflective() {
        let ledger = ProcessLedger::new().with_history("isr", 95, 100).unwrap();
        let aaa = AaaResult::new(true, true, 1.0, 0.9);
        let rec = reflective_check(
            &aaa,
            &trace(),
            &ledger,
            &input(0.95),
            Some(&hierarchy()),
            &ReflectiveConfig::default(),
        )
        .unwrap();
        assert!(rec.meta_credence.unwrap() >= 0.95, "{rec:?}");
        assert!(rec.coherence_gap.unwrap() <= 0.05, "{rec:?}");
        assert!(rec.reflective);
    }

    #[test]
    fn incoherent_first_order_credence_fails() {
        let ledger = ProcessLedger::new().with_history("isr", 95, 100).unwrap();
        let aaa = AaaResult::new(true, true, 1.0, 0.9);
        let rec = reflective_check(
            &aaa,
            &trace(),
            &ledger,
            &input(0.6),
            Some(&hierarchy()),
            &ReflectiveConfig::default(),
        )
        .unwrap();
        assert!(!rec.reflective);
    }

    #[test]
    fn not_apt_is_not_reflective() {
        let ledger = ProcessLedger::new().with_history("isr", 95, 100).unwrap();
        let aaa = AaaResult::new(true, true, 0.0, 0.9);
        let rec = reflective_check(
            &aaa,
            &trace(),
            &ledger,
            &input(0.95),
            Some(&hierarchy()),
            &ReflectiveConfig::default(),
        )
        .unwrap();
        assert!(!rec.reflective);
    }

    #[test]
    fn no_meta_model_is_animal_only() {
        let ledger = ProcessLedger::new().with_history("isr", 95, 100).unwrap();
        let aaa = AaaResult::new(true, true, 1.0, 0.9);
        let cfg = ReflectiveConfig::default();
        assert_eq!(
            reflective_check(&aaa, &trace(), &ledger, &input(0.95), None, &cfg),
            Err(EpistemicError::HnpmUnavailable)
        );
        let rec = reflective_or_animal(&aaa, &trace(), &ledger, &input(0.95), None, &cfg).unwrap();
        assert!(rec.apt && !rec.reflective && !rec.hierarchy_configured);
    }
}
