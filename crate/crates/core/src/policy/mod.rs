//! Risk-tiered action gating: expected utility, certified envelopes, the
//! three policy architectures, and in-flight abort or retarget.

mod action;
mod envelope;
mod gate;

use thiserror::Error;

pub use action::{expected_utility, ActionSpec, ActionUtility, RiskTier, UtilityModel};
pub use envelope::{
    envelope_check, EnvelopePredicate, EnvelopeRecord, PredicateResult, TrackState,
};
pub use gate::{
    abort_or_retarget, argmax, decide, evaluate_candidate, ActionDecision, CandidateRecord,
    EpistemicOracle, GateMechanism, GateRecord, GateResult, GateRule, Outcome, PolicyConfig,
    PolicyKind, Thresholds,
};

use crate::doxastics::Subject;
use crate::epistemics::EpistemicError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("no utility for action {action} on outcome {outcome}")]
    MissingUtilityEntry { action: String, outcome: String },
    #[error("missing kinematics: {0}")]
    MissingKinematics(String),
    #[error("no credences over {0:?}")]
    NoPartition(Subject),
    #[error("lethal action {action} requires human authorization")]
    UnauthorizedLethal {
        action: String,
        record: Box<GateRecord>,
    },
    #[error("invalid policy configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Epistemic(#[from] EpistemicError),
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::doxastics::DoxasticAttitude;
    use crate::doxastics::{CredenceFunction, Partition, Proposition};
    use crate::epistemics::{
        classify, AaaResult, EpistemicVerdict, JustificationRecord, ReflectiveRecord,
        TrackingResult,
    };
    use crate::evidence::{ChannelId, EvidenceItem, ProcessId};
    use crate::worldsim::EntityClass;

    /// Scripted epistemic state.
    struct Fixed {
        credences: CredenceFunction,
        track: TrackState,
        knowledge: bool,
        apt: bool,
        redundancy: usize,
        reflective: bool,
    }

    fn cred(pairs: &[(&str, f64)]) -> CredenceFunction {
        let parts: Vec<Partition> = pairs
            .iter()
            .map(|(s, _)| Partition::civilian_or_belligerent(*s))
            .collect();
        let mut prior = BTreeMap::new();
        for (s, b) in pairs {
            prior.insert(Proposition::class_of(*s, EntityClass::Belligerent), *b);
            prior.insert(Proposition::class_of(*s, EntityClass::Civilian), 1.0 - b);
        }
        CredenceFunction::prior_init(&parts, &prior).unwrap()
    }

    fn fixed(pairs: &[(&str, f64)]) -> Fixed {
        Fixed {
            credences: cred(pairs),
            track: TrackState {
                range: Some(10.0),
                range_rate: Some(-4.0),
                speed: Some(4.0),
                maneuverable: Some(true),
            },
            knowledge: true,
            apt: true,
            redundancy: 3,
            reflective: true,
        }
    }

    impl EpistemicOracle for Fixed {
        fn tick(&self) -> u64 {
            0
        }
        fn credences(&self) -> &CredenceFunction {
            &self.credences
        }
        fn track_state(&self, _: &ActionSpec) -> Result<TrackState, PolicyError> {
            Ok(self.track)
        }
        fn verdict(&self, _: &Proposition) -> Result<EpistemicVerdict, PolicyError> {
            let rate = if self.knowledge { 1.0 } else { 0.0 };
            Ok(classify(
                true,
                DoxasticAttitude::Belief,
                true,
                Some(TrackingResult::new(rate, 1.0, 8)),
                0.9,
            )
            .with_aaa(AaaResult::new(
                true,
                true,
                if self.apt { 1.0 } else { 0.0 },
                0.9,
            )))
        }
        fn justification(
            &self,
            _: &crate::doxastics::Subject,
            tier: RiskTier,
        ) -> Result<JustificationRecord, PolicyError> {
            Ok(JustificationRecord {
                tier,
                reliability_threshold: 0.8,
                reliabilities: [(ProcessId::new("isr"), 0.95)].into_iter().collect(),
                redundancy: self.redundancy,
                min_redundancy: 2,
                justified: self.redundancy >= 2,
            })
        }
        fn reflective(&self, _: &Proposition) -> Result<ReflectiveRecord, PolicyError> {
            Ok(ReflectiveRecord {
                apt: self.apt,
                hierarchy_configured: true,
                meta_credence: Some(if self.reflective { 0.99 } else { 0.5 }),
                meta_threshold: 0.95,
                first_order: 0.95,
                predicted_credence: Some(0.95),
                coherence_gap: Some(0.0),
                coherence_tolerance: 0.05,
                reflective: self.reflective && self.apt,
            })
        }
    }

    fn strike(id: &str, target: &str) -> ActionSpec {
        ActionSpec::targeted(id, RiskTier::LethalEffect, target, EntityClass::Belligerent)
    }

    fn utility() -> UtilityModel {
        UtilityModel {
            miss_utility: 0.0,
            ..Default::default()
        }
        .with("strike-a", EntityClass::Civilian, -100.0)
        .with("strike-a", EntityClass::Belligerent, 10.0)
        .with("strike-b", EntityClass::Civilian, -100.0)
        .with("strike-b", EntityClass::Belligerent, 10.0)
        .with_any("route", 1.0)
    }

    fn menu() -> Vec<ActionSpec> {
        vec![
            strike("strike-a", "a"),
            strike("strike-b", "b"),
            ActionSpec::untargeted("route", RiskTier::Navigate).unwrap(),
        ]
    }

    fn ciws() -> PolicyConfig {
        PolicyConfig::of_kind(PolicyKind::AS1v).with_envelope(vec![
            EnvelopePredicate::Closing,
            EnvelopePredicate::VelocityBand {
                min: 3.0,
                max: 10.0,
            },
        ])
    }

    fn check_record(d: &ActionDecision) {
        assert_eq!(
            d.gate_record.recompute(),
            Some((d.action_id.clone(), d.outcome.clone()))
        );
    }

    #[test]
    fn as1v_withholds_outside_velocity_band() {
        let mut o = fixed(&[("a", 0.99), ("b", 0.99)]);
        o.track.speed = Some(20.0);
        let d = decide(&ciws(), &menu(), &o, &utility(), false).unwrap();
        assert_eq!(d.outcome, Outcome::Withhold);
        check_record(&d);
        o.track.speed = Some(5.0);
        let d = decide(&ciws(), &menu(), &o, &utility(), false).unwrap();
        assert_eq!(
            (d.action_id.as_deref(), &d.outcome),
            (Some("strike-a"), &Outcome::Execute)
        );
        check_record(&d);
    }

    #[test]
    fn as1v_needs_knowledge_and_aptness() {
        let mut o = fixed(&[("a", 0.99), ("b", 0.99)]);
        o.knowledge = false;
        assert_eq!(
            decide(&ciws(), &menu(), &o, &utility(), false)
                .unwrap()
                .outcome,
            Outcome::Withhold
        );
        o.knowledge = true;
        o.apt = false;
        assert_eq!(
            decide(&ciws(), &menu(), &o, &utility(), false)
                .unwrap()
                .outcome,
            Outcome::Withhold
        );
    }

    #[test]
    fn as2b_routes_on_expected_utility_alone() {
        let o = fixed(&[("a", 0.5), ("b", 0.5)]);
        let d = decide(
            &PolicyConfig::of_kind(PolicyKind::AS2b),
            &menu(),
            &o,
            &utility(),
            false,
        )
        .unwrap();
        assert_eq!(
            (d.action_id.as_deref(), &d.outcome),
            (Some("route"), &Outcome::Execute)
        );
        check_record(&d);
    }

    #[test]
    fn as2b_ties_break_by_id() {
        let o = fixed(&[("a", 0.99), ("b", 0.99)]);
        let d = decide(
            &PolicyConfig::of_kind(PolicyKind::AS2b),
            &menu(),
            &o,
            &utility(),
            false,
        )
        .unwrap();
        assert_eq!(d.action_id.as_deref(), Some("strike-a"));
    }

    #[test]
    fn as3bv_withholds_and_withdraws() {
        let p = PolicyConfig::of_kind(PolicyKind::AS3bv);
        let mut o = fixed(&[("a", 0.99), ("b", 0.2)]);
        let d = decide(&p, &menu(), &o, &utility(), false).unwrap();
        assert_eq!(d.outcome, Outcome::Execute);
        check_record(&d);
        o.reflective = false;
        let d = decide(&p, &menu(), &o, &utility(), false).unwrap();
        assert_eq!(d.outcome, Outcome::Withhold);
        check_record(&d);
        o.redundancy = 1;
        let d = decide(&p, &menu(), &o, &utility(), false).unwrap();
        assert_eq!(d.outcome, Outcome::Withdraw);
        check_record(&d);
    }

    #[test]
    fn as3bv_requires_scripted_authorization() {
        let p = PolicyConfig::of_kind(PolicyKind::AS3bv)
            .requiring_authorization(RiskTier::LethalEffect);
        let o = fixed(&[("a", 0.99), ("b", 0.2)]);
        assert!(matches!(
            decide(&p, &menu(), &o, &utility(), false),
            Err(PolicyError::UnauthorizedLethal { .. })
        ));
        let d = decide(&p, &menu(), &o, &utility(), true).unwrap();
        assert_eq!((d.outcome, d.authorization), (Outcome::Execute, Some(true)));
    }

    #[test]
    fn as3bv_config_must_reflect_on_lethal() {
        let mut p = PolicyConfig::of_kind(PolicyKind::AS3bv);
        p.tier_map
            .insert(RiskTier::LethalEffect, GateMechanism::BayesianGate);
        assert!(p.validate().is_err());
        let doc = r#"{"kind":"AS2b","tier_map":{"Navigate":"ReflectiveGate"}}"#;
        assert!(serde_json::from_str::<PolicyConfig>(doc).is_err());
    }

    #[test]
    fn defaults_are_echoed() {
        let p: PolicyConfig = serde_json::from_str(r#"{"kind":"AS3bv"}"#).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["thresholds"]["t_belief"], 0.9);
        assert_eq!(v["tier_map"]["LethalEffect"], "ReflectiveGate");
        assert_eq!(v["min_redundancy"]["LethalEffect"], 2);
    }

    fn child_sighting() -> Vec<EvidenceItem> {
        vec![EvidenceItem {
            channel_id: ChannelId::new("visual"),
            process_id: ProcessId::new("vis"),
            tick: 3,
            subject: "a".into(),
            reported_class: EntityClass::Civilian,
            likelihoods: Default::default(),
            shared_source: None,
        }]
    }

    #[test]
    fn in_flight_abort_retarget_and_identity() {
        let p = PolicyConfig::of_kind(PolicyKind::AS3bv);
        let o = fixed(&[("a", 0.95), ("b", 0.2)]);
        let d = decide(&p, &menu(), &o, &utility(), false).unwrap();
        assert_eq!(d.outcome, Outcome::Execute);
        assert_eq!(
            abort_or_retarget(&d, &[], &p, &menu(), &o, &utility(), false).unwrap(),
            d
        );

        let after = fixed(&[("a", 0.3), ("b", 0.2)]);
        let r = abort_or_retarget(
            &d,
            &child_sighting(),
            &p,
            &menu(),
            &after,
            &utility(),
            false,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Abort);

        let after = fixed(&[("a", 0.95), ("b", 0.99)]);
        let r = abort_or_retarget(
            &d,
            &child_sighting(),
            &p,
            &menu(),
            &after,
            &utility(),
            false,
        )
        .unwrap();
        assert_eq!(
            r.outcome,
            Outcome::Retarget {
                action: "strike-b".into(),
                target: "b".into()
            }
        );

        let after = fixed(&[("a", 0.95), ("b", 0.5)]);
        let r = abort_or_retarget(
            &d,
            &child_sighting(),
            &p,
            &menu(),
            &after,
            &utility(),
            false,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Execute);
    }

    #[test]
    fn corner_choice_matches_enumeration() {
        let u = UtilityModel::default()
            .with_any("corner-a", 10.0)
            .with_any("corner-b", 10.0)
            .with_harm(EntityClass::Civilian, -50.0);
        let menu = vec![
            ActionSpec::untargeted("corner-a", RiskTier::NonLethalEffect)
                .unwrap()
                .with_collateral(&["wa"]),
            ActionSpec::untargeted("corner-b", RiskTier::NonLethalEffect)
                .unwrap()
                .with_collateral(&["wb"]),
        ];
        // belligerent credence of each walker; the rest is civilian
        let o = fixed(&[("wa", 0.9), ("wb", 0.4)]);
        let d = decide(
            &PolicyConfig::of_kind(PolicyKind::AS2b),
            &menu,
            &o,
            &u,
            false,
        )
        .unwrap();
        let brute: [(&str, f64); 2] = [
            ("corner-a", 10.0 - 50.0 * 0.1),
            ("corner-b", 10.0 - 50.0 * 0.6),
        ];
        let best = brute.iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap().0;
        assert_eq!(d.action_id.as_deref(), Some(best));
    }
}
