use serde::{Deserialize, Serialize};

use super::{EpistemicError, JustificationTrace, ProcessLedger};
use crate::doxastics::Proposition;
use crate::rng::derive_indexed;
use crate::worldsim::WorldState;

/// A performance whose success can be judged against ground truth.
pub trait Performance {
    /// Whether the performance succeeds when run in `world` with `seed`.
    fn accurate(&self, world: &WorldState, seed: u64) -> Result<bool, EpistemicError>;
}

/// A projectile-style performance: the outcome proposition must hold once
/// the world reaches `at_tick`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotPerformance {
    pub outcome: Proposition,
    pub at_tick: u64,
}

impl Performance for ShotPerformance {
    fn accurate(&self, world: &WorldState, _seed: u64) -> Result<bool, EpistemicError> {
        let landed = world.advance_to(self.at_tick);
        match landed.truth_of(&self.outcome) {
            Ok(t) => Ok(t),
            Err(crate::worldsim::WorldError::UnknownEntity(_)) => Ok(false),
            Err(e) => Err(e.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AaaConfig {
    pub reruns: usize,
    /// Fraction of luck-stripped reruns that must stay accurate.
    pub persistence: f64,
    pub reliability_threshold: f64,
}

impl Default for AaaConfig {
    fn default() -> Self {
        Self {
            reruns: 16,
            persistence: 0.9,
            reliability_threshold: 0.8,
        }
    }
}

/// Accuracy, adroitness and aptness of one performance. `apt` implies both others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AaaResult {
    accurate: bool,
    adroit: bool,
    apt: bool,
    luck_free_rate: f64,
}

impl AaaResult {
    pub fn new(accurate: bool, adroit: bool, luck_free_rate: f64, persistence: f64) -> Self {
        let apt = accurate && adroit && luck_free_rate >= persistence;
        Self {
            accurate,
            adroit,
            apt,
            luck_free_rate,
        }
    }

    pub fn accurate(&self) -> bool {
        self.accurate
    }

    pub fn adroit(&self) -> bool {
        self.adroit
    }

    pub fn apt(&self) -> bool {
        self.apt
    }

    /// Fraction of luck-stripped reruns that were accurate.
    pub fn luck_free_rate(&self) -> f64 {
        self.luck_free_rate
    }
}

/// Adroit: every process in the trace meets the reliability floor.
pub fn adroit(
    trace: &JustificationTrace,
    ledger: &ProcessLedger,
    threshold: f64,
) -> Result<bool, EpistemicError> {
    if trace.is_empty() {
        return Ok(false);
    }
    for p in trace.processes() {
        if ledger.estimate_reliability(p)? < threshold {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Judges whether an accurate performance was accurate because adroit, by
/// rerunning it in the same world with every luck-tagged event removed.
pub fn aaa_evaluate(
    performance: &dyn Performance,
    trace: &JustificationTrace,
    ledger: &ProcessLedger,
    world: &WorldState,
    config: &AaaConfig,
    seed: u64,
) -> Result<AaaResult, EpistemicError> {
    let accurate = performance.accurate(world, seed)?;
    let adroit = adroit(trace, ledger, config.reliability_threshold)?;
    let luck_free_rate = if accurate && adroit {
        let stripped = world.strip_luck();
        let reruns = config.reruns.max(1);
        let mut hits = 0usize;
        for i in 0..reruns as u64 {
            if performance.accurate(&stripped, derive_indexed(seed, "aaa/rerun", i))? {
                hits += 1;
            }
        }
        hits as f64 / reruns as f64
    } else {
        0.0
    };
    Ok(AaaResult::new(
        accurate,
        adroit,
        luck_free_rate,
        config.persistence,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{ChannelId, EvidenceItem, ProcessId};
    use crate::worldsim::{Entity, EntityClass, EventEffect, ExogenousEvent, GridPos, Region};

    fn skilled_trace() -> (JustificationTrace, ProcessLedger) {
        let mut t = JustificationTrace::new("arrow".into());
        t.push(&EvidenceItem {
            channel_id: ChannelId::new("archer"),
            process_id: ProcessId::new("archery"),
            tick: 0,
            subject: "arrow".into(),
            reported_class: EntityClass::FriendlyCombatant,
            likelihoods: Default::default(),
            shared_source: None,
        });
        (
            t,
            ProcessLedger::new()
                .with_history("archery", 97, 100)
                .unwrap(),
        )
    }

    fn shot(aim_dy: i64, gust: Option<i64>) -> (WorldState, ShotPerformance) {
        let arrow = Entity::new("arrow", EntityClass::FriendlyCombatant, GridPos::new(0, 0))
            .moving(GridPos::new(2, 0));
        let mut events = vec![ExogenousEvent::scripted(
            "release",
            1,
            EventEffect::Displace {
                entity: "arrow".into(),
                by: GridPos::new(0, aim_dy),
            },
        )];
        if let Some(dy) = gust {
            events.push(ExogenousEvent::luck(
                "gust",
                3,
                1.0,
                EventEffect::Displace {
                    entity: "arrow".into(),
                    by: GridPos::new(0, dy),
                },
            ));
        }
        let w = WorldState::new(vec![arrow], events, 8).unwrap();
        let target = Region::new(GridPos::new(10, 0), 1);
        (
            w,
            ShotPerformance {
                outcome: Proposition::within("arrow", target),
                at_tick: 5,
            },
        )
    }

    #[test]
    fn lucky_gust_is_accurate_but_not_apt() {
        let (w, perf) = shot(3, Some(-3));
        let (t, l) = skilled_trace();
        let r = aaa_evaluate(&perf, &t, &l, &w, &AaaConfig::default(), 1).unwrap();
        assert!(r.accurate() && r.adroit() && !r.apt());
    }

    #[test]
    fn competent_shot_without_luck_is_apt() {
        let (w, perf) = shot(0, None);
        let (t, l) = skilled_trace();
        let r = aaa_evaluate(&perf, &t, &l, &w, &AaaConfig::default(), 1).unwrap();
        assert!(r.apt());
        assert_eq!(r.luck_free_rate(), 1.0);
    }

    #[test]
    fn miss_is_never_apt() {
        let (w, perf) = shot(4, None);
        let (t, l) = skilled_trace();
        let r = aaa_evaluate(&perf, &t, &l, &w, &AaaConfig::default(), 1).unwrap();
        assert!(!r.accurate() && !r.apt());
    }

    #[test]
    fn novice_is_not_adroit() {
        let (w, perf) = shot(0, None);
        let (t, _) = skilled_trace();
        let novice = ProcessLedger::new()
            .with_history("archery", 30, 100)
            .unwrap();
        let r = aaa_evaluate(&perf, &t, &novice, &w, &AaaConfig::default(), 1).unwrap();
        assert!(r.accurate() && !r.adroit() && !r.apt());
    }
}
