use serde::{Deserialize, Serialize};

use super::EpistemicError;
use crate::doxastics::{DoxasticAttitude, Predicate, Proposition, Subject};
use crate::rng::derive_indexed;
use crate::worldsim::{EntityClass, Intervention, WorldState};

/// An agent whose observation-update pipeline can be rerun on any world.
pub trait ReplayableAgent {
    /// Attitude toward `prop` after running the pipeline on `world` with `seed`.
    fn replay_attitude(
        &self,
        world: &WorldState,
        prop: &Proposition,
        seed: u64,
    ) -> Result<DoxasticAttitude, EpistemicError>;

    /// Rival classes the agent entertains for the subject of `prop`.
    fn rival_classes(&self, prop: &Proposition) -> Vec<EntityClass> {
        let held = prop.class();
        EntityClass::ALL
            .into_iter()
            .filter(|c| Some(*c) != held)
            .collect()
    }
}

/// Sampled counterfactual sensitivity (c) and adherence (d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingResult {
    pub condition_c_pass_rate: f64,
    pub condition_d_pass_rate: f64,
    pub samples: usize,
}

impl TrackingResult {
    pub fn new(c: f64, d: f64, samples: usize) -> Self {
        debug_assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&d));
        Self {
            condition_c_pass_rate: c,
            condition_d_pass_rate: d,
            samples,
        }
    }

    /// Both pass rates at or above `tau`.
    pub fn passes(&self, tau: f64) -> bool {
        self.condition_c_pass_rate >= tau && self.condition_d_pass_rate >= tau
    }
}

/// Interventions that make `prop` false in `world`, one alternative per sample.
///
/// Entity class attributions alternate between each rival class and removal;
/// region attributions remove or reclassify every witness inside the region.
pub fn falsifying_interventions(
    world: &WorldState,
    prop: &Proposition,
    rivals: &[EntityClass],
) -> Result<Vec<Vec<Intervention>>, EpistemicError> {
    let invalid = |why: &str| EpistemicError::InvalidIntervention(format!("{prop}: {why}"));
    match (&prop.subject, &prop.predicate) {
        (Subject::Entity(id), Predicate::Class(_)) => {
            if world.entity(id).is_none() {
                return Err(invalid("subject absent from world"));
            }
            let mut out: Vec<Vec<Intervention>> = rivals
                .iter()
                .map(|c| {
                    vec![Intervention::ReplaceClass {
                        target: id.clone(),
                        class: *c,
                    }]
                })
                .collect();
            out.push(vec![Intervention::RemoveEntity { target: id.clone() }]);
            Ok(out)
        }
        (Subject::Entity(id), Predicate::Within(_)) => {
            if world.entity(id).is_none() {
                return Err(invalid("subject absent from world"));
            }
            Ok(vec![vec![Intervention::RemoveEntity {
                target: id.clone(),
            }]])
        }
        (Subject::Region(region), Predicate::Class(class)) => {
            let witnesses: Vec<_> = world
                .entities()
                .filter(|e| e.true_class == *class && region.contains(e.position))
                .map(|e| e.id.clone())
                .collect();
            if witnesses.is_empty() {
                return Err(invalid("no witness to remove"));
            }
            let mut out: Vec<Vec<Intervention>> = rivals
                .iter()
                .map(|c| {
                    witnesses
                        .iter()
                        .map(|w| Intervention::ReplaceClass {
                            target: w.clone(),
                            class: *c,
                        })
                        .collect()
                })
                .collect();
            out.push(
                witnesses
                    .iter()
                    .map(|w| Intervention::RemoveEntity { target: w.clone() })
                    .collect(),
            );
            Ok(out)
        }
        (Subject::Region(region), Predicate::Within(inner)) => {
            let witnesses: Vec<_> = world
                .entities()
                .filter(|e| region.contains(e.position) && inner.contains(e.position))
                .map(|e| Intervention::RemoveEntity {
                    target: e.id.clone(),
                })
                .collect();
            if witnesses.is_empty() {
                return Err(invalid("no witness to remove"));
            }
            Ok(vec![witnesses])
        }
    }
}

/// Nozick tracking by counterfactual resimulation.
///
/// Condition (c) forks worlds where `prop` is false and counts replays that do
/// not end in Belief; condition (d) forks truth-preserving worlds with fresh
/// randomness and counts replays that do end in Belief.
pub fn tracking_check(
    agent: &dyn ReplayableAgent,
    prop: &Proposition,
    world: &WorldState,
    n_samples: usize,
    seed: u64,
) -> Result<TrackingResult, EpistemicError> {
    if n_samples == 0 {
        return Err(EpistemicError::InvalidIntervention(
            "tracking needs at least one sample".into(),
        ));
    }
    let falsifiers = falsifying_interventions(world, prop, &agent.rival_classes(prop))?;
    let mut c_pass = 0usize;
    let mut d_pass = 0usize;
    for i in 0..n_samples as u64 {
        let edits = &falsifiers[i as usize % falsifiers.len()];
        let fork = world.fork_all(edits, derive_indexed(seed, "track/c/fork", i))?;
        let att = agent.replay_attitude(&fork, prop, derive_indexed(seed, "track/c/run", i))?;
        if att != DoxasticAttitude::Belief {
            c_pass += 1;
        }
        let same = world.fork_all(&[], derive_indexed(seed, "track/d/fork", i))?;
        let att = agent.replay_attitude(&same, prop, derive_indexed(seed, "track/d/run", i))?;
        if att == DoxasticAttitude::Belief {
            d_pass += 1;
        }
    }
    let n = n_samples as f64;
    Ok(TrackingResult::new(
        c_pass as f64 / n,
        d_pass as f64 / n,
        n_samples,
    ))
}
