use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::worldsim::{EntityId, WorldState};

/// Observable kinematics of a contact relative to the defended platform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub range: Option<f64>,
    /// Change in range over the next tick; negative when closing.
    pub range_rate: Option<f64>,
    pub speed: Option<f64>,
    pub maneuverable: Option<bool>,
}

impl TrackState {
    pub fn from_world(
        world: &WorldState,
        reference: &EntityId,
        contact: &EntityId,
    ) -> Result<Self, PolicyError> {
        let missing = |id: &EntityId| PolicyError::MissingKinematics(format!("no track for {id}"));
        let r = world.entity(reference).ok_or_else(|| missing(reference))?;
        let c = world.entity(contact).ok_or_else(|| missing(contact))?;
        let now = r.position.dist(c.position);
        let next = r
            .position
            .offset(r.motion)
            .dist(c.position.offset(c.motion));
        Ok(TrackState {
            range: Some(now),
            range_rate: Some(next - now),
            speed: Some(c.motion.norm()),
            maneuverable: Some(c.maneuverable),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopePredicate {
    Closing,
    ManeuverCapable,
    VelocityBand { min: f64, max: f64 },
    RangeBelow { max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateResult {
    pub predicate: EnvelopePredicate,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRecord {
    pub track: TrackState,
    pub results: Vec<PredicateResult>,
    pub passed: bool,
}

impl EnvelopePredicate {
    pub fn eval(&self, t: &TrackState) -> Result<bool, PolicyError> {
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| PolicyError::MissingKinematics(format!("{field} required by {self:?}")))
        };
        Ok(match self {
            EnvelopePredicate::Closing => need(t.range_rate, "range_rate")? < 0.0,
            EnvelopePredicate::ManeuverCapable => t
                .maneuverable
                .ok_or_else(|| PolicyError::MissingKinematics("maneuverable required".into()))?,
            EnvelopePredicate::VelocityBand { min, max } => {
                let s = need(t.speed, "speed")?;
                *min <= s && s <= *max
            }
            EnvelopePredicate::RangeBelow { max } => need(t.range, "range")? < *max,
        })
    }
}

/// All predicates must pass; an empty envelope passes vacuously.
pub fn envelope_check(
    envelope: &[EnvelopePredicate],
    track: &TrackState,
) -> Result<EnvelopeRecord, PolicyError> {
    let results = envelope
        .iter()
        .map(|p| {
            Ok(PredicateResult {
                predicate: p.clone(),
                passed: p.eval(track)?,
            })
        })
        .collect::<Result<Vec<_>, PolicyError>>()?;
    let passed = results.iter().all(|r| r.passed);
    Ok(EnvelopeRecord {
        track: *track,
        results,
        passed,
    })
}
