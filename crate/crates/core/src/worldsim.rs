//! Ground truth: entities on a discrete 2-D grid, a tick clock, scripted and
//! luck-tagged exogenous events, and interventionist counterfactual forks.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doxastics::{Predicate, Proposition, Subject};
use crate::rng::StreamId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("duplicate entity `{0}`")]
    DuplicateEntity(EntityId),
    #[error("invalid intervention: {0}")]
    InvalidIntervention(String),
    #[error("proposition scoped to {scope} evaluated at tick {time}")]
    OutOfScope { scope: String, time: u64 },
    #[error("event `{0}`: {1}")]
    InvalidEvent(EventId, String),
}

/// Identifier of an entity within one world.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub String);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EventId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Ground-truth class of an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityClass {
    Civilian,
    Belligerent,
    ProtectedObject,
    FriendlyCombatant,
}

impl EntityClass {
    pub const ALL: [EntityClass; 4] = [
        EntityClass::Civilian,
        EntityClass::Belligerent,
        EntityClass::ProtectedObject,
        EntityClass::FriendlyCombatant,
    ];

    /// Classes whose harm counts as collateral damage.
    pub fn is_protected(self) -> bool {
        matches!(self, EntityClass::Civilian | EntityClass::ProtectedObject)
    }
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityClass::Civilian => "Civilian",
            EntityClass::Belligerent => "Belligerent",
            EntityClass::ProtectedObject => "ProtectedObject",
            EntityClass::FriendlyCombatant => "FriendlyCombatant",
        };
        f.write_str(s)
    }
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct GridPos {
    pub x: i64,
    pub y: i64,
}

impl GridPos {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn offset(self, d: GridPos) -> GridPos {
        GridPos::new(self.x + d.x, self.y + d.y)
    }

    pub fn dist2(self, other: GridPos) -> i64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: GridPos) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }

    pub fn norm(self) -> f64 {
        self.dist(GridPos::default())
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Closed Euclidean disc on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Region {
    pub center: GridPos,
    pub radius: u32,
}

impl Region {
    pub const fn new(center: GridPos, radius: u32) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: GridPos) -> bool {
        let r = i64::from(self.radius);
        self.center.dist2(p) <= r * r
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}r{}", self.center, self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub true_class: EntityClass,
    pub position: GridPos,
    #[serde(default)]
    pub motion: GridPos,
    /// Whether the entity can change course (used by kinematic envelopes).
    #[serde(default)]
    pub maneuverable: bool,
}

impl Entity {
    pub fn new(id: impl Into<String>, class: EntityClass, position: GridPos) -> Self {
        Self {
            id: EntityId::new(id),
            true_class: class,
            position,
            motion: GridPos::default(),
            maneuverable: false,
        }
    }

    pub fn moving(mut self, motion: GridPos) -> Self {
        self.motion = motion;
        self
    }

    pub fn maneuverable(mut self, yes: bool) -> Self {
        self.maneuverable = yes;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventEffect {
    Spawn(Entity),
    Remove(EntityId),
    Displace { entity: EntityId, by: GridPos },
    SetMotion { entity: EntityId, motion: GridPos },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousEvent {
    pub id: EventId,
    pub due: u64,
    /// `true` for exogenous chance (a wind gust), `false` for scripted.
    pub luck: bool,
    /// Probability the event fires when due; scripted events always fire.
    #[serde(default = "one")]
    pub chance: f64,
    pub effect: EventEffect,
}

fn one() -> f64 {
    1.0
}

impl ExogenousEvent {
    pub fn scripted(id: &str, due: u64, effect: EventEffect) -> Self {
        Self {
            id: id.into(),
            due,
            luck: false,
            chance: 1.0,
            effect,
        }
    }

    pub fn luck(id: &str, due: u64, chance: f64, effect: EventEffect) -> Self {
        Self {
            id: id.into(),
            due,
            luck: true,
            chance,
            effect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intervention {
    ReplaceClass {
        target: EntityId,
        class: EntityClass,
    },
    RemoveEntity {
        target: EntityId,
    },
    AddEntity {
        entity: Entity,
    },
    SuppressEvent {
        target: EventId,
    },
}

/// Raw serialized form; converted through validation.
#[derive(Deserialize)]
struct WorldRepr {
    #[serde(default)]
    time: u64,
    stream: StreamId,
    entities: Vec<Entity>,
    #[serde(default)]
    events: Vec<ExogenousEvent>,
}

/// Ground truth at one tick.
///
/// Entities are kept sorted by id and events by `(due, id)`, so the
/// serialized form is canonical: byte equality implies state equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorldRepr")]
pub struct WorldState {
    time: u64,
    stream: StreamId,
    #[serde(serialize_with = "serialize_entities")]
    entities: BTreeMap<EntityId, Entity>,
    events: Vec<ExogenousEvent>,
}

fn serialize_entities<S: serde::Serializer>(
    m: &BTreeMap<EntityId, Entity>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.values())
}

impl TryFrom<WorldRepr> for WorldState {
    type Error = WorldError;

    fn try_from(r: WorldRepr) -> Result<Self, Self::Error> {
        let mut w = WorldState::new(r.entities, r.events, r.stream.seed)?;
        w.time = r.time;
        Ok(w)
    }
}

impl WorldState {
    pub fn new(
        entities: Vec<Entity>,
        events: Vec<ExogenousEvent>,
        seed: u64,
    ) -> Result<Self, WorldError> {
        let mut map = BTreeMap::new();
        for e in entities {
            if map.contains_key(&e.id) {
                return Err(WorldError::DuplicateEntity(e.id));
            }
            map.insert(e.id.clone(), e);
        }
        for ev in &events {
            if !(0.0..=1.0).contains(&ev.chance) {
                return Err(WorldError::InvalidEvent(
                    ev.id.clone(),
                    "chance outside [0,1]".into(),
                ));
            }
            if !ev.luck && ev.chance != 1.0 {
                return Err(WorldError::InvalidEvent(
                    ev.id.clone(),
                    "scripted events always fire".into(),
                ));
            }
        }
        let mut w = Self {
            time: 0,
            stream: StreamId::new(seed),
            entities: map,
            events,
        };
        w.sort_events();
        Ok(w)
    }

    fn sort_events(&mut self) {
        self.events
            .sort_by(|a, b| (a.due, &a.id).cmp(&(b.due, &b.id)));
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn events(&self) -> &[ExogenousEvent] {
        &self.events
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("world serialization is infallible")
    }

    /// Advances the clock by `ticks`, applying motion then due events each tick.
    ///
    /// Luck-tagged events are sampled from the world stream at a point keyed
    /// by the event id and its due tick, so the outcome does not depend on
    /// how the advance is chunked.
    pub fn advance(&self, ticks: u64) -> WorldState {
        let mut w = self.clone();
        for _ in 0..ticks {
            w.step();
        }
        w
    }

    /// Advances to an absolute tick (no-op if already there or beyond).
    pub fn advance_to(&self, tick: u64) -> WorldState {
        self.advance(tick.saturating_sub(self.time))
    }

    fn step(&mut self) {
        self.time += 1;
        for e in self.entities.values_mut() {
            e.position = e.position.offset(e.motion);
        }
        let now = self.time;
        let split = self.events.partition_point(|ev| ev.due <= now);
        let due: Vec<ExogenousEvent> = self.events.drain(..split).collect();
        for ev in due {
            let fires =
                !ev.luck || self.stream.uniform(&format!("event/{}/{}", ev.id, ev.due)) < ev.chance;
            if fires {
                self.apply_effect(ev.effect);
            }
        }
    }

    fn apply_effect(&mut self, effect: EventEffect) {
        match effect {
            EventEffect::Spawn(e) => {
                // ids stay unique: a spawn onto an existing id is dropped
                self.entities.entry(e.id.clone()).or_insert(e);
            }
            EventEffect::Remove(id) => {
                self.entities.remove(&id);
            }
            EventEffect::Displace { entity, by } => {
                if let Some(e) = self.entities.get_mut(&entity) {
                    e.position = e.position.offset(by);
                }
            }
            EventEffect::SetMotion { entity, motion } => {
                if let Some(e) = self.entities.get_mut(&entity) {
                    e.motion = motion;
                }
            }
        }
    }

    /// Ground-truth valuation of `prop` at the current tick.
    pub fn truth_of(&self, prop: &Proposition) -> Result<bool, WorldError> {
        if !prop.scope.contains(self.time) {
            return Err(WorldError::OutOfScope {
                scope: prop.scope.to_string(),
                time: self.time,
            });
        }
        let lookup = |id: &EntityId| {
            self.entities
                .get(id)
                .ok_or_else(|| WorldError::UnknownEntity(id.clone()))
        };
        Ok(match (&prop.subject, &prop.predicate) {
            (Subject::Entity(id), Predicate::Class(c)) => lookup(id)?.true_class == *c,
            (Subject::Entity(id), Predicate::Within(r)) => r.contains(lookup(id)?.position),
            (Subject::Region(r), Predicate::Class(c)) => self
                .entities
                .values()
                .any(|e| e.true_class == *c && r.contains(e.position)),
            (Subject::Region(r), Predicate::Within(inner)) => self
                .entities
                .values()
                .any(|e| r.contains(e.position) && inner.contains(e.position)),
        })
    }

    /// Copy of the world with one surgical edit and a derived random stream.
    pub fn fork_counterfactual(
        &self,
        intervention: &Intervention,
        seed: u64,
    ) -> Result<WorldState, WorldError> {
        let mut w = self.clone();
        w.apply_intervention(intervention)?;
        w.stream = self.stream.child(&format!("fork/{seed}"));
        Ok(w)
    }

    /// Forks with a sequence of interventions applied in order.
    pub fn fork_all(
        &self,
        interventions: &[Intervention],
        seed: u64,
    ) -> Result<WorldState, WorldError> {
        let mut w = self.clone();
        for iv in interventions {
            w.apply_intervention(iv)?;
        }
        w.stream = self.stream.child(&format!("fork/{seed}"));
        Ok(w)
    }

    fn apply_intervention(&mut self, iv: &Intervention) -> Result<(), WorldError> {
        let missing = |what: &str, id: &dyn fmt::Display| {
            WorldError::InvalidIntervention(format!("{what} `{id}` not in source world"))
        };
        match iv {
            Intervention::ReplaceClass { target, class } => {
                let e = self
                    .entities
                    .get_mut(target)
                    .ok_or_else(|| missing("entity", target))?;
                e.true_class = *class;
            }
            Intervention::RemoveEntity { target } => {
                self.entities
                    .remove(target)
                    .ok_or_else(|| missing("entity", target))?;
            }
            Intervention::AddEntity { entity } => {
                if self.entities.contains_key(&entity.id) {
                    return Err(WorldError::InvalidIntervention(format!(
                        "entity `{}` already exists",
                        entity.id
                    )));
                }
                self.entities.insert(entity.id.clone(), entity.clone());
            }
            Intervention::SuppressEvent { target } => {
                let before = self.events.len();
                self.events.retain(|ev| &ev.id != target);
                if self.events.len() == before {
                    return Err(missing("event", target));
                }
            }
        }
        Ok(())
    }

    /// Copy of the world with every luck-tagged event removed.
    pub fn strip_luck(&self) -> WorldState {
        let mut w = self.clone();
        w.events.retain(|ev| !ev.luck);
        w
    }
}
