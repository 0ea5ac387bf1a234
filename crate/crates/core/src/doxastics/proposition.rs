use std::fmt;

use serde::{Deserialize, Serialize};

use crate::worldsim::{EntityClass, EntityId, Region};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Entity(EntityId),
    Region(Region),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Entity(id) => write!(f, "{id}"),
            Subject::Region(r) => write!(f, "region{r}"),
        }
    }
}

impl From<&str> for Subject {
    fn from(s: &str) -> Self {
        Subject::Entity(EntityId::new(s))
    }
}

impl From<EntityId> for Subject {
    fn from(id: EntityId) -> Self {
        Subject::Entity(id)
    }
}

/// What is attributed to the subject.
///
/// For a region subject, `Class(c)` reads existentially: some `c` is inside.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Class(EntityClass),
    Within(Region),
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum TimeScope {
    #[default]
    Always,
    Tick(u64),
    Interval {
        from: u64,
        to: u64,
    },
}

impl TimeScope {
    pub fn contains(&self, t: u64) -> bool {
        match *self {
            TimeScope::Always => true,
            TimeScope::Tick(k) => k == t,
            TimeScope::Interval { from, to } => (from..=to).contains(&t),
        }
    }
}

impl fmt::Display for TimeScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeScope::Always => f.write_str("always"),
            TimeScope::Tick(t) => write!(f, "t{t}"),
            TimeScope::Interval { from, to } => write!(f, "t[{from},{to}]"),
        }
    }
}

/// Class attribution over an entity or region at a time scope.
///
/// Structural equality is identity: two propositions built from the same
/// parts compare equal and order identically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Proposition {
    pub subject: Subject,
    pub predicate: Predicate,
    #[serde(default)]
    pub scope: TimeScope,
}

impl Proposition {
    pub fn new(subject: Subject, predicate: Predicate) -> Self {
        Self {
            subject,
            predicate,
            scope: TimeScope::Always,
        }
    }

    pub fn class_of(entity: impl Into<EntityId>, class: EntityClass) -> Self {
        Self::new(Subject::Entity(entity.into()), Predicate::Class(class))
    }

    pub fn present(region: Region, class: EntityClass) -> Self {
        Self::new(Subject::Region(region), Predicate::Class(class))
    }

    pub fn within(entity: impl Into<EntityId>, region: Region) -> Self {
        Self::new(Subject::Entity(entity.into()), Predicate::Within(region))
    }

    pub fn scoped(mut self, scope: TimeScope) -> Self {
        self.scope = scope;
        self
    }

    /// Class attributed, when the predicate is a class.
    pub fn class(&self) -> Option<EntityClass> {
        match self.predicate {
            Predicate::Class(c) => Some(c),
            Predicate::Within(_) => None,
        }
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.subject, &self.predicate) {
            (Subject::Entity(id), Predicate::Class(c)) => write!(f, "{id} is {c}")?,
            (Subject::Region(r), Predicate::Class(c)) => write!(f, "{c} in {r}")?,
            (s, Predicate::Within(r)) => write!(f, "{s} within {r}")?,
        }
        if self.scope != TimeScope::Always {
            write!(f, " @{}", self.scope)?;
        }
        Ok(())
    }
}
