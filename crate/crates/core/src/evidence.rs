//! Evidence channels with stationary confusion models, availability,
//! degradation and undetected adversarial spoofing.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doxastics::Subject;
use crate::rng;
use crate::worldsim::{EntityClass, EntityId, WorldState};

/// Confusion rows must sum to one within this tolerance.
pub const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvidenceError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("no likelihood for hypothesis {0}")]
    UnknownHypothesis(EntityClass),
    #[error("channel `{channel}`: {reason}")]
    InvalidChannel { channel: ChannelId, reason: String },
    #[error("empty tick window [{start}, {end}]")]
    EmptyWindow { start: u64, end: u64 },
    #[error("probability {0} outside [0,1]")]
    InvalidProbability(f64),
    #[error("channel `{channel}` has no confusion row for true class {class}")]
    MissingRow {
        channel: ChannelId,
        class: EntityClass,
    },
    #[error("channel `{channel}` report {report} has zero likelihood under every hypothesis")]
    ZeroLikelihood {
        channel: ChannelId,
        report: EntityClass,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelId(pub String);

impl ChannelId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identifier linking reports to the reliability ledger.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub String);

impl ProcessId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `P(reported | true)` rows keyed by true class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix(BTreeMap<EntityClass, BTreeMap<EntityClass, f64>>);

impl ConfusionMatrix {
    pub fn new(rows: BTreeMap<EntityClass, BTreeMap<EntityClass, f64>>) -> Result<Self, String> {
        if rows.is_empty() {
            return Err("confusion matrix has no rows".into());
        }
        for (truth, row) in &rows {
            if row.values().any(|p| !(0.0..=1.0).contains(p) || p.is_nan()) {
                return Err(format!("row {truth} has an entry outside [0,1]"));
            }
            let sum: f64 = row.values().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(format!("row {truth} sums to {sum}"));
            }
        }
        Ok(Self(rows))
    }

    pub fn identity(classes: &[EntityClass]) -> Self {
        Self(
            classes
                .iter()
                .map(|c| (*c, [(*c, 1.0)].into_iter().collect()))
                .collect(),
        )
    }

    /// Symmetric model: correct with `accuracy`, errors spread evenly.
    pub fn symmetric(classes: &[EntityClass], accuracy: f64) -> Result<Self, String> {
        let k = classes.len();
        if k < 2 {
            return Err("need at least two classes".into());
        }
        let off = (1.0 - accuracy) / (k - 1) as f64;
        let rows = classes
            .iter()
            .map(|t| {
                (
                    *t,
                    classes
                        .iter()
                        .map(|r| (*r, if r == t { accuracy } else { off }))
                        .collect(),
                )
            })
            .collect();
        Self::new(rows)
    }

    pub fn row(&self, truth: EntityClass) -> Option<&BTreeMap<EntityClass, f64>> {
        self.0.get(&truth)
    }

    pub fn true_classes(&self) -> impl Iterator<Item = EntityClass> + '_ {
        self.0.keys().copied()
    }

    pub fn get(&self, truth: EntityClass, reported: EntityClass) -> f64 {
        self.0
            .get(&truth)
            .and_then(|r| r.get(&reported))
            .copied()
            .unwrap_or(0.0)
    }

    /// Likelihood of `reported` under every true class that has a row.
    pub fn likelihoods(&self, reported: EntityClass) -> BTreeMap<EntityClass, f64> {
        self.0
            .keys()
            .map(|t| (*t, self.get(*t, reported)))
            .collect()
    }

    /// Mixes every row toward uniform over its reported classes by `eps`.
    pub fn blurred(&self, eps: f64) -> Self {
        let rows = self
            .0
            .iter()
            .map(|(t, row)| {
                let classes: Vec<EntityClass> = self.0.keys().copied().collect();
                let k = classes.len() as f64;
                let mixed = classes
                    .iter()
                    .map(|r| {
                        (
                            *r,
                            (1.0 - eps) * row.get(r).copied().unwrap_or(0.0) + eps / k,
                        )
                    })
                    .collect();
                (*t, mixed)
            })
            .collect();
        Self(rows)
    }
}

/// Inclusive tick interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "(u64, u64)", into = "(u64, u64)")]
pub struct TickWindow {
    start: u64,
    end: u64,
}

impl TickWindow {
    pub fn new(start: u64, end: u64) -> Result<Self, EvidenceError> {
        if start > end {
            return Err(EvidenceError::EmptyWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: u64) -> bool {
        (self.start..=self.end).contains(&t)
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn end(&self) -> u64 {
        self.end
    }
}

impl TryFrom<(u64, u64)> for TickWindow {
    type Error = EvidenceError;

    fn try_from((s, e): (u64, u64)) -> Result<Self, Self::Error> {
        TickWindow::new(s, e)
    }
}

impl From<TickWindow> for (u64, u64) {
    fn from(w: TickWindow) -> Self {
        (w.start, w.end)
    }
}

/// Wholesale fabrication of a channel's output during a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoofRule {
    pub active_window: TickWindow,
    pub fabricated_report: EntityClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradeMode {
    Offline,
    ReducedAvailability(f64),
}

impl DegradeMode {
    pub fn reduced(p: f64) -> Result<Self, EvidenceError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(EvidenceError::InvalidProbability(p));
        }
        Ok(DegradeMode::ReducedAvailability(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr")]
pub struct Channel {
    pub id: ChannelId,
    pub process_id: ProcessId,
    pub confusion: ConfusionMatrix,
    pub availability: f64,
    pub compromise: Option<SpoofRule>,
    /// Feeds with the same tag are not independent of each other.
    pub shared_source: Option<String>,
}

#[derive(Deserialize)]
struct ChannelRepr {
    id: ChannelId,
    process_id: ProcessId,
    confusion: BTreeMap<EntityClass, BTreeMap<EntityClass, f64>>,
    #[serde(default = "full")]
    availability: f64,
    #[serde(default)]
    compromise: Option<SpoofRule>,
    #[serde(default)]
    shared_source: Option<String>,
}

fn full() -> f64 {
    1.0
}

impl TryFrom<ChannelRepr> for Channel {
    type Error = EvidenceError;

    fn try_from(r: ChannelRepr) -> Result<Self, Self::Error> {
        let confusion =
            ConfusionMatrix::new(r.confusion).map_err(|reason| EvidenceError::InvalidChannel {
                channel: r.id.clone(),
                reason,
            })?;
        let mut c = Channel::new(r.id, r.process_id, confusion, r.availability)?;
        c.compromise = r.compromise;
        c.shared_source = r.shared_source;
        Ok(c)
    }
}

impl Channel {
    pub fn new(
        id: ChannelId,
        process_id: ProcessId,
        confusion: ConfusionMatrix,
        availability: f64,
    ) -> Result<Self, EvidenceError> {
        if !(0.0..=1.0).contains(&availability) {
            return Err(EvidenceError::InvalidProbability(availability));
        }
        Ok(Self {
            id,
            process_id,
            confusion,
            availability,
            compromise: None,
            shared_source: None,
        })
    }

    /// Always-available symmetric channel; `process` defaults to the channel id.
    pub fn symmetric(id: &str, classes: &[EntityClass], accuracy: f64) -> Self {
        let confusion = ConfusionMatrix::symmetric(classes, accuracy).expect("valid accuracy");
        Channel::new(ChannelId::new(id), ProcessId::new(id), confusion, 1.0).expect("valid channel")
    }

    pub fn with_process(mut self, process: &str) -> Self {
        self.process_id = ProcessId::new(process);
        self
    }

    pub fn with_shared_source(mut self, tag: &str) -> Self {
        self.shared_source = Some(tag.to_owned());
        self
    }

    pub fn spoof(&self, rule: SpoofRule) -> Channel {
        let mut c = self.clone();
        c.compromise = Some(rule);
        c
    }

    pub fn degrade(&self, mode: DegradeMode) -> Channel {
        let mut c = self.clone();
        c.availability = match mode {
            DegradeMode::Offline => 0.0,
            DegradeMode::ReducedAvailability(p) => p,
        };
        c
    }

    pub fn is_spoofed_at(&self, tick: u64) -> bool {
        self.compromise
            .as_ref()
            .is_some_and(|r| r.active_window.contains(tick))
    }

    /// One observation attempt of `subject` at the world's current tick.
    ///
    /// An active spoof answers for the subject whether or not it exists; an
    /// honest channel needs the subject to be present. Likelihoods always come
    /// from the nominal confusion model.
    pub fn observe(
        &self,
        world: &WorldState,
        subject: &EntityId,
        seed: u64,
    ) -> Result<Option<EvidenceItem>, EvidenceError> {
        let tick = world.time();
        let mut rng = rng::stream(seed, &format!("observe/{}", self.id));
        let spoofed = self
            .compromise
            .as_ref()
            .filter(|r| r.active_window.contains(tick));
        let truth = match spoofed {
            Some(_) => None,
            None => Some(
                world
                    .entity(subject)
                    .ok_or_else(|| EvidenceError::UnknownEntity(subject.clone()))?
                    .true_class,
            ),
        };
        let available: f64 = rng.random();
        if available >= self.availability {
            return Ok(None);
        }
        let reported = match (spoofed, truth) {
            (Some(rule), _) => rule.fabricated_report,
            (None, Some(t)) => {
                let row = self
                    .confusion
                    .row(t)
                    .ok_or_else(|| EvidenceError::MissingRow {
                        channel: self.id.clone(),
                        class: t,
                    })?;
                sample_row(row, rng.random())
            }
            (None, None) => unreachable!("honest observation always resolves truth"),
        };
        let likelihoods = self.confusion.likelihoods(reported);
        if likelihoods.values().all(|l| *l <= 0.0) {
            return Err(EvidenceError::ZeroLikelihood {
                channel: self.id.clone(),
                report: reported,
            });
        }
        Ok(Some(EvidenceItem {
            channel_id: self.id.clone(),
            process_id: self.process_id.clone(),
            tick,
            subject: Subject::Entity(subject.clone()),
            reported_class: reported,
            likelihoods,
            shared_source: self.shared_source.clone(),
        }))
    }
}

fn sample_row(row: &BTreeMap<EntityClass, f64>, u: f64) -> EntityClass {
    let mut acc = 0.0;
    let mut last = None;
    for (class, p) in row {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(*class);
        if u < acc {
            return *class;
        }
    }
    last.expect("confusion rows carry positive mass")
}

/// A single report with its likelihood under each hypothesis class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub channel_id: ChannelId,
    pub process_id: ProcessId,
    pub tick: u64,
    pub subject: Subject,
    pub reported_class: EntityClass,
    pub likelihoods: BTreeMap<EntityClass, f64>,
    pub shared_source: Option<String>,
}

impl EvidenceItem {
    pub fn id(&self) -> String {
        format!("{}@{}:{}", self.channel_id, self.tick, self.subject)
    }

    pub fn likelihood_of(&self, hypothesis: EntityClass) -> Result<f64, EvidenceError> {
        self.likelihoods
            .get(&hypothesis)
            .copied()
            .ok_or(EvidenceError::UnknownHypothesis(hypothesis))
    }

    /// Independence group: the shared-source tag when set, else the channel.
    pub fn source_key(&self) -> String {
        match &self.shared_source {
            Some(tag) => format!("shared:{tag}"),
            None => format!("channel:{}", self.channel_id),
        }
    }
}

/// Change applied to a channel from a tick onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelChange {
    Degrade(DegradeMode),
    Spoof(SpoofRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledChange {
    pub channel: ChannelId,
    pub from_tick: u64,
    #[serde(default)]
    pub until_tick: Option<u64>,
    pub change: ChannelChange,
}

impl ScheduledChange {
    fn active(&self, tick: u64) -> bool {
        tick >= self.from_tick && self.until_tick.is_none_or(|u| tick <= u)
    }
}

/// Channels plus their degrade/spoof schedule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelSet {
    channels: BTreeMap<ChannelId, Channel>,
    schedule: Vec<ScheduledChange>,
}

impl ChannelSet {
    pub fn new(
        channels: Vec<Channel>,
        schedule: Vec<ScheduledChange>,
    ) -> Result<Self, EvidenceError> {
        let mut map = BTreeMap::new();
        for c in channels {
            if map.contains_key(&c.id) {
                return Err(EvidenceError::InvalidChannel {
                    channel: c.id.clone(),
                    reason: "duplicate channel id".into(),
                });
            }
            map.insert(c.id.clone(), c);
        }
        if let Some(s) = schedule.iter().find(|s| !map.contains_key(&s.channel)) {
            return Err(EvidenceError::InvalidChannel {
                channel: s.channel.clone(),
                reason: "schedule names an undeclared channel".into(),
            });
        }
        Ok(Self {
            channels: map,
            schedule,
        })
    }

    pub fn get(&self, id: &ChannelId) -> Option<&Channel> {
        self.channels.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &ChannelId> {
        self.channels.keys()
    }

    /// Channel as configured at `tick`, with scheduled changes applied in order.
    pub fn at(&self, id: &ChannelId, tick: u64) -> Option<Channel> {
        let base = self.channels.get(id)?;
        let out = self
            .schedule
            .iter()
            .filter(|s| &s.channel == id && s.active(tick))
            .fold(base.clone(), |c, s| match &s.change {
                ChannelChange::Degrade(mode) => c.degrade(*mode),
                ChannelChange::Spoof(rule) => c.spoof(rule.clone()),
            });
        Some(out)
    }

    pub fn map_channels(&self, f: impl Fn(&Channel) -> Channel) -> ChannelSet {
        ChannelSet {
            channels: self
                .channels
                .iter()
                .map(|(k, c)| (k.clone(), f(c)))
                .collect(),
            schedule: self.schedule.clone(),
        }
    }
}
