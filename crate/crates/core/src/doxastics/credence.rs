use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::proposition::{Predicate, Proposition, Subject, TimeScope};
use super::DoxasticError;
use crate::evidence::EvidenceItem;
use crate::worldsim::EntityClass;

/// Partition sums must hold to this tolerance after every update.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Declared exhaustive, mutually exclusive class hypotheses for one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr")]
pub struct Partition {
    subject: Subject,
    hypotheses: Vec<EntityClass>,
    scope: TimeScope,
}

#[derive(Deserialize)]
struct PartitionRepr {
    subject: Subject,
    hypotheses: Vec<EntityClass>,
    #[serde(default)]
    scope: TimeScope,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = DoxasticError;

    fn try_from(r: PartitionRepr) -> Result<Self, Self::Error> {
        Partition::scoped(r.subject, r.hypotheses, r.scope)
    }
}

impl Partition {
    pub fn new(
        subject: impl Into<Subject>,
        hypotheses: Vec<EntityClass>,
    ) -> Result<Self, DoxasticError> {
        Self::scoped(subject.into(), hypotheses, TimeScope::Always)
    }

    pub fn scoped(
        subject: Subject,
        mut hypotheses: Vec<EntityClass>,
        scope: TimeScope,
    ) -> Result<Self, DoxasticError> {
        let n = hypotheses.len();
        hypotheses.sort();
        hypotheses.dedup();
        if hypotheses.len() != n || n < 2 {
            return Err(DoxasticError::InvalidPartition(format!(
                "{subject}: need at least two distinct hypotheses"
            )));
        }
        Ok(Self {
            subject,
            hypotheses,
            scope,
        })
    }

    /// Binary civilian/belligerent partition used throughout the scenarios.
    pub fn civilian_or_belligerent(subject: impl Into<Subject>) -> Self {
        Self::new(
            subject,
            vec![EntityClass::Civilian, EntityClass::Belligerent],
        )
        .expect("two distinct hypotheses")
    }

    pub fn subject(&self) -> &Subject {
        &self.subject
    }

    pub fn hypotheses(&self) -> &[EntityClass] {
        &self.hypotheses
    }

    pub fn scope(&self) -> TimeScope {
        self.scope
    }

    pub fn proposition(&self, h: EntityClass) -> Proposition {
        Proposition {
            subject: self.subject.clone(),
            predicate: Predicate::Class(h),
            scope: self.scope,
        }
    }

    pub fn propositions(&self) -> impl Iterator<Item = Proposition> + '_ {
        self.hypotheses.iter().map(|h| self.proposition(*h))
    }

    pub fn contains(&self, prop: &Proposition) -> bool {
        prop.subject == self.subject
            && prop.scope == self.scope
            && matches!(prop.predicate, Predicate::Class(c) if self.hypotheses.contains(&c))
    }

    fn covers(&self, subject: &Subject, tick: u64) -> bool {
        &self.subject == subject && self.scope.contains(tick)
    }
}

/// Degrees of belief over declared partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct CredenceFunction {
    entries: BTreeMap<Proposition, f64>,
    partitions: Vec<Partition>,
}

impl CredenceFunction {
    /// Uniform priors, overridden partition by partition from `spec`.
    ///
    /// A partially specified partition is rejected; every specified value
    /// must sit strictly inside (0,1).
    pub fn prior_init(
        partitions: &[Partition],
        spec: &BTreeMap<Proposition, f64>,
    ) -> Result<Self, DoxasticError> {
        let mut seen = BTreeSet::new();
        for p in partitions {
            for prop in p.propositions() {
                if !seen.insert(prop.clone()) {
                    return Err(DoxasticError::InvalidPartition(format!(
                        "`{prop}` declared in two partitions"
                    )));
                }
            }
        }
        if let Some(stray) = spec.keys().find(|k| !seen.contains(*k)) {
            return Err(DoxasticError::UndeclaredProposition(stray.clone()));
        }

        let mut entries = BTreeMap::new();
        for p in partitions {
            let given: Vec<(Proposition, Option<f64>)> = p
                .propositions()
                .map(|q| {
                    let v = spec.get(&q).copied();
                    (q, v)
                })
                .collect();
            let n_given = given.iter().filter(|(_, v)| v.is_some()).count();
            if n_given == 0 {
                let u = 1.0 / p.hypotheses.len() as f64;
                entries.extend(given.into_iter().map(|(q, _)| (q, u)));
                continue;
            }
            if n_given != given.len() {
                return Err(DoxasticError::NonNormalizedPrior {
                    subject: p.subject.to_string(),
                    sum: given.iter().filter_map(|(_, v)| *v).sum(),
                });
            }
            let values: Vec<f64> = given.iter().map(|(_, v)| v.unwrap_or_default()).collect();
            let sum: f64 = values.iter().sum();
            if values.iter().any(|v| !(0.0..=1.0).contains(v))
                || (sum - 1.0).abs() > NORMALIZATION_TOL
            {
                return Err(DoxasticError::NonNormalizedPrior {
                    subject: p.subject.to_string(),
                    sum,
                });
            }
            if let Some((q, _)) = given
                .iter()
                .find(|(_, v)| matches!(v, Some(x) if *x <= 0.0 || *x >= 1.0))
            {
                return Err(DoxasticError::ZeroPriorOnContingent(q.clone()));
            }
            entries.extend(given.into_iter().map(|(q, v)| (q, v.unwrap_or_default())));
        }
        Ok(Self {
            entries,
            partitions: partitions.to_vec(),
        })
    }

    pub fn credence(&self, prop: &Proposition) -> Option<f64> {
        self.entries.get(prop).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Proposition, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn partition_for(&self, subject: &Subject, tick: u64) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.covers(subject, tick))
    }

    pub fn partition_containing(&self, prop: &Proposition) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.contains(prop))
    }

    /// `(hypothesis, credence)` pairs of one partition, in hypothesis order.
    pub fn distribution(&self, partition: &Partition) -> Vec<(EntityClass, f64)> {
        partition
            .hypotheses
            .iter()
            .map(|h| {
                (
                    *h,
                    self.entries
                        .get(&partition.proposition(*h))
                        .copied()
                        .unwrap_or(0.0),
                )
            })
            .collect()
    }

    /// Conditionalizes on one evidence item.
    ///
    /// `posterior(h) = prior(h) * L(h) / sum_h' prior(h') * L(h')`, restricted
    /// to the partition covering the item's subject at its tick.
    pub fn update_credence(&self, item: &EvidenceItem) -> Result<CredenceFunction, DoxasticError> {
        let partition = self
            .partition_for(&item.subject, item.tick)
            .ok_or_else(|| DoxasticError::NoPartition(item.subject.to_string()))?;
        let mut products = Vec::with_capacity(partition.hypotheses.len());
        for h in &partition.hypotheses {
            let l = *item
                .likelihoods
                .get(h)
                .ok_or_else(|| DoxasticError::PartitionMismatch {
                    subject: item.subject.to_string(),
                    missing: *h,
                })?;
            let prop = partition.proposition(*h);
            let prior = self.entries[&prop];
            products.push((prop, prior * l));
        }
        let z: f64 = products.iter().map(|(_, v)| v).sum();
        if z <= 0.0 || !z.is_finite() {
            return Err(DoxasticError::IncoherentEvidence(item.subject.to_string()));
        }
        let mut out = self.clone();
        for (prop, v) in products {
            out.entries.insert(prop, v / z);
        }
        Ok(out)
    }

    /// Largest deviation of any partition sum from 1.
    pub fn normalization_error(&self) -> f64 {
        self.partitions
            .iter()
            .map(|p| (self.distribution(p).iter().map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
