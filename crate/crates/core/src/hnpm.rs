//! Hierarchically nested probabilistic models: a three-level discrete
//! hierarchy (abstract principles, theories about instance sets, particular
//! experiences) with exact inference.
//!
//! Level 2 is replicated once per instance set and every replica shares the
//! level-1 hypothesis, so what is learned about earlier sets constrains the
//! interpretation of a new one. Inference runs two ways: a factored sum over
//! level 1 with per-set sufficient statistics, and a brute-force enumeration
//! of the full joint kept as the reference.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epistemics::ProcessLedger;
use crate::evidence::ProcessId;

/// Rows and priors must sum to one within this tolerance.
pub const LEVEL_TOL: f64 = 1e-12;
/// Largest joint support the enumeration oracle accepts.
pub const SUPPORT_BOUND: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HnpmError {
    #[error("hierarchy is missing level {0}")]
    MissingLevel(u8),
    #[error("level {0} declared twice")]
    DuplicateLevel(u8),
    #[error("level {rank} {what} sums to {sum}, not 1")]
    NonNormalized { rank: u8, what: String, sum: f64 },
    #[error("level {rank}: {reason}")]
    Malformed { rank: u8, reason: String },
    #[error("observation value {value} outside level-3 support of size {size}")]
    InvalidObservation { value: usize, size: usize },
    #[error("observations have zero probability under the model")]
    ZeroProbabilityObservation,
    #[error("joint support {0} exceeds the enumeration bound")]
    SupportTooLarge(u64),
    #[error("no hierarchy configured")]
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisLevel {
    pub rank: u8,
    pub hypotheses: Vec<String>,
    /// Required at rank 1; informational elsewhere.
    #[serde(default)]
    pub prior: Vec<f64>,
    /// `link[i][j] = P(level rank+1 hypothesis j | this level's hypothesis i)`.
    #[serde(default)]
    pub link: Vec<Vec<f64>>,
}

fn check_distribution(rank: u8, what: String, d: &[f64]) -> Result<(), HnpmError> {
    if d.iter().any(|p| !(0.0..=1.0).contains(p) || p.is_nan()) {
        return Err(HnpmError::Malformed {
            rank,
            reason: format!("{what} has entries outside [0,1]"),
        });
    }
    let sum: f64 = d.iter().sum();
    if (sum - 1.0).abs() > LEVEL_TOL {
        return Err(HnpmError::NonNormalized { rank, what, sum });
    }
    Ok(())
}

/// A validated three-level hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HypothesisLevel>", into = "Vec<HypothesisLevel>")]
pub struct HnpmModel {
    levels: [HypothesisLevel; 3],
}

impl TryFrom<Vec<HypothesisLevel>> for HnpmModel {
    type Error = HnpmError;

    fn try_from(levels: Vec<HypothesisLevel>) -> Result<Self, Self::Error> {
        build_hierarchy(levels)
    }
}

impl From<HnpmModel> for Vec<HypothesisLevel> {
    fn from(m: HnpmModel) -> Self {
        m.levels.into()
    }
}

pub fn build_hierarchy(levels: Vec<HypothesisLevel>) -> Result<HnpmModel, HnpmError> {
    let mut by_rank: BTreeMap<u8, HypothesisLevel> = BTreeMap::new();
    for l in levels {
        if !(1..=3).contains(&l.rank) {
            return Err(HnpmError::Malformed {
                rank: l.rank,
                reason: "rank must be 1, 2 or 3".into(),
            });
        }
        if by_rank.contains_key(&l.rank) {
            return Err(HnpmError::DuplicateLevel(l.rank));
        }
        by_rank.insert(l.rank, l);
    }
    let mut take = |r: u8| by_rank.remove(&r).ok_or(HnpmError::MissingLevel(r));
    let levels = [take(1)?, take(2)?, take(3)?];
    for (i, l) in levels.iter().enumerate() {
        if l.hypotheses.is_empty() {
            return Err(HnpmError::Malformed {
                rank: l.rank,
                reason: "no hypotheses".into(),
            });
        }
        if i == 0 || !l.prior.is_empty() {
            if l.prior.len() != l.hypotheses.len() {
                return Err(HnpmError::Malformed {
                    rank: l.rank,
                    reason: "prior length mismatch".into(),
                });
            }
            check_distribution(l.rank, "prior".into(), &l.prior)?;
        }
        match levels.get(i + 1) {
            Some(next) => {
                if l.link.len() != l.hypotheses.len() {
                    return Err(HnpmError::Malformed {
                        rank: l.rank,
                        reason: "link needs one row per hypothesis".into(),
                    });
                }
                for (j, row) in l.link.iter().enumerate() {
                    if row.len() != next.hypotheses.len() {
                        return Err(HnpmError::Malformed {
                            rank: l.rank,
                            reason: format!(
                                "link row {j} has {} columns, expected {}",
                                row.len(),
                                next.hypotheses.len()
                            ),
                        });
                    }
                    check_distribution(l.rank, format!("link row {j}"), row)?;
                }
            }
            None if !l.link.is_empty() => {
                return Err(HnpmError::Malformed {
                    rank: 3,
                    reason: "bottom level has no link".into(),
                });
            }
            None => {}
        }
    }
    Ok(HnpmModel { levels })
}

/// One level-3 datum drawn from instance set `set`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub set: u32,
    pub value: usize,
}

impl Observation {
    pub fn new(set: u32, value: usize) -> Self {
        Self { set, value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetPosterior {
    /// Level-2 marginal for this set.
    pub theory: Vec<f64>,
    /// Posterior predictive of the next level-3 draw from this set.
    pub experience: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Abstract,
    Theory(u32),
    Experience(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTable {
    pub abstract_level: Vec<f64>,
    pub sets: BTreeMap<u32, SetPosterior>,
    /// Marginals for a set with no observations yet.
    pub fresh: SetPosterior,
    pub log_evidence: f64,
}

impl PosteriorTable {
    /// Marginal at one level; unobserved sets get the fresh-set marginal.
    pub fn level_posterior(&self, level: Level) -> &[f64] {
        let set = |s: u32| self.sets.get(&s).unwrap_or(&self.fresh);
        match level {
            Level::Abstract => &self.abstract_level,
            Level::Theory(s) => &set(s).theory,
            Level::Experience(s) => &set(s).experience,
        }
    }

    pub fn max_abs_diff(&self, other: &PosteriorTable) -> f64 {
        fn d(a: &[f64], b: &[f64]) -> f64 {
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        }
        if self.sets.keys().ne(other.sets.keys()) {
            return f64::INFINITY;
        }
        let mut m = d(&self.abstract_level, &other.abstract_level)
            .max(d(&self.fresh.theory, &other.fresh.theory))
            .max(d(&self.fresh.experience, &other.fresh.experience));
        for (k, s) in &self.sets {
            let o = &other.sets[k];
            m = m
                .max(d(&s.theory, &o.theory))
                .max(d(&s.experience, &o.experience));
        }
        m
    }
}

fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl HnpmModel {
    pub fn level(&self, rank: u8) -> &HypothesisLevel {
        &self.levels[usize::from(rank - 1)]
    }

    fn abstract_prior(&self) -> &[f64] {
        &self.levels[0].prior
    }

    fn theory_given(&self, h1: usize) -> &[f64] {
        &self.levels[0].link[h1]
    }

    fn experience_given(&self, h2: usize) -> &[f64] {
        &self.levels[1].link[h2]
    }

    fn sizes(&self) -> (usize, usize, usize) {
        (
            self.levels[0].hypotheses.len(),
            self.levels[1].hypotheses.len(),
            self.levels[2].hypotheses.len(),
        )
    }

    /// Same level-2 prior marginal, but with level 1 collapsed so instance
    /// sets no longer inform one another.
    pub fn flattened(&self) -> HnpmModel {
        let (n1, n2, _) = self.sizes();
        let marginal: Vec<f64> = (0..n2)
            .map(|j| {
                (0..n1)
                    .map(|i| self.abstract_prior()[i] * self.theory_given(i)[j])
                    .sum()
            })
            .collect();
        let z: f64 = marginal.iter().sum();
        let mut levels = self.levels.clone();
        levels[0] = HypothesisLevel {
            rank: 1,
            hypotheses: vec!["flat".into()],
            prior: vec![1.0],
            link: vec![marginal.iter().map(|m| m / z).collect()],
        };
        HnpmModel { levels }
    }

    /// Joint configurations the enumeration oracle would visit.
    pub fn support_size(&self, n_sets: usize) -> u64 {
        let (n1, n2, n3) = self.sizes();
        (n1 as u64)
            .saturating_mul((n2 as u64).saturating_pow(n_sets as u32))
            .saturating_mul(n3 as u64)
    }

    fn counts(&self, observations: &[Observation]) -> Result<BTreeMap<u32, Vec<u64>>, HnpmError> {
        let (_, _, n3) = self.sizes();
        let mut out: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
        for o in observations {
            if o.value >= n3 {
                return Err(HnpmError::InvalidObservation {
                    value: o.value,
                    size: n3,
                });
            }
            out.entry(o.set).or_insert_with(|| vec![0; n3])[o.value] += 1;
        }
        Ok(out)
    }

    /// `ln P(data_s | h2)` for every level-2 hypothesis.
    fn set_log_likelihood(&self, counts: &[u64]) -> Vec<f64> {
        let (_, n2, _) = self.sizes();
        (0..n2)
            .map(|h2| {
                counts
                    .iter()
                    .zip(self.experience_given(h2))
                    .filter(|(n, _)| **n > 0)
                    .map(|(n, p)| *n as f64 * p.ln())
                    .sum()
            })
            .collect()
    }

    /// Per `h1`: `ln P(h1) + sum_s ln sum_h2 P(h2|h1) P(data_s|h2)`, with the
    /// per-set level-2 log weights kept for later marginals.
    fn factored(&self, counts: &BTreeMap<u32, Vec<u64>>) -> (Vec<f64>, BTreeMap<u32, Vec<f64>>) {
        let (n1, _, _) = self.sizes();
        let set_ll: BTreeMap<u32, Vec<f64>> = counts
            .iter()
            .map(|(s, c)| (*s, self.set_log_likelihood(c)))
            .collect();
        let log_w = (0..n1)
            .map(|h1| {
                let mut w = self.abstract_prior()[h1].ln();
                for ll in set_ll.values() {
                    w += log_sum_exp(
                        self.theory_given(h1)
                            .iter()
                            .zip(ll)
                            .map(|(p, l)| p.ln() + l),
                    );
                }
                w
            })
            .collect();
        (log_w, set_ll)
    }

    fn abstract_posterior(&self, log_w: &[f64]) -> Result<(Vec<f64>, f64), HnpmError> {
        let log_z = log_sum_exp(log_w.iter().copied());
        if log_z == f64::NEG_INFINITY || log_z.is_nan() {
            return Err(HnpmError::ZeroProbabilityObservation);
        }
        Ok((log_w.iter().map(|w| (w - log_z).exp()).collect(), log_z))
    }

    /// `P(h2_s | h1, data_s)` for one set.
    fn theory_given_data(&self, h1: usize, ll: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .theory_given(h1)
            .iter()
            .zip(ll)
            .map(|(p, l)| p.ln() + l)
            .collect();
        let z = log_sum_exp(logs.iter().copied());
        if z == f64::NEG_INFINITY {
            return vec![0.0; logs.len()];
        }
        logs.iter().map(|x| (x - z).exp()).collect()
    }

    fn predictive(&self, theory: &[f64]) -> Vec<f64> {
        let (_, _, n3) = self.sizes();
        (0..n3)
            .map(|v| {
                theory
                    .iter()
                    .enumerate()
                    .map(|(h2, p)| p * self.experience_given(h2)[v])
                    .sum()
            })
            .collect()
    }

    /// Exact posterior by summing out level 1 over per-set sufficient statistics.
    pub fn hierarchical_update(
        &self,
        observations: &[Observation],
    ) -> Result<PosteriorTable, HnpmError> {
        let (n1, n2, _) = self.sizes();
        let counts = self.counts(observations)?;
        let (log_w, set_ll) = self.factored(&counts);
        let (post1, log_z) = self.abstract_posterior(&log_w)?;
        let mut sets = BTreeMap::new();
        for (s, ll) in &set_ll {
            let mut theory = vec![0.0; n2];
            for (h1, w) in post1.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                for (t, p) in theory.iter_mut().zip(self.theory_given_data(h1, ll)) {
                    *t += w * p;
                }
            }
            let experience = self.predictive(&theory);
            sets.insert(*s, SetPosterior { theory, experience });
        }
        let fresh_theory: Vec<f64> = (0..n2)
            .map(|h2| {
                (0..n1)
                    .map(|h1| post1[h1] * self.theory_given(h1)[h2])
                    .sum()
            })
            .collect();
        let fresh = SetPosterior {
            experience: self.predictive(&fresh_theory),
            theory: fresh_theory,
        };
        Ok(PosteriorTable {
            abstract_level: post1,
            sets,
            fresh,
            log_evidence: log_z,
        })
    }

    /// Posterior probability that every set in `sets` has its level-2
    /// hypothesis accepted by `accept`, jointly, given all observations.
    pub fn joint_set_mass(
        &self,
        observations: &[Observation],
        sets: &[u32],
        accept: &dyn Fn(usize) -> bool,
    ) -> Result<f64, HnpmError> {
        let (n2, counts) = (self.sizes().1, self.counts(observations)?);
        let (log_w, set_ll) = self.factored(&counts);
        let (post1, _) = self.abstract_posterior(&log_w)?;
        let wanted: BTreeSet<u32> = sets.iter().copied().collect();
        let flat = vec![0.0; n2];
        let mut mass = 0.0;
        for (h1, w) in post1.iter().enumerate() {
            let mut m = *w;
            for s in &wanted {
                let theory = self.theory_given_data(h1, set_ll.get(s).unwrap_or(&flat));
                m *= theory
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| accept(*j))
                    .map(|(_, p)| p)
                    .sum::<f64>();
            }
            mass += m;
        }
        Ok(mass)
    }
}

/// Reference inference: enumerate every joint configuration of level 1 and
/// one level-2 hypothesis per observed set, weight it by the product of all
/// conditional probabilities, then marginalize.
pub fn exact_posterior_oracle(
    model: &HnpmModel,
    observations: &[Observation],
) -> Result<PosteriorTable, HnpmError> {
    let (n1, n2, n3) = model.sizes();
    if let Some(o) = observations.iter().find(|o| o.value >= n3) {
        return Err(HnpmError::InvalidObservation {
            value: o.value,
            size: n3,
        });
    }
    let set_ids: Vec<u32> = observations
        .iter()
        .map(|o| o.set)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let support = model.support_size(set_ids.len());
    if support > SUPPORT_BOUND {
        return Err(HnpmError::SupportTooLarge(support));
    }
    let slot: BTreeMap<u32, usize> = set_ids.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let k = set_ids.len();

    let mut z = 0.0;
    let mut post1 = vec![0.0; n1];
    let mut theory = vec![vec![0.0; n2]; k];
    let mut experience = vec![vec![0.0; n3]; k];
    let mut fresh_theory = vec![0.0; n2];
    let mut fresh_experience = vec![0.0; n3];

    let mut assign = vec![0usize; k];
    for h1 in 0..n1 {
        loop {
            let mut w = model.abstract_prior()[h1];
            for h2 in &assign {
                w *= model.theory_given(h1)[*h2];
            }
            for o in observations {
                w *= model.experience_given(assign[slot[&o.set]])[o.value];
            }
            z += w;
            post1[h1] += w;
            for (i, h2) in assign.iter().enumerate() {
                theory[i][*h2] += w;
                for v in 0..n3 {
                    experience[i][v] += w * model.experience_given(*h2)[v];
                }
            }
            for h2 in 0..n2 {
                let p = w * model.theory_given(h1)[h2];
                fresh_theory[h2] += p;
                for v in 0..n3 {
                    fresh_experience[v] += p * model.experience_given(h2)[v];
                }
            }
            // mixed-radix increment over the per-set level-2 assignment
            let mut pos = 0;
            while pos < k {
                assign[pos] += 1;
                if assign[pos] < n2 {
                    break;
                }
                assign[pos] = 0;
                pos += 1;
            }
            if pos == k {
                break;
            }
        }
    }
    if z <= 0.0 {
        return Err(HnpmError::ZeroProbabilityObservation);
    }
    let norm = |v: Vec<f64>| v.into_iter().map(|x| x / z).collect::<Vec<f64>>();
    let sets = set_ids
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (
                *s,
                SetPosterior {
                    theory: norm(theory[i].clone()),
                    experience: norm(experience[i].clone()),
                },
            )
        })
        .collect();
    Ok(PosteriorTable {
        abstract_level: norm(post1),
        sets,
        fresh: SetPosterior {
            theory: norm(fresh_theory),
            experience: norm(fresh_experience),
        },
        log_evidence: z.ln(),
    })
}

/// Incrementally observed hierarchy; each update recomputes exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HnpmBelief {
    model: HnpmModel,
    observations: Vec<Observation>,
}

impl HnpmBelief {
    pub fn new(model: HnpmModel) -> Self {
        Self {
            model,
            observations: Vec::new(),
        }
    }

    pub fn update(&self, obs: Observation) -> Result<(HnpmBelief, PosteriorTable), HnpmError> {
        let mut next = self.clone();
        next.observations.push(obs);
        let table = next.model.hierarchical_update(&next.observations)?;
        Ok((next, table))
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub name: String,
    pub prior: f64,
    /// Distribution over reliability bins under this regime.
    pub bin_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityHierarchySpec {
    /// Truth ratio of each level-2 bin.
    pub bins: Vec<f64>,
    pub regimes: Vec<RegimeSpec>,
}

/// Channel-reliability hierarchy: level 1 says whether channels are generally
/// reliable, level 2 bins each process's truth ratio, level 3 is whether a
/// single report was correct. Each process in the ledger is one instance set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ReliabilityHierarchySpec",
    into = "ReliabilityHierarchySpec"
)]
pub struct ReliabilityHierarchy {
    spec: ReliabilityHierarchySpec,
    model: HnpmModel,
}

pub const CORRECT: usize = 0;
pub const INCORRECT: usize = 1;

impl TryFrom<ReliabilityHierarchySpec> for ReliabilityHierarchy {
    type Error = HnpmError;

    fn try_from(spec: ReliabilityHierarchySpec) -> Result<Self, Self::Error> {
        ReliabilityHierarchy::new(spec)
    }
}

impl From<ReliabilityHierarchy> for ReliabilityHierarchySpec {
    fn from(r: ReliabilityHierarchy) -> Self {
        r.spec
    }
}

impl ReliabilityHierarchy {
    pub fn new(spec: ReliabilityHierarchySpec) -> Result<Self, HnpmError> {
        let model = build_hierarchy(vec![
            HypothesisLevel {
                rank: 1,
                hypotheses: spec.regimes.iter().map(|r| r.name.clone()).collect(),
                prior: spec.regimes.iter().map(|r| r.prior).collect(),
                link: spec.regimes.iter().map(|r| r.bin_weights.clone()).collect(),
            },
            HypothesisLevel {
                rank: 2,
                hypotheses: spec.bins.iter().map(|b| format!("r={b}")).collect(),
                prior: vec![],
                link: spec.bins.iter().map(|b| vec![*b, 1.0 - b]).collect(),
            },
            HypothesisLevel {
                rank: 3,
                hypotheses: vec!["correct".into(), "incorrect".into()],
                prior: vec![],
                link: vec![],
            },
        ])?;
        Ok(Self { spec, model })
    }

    pub fn model(&self) -> &HnpmModel {
        &self.model
    }

    pub fn bins(&self) -> &[f64] {
        &self.spec.bins
    }

    /// Level-3 observations from a ledger, one set per process in id order.
    pub fn observations(ledger: &ProcessLedger) -> (Vec<Observation>, BTreeMap<ProcessId, u32>) {
        let mut obs = Vec::new();
        let mut sets = BTreeMap::new();
        for (i, (p, s)) in ledger.processes().enumerate() {
            let set = i as u32;
            sets.insert(p.clone(), set);
            obs.extend(std::iter::repeat_n(
                Observation::new(set, CORRECT),
                s.successes() as usize,
            ));
            obs.extend(std::iter::repeat_n(
                Observation::new(set, INCORRECT),
                (s.trials() - s.successes()) as usize,
            ));
        }
        (obs, sets)
    }

    fn sets_for<'a>(
        sets: &BTreeMap<ProcessId, u32>,
        processes: impl IntoIterator<Item = &'a ProcessId>,
    ) -> Result<Vec<u32>, crate::epistemics::EpistemicError> {
        processes
            .into_iter()
            .map(|p| {
                sets.get(p)
                    .copied()
                    .ok_or_else(|| crate::epistemics::EpistemicError::NoHistory(p.clone()))
            })
            .collect()
    }

    /// Credence that every listed process sits in a bin at or above `threshold`.
    pub fn meta_credence<'a>(
        &self,
        ledger: &ProcessLedger,
        processes: impl IntoIterator<Item = &'a ProcessId>,
        threshold: f64,
    ) -> Result<f64, crate::epistemics::EpistemicError> {
        let (obs, sets) = Self::observations(ledger);
        let wanted = Self::sets_for(&sets, processes)?;
        let bins = &self.spec.bins;
        Ok(self
            .model
            .joint_set_mass(&obs, &wanted, &|j| bins[j] >= threshold)?)
    }

    /// Posterior predictive probability that the next report of each process is correct.
    pub fn predictive_reliability<'a>(
        &self,
        ledger: &ProcessLedger,
        processes: impl IntoIterator<Item = &'a ProcessId>,
    ) -> Result<BTreeMap<ProcessId, f64>, crate::epistemics::EpistemicError> {
        let (obs, sets) = Self::observations(ledger);
        let table = self.model.hierarchical_update(&obs)?;
        processes
            .into_iter()
            .map(|p| {
                let s = *sets
                    .get(p)
                    .ok_or_else(|| crate::epistemics::EpistemicError::NoHistory(p.clone()))?;
                Ok((
                    p.clone(),
                    table.level_posterior(Level::Experience(s))[CORRECT],
                ))
            })
            .collect()
    }
}
