use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EpistemicError;
use crate::evidence::ProcessId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "(u64, u64)", into = "(u64, u64)")]
pub struct ProcessStats {
    successes: u64,
    trials: u64,
}

impl ProcessStats {
    pub fn new(successes: u64, trials: u64) -> Result<Self, EpistemicError> {
        if successes > trials {
            return Err(EpistemicError::InvalidLedger { successes, trials });
        }
        Ok(Self { successes, trials })
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }
}

impl TryFrom<(u64, u64)> for ProcessStats {
    type Error = EpistemicError;

    fn try_from((s, t): (u64, u64)) -> Result<Self, Self::Error> {
        ProcessStats::new(s, t)
    }
}

impl From<ProcessStats> for (u64, u64) {
    fn from(s: ProcessStats) -> Self {
        (s.successes, s.trials)
    }
}

/// Track record of every belief-forming process: `(successes, trials)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessLedger(BTreeMap<ProcessId, ProcessStats>);

impl ProcessLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_history(
        mut self,
        process: &str,
        successes: u64,
        trials: u64,
    ) -> Result<Self, EpistemicError> {
        self.0.insert(
            ProcessId::new(process),
            ProcessStats::new(successes, trials)?,
        );
        Ok(self)
    }

    /// Returns a new ledger with one more output recorded for `process`.
    pub fn record_process(&self, process: &ProcessId, output_was_true: bool) -> ProcessLedger {
        let mut next = self.clone();
        next.record(process, output_was_true);
        next
    }

    pub fn record(&mut self, process: &ProcessId, output_was_true: bool) {
        let s = self.0.entry(process.clone()).or_default();
        s.trials += 1;
        if output_was_true {
            s.successes += 1;
        }
    }

    pub fn stats(&self, process: &ProcessId) -> ProcessStats {
        self.0.get(process).copied().unwrap_or_default()
    }

    pub fn processes(&self) -> impl Iterator<Item = (&ProcessId, ProcessStats)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    /// Add-one smoothed truth ratio `(s + 1) / (t + 2)`.
    pub fn estimate_reliability(&self, process: &ProcessId) -> Result<f64, EpistemicError> {
        let s = self.stats(process);
        if s.trials == 0 {
            return Err(EpistemicError::NoHistory(process.clone()));
        }
        Ok((s.successes as f64 + 1.0) / (s.trials as f64 + 2.0))
    }
}
