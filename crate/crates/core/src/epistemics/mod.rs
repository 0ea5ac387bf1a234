//! Verdict engine: process reliability, justification, counterfactual
//! tracking, aptness, reflective knowledge and the JTB classifier.

mod aaa;
mod justification;
mod ledger;
mod reflective;
mod tracking;
mod verdict;

use thiserror::Error;

pub use aaa::{aaa_evaluate, adroit, AaaConfig, AaaResult, Performance, ShotPerformance};
pub use justification::{
    assess_justification, justified, JustificationPolicy, JustificationRecord, JustificationTrace,
    TraceStep,
};
pub use ledger::{ProcessLedger, ProcessStats};
pub use reflective::{
    predicted_credence, reflective_check, reflective_or_animal, CoherenceInput, ReflectiveConfig,
    ReflectiveRecord,
};
pub use tracking::{falsifying_interventions, tracking_check, ReplayableAgent, TrackingResult};
pub use verdict::{classify, EpistemicVerdict, VerdictDiagnostics, VerdictKind, DEFAULT_TAU_TRACK};

use crate::doxastics::DoxasticError;
use crate::evidence::{EvidenceError, ProcessId};
use crate::hnpm::HnpmError;
use crate::worldsim::WorldError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpistemicError {
    #[error("process {0} has no history")]
    NoHistory(ProcessId),
    #[error("ledger entry with {successes} successes out of {trials} trials")]
    InvalidLedger { successes: u64, trials: u64 },
    #[error("invalid intervention: {0}")]
    InvalidIntervention(String),
    #[error("no hierarchy configured")]
    HnpmUnavailable,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Doxastic(#[from] DoxasticError),
    #[error(transparent)]
    Hnpm(#[from] HnpmError),
}
