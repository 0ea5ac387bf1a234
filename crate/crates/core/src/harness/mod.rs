//! Scenario documents, seeded trial execution, competence assays, policy
//! comparison and report emission.

mod emit;
mod review;
mod run;
mod scenario;

pub use emit::*;
pub use review::*;
pub use run::*;
pub use scenario::*;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("trial {index}: {message}")]
    Trial { index: usize, message: String },
    #[error("reports come from different corpora: {0}")]
    CorpusMismatch(String),
    #[error("invalid assay: {0}")]
    InvalidAssay(String),
    #[error("engine: {0}")]
    Engine(String),
}
