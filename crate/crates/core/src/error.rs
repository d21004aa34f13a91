use thiserror::Error;

use crate::types::{EntityId, Tick};

/// Errors produced by the trust engine and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trust value {0} outside [-1, 1]")]
    OutOfRange(f64),

    #[error("no direct evidence: interaction history is empty")]
    NoDirectEvidence,

    #[error("no indirect evidence: no recommender with positive trust")]
    NoIndirectEvidence,

    #[error("no evidence: neither direct nor indirect trust is available")]
    NoEvidence,

    #[error("no candidates to select from")]
    NoCandidates,

    #[error("episode failed: {0}")]
    EpisodeFailed(String),

    #[error("interaction at tick {got} precedes last logged tick {last}")]
    OutOfOrder { last: Tick, got: Tick },

    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("invalid scenario: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TrustError {
    fn from(e: std::io::Error) -> Self {
        TrustError::Io(e.to_string())
    }
}

pub type Result<T, E = TrustError> = std::result::Result<T, E>;

/// Checks that two normalized vectors have equal, non-zero length and all
/// components in `[0, 1]`.
pub(crate) fn check_normalized_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(TrustError::InvalidInput("empty attribute vector".into()));
    }
    if a.len() != b.len() {
        return Err(TrustError::InvalidInput(format!(
            "vector length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if let Some(v) = a.iter().chain(b).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(TrustError::InvalidInput(format!(
            "component {v} outside [0, 1]"
        )));
    }
    Ok(())
}
