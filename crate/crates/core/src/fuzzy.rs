//! Fuzzy multi-attribute evaluation of competing providers and target selection.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrustError};
use crate::types::{EntityId, TrustValue};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Membership degrees of a value in the Good / Average / Bad quality levels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FuzzyMembership {
    pub good: f64,
    pub average: f64,
    pub bad: f64,
}

impl FuzzyMembership {
    pub fn new(good: f64, average: f64, bad: f64) -> Self {
        Self { good, average, bad }
    }

    pub fn sum(&self) -> f64 {
        self.good + self.average + self.bad
    }
}

/// Per-attribute importance weights. Non-negative, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AttributeWeights(Vec<f64>);

impl AttributeWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(TrustError::InvalidInput(
                "attribute weights are empty".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(TrustError::InvalidInput(format!(
                "attribute weight {w} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(TrustError::InvalidInput(format!(
                "attribute weights sum to {total}, violating Σ w_j = 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Equal weight on each of `n` attributes.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(TrustError::InvalidInput(
                "attribute weights are empty".into(),
            ));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for AttributeWeights {
    type Error = TrustError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AttributeWeights> for Vec<f64> {
    fn from(w: AttributeWeights) -> Self {
        w.0
    }
}

/// A candidate provider with its aggregated membership and final score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderScore {
    pub provider_id: EntityId,
    pub sp: FuzzyMembership,
    pub v: f64,
}

/// Triangular memberships: Bad peaks at 0, Average at 0.5, Good at 1, each
/// falling to zero half a unit from its peak. The three always sum to one.
pub fn membership(value: f64) -> Result<FuzzyMembership> {
    if !(0.0..=1.0).contains(&value) {
        return Err(TrustError::InvalidInput(format!(
            "normalized value {value} outside [0, 1]"
        )));
    }
    let good = (2.0 * value - 1.0).max(0.0);
    let bad = (1.0 - 2.0 * value).max(0.0);
    let average = 1.0 - (2.0 * value - 1.0).abs();
    Ok(FuzzyMembership { good, average, bad })
}

/// Memberships for a whole vector of normalized values.
pub fn memberships(values: &[f64]) -> Result<Vec<FuzzyMembership>> {
    values.iter().map(|v| membership(*v)).collect()
}

/// Weighted sum of the per-attribute membership rows, column by column.
pub fn evaluate_provider(
    weights: &AttributeWeights,
    memberships: &[FuzzyMembership],
) -> Result<FuzzyMembership> {
    if memberships.len() != weights.len() {
        return Err(TrustError::InvalidInput(format!(
            "{} weights for {} membership rows",
            weights.len(),
            memberships.len()
        )));
    }
    Ok(weights.as_slice().iter().zip(memberships).fold(
        FuzzyMembership::default(),
        |acc, (w, m)| FuzzyMembership {
            good: acc.good + w * m.good,
            average: acc.average + w * m.average,
            bad: acc.bad + w * m.bad,
        },
    ))
}

/// `alpha * trv + (1 - alpha) * sp_good`.
pub fn score_provider(trv: TrustValue, sp_good: f64, alpha: f64) -> f64 {
    alpha * trv.get() + (1.0 - alpha) * sp_good
}

/// The candidate with the largest score. Ties go to the smallest identifier.
pub fn select_target(scores: &[ProviderScore]) -> Result<&EntityId> {
    scores
        .iter()
        .reduce(|best, s| {
            if s.v > best.v || (s.v == best.v && s.provider_id < best.provider_id) {
                s
            } else {
                best
            }
        })
        .map(|s| &s.provider_id)
        .ok_or(TrustError::NoCandidates)
}
