use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::provider::Recommendation;
use crate::types::{Tick, TrustValue};

/// How an entity behaves when it delivers a service or makes a recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BehaviorModel {
    /// Delivers what it promised, plus Gaussian noise of standard deviation `jitter`.
    Honest {
        #[serde(default)]
        jitter: f64,
    },
    /// Honest until `start`, then each delivered value shrinks by `slope` of
    /// the promise per tick.
    Degrading { start: Tick, slope: f64 },
    /// Delivers `fraction` of every promised value.
    Malicious { fraction: f64 },
    /// Delivers honestly but shifts every recommendation by `bias`.
    DishonestRecommender { bias: f64 },
}

impl Default for BehaviorModel {
    fn default() -> Self {
        BehaviorModel::Honest { jitter: 0.0 }
    }
}

impl BehaviorModel {
    pub fn violations(&self) -> Vec<String> {
        match *self {
            BehaviorModel::Honest { jitter } if !(jitter >= 0.0 && jitter.is_finite()) => {
                vec![format!("honest jitter must be non-negative, got {jitter}")]
            }
            BehaviorModel::Degrading { slope, .. } if !(slope >= 0.0 && slope.is_finite()) => {
                vec![format!("degrading slope must be non-negative, got {slope}")]
            }
            BehaviorModel::Malicious { fraction } if !(0.0..=1.0).contains(&fraction) => {
                vec![format!(
                    "malicious fraction must lie in [0, 1], got {fraction}"
                )]
            }
            BehaviorModel::DishonestRecommender { bias } if !(-1.0..=1.0).contains(&bias) => {
                vec![format!("recommender bias must lie in [-1, 1], got {bias}")]
            }
            _ => vec![],
        }
    }

    /// Values actually delivered against `promised`, clamped to `[0, 1]`.
    pub fn deliver<R: Rng + ?Sized>(&self, promised: &[f64], tick: Tick, rng: &mut R) -> Vec<f64> {
        let out: Vec<f64> = match *self {
            BehaviorModel::Honest { jitter } if jitter > 0.0 => {
                let noise = Normal::new(0.0, jitter).expect("jitter validated");
                promised.iter().map(|p| p + noise.sample(rng)).collect()
            }
            BehaviorModel::Honest { .. } | BehaviorModel::DishonestRecommender { .. } => {
                promised.to_vec()
            }
            BehaviorModel::Degrading { start, slope } => {
                let keep = (1.0 - slope * tick.saturating_sub(start) as f64).max(0.0);
                promised.iter().map(|p| p * keep).collect()
            }
            BehaviorModel::Malicious { fraction } => {
                promised.iter().map(|p| p * fraction).collect()
            }
        };
        out.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }

    /// The recommendation this entity actually sends.
    pub fn distort(&self, mut rec: Recommendation) -> Recommendation {
        if let BehaviorModel::DishonestRecommender { bias } = *self {
            rec.record.trv = TrustValue::saturating(rec.record.trv.get() + bias);
            for v in &mut rec.values {
                *v = (*v + bias).clamp(0.0, 1.0);
            }
        }
        rec
    }
}
