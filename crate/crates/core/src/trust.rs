//! The trust calculus: satisfaction, time-decayed direct trust, recommender
//! trust initialization and update, recommender-weighted indirect trust,
//! the direct/indirect blend, computation-method selection and
//! dishonest-recommender screening.
//!
//! Everything here is a pure function of its arguments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_normalized_pair, Result, TrustError};
use crate::store::TrustRecord;
use crate::types::{ContextDescriptor, EntityId, ServiceTypeId, Tick, TrustValue};

/// Tunable constants of the trust calculus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustParams {
    /// Per-tick decay base of interaction weights, in `(0, 1)`.
    pub decay_base: f64,
    /// Weight of trust against fuzzy quality when scoring providers.
    pub alpha: f64,
    /// Weight of direct against indirect trust when both are used.
    pub beta: f64,
    /// Acceptable recommendation error, in `(0, 1]`.
    pub error_apt: f64,
    /// Unexpired interactions needed to rely on direct trust alone.
    pub adequacy_min_records: usize,
    /// Age in ticks after which trust records and interactions are stale.
    pub record_ttl: Tick,
    /// Honest range for the mean of a recommender's recommendations.
    pub dishonesty_band: (f64, f64),
    /// Recommendations needed before a recommender can be judged.
    pub dishonesty_min_count: usize,
    /// Exclude recommenders judged dishonest from indirect trust.
    pub detect_dishonest: bool,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self {
            decay_base: 0.9,
            alpha: 0.5,
            beta: 0.5,
            error_apt: 0.2,
            adequacy_min_records: 3,
            record_ttl: 100,
            dishonesty_band: (-0.8, 0.8),
            dishonesty_min_count: 3,
            detect_dishonest: true,
        }
    }
}

impl TrustParams {
    /// Returns every violated constraint, empty when the parameters are valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.decay_base > 0.0 && self.decay_base < 1.0) {
            out.push(format!(
                "decay_base must lie strictly inside (0, 1), got {}",
                self.decay_base
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            out.push(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            out.push(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.error_apt > 0.0 && self.error_apt <= 1.0) {
            out.push(format!(
                "error_apt must lie in (0, 1], got {}",
                self.error_apt
            ));
        }
        if self.adequacy_min_records == 0 {
            out.push("adequacy_min_records must be positive".into());
        }
        if self.dishonesty_min_count == 0 {
            out.push("dishonesty_min_count must be positive".into());
        }
        let (lo, hi) = self.dishonesty_band;
        if !(-1.0..=1.0).contains(&lo) || !(-1.0..=1.0).contains(&hi) || lo >= hi {
            out.push(format!(
                "dishonesty_band must satisfy -1 <= lo < hi <= 1, got ({lo}, {hi})"
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(TrustError::Config(v.join("; ")))
        }
    }
}

/// One completed transaction as remembered by the requester.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub provider_id: EntityId,
    pub service_type: ServiceTypeId,
    /// Normalized attribute values delivered by the provider.
    pub service_attrs: Vec<f64>,
    pub context_attrs: ContextDescriptor,
    /// Signed satisfaction in `[-1, 1]`.
    pub satisfaction: f64,
    pub t_occ: Tick,
}

/// What a requester knows about one recommender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommenderProfile {
    pub recommender_id: EntityId,
    pub rt: TrustValue,
    /// `(delta, tick)` pairs, one per settled recommendation.
    pub accuracy_history: Vec<(f64, Tick)>,
    /// Every trust value this recommender has reported, used for dishonesty screening.
    #[serde(default)]
    pub recommended_values: Vec<TrustValue>,
}

impl RecommenderProfile {
    pub fn new(recommender_id: EntityId, rt: TrustValue) -> Self {
        Self {
            recommender_id,
            rt,
            accuracy_history: Vec::new(),
            recommended_values: Vec::new(),
        }
    }
}

/// Trust computation route chosen from the state of the interaction history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Indirect,
    Combined,
}

/// Mean absolute difference between expected and provided normalized values.
pub fn satisfaction_distance(expected: &[f64], provided: &[f64]) -> Result<f64> {
    mean_abs_difference(expected, provided)
}

/// Maps a distance in `[0, 1]` to a signed satisfaction: 0 → +1, 1 → -1.
pub fn satisfaction_degree(distance: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&distance) {
        return Err(TrustError::InvalidInput(format!(
            "distance {distance} outside [0, 1]"
        )));
    }
    Ok(1.0 - 2.0 * distance)
}

/// Time-decayed weighted mean of satisfactions.
///
/// Each record is weighted by `decay_base^(t_cur - t_occ)`. Weights are
/// rescaled by the youngest record's weight before summing, which leaves the
/// ratio unchanged but keeps very old histories from underflowing to `0/0`.
pub fn direct_trust(
    history: &[InteractionRecord],
    t_cur: Tick,
    params: &TrustParams,
) -> Result<TrustValue> {
    if history.is_empty() {
        return Err(TrustError::NoDirectEvidence);
    }
    if let Some(r) = history.iter().find(|r| r.t_occ > t_cur) {
        return Err(TrustError::InvalidInput(format!(
            "interaction at tick {} is after current tick {t_cur}",
            r.t_occ
        )));
    }
    if let Some(r) = history
        .iter()
        .find(|r| !(-1.0..=1.0).contains(&r.satisfaction))
    {
        return Err(TrustError::InvalidInput(format!(
            "satisfaction {} outside [-1, 1]",
            r.satisfaction
        )));
    }
    let youngest = history.iter().map(|r| t_cur - r.t_occ).min().unwrap_or(0);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in history {
        let w = params.decay_base.powf((t_cur - r.t_occ - youngest) as f64);
        num += w * r.satisfaction;
        den += w;
        lo = lo.min(r.satisfaction);
        hi = hi.max(r.satisfaction);
    }
    // convex combination; the clamp only absorbs rounding
    TrustValue::new((num / den).clamp(lo, hi))
}

/// Initial recommender trust: mean trust of the records held about the
/// recommender as a provider, zero when there are none.
pub fn init_recommender_trust<'a, I>(records: I) -> TrustValue
where
    I: IntoIterator<Item = &'a TrustRecord>,
{
    let (sum, n) = records
        .into_iter()
        .fold((0.0, 0usize), |(s, n), r| (s + r.trv.get(), n + 1));
    if n == 0 {
        new_entity_trust()
    } else {
        TrustValue::saturating(sum / n as f64)
    }
}

/// Mean absolute difference between provided and recommended values.
pub fn similarity_distance(provided: &[f64], recommended: &[f64]) -> Result<f64> {
    mean_abs_difference(provided, recommended)
}

/// `1 - delta / error_apt`; negative once the error exceeds the acceptable one.
pub fn update_factor(delta: f64, error_apt: f64) -> Result<f64> {
    if error_apt <= 0.0 || !error_apt.is_finite() {
        return Err(TrustError::Config(format!(
            "error_apt must be positive, got {error_apt}"
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(TrustError::InvalidInput(format!(
            "delta {delta} outside [0, 1]"
        )));
    }
    Ok(1.0 - delta / error_apt)
}

/// `(1 + uf) * rt_old`, saturated at ±1.
///
/// Applied literally: a factor below -1 flips the sign of the recommender's
/// trust, and accurate advice from a negatively trusted recommender pushes
/// its trust further negative.
pub fn update_recommender_trust(rt_old: TrustValue, uf: f64) -> TrustValue {
    let scaled = (1.0 + uf) * rt_old.get();
    if scaled >= 1.0 {
        TrustValue::MAX
    } else if scaled <= -1.0 {
        TrustValue::MIN
    } else {
        TrustValue::saturating(scaled)
    }
}

/// Recommender-trust weighted mean of recommended trust values.
///
/// Takes `(recommender trust, recommended trust)` pairs. Recommenders with
/// non-positive trust carry no weight.
pub fn indirect_trust(recommendations: &[(TrustValue, TrustValue)]) -> Result<TrustValue> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(rt, trv) in recommendations.iter().filter(|(rt, _)| rt.get() > 0.0) {
        num += rt.get() * trv.get();
        den += rt.get();
        lo = lo.min(trv.get());
        hi = hi.max(trv.get());
    }
    if den > 0.0 {
        TrustValue::new((num / den).clamp(lo, hi))
    } else {
        Err(TrustError::NoIndirectEvidence)
    }
}

/// Blends direct and indirect trust.
///
/// Adequate history forces `beta = 1`. With only one of the two available
/// that one is returned.
pub fn combine_trust(
    dt: Option<TrustValue>,
    it: Option<TrustValue>,
    params: &TrustParams,
    adequate_history: bool,
) -> Result<TrustValue> {
    match (dt, it) {
        (Some(dt), _) if adequate_history => Ok(dt),
        (Some(dt), Some(it)) => Ok(TrustValue::saturating(
            params.beta * dt.get() + (1.0 - params.beta) * it.get(),
        )),
        (Some(dt), None) => Ok(dt),
        (None, Some(it)) => Ok(it),
        (None, None) => Err(TrustError::NoEvidence),
    }
}

/// Chooses how to compute a provider's trust from the history state.
pub fn select_method(history_count: usize, unexpired: bool, params: &TrustParams) -> Method {
    if history_count == 0 {
        Method::Indirect
    } else if history_count >= params.adequacy_min_records && unexpired {
        Method::Direct
    } else {
        Method::Combined
    }
}

/// A recommender is dishonest once it has made enough recommendations and
/// their mean falls outside the honest band.
pub fn detect_dishonest(recommended_trust_values: &[TrustValue], params: &TrustParams) -> bool {
    let n = recommended_trust_values.len();
    if n == 0 || n < params.dishonesty_min_count {
        return false;
    }
    let mean = recommended_trust_values
        .iter()
        .map(|t| t.get())
        .sum::<f64>()
        / n as f64;
    let (lo, hi) = params.dishonesty_band;
    !(lo..=hi).contains(&mean)
}

/// Trust assigned to an entity nobody knows anything about.
pub fn new_entity_trust() -> TrustValue {
    TrustValue::ZERO
}

/// A single recommendation ready for aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRecommendation {
    pub recommender: EntityId,
    /// Effective recommender trust (after any context penalty).
    pub rt: TrustValue,
    pub trv: TrustValue,
}

/// Drops recommendations from recommenders judged dishonest, using each
/// recommender's full record of reported values. Returns the surviving
/// `(rt, trv)` pairs in input order.
pub fn screen_recommendations(
    recommendations: &[WeightedRecommendation],
    reported: &BTreeMap<EntityId, Vec<TrustValue>>,
    params: &TrustParams,
) -> Vec<(TrustValue, TrustValue)> {
    recommendations
        .iter()
        .filter(|r| {
            !params.detect_dishonest
                || !reported
                    .get(&r.recommender)
                    .is_some_and(|vals| detect_dishonest(vals, params))
        })
        .map(|r| (r.rt, r.trv))
        .collect()
}

fn mean_abs_difference(a: &[f64], b: &[f64]) -> Result<f64> {
    check_normalized_pair(a, b)?;
    let total: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    Ok((total / a.len() as f64).min(1.0))
}
