//! Declarative scenario description, its validation and parameter overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::behavior::BehaviorModel;
use crate::error::{Result, TrustError};
use crate::fuzzy::AttributeWeights;
use crate::provider::{Capability, PrivacyPolicy};
use crate::requester::{ContextPredicate, ContextRule, ServiceProfile, ServiceRequest};
use crate::trust::TrustParams;
use crate::types::{ContextDescriptor, EntityId, ServiceTypeId, Tick};

const WEIGHT_TOLERANCE: f64 = 1e-9;

fn default_min_trv() -> f64 {
    0.3
}

fn default_context_penalty() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub ticks: Tick,
    #[serde(default)]
    pub params: TrustParams,
    /// Lowest trust a provider accepts when recommending another entity.
    #[serde(default = "default_min_trv")]
    pub min_trv: f64,
    /// Weight applied to a recommender outside the service's critical contexts.
    #[serde(default = "default_context_penalty")]
    pub context_penalty: f64,
    /// Replaces the default per-service recommender context rules when set.
    #[serde(default)]
    pub context_rules: Option<Vec<ContextRule>>,
    pub service_types: Vec<ServiceTypeConfig>,
    pub entities: Vec<EntityConfig>,
    #[serde(default)]
    pub episodes: Vec<EpisodeConfig>,
    #[serde(default)]
    pub context_updates: Vec<ContextUpdate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(default)]
    pub min: f64,
    #[serde(default = "one")]
    pub max: f64,
    #[serde(default = "yes")]
    pub higher_is_better: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl AttributeSpec {
    /// Maps a raw value onto `[0, 1]`, 1 being best.
    pub fn normalize(&self, raw: f64) -> f64 {
        let x = ((raw - self.min) / (self.max - self.min)).clamp(0.0, 1.0);
        if self.higher_is_better {
            x
        } else {
            1.0 - x
        }
    }

    fn in_bounds(&self, raw: f64) -> bool {
        raw.is_finite() && raw >= self.min && raw <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceTypeConfig {
    pub id: ServiceTypeId,
    pub attributes: Vec<AttributeSpec>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub critical_contexts: Vec<ContextPredicate>,
}

impl ServiceTypeConfig {
    fn attr(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// Normalized vector aligned with the attribute order; missing entries read as 0.
    pub fn normalize_map(&self, raw: &BTreeMap<String, f64>) -> Vec<f64> {
        self.attributes
            .iter()
            .map(|a| raw.get(&a.name).map(|v| a.normalize(*v)).unwrap_or(0.0))
            .collect()
    }

    pub fn profile(&self) -> Result<ServiceProfile> {
        Ok(ServiceProfile {
            id: self.id.clone(),
            attrs: self.attributes.iter().map(|a| a.name.clone()).collect(),
            weights: AttributeWeights::new(self.weights.clone())?,
            critical: self.critical_contexts.clone(),
        })
    }

    pub fn request(&self, thresholds: &BTreeMap<String, f64>) -> Result<ServiceRequest> {
        ServiceRequest::new(
            self.id.as_str(),
            self.attributes
                .iter()
                .zip(self.normalize_map(thresholds))
                .map(|(a, tv)| (a.name.clone(), tv))
                .collect(),
        )
    }

    pub fn capability(&self, raw: &BTreeMap<String, f64>) -> Capability {
        Capability {
            service_type: self.id.clone(),
            values: self
                .attributes
                .iter()
                .filter_map(|a| raw.get(&a.name).map(|v| (a.name.clone(), a.normalize(*v))))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Requester,
    Provider,
    Both,
}

impl Role {
    pub fn requests(self) -> bool {
        matches!(self, Role::Requester | Role::Both)
    }

    pub fn provides(self) -> bool {
        matches!(self, Role::Provider | Role::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapabilityConfig {
    pub service_type: ServiceTypeId,
    pub values: BTreeMap<String, f64>,
}

/// A past interaction the entity starts the run with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedInteraction {
    pub provider: EntityId,
    pub service_type: ServiceTypeId,
    #[serde(default)]
    pub tick: Tick,
    pub expected: BTreeMap<String, f64>,
    pub delivered: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityConfig {
    pub id: EntityId,
    pub role: Role,
    #[serde(default)]
    pub context: ContextDescriptor,
    #[serde(default)]
    pub behavior: BehaviorModel,
    #[serde(default)]
    pub policy: PrivacyPolicy,
    #[serde(default)]
    pub capabilities: Vec<CapabilityConfig>,
    #[serde(default)]
    pub history: Vec<SeedInteraction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub tick: Tick,
    pub requester: EntityId,
    pub service_type: ServiceTypeId,
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
}

/// Replaces some of an entity's context values at the start of `tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextUpdate {
    pub tick: Tick,
    pub entity: EntityId,
    pub context: BTreeMap<String, f64>,
}

/// Keys accepted by [`ScenarioConfig::apply_override`].
pub const OVERRIDE_KEYS: &[&str] = &[
    "seed",
    "ticks",
    "alpha",
    "beta",
    "decay_base",
    "error_apt",
    "adequacy_min_records",
    "record_ttl",
    "dishonesty_lo",
    "dishonesty_hi",
    "dishonesty_min_count",
    "detect_dishonest",
    "min_trv",
    "context_penalty",
];

impl ScenarioConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| TrustError::Validation(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn service_type(&self, id: &ServiceTypeId) -> Option<&ServiceTypeConfig> {
        self.service_types.iter().find(|s| &s.id == id)
    }

    /// Sets one parameter from its textual `value`.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.trim().parse().map_err(|_| {
                TrustError::Validation(vec![format!("bad value `{value}` for `{key}`")])
            })
        }
        let p = &mut self.params;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "ticks" => self.ticks = parse(key, value)?,
            "alpha" => p.alpha = parse(key, value)?,
            "beta" => p.beta = parse(key, value)?,
            "decay_base" => p.decay_base = parse(key, value)?,
            "error_apt" => p.error_apt = parse(key, value)?,
            "adequacy_min_records" => p.adequacy_min_records = parse(key, value)?,
            "record_ttl" => p.record_ttl = parse(key, value)?,
            "dishonesty_lo" => p.dishonesty_band.0 = parse(key, value)?,
            "dishonesty_hi" => p.dishonesty_band.1 = parse(key, value)?,
            "dishonesty_min_count" => p.dishonesty_min_count = parse(key, value)?,
            "detect_dishonest" => p.detect_dishonest = parse(key, value)?,
            "min_trv" => self.min_trv = parse(key, value)?,
            "context_penalty" => self.context_penalty = parse(key, value)?,
            _ => {
                return Err(TrustError::Validation(vec![format!(
                    "unknown override `{key}` (known: {})",
                    OVERRIDE_KEYS.join(", ")
                )]))
            }
        }
        Ok(())
    }

    /// Every constraint violation in the scenario; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.params.violations();
        if self.ticks == 0 {
            out.push("ticks must be positive".into());
        }
        if !(-1.0..=1.0).contains(&self.min_trv) {
            out.push(format!("min_trv must lie in [-1, 1], got {}", self.min_trv));
        }
        if !(self.context_penalty > 0.0 && self.context_penalty <= 1.0) {
            out.push(format!(
                "context_penalty must lie in (0, 1], got {}",
                self.context_penalty
            ));
        }
        for r in self.context_rules.iter().flatten() {
            if !(r.factor > 0.0 && r.factor <= 1.0) {
                out.push(format!(
                    "context rule on `{}` has factor {} outside (0, 1]",
                    r.predicate.context, r.factor
                ));
            }
        }

        let mut services = BTreeSet::new();
        for st in &self.service_types {
            if !services.insert(&st.id) {
                out.push(format!("duplicate service type `{}`", st.id));
            }
            if st.attributes.is_empty() {
                out.push(format!("service type `{}` has no attributes", st.id));
            }
            let mut names = BTreeSet::new();
            for a in &st.attributes {
                if !names.insert(&a.name) {
                    out.push(format!(
                        "service type `{}`: duplicate attribute `{}`",
                        st.id, a.name
                    ));
                }
                if !(a.min.is_finite() && a.max.is_finite() && a.min < a.max) {
                    out.push(format!(
                        "service type `{}`: attribute `{}` needs min < max",
                        st.id, a.name
                    ));
                }
            }
            if st.weights.len() != st.attributes.len() {
                out.push(format!(
                    "service type `{}`: {} weights for {} attributes",
                    st.id,
                    st.weights.len(),
                    st.attributes.len()
                ));
            }
            if st.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                out.push(format!(
                    "service type `{}`: weights must be non-negative",
                    st.id
                ));
            }
            let total: f64 = st.weights.iter().sum();
            if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                out.push(format!(
                    "service type `{}`: weights sum to {total}, violating Σ w_j = 1",
                    st.id
                ));
            }
        }

        let mut ids = BTreeSet::new();
        for e in &self.entities {
            if e.id.as_str().is_empty() {
                out.push("entity with empty id".into());
            }
            if !ids.insert(&e.id) {
                out.push(format!("duplicate entity id `{}`", e.id));
            }
            out.extend(
                e.behavior
                    .violations()
                    .into_iter()
                    .map(|v| format!("entity `{}`: {v}", e.id)),
            );
            for c in &e.capabilities {
                match self.service_type(&c.service_type) {
                    None => out.push(format!(
                        "entity `{}`: capability for unknown service type `{}`",
                        e.id, c.service_type
                    )),
                    Some(st) => out.extend(check_values(
                        st,
                        &c.values,
                        &format!("entity `{}` capability", e.id),
                    )),
                }
            }
        }
        for e in &self.entities {
            for h in &e.history {
                if !ids.contains(&h.provider) {
                    out.push(format!(
                        "entity `{}`: history names unknown provider `{}`",
                        e.id, h.provider
                    ));
                }
                match self.service_type(&h.service_type) {
                    None => out.push(format!(
                        "entity `{}`: history names unknown service type `{}`",
                        e.id, h.service_type
                    )),
                    Some(st) => {
                        let what = format!("entity `{}` history", e.id);
                        out.extend(check_values(st, &h.expected, &what));
                        out.extend(check_values(st, &h.delivered, &what));
                    }
                }
                if h.tick >= self.ticks {
                    out.push(format!(
                        "entity `{}`: history tick {} >= ticks",
                        e.id, h.tick
                    ));
                }
            }
        }

        for (i, ep) in self.episodes.iter().enumerate() {
            if ep.tick >= self.ticks {
                out.push(format!(
                    "episode {i}: tick {} is not below ticks = {}",
                    ep.tick, self.ticks
                ));
            }
            match self.entities.iter().find(|e| e.id == ep.requester) {
                None => out.push(format!("episode {i}: unknown requester `{}`", ep.requester)),
                Some(e) if !e.role.requests() => out.push(format!(
                    "episode {i}: `{}` is not a requester",
                    ep.requester
                )),
                Some(_) => {}
            }
            match self.service_type(&ep.service_type) {
                None => out.push(format!(
                    "episode {i}: unknown service type `{}`",
                    ep.service_type
                )),
                Some(st) => out.extend(check_values(st, &ep.thresholds, &format!("episode {i}"))),
            }
        }

        for u in &self.context_updates {
            if !ids.contains(&u.entity) {
                out.push(format!("context update for unknown entity `{}`", u.entity));
            }
            if u.tick >= self.ticks {
                out.push(format!("context update tick {} >= ticks", u.tick));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(TrustError::Validation(v))
        }
    }
}

fn check_values(st: &ServiceTypeConfig, values: &BTreeMap<String, f64>, what: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (name, v) in values {
        match st.attr(name) {
            None => out.push(format!(
                "{what}: unknown attribute `{name}` for service type `{}`",
                st.id
            )),
            Some(a) if !a.in_bounds(*v) => out.push(format!(
                "{what}: `{name}` = {v} outside [{}, {}]",
                a.min, a.max
            )),
            Some(_) => {}
        }
    }
    out
}
