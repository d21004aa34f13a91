//! Service-provider side: the privacy agent (local policy plus context
//! assessment) and the request processor that decides whether to provide,
//! recommend another entity, or stay silent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::requester::ServiceRequest;
use crate::store::{StoreView, TrustRecord};
use crate::types::{EntityId, ServiceTypeId};

/// Sensitivity of an attribute or context, and clearance of a requester.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyLevel {
    #[default]
    Public,
    Restricted,
    Private,
}

/// Security and privacy policy held by a provider's privacy agent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyPolicy {
    /// Requesters that are always rejected.
    pub deny: BTreeSet<EntityId>,
    /// When set, only these requesters may be served.
    pub allow: Option<BTreeSet<EntityId>>,
    /// Clearance of requesters not listed in `clearances`.
    pub default_clearance: PrivacyLevel,
    pub clearances: BTreeMap<EntityId, PrivacyLevel>,
    /// Level of attributes and contexts not listed below.
    pub default_level: PrivacyLevel,
    pub attr_privacy_levels: BTreeMap<String, PrivacyLevel>,
    pub context_privacy_levels: BTreeMap<String, PrivacyLevel>,
}

impl PrivacyPolicy {
    /// A policy that serves anyone.
    pub fn permissive() -> Self {
        Self::default()
    }

    pub fn clearance_of(&self, requester: &EntityId) -> PrivacyLevel {
        self.clearances
            .get(requester)
            .copied()
            .unwrap_or(self.default_clearance)
    }

    pub fn attr_level(&self, attr: &str) -> PrivacyLevel {
        self.attr_privacy_levels
            .get(attr)
            .copied()
            .unwrap_or(self.default_level)
    }

    pub fn context_level(&self, context: &str) -> PrivacyLevel {
        self.context_privacy_levels
            .get(context)
            .copied()
            .unwrap_or(self.default_level)
    }
}

/// Outcome of the local policy module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    Pass,
    Reject,
}

/// Highest privacy level touched by the request: its attributes plus the
/// service type's critical contexts.
pub fn assess_context(
    request: &ServiceRequest,
    critical_contexts: &[String],
    policy: &PrivacyPolicy,
) -> PrivacyLevel {
    request
        .attrs
        .iter()
        .map(|(name, _)| policy.attr_level(name))
        .chain(critical_contexts.iter().map(|c| policy.context_level(c)))
        .max()
        .unwrap_or_default()
}

/// Authenticates the requester against the access rules and checks its
/// clearance against the assessed privacy level.
pub fn local_policy_gate(
    requester_id: &EntityId,
    request: &ServiceRequest,
    critical_contexts: &[String],
    policy: &PrivacyPolicy,
) -> GateDecision {
    if policy.deny.contains(requester_id) {
        return GateDecision::Reject;
    }
    if let Some(allow) = &policy.allow {
        if !allow.contains(requester_id) {
            return GateDecision::Reject;
        }
    }
    if assess_context(request, critical_contexts, policy) > policy.clearance_of(requester_id) {
        return GateDecision::Reject;
    }
    GateDecision::Pass
}

/// What a provider can deliver for one service type, as normalized values
/// keyed by attribute name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capability {
    pub service_type: ServiceTypeId,
    pub values: BTreeMap<String, f64>,
}

impl Capability {
    /// Real values aligned with the request's attributes. Missing attributes read as 0.
    pub fn real_values(&self, request: &ServiceRequest) -> Vec<f64> {
        request
            .attrs
            .iter()
            .map(|(name, _)| self.values.get(name).copied().unwrap_or(0.0))
            .collect()
    }
}

/// A recommendation of another provider, taken from the recommender's trust records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub record: TrustRecord,
    /// Attribute values the recommender expects from the recommended provider,
    /// aligned with the request.
    pub values: Vec<f64>,
}

/// Request-processor verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderResponse {
    Provide(Vec<f64>),
    Recommend(Recommendation),
    NoResponse,
}

/// Provides when every real value meets its threshold; otherwise recommends
/// the best known provider at or above `min_trv`; otherwise stays silent.
///
/// Must only be called for requests that passed [`local_policy_gate`].
pub fn process_request(
    requester_id: &EntityId,
    request: &ServiceRequest,
    capability: Option<&Capability>,
    store: &StoreView,
    min_trv: f64,
) -> ProviderResponse {
    if let Some(cap) = capability.filter(|c| c.service_type == request.service_type) {
        let rv = cap.real_values(request);
        if rv.iter().zip(&request.attrs).all(|(rv, (_, tv))| rv >= tv) {
            return ProviderResponse::Provide(rv);
        }
    }
    match store.find_recommendable(&request.service_type, min_trv, Some(requester_id)) {
        Some(record) => ProviderResponse::Recommend(Recommendation {
            values: expected_values(store, record, request),
            record: record.clone(),
        }),
        None => ProviderResponse::NoResponse,
    }
}

/// Answers a requester's direct trust query about `subject`, if this
/// entity holds a record for it.
pub fn answer_trust_query(
    store: &StoreView,
    subject: &EntityId,
    request: &ServiceRequest,
) -> Option<Recommendation> {
    let record = store.trust_record(subject, &request.service_type)?;
    Some(Recommendation {
        values: expected_values(store, record, request),
        record: record.clone(),
    })
}

/// Last observed delivery of the recommended provider, or the request's own
/// thresholds when nothing comparable was observed.
fn expected_values(store: &StoreView, record: &TrustRecord, request: &ServiceRequest) -> Vec<f64> {
    store
        .latest_interaction(&record.provider_id, &record.service_type)
        .map(|i| i.service_attrs.clone())
        .filter(|v| v.len() == request.attrs.len())
        .unwrap_or_else(|| request.thresholds())
}
