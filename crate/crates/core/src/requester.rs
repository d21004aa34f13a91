//! Service-requester side: request construction, context domains, dispatch
//! with broadcast fallback, trust assessment of candidates, fuzzy selection,
//! invocation and settlement of the transaction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrustError};
use crate::fuzzy::{self, AttributeWeights, ProviderScore};
use crate::provider::Recommendation;
use crate::store::{expired, StoreView, TrustRecord};
use crate::trust::{self, InteractionRecord, Method, TrustParams, WeightedRecommendation};
use crate::types::{ContextDescriptor, EntityId, ServiceTypeId, Tick, TrustValue};

/// A service type plus ordered `(attribute, threshold)` pairs, thresholds normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub service_type: ServiceTypeId,
    pub attrs: Vec<(String, f64)>,
}

impl ServiceRequest {
    pub fn new(service_type: impl Into<String>, attrs: Vec<(String, f64)>) -> Result<Self> {
        if attrs.is_empty() {
            return Err(TrustError::InvalidInput(
                "a service request needs at least one attribute".into(),
            ));
        }
        if let Some((name, tv)) = attrs.iter().find(|(_, tv)| !(0.0..=1.0).contains(tv)) {
            return Err(TrustError::InvalidInput(format!(
                "threshold {tv} for `{name}` outside [0, 1]"
            )));
        }
        Ok(Self {
            service_type: ServiceTypeId::new(service_type),
            attrs,
        })
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.attrs.iter().map(|(_, tv)| *tv).collect()
    }

    pub fn attr_names(&self) -> Vec<String> {
        self.attrs.iter().map(|(n, _)| n.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OfferKind {
    Provide,
    Recommend(TrustRecord),
}

/// A reply to a dispatched request.
///
/// For `Provide` the values are the provider's own real values; for
/// `Recommend` they are what the recommender expects the recommended
/// provider to deliver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderOffer {
    pub provider_id: EntityId,
    pub rv: Vec<f64>,
    pub kind: OfferKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl CompareOp {
    fn negate(self) -> Self {
        match self {
            CompareOp::Le => CompareOp::Gt,
            CompareOp::Lt => CompareOp::Ge,
            CompareOp::Ge => CompareOp::Lt,
            CompareOp::Gt => CompareOp::Le,
        }
    }
}

/// `context <op> value`; false when the entity does not expose `context`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextPredicate {
    pub context: String,
    pub op: CompareOp,
    pub value: f64,
}

impl ContextPredicate {
    pub fn new(context: impl Into<String>, op: CompareOp, value: f64) -> Self {
        Self {
            context: context.into(),
            op,
            value,
        }
    }

    pub fn holds(&self, ctx: &ContextDescriptor) -> bool {
        let Some(x) = ctx.get(&self.context) else {
            return false;
        };
        match self.op {
            CompareOp::Le => x <= self.value,
            CompareOp::Lt => x < self.value,
            CompareOp::Ge => x >= self.value,
            CompareOp::Gt => x > self.value,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            op: self.op.negate(),
            ..self.clone()
        }
    }
}

/// Conjunction of context predicates. Empty means "everything".
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainPredicate(pub Vec<ContextPredicate>);

impl DomainPredicate {
    pub fn holds(&self, ctx: &ContextDescriptor) -> bool {
        self.0.iter().all(|p| p.holds(ctx))
    }
}

/// A group of entities sharing a critical-context condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub predicate: DomainPredicate,
    pub members: BTreeSet<EntityId>,
}

/// One domain per predicate, holding exactly the entities that satisfy it.
pub fn partition_domains<'a, I>(entities: I, predicates: &[DomainPredicate]) -> Vec<Domain>
where
    I: IntoIterator<Item = (&'a EntityId, &'a ContextDescriptor)>,
    I::IntoIter: Clone,
{
    let entities = entities.into_iter();
    predicates
        .iter()
        .map(|p| Domain {
            predicate: p.clone(),
            members: entities
                .clone()
                .filter(|(_, ctx)| p.holds(ctx))
                .map(|(id, _)| id.clone())
                .collect(),
        })
        .collect()
}

/// Multiplies a recommender's effective trust by `factor` when its context matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRule {
    pub predicate: ContextPredicate,
    pub factor: f64,
}

/// One rule per critical context: recommenders violating it are weighted by `factor`.
pub fn default_context_rules(critical: &[ContextPredicate], factor: f64) -> Vec<ContextRule> {
    critical
        .iter()
        .map(|p| ContextRule {
            predicate: p.negated(),
            factor,
        })
        .collect()
}

/// Product of the factors of every rule matching `ctx`.
pub fn context_penalty(rules: &[ContextRule], ctx: &ContextDescriptor) -> f64 {
    rules
        .iter()
        .filter(|r| r.predicate.holds(ctx))
        .map(|r| r.factor)
        .product()
}

/// How the requester evaluates one service type.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceProfile {
    pub id: ServiceTypeId,
    pub attrs: Vec<String>,
    pub weights: AttributeWeights,
    pub critical: Vec<ContextPredicate>,
}

impl ServiceProfile {
    pub fn critical_context_names(&self) -> Vec<String> {
        let names: BTreeSet<_> = self.critical.iter().map(|p| p.context.clone()).collect();
        names.into_iter().collect()
    }
}

/// What a requester can ask of the environment it lives in.
pub trait Environment {
    /// Sends `request` to `provider`; `None` means no reply.
    fn request_service(
        &mut self,
        requester: &EntityId,
        provider: &EntityId,
        request: &ServiceRequest,
    ) -> Option<ProviderOffer>;

    /// Asks `recommender` what it knows about `subject`.
    fn query_trust(
        &mut self,
        requester: &EntityId,
        recommender: &EntityId,
        subject: &EntityId,
        request: &ServiceRequest,
    ) -> Option<Recommendation>;

    /// Sends the service request to the selected provider and returns the
    /// normalized values it actually delivered, `None` if it refused.
    fn invoke(
        &mut self,
        requester: &EntityId,
        provider: &EntityId,
        request: &ServiceRequest,
    ) -> Option<Vec<f64>>;

    fn context_of(&self, entity: &EntityId) -> Option<ContextDescriptor>;
}

/// Sends `request` to every member of `domains` other than the requester,
/// in id order, and collects the replies.
pub fn dispatch<E: Environment + ?Sized>(
    env: &mut E,
    requester: &EntityId,
    request: &ServiceRequest,
    domains: &[Domain],
) -> Vec<ProviderOffer> {
    let targets: BTreeSet<&EntityId> = domains
        .iter()
        .flat_map(|d| d.members.iter())
        .filter(|id| *id != requester)
        .collect();
    targets
        .into_iter()
        .filter_map(|p| env.request_service(requester, p, request))
        .collect()
}

/// Re-sends the request to every domain of the environment. Only meaningful
/// after a dispatch that produced no offers.
pub fn broadcast_fallback<E: Environment + ?Sized>(
    env: &mut E,
    requester: &EntityId,
    request: &ServiceRequest,
    all_domains: &[Domain],
) -> Vec<ProviderOffer> {
    dispatch(env, requester, request, all_domains)
}

/// Trust in one candidate at one moment, with the pieces it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub subject: EntityId,
    pub trv: TrustValue,
    pub dt: Option<TrustValue>,
    pub it: Option<TrustValue>,
    pub method: Method,
    pub adequate: bool,
}

/// How the selected provider entered the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Provided,
    Recommended,
}

/// Per-recommender result of settling a transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommenderUpdate {
    pub recommender: EntityId,
    pub delta: f64,
    pub uf: f64,
    pub rt_old: TrustValue,
    pub rt_new: TrustValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub satisfaction: f64,
    pub delivered: Vec<f64>,
    pub assessment: Assessment,
    pub recommender_updates: Vec<RecommenderUpdate>,
}

/// Everything that happened in one request episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub observations: Vec<Assessment>,
    pub scores: Vec<ProviderScore>,
    pub selected: EntityId,
    pub route: Route,
    pub settlement: Settlement,
}

/// A recommendation as received: who made it and what it says.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedRecommendation {
    pub recommender: EntityId,
    pub trv: TrustValue,
    pub values: Vec<f64>,
}

struct Candidate {
    rv: Option<Vec<f64>>,
    recommendations: Vec<ReceivedRecommendation>,
}

/// The requester's decision logic bound to its own store and settings.
pub struct RequesterAgent<'a> {
    pub id: &'a EntityId,
    pub store: &'a mut StoreView,
    pub params: &'a TrustParams,
    pub context_rules: &'a [ContextRule],
}

impl<'a> RequesterAgent<'a> {
    /// Assesses trust in `subject` from the unexpired history and whatever
    /// recommendations are at hand, falling back to a fresh stored record
    /// and finally to the new-entity value.
    pub fn assess<E: Environment + ?Sized>(
        &self,
        env: &E,
        subject: &EntityId,
        service: &ServiceProfile,
        recommendations: &[ReceivedRecommendation],
        t_cur: Tick,
    ) -> Result<Assessment> {
        let history = self
            .store
            .query_history(subject, &service.id, t_cur, self.params);
        let method = trust::select_method(
            history.records.len(),
            !history.records.is_empty(),
            self.params,
        );
        let dt = if history.records.is_empty() {
            None
        } else {
            Some(trust::direct_trust(&history.records, t_cur, self.params)?)
        };
        let it = self.indirect(env, recommendations);
        let trv = match trust::combine_trust(dt, it, self.params, history.adequate) {
            Ok(t) => t,
            Err(TrustError::NoEvidence) => self
                .store
                .trust_record(subject, &service.id)
                .filter(|r| !expired(r, t_cur, self.params.record_ttl))
                .map(|r| r.trv)
                .unwrap_or_else(trust::new_entity_trust),
            Err(e) => return Err(e),
        };
        Ok(Assessment {
            subject: subject.clone(),
            trv,
            dt,
            it,
            method,
            adequate: history.adequate,
        })
    }

    fn indirect<E: Environment + ?Sized>(
        &self,
        env: &E,
        recommendations: &[ReceivedRecommendation],
    ) -> Option<TrustValue> {
        let weighted: Vec<_> = recommendations
            .iter()
            .filter_map(|r| {
                let profile = self.store.recommender(&r.recommender)?;
                let penalty = env
                    .context_of(&r.recommender)
                    .map(|ctx| context_penalty(self.context_rules, &ctx))
                    .unwrap_or(1.0);
                Some(WeightedRecommendation {
                    recommender: r.recommender.clone(),
                    rt: TrustValue::saturating(profile.rt.get() * penalty),
                    trv: r.trv,
                })
            })
            .collect();
        let screened =
            trust::screen_recommendations(&weighted, &self.store.reported_values(), self.params);
        trust::indirect_trust(&screened).ok()
    }

    /// Records that `recommender` reported `trv`, creating its profile if needed.
    fn register(&mut self, rec: &ReceivedRecommendation) {
        self.store
            .ensure_recommender(&rec.recommender)
            .recommended_values
            .push(rec.trv);
    }

    fn remember(&mut self, assessment: &Assessment, service: &ServiceProfile, t_cur: Tick) {
        if assessment.dt.is_none() && assessment.it.is_none() {
            return;
        }
        self.store.upsert_trust_record(
            TrustRecord {
                service_type: service.id.clone(),
                service_attrs: service.attrs.clone(),
                trv: assessment.trv,
                last_updated: t_cur,
                provider_id: assessment.subject.clone(),
            },
            t_cur,
        );
    }

    /// Scores every candidate, selects the best, invokes it and settles.
    ///
    /// `witnesses` are the entities that may be asked about providers the
    /// requester knows nothing about.
    #[allow(clippy::too_many_arguments)]
    pub fn choose_and_invoke<E: Environment + ?Sized>(
        &mut self,
        env: &mut E,
        request: &ServiceRequest,
        service: &ServiceProfile,
        offers: &[ProviderOffer],
        witnesses: &BTreeSet<EntityId>,
        t_cur: Tick,
    ) -> Result<EpisodeReport> {
        let mut candidates: BTreeMap<EntityId, Candidate> = BTreeMap::new();
        for offer in offers {
            match &offer.kind {
                OfferKind::Provide => {
                    if offer.rv.len() != request.attrs.len() || &offer.provider_id == self.id {
                        continue;
                    }
                    candidates
                        .entry(offer.provider_id.clone())
                        .or_insert_with(|| Candidate {
                            rv: None,
                            recommendations: vec![],
                        })
                        .rv = Some(offer.rv.clone());
                }
                OfferKind::Recommend(record) => {
                    if &record.provider_id == self.id || record.provider_id == offer.provider_id {
                        continue;
                    }
                    candidates
                        .entry(record.provider_id.clone())
                        .or_insert_with(|| Candidate {
                            rv: None,
                            recommendations: vec![],
                        })
                        .recommendations
                        .push(ReceivedRecommendation {
                            recommender: offer.provider_id.clone(),
                            trv: record.trv,
                            values: offer.rv.clone(),
                        });
                }
            }
        }
        if candidates.is_empty() {
            return Err(TrustError::EpisodeFailed("no candidates".into()));
        }

        // Ask witnesses about candidates that would otherwise get the
        // new-entity value.
        for (subject, cand) in candidates.iter_mut() {
            let unknown = cand.recommendations.is_empty()
                && self
                    .store
                    .query_history(subject, &service.id, t_cur, self.params)
                    .records
                    .is_empty()
                && self
                    .store
                    .trust_record(subject, &service.id)
                    .is_none_or(|r| expired(r, t_cur, self.params.record_ttl));
            if !unknown {
                continue;
            }
            for w in witnesses.iter().filter(|w| *w != subject && *w != self.id) {
                if let Some(rec) = env.query_trust(self.id, w, subject, request) {
                    cand.recommendations.push(ReceivedRecommendation {
                        recommender: w.clone(),
                        trv: rec.record.trv,
                        values: rec.values,
                    });
                }
            }
        }
        for cand in candidates.values() {
            for rec in &cand.recommendations {
                self.register(rec);
            }
        }

        let mut observations = Vec::new();
        let mut scores = Vec::new();
        for (subject, cand) in &candidates {
            let Some(rv) = cand
                .rv
                .clone()
                .or_else(|| mean_values(&cand.recommendations, request))
            else {
                continue;
            };
            let assessment = self.assess(&*env, subject, service, &cand.recommendations, t_cur)?;
            self.remember(&assessment, service, t_cur);
            let sp = fuzzy::evaluate_provider(&service.weights, &fuzzy::memberships(&rv)?)?;
            scores.push(ProviderScore {
                provider_id: subject.clone(),
                sp,
                v: fuzzy::score_provider(assessment.trv, sp.good, self.params.alpha),
            });
            observations.push((assessment, rv));
        }

        let selected = fuzzy::select_target(&scores)
            .map_err(|_| TrustError::EpisodeFailed("no scorable candidates".into()))?
            .clone();
        let cand = &candidates[&selected];
        let route = if cand.rv.is_some() {
            Route::Provided
        } else {
            Route::Recommended
        };
        let expected = observations
            .iter()
            .find(|(a, _)| a.subject == selected)
            .map(|(_, rv)| rv.clone())
            .expect("selected candidate was scored");
        let delivered = env.invoke(self.id, &selected, request).ok_or_else(|| {
            TrustError::EpisodeFailed(format!("{selected} refused the invocation"))
        })?;
        let context = env.context_of(&selected).unwrap_or_default();
        let vouchers = cand.recommendations.clone();
        let settlement = self.settle_transaction(
            &*env, &expected, &delivered, &selected, service, &vouchers, context, t_cur,
        )?;
        Ok(EpisodeReport {
            observations: observations.into_iter().map(|(a, _)| a).collect(),
            scores,
            selected,
            route,
            settlement,
        })
    }

    /// Records the outcome of a completed transaction: appends the
    /// interaction, recomputes trust in the provider and updates every
    /// recommender that vouched for it.
    #[allow(clippy::too_many_arguments)]
    pub fn settle_transaction<E: Environment + ?Sized>(
        &mut self,
        env: &E,
        expected: &[f64],
        delivered: &[f64],
        provider_id: &EntityId,
        service: &ServiceProfile,
        vouchers: &[ReceivedRecommendation],
        context: ContextDescriptor,
        t_cur: Tick,
    ) -> Result<Settlement> {
        let distance = trust::satisfaction_distance(expected, delivered)?;
        let satisfaction = trust::satisfaction_degree(distance)?;
        self.store.append_interaction(InteractionRecord {
            provider_id: provider_id.clone(),
            service_type: service.id.clone(),
            service_attrs: delivered.to_vec(),
            context_attrs: context,
            satisfaction,
            t_occ: t_cur,
        })?;
        let mut recommender_updates = Vec::new();
        for v in vouchers {
            if v.values.len() != delivered.len() {
                continue;
            }
            let delta = trust::similarity_distance(delivered, &v.values)?;
            let uf = trust::update_factor(delta, self.params.error_apt)?;
            let profile = self.store.ensure_recommender(&v.recommender);
            let rt_old = profile.rt;
            let rt_new = trust::update_recommender_trust(rt_old, uf);
            profile.rt = rt_new;
            profile.accuracy_history.push((delta, t_cur));
            recommender_updates.push(RecommenderUpdate {
                recommender: v.recommender.clone(),
                delta,
                uf,
                rt_old,
                rt_new,
            });
        }
        let assessment = self.assess(env, provider_id, service, vouchers, t_cur)?;
        self.remember(&assessment, service, t_cur);
        Ok(Settlement {
            satisfaction,
            delivered: delivered.to_vec(),
            assessment,
            recommender_updates,
        })
    }
}

/// Element-wise mean of the recommended values that match the request's width.
fn mean_values(recs: &[ReceivedRecommendation], request: &ServiceRequest) -> Option<Vec<f64>> {
    let n = request.attrs.len();
    let usable: Vec<_> = recs.iter().filter(|r| r.values.len() == n).collect();
    if usable.is_empty() {
        return None;
    }
    let mut out = vec![0.0; n];
    for r in &usable {
        for (o, v) in out.iter_mut().zip(&r.values) {
            *o += v;
        }
    }
    Some(
        out.into_iter()
            .map(|s| (s / usable.len() as f64).clamp(0.0, 1.0))
            .collect(),
    )
}
