use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::behavior::BehaviorModel;
use super::config::{EpisodeConfig, Role, ScenarioConfig, ServiceTypeConfig};
use super::metrics::{MetricsLog, MetricsRow, Outcome};
use crate::error::{Result, TrustError};
use crate::provider::{
    answer_trust_query, local_policy_gate, process_request, Capability, GateDecision,
    PrivacyPolicy, ProviderResponse, Recommendation,
};
use crate::requester::{
    broadcast_fallback, default_context_rules, dispatch, partition_domains, ContextRule, Domain,
    DomainPredicate, Environment, EpisodeReport, OfferKind, ProviderOffer, RequesterAgent,
    ServiceProfile, ServiceRequest,
};
use crate::store::{StoreView, TrustRecord};
use crate::trust::{self, InteractionRecord};
use crate::types::{ContextDescriptor, EntityId, ServiceTypeId, Tick};

/// One simulated entity and everything it owns.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: EntityId,
    pub role: Role,
    pub context: ContextDescriptor,
    pub behavior: BehaviorModel,
    pub policy: PrivacyPolicy,
    pub capabilities: BTreeMap<ServiceTypeId, Capability>,
    pub store: StoreView,
    rng: ChaCha8Rng,
}

/// Entities contacted by one requester during one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactTrace {
    pub tick: Tick,
    pub requester: EntityId,
    pub in_domain: BTreeSet<EntityId>,
    pub contacted: BTreeSet<EntityId>,
    pub broadcast: bool,
}

struct Service {
    config: ServiceTypeConfig,
    profile: ServiceProfile,
    rules: Vec<ContextRule>,
}

/// Context changes scheduled for one tick: entity and the values it takes on.
type ContextChanges = Vec<(EntityId, BTreeMap<String, f64>)>;

/// The whole simulated environment.
pub struct World {
    clock: Tick,
    ticks: Tick,
    params: trust::TrustParams,
    min_trv: f64,
    services: BTreeMap<ServiceTypeId, Service>,
    agents: BTreeMap<EntityId, Agent>,
    episodes: BTreeMap<Tick, Vec<EpisodeConfig>>,
    context_updates: BTreeMap<Tick, ContextChanges>,
    log: MetricsLog,
    contacts: Vec<ContactTrace>,
}

/// Stable 64-bit FNV-1a, used to give each entity its own random stream.
fn stream_id(id: &EntityId) -> u64 {
    id.as_str().bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl World {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut services = BTreeMap::new();
        for st in &config.service_types {
            let profile = st.profile()?;
            let rules = config.context_rules.clone().unwrap_or_else(|| {
                default_context_rules(&profile.critical, config.context_penalty)
            });
            services.insert(
                st.id.clone(),
                Service {
                    config: st.clone(),
                    profile,
                    rules,
                },
            );
        }

        let mut agents = BTreeMap::new();
        for e in &config.entities {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream_id(&e.id));
            let capabilities = e
                .capabilities
                .iter()
                .map(|c| {
                    let st = &services[&c.service_type].config;
                    (c.service_type.clone(), st.capability(&c.values))
                })
                .collect();
            let mut store = StoreView::new(e.id.clone());
            seed_history(&mut store, e, &services, &config.params)?;
            agents.insert(
                e.id.clone(),
                Agent {
                    id: e.id.clone(),
                    role: e.role,
                    context: e.context.clone(),
                    behavior: e.behavior.clone(),
                    policy: e.policy.clone(),
                    capabilities,
                    store,
                    rng,
                },
            );
        }

        let mut episodes: BTreeMap<Tick, Vec<EpisodeConfig>> = BTreeMap::new();
        for ep in &config.episodes {
            episodes.entry(ep.tick).or_default().push(ep.clone());
        }
        // sender order within a tick; stable for one requester's own episodes
        for eps in episodes.values_mut() {
            eps.sort_by(|a, b| a.requester.cmp(&b.requester));
        }
        let mut context_updates: BTreeMap<Tick, Vec<_>> = BTreeMap::new();
        for u in &config.context_updates {
            context_updates
                .entry(u.tick)
                .or_default()
                .push((u.entity.clone(), u.context.clone()));
        }

        Ok(Self {
            clock: 0,
            ticks: config.ticks,
            params: config.params.clone(),
            min_trv: config.min_trv,
            services,
            agents,
            episodes,
            context_updates,
            log: MetricsLog::new(),
            contacts: Vec::new(),
        })
    }

    pub fn clock(&self) -> Tick {
        self.clock
    }

    pub fn is_finished(&self) -> bool {
        self.clock >= self.ticks
    }

    pub fn log(&self) -> &MetricsLog {
        &self.log
    }

    pub fn into_log(self) -> MetricsLog {
        self.log
    }

    pub fn contacts(&self) -> &[ContactTrace] {
        &self.contacts
    }

    pub fn agent(&self, id: &EntityId) -> Option<&Agent> {
        self.agents.get(id)
    }

    pub fn store(&self, id: &EntityId) -> Option<&StoreView> {
        self.agents.get(id).map(|a| &a.store)
    }

    /// Applies this tick's context updates, runs its episodes in requester
    /// order and advances the clock by one.
    pub fn step(&mut self) -> Result<()> {
        let t = self.clock;
        if let Some(updates) = self.context_updates.remove(&t) {
            for (id, ctx) in updates {
                if let Some(a) = self.agents.get_mut(&id) {
                    for (k, v) in ctx {
                        a.context.set(k, v);
                    }
                }
            }
        }
        if let Some(eps) = self.episodes.remove(&t) {
            for ep in eps {
                self.run_episode(&ep, t)?;
            }
        }
        self.clock += 1;
        Ok(())
    }

    fn run_episode(&mut self, ep: &EpisodeConfig, t: Tick) -> Result<()> {
        let service = &self.services[&ep.service_type];
        let request = service.config.request(&ep.thresholds)?;
        let mut requester = self
            .agents
            .remove(&ep.requester)
            .ok_or_else(|| TrustError::UnknownEntity(ep.requester.clone()))?;

        let predicate = DomainPredicate(service.profile.critical.clone());
        let in_domain = partition_domains(
            self.agents.iter().map(|(id, a)| (id, &a.context)),
            std::slice::from_ref(&predicate),
        );
        let remainder = Domain {
            predicate: DomainPredicate::default(),
            members: self
                .agents
                .keys()
                .filter(|id| !in_domain[0].members.contains(*id))
                .cloned()
                .collect(),
        };
        let all_domains = vec![in_domain[0].clone(), remainder];

        let mut env = WorldEnv {
            agents: &mut self.agents,
            services: &self.services,
            min_trv: self.min_trv,
            tick: t,
            contacted: BTreeSet::new(),
        };
        let mut offers = dispatch(&mut env, &requester.id, &request, &in_domain);
        let broadcast = offers.is_empty();
        if broadcast {
            offers = broadcast_fallback(&mut env, &requester.id, &request, &all_domains);
        }
        let witnesses = if broadcast {
            all_domains.iter().flat_map(|d| d.members.clone()).collect()
        } else {
            in_domain[0].members.clone()
        };

        let mut agent = RequesterAgent {
            id: &requester.id,
            store: &mut requester.store,
            params: &self.params,
            context_rules: &service.rules,
        };
        let result =
            agent.choose_and_invoke(&mut env, &request, &service.profile, &offers, &witnesses, t);
        let contacted = env.contacted;
        self.contacts.push(ContactTrace {
            tick: t,
            requester: requester.id.clone(),
            in_domain: in_domain[0].members.clone(),
            contacted,
            broadcast,
        });

        let outcome = match result {
            Ok(report) => {
                record_episode(&mut self.log, &requester.id, t, &report);
                Ok(())
            }
            Err(TrustError::EpisodeFailed(_)) => {
                self.log.push(MetricsRow {
                    tick: t,
                    observer: requester.id.clone(),
                    subject: None,
                    trv: None,
                    dt: None,
                    it: None,
                    rt: None,
                    selected: None,
                    outcome: Outcome::Failed,
                    adequate: None,
                });
                Ok(())
            }
            Err(e) => Err(e),
        };
        self.agents.insert(requester.id.clone(), requester);
        outcome
    }
}

fn record_episode(log: &mut MetricsLog, observer: &EntityId, t: Tick, report: &EpisodeReport) {
    for a in &report.observations {
        log.push(MetricsRow {
            tick: t,
            observer: observer.clone(),
            subject: Some(a.subject.clone()),
            trv: Some(a.trv.get()),
            dt: a.dt.map(|v| v.get()),
            it: a.it.map(|v| v.get()),
            rt: None,
            selected: Some(report.selected.clone()),
            outcome: Outcome::Observe,
            adequate: Some(a.adequate),
        });
    }
    for u in &report.settlement.recommender_updates {
        log.push(MetricsRow {
            tick: t,
            observer: observer.clone(),
            subject: Some(u.recommender.clone()),
            trv: None,
            dt: None,
            it: None,
            rt: Some(u.rt_new.get()),
            selected: Some(report.selected.clone()),
            outcome: Outcome::Recommender,
            adequate: None,
        });
    }
    let a = &report.settlement.assessment;
    log.push(MetricsRow {
        tick: t,
        observer: observer.clone(),
        subject: Some(report.selected.clone()),
        trv: Some(a.trv.get()),
        dt: a.dt.map(|v| v.get()),
        it: a.it.map(|v| v.get()),
        rt: None,
        selected: Some(report.selected.clone()),
        outcome: match report.route {
            crate::requester::Route::Provided => Outcome::Settled,
            crate::requester::Route::Recommended => Outcome::Recommended,
        },
        adequate: Some(a.adequate),
    });
}

/// Replays an entity's seeded past interactions into its store and derives
/// the matching trust records.
fn seed_history(
    store: &mut StoreView,
    e: &super::config::EntityConfig,
    services: &BTreeMap<ServiceTypeId, Service>,
    params: &trust::TrustParams,
) -> Result<()> {
    let mut seeds: Vec<_> = e.history.iter().collect();
    seeds.sort_by_key(|s| s.tick);
    for s in &seeds {
        let st = &services[&s.service_type].config;
        let expected = st.normalize_map(&s.expected);
        let delivered = st.normalize_map(&s.delivered);
        let satisfaction =
            trust::satisfaction_degree(trust::satisfaction_distance(&expected, &delivered)?)?;
        store.append_interaction(InteractionRecord {
            provider_id: s.provider.clone(),
            service_type: s.service_type.clone(),
            service_attrs: delivered,
            context_attrs: ContextDescriptor::new(),
            satisfaction,
            t_occ: s.tick,
        })?;
    }
    let Some(now) = seeds.last().map(|s| s.tick) else {
        return Ok(());
    };
    let pairs: BTreeSet<_> = seeds
        .iter()
        .map(|s| (s.provider.clone(), s.service_type.clone()))
        .collect();
    for (provider, st) in pairs {
        let q = store.query_history(&provider, &st, now, params);
        if q.records.is_empty() {
            continue;
        }
        let dt = trust::direct_trust(&q.records, now, params)?;
        let trv = trust::combine_trust(Some(dt), None, params, q.adequate)?;
        store.upsert_trust_record(
            TrustRecord {
                service_type: st.clone(),
                service_attrs: services[&st].profile.attrs.clone(),
                trv,
                last_updated: now,
                provider_id: provider,
            },
            now,
        );
    }
    Ok(())
}

/// The environment as seen by one requester during one episode.
struct WorldEnv<'w> {
    agents: &'w mut BTreeMap<EntityId, Agent>,
    services: &'w BTreeMap<ServiceTypeId, Service>,
    min_trv: f64,
    tick: Tick,
    contacted: BTreeSet<EntityId>,
}

impl WorldEnv<'_> {
    fn gate(&self, agent: &Agent, requester: &EntityId, request: &ServiceRequest) -> bool {
        let critical = self
            .services
            .get(&request.service_type)
            .map(|s| s.profile.critical_context_names())
            .unwrap_or_default();
        local_policy_gate(requester, request, &critical, &agent.policy) == GateDecision::Pass
    }
}

impl Environment for WorldEnv<'_> {
    fn request_service(
        &mut self,
        requester: &EntityId,
        provider: &EntityId,
        request: &ServiceRequest,
    ) -> Option<ProviderOffer> {
        self.contacted.insert(provider.clone());
        let agent = self.agents.get(provider)?;
        if !agent.role.provides() || !self.gate(agent, requester, request) {
            return None;
        }
        let cap = agent.capabilities.get(&request.service_type);
        match process_request(requester, request, cap, &agent.store, self.min_trv) {
            ProviderResponse::Provide(rv) => Some(ProviderOffer {
                provider_id: provider.clone(),
                rv,
                kind: OfferKind::Provide,
            }),
            ProviderResponse::Recommend(rec) => {
                let Recommendation { record, values } = agent.behavior.distort(rec);
                Some(ProviderOffer {
                    provider_id: provider.clone(),
                    rv: values,
                    kind: OfferKind::Recommend(record),
                })
            }
            ProviderResponse::NoResponse => None,
        }
    }

    fn query_trust(
        &mut self,
        requester: &EntityId,
        recommender: &EntityId,
        subject: &EntityId,
        request: &ServiceRequest,
    ) -> Option<Recommendation> {
        self.contacted.insert(recommender.clone());
        let agent = self.agents.get(recommender)?;
        if !self.gate(agent, requester, request) {
            return None;
        }
        answer_trust_query(&agent.store, subject, request).map(|r| agent.behavior.distort(r))
    }

    fn invoke(
        &mut self,
        requester: &EntityId,
        provider: &EntityId,
        request: &ServiceRequest,
    ) -> Option<Vec<f64>> {
        self.contacted.insert(provider.clone());
        let agent = self.agents.get(provider)?;
        if !agent.role.provides() || !self.gate(agent, requester, request) {
            return None;
        }
        let promised = agent
            .capabilities
            .get(&request.service_type)?
            .real_values(request);
        let agent = self.agents.get_mut(provider)?;
        Some(agent.behavior.deliver(&promised, self.tick, &mut agent.rng))
    }

    fn context_of(&self, entity: &EntityId) -> Option<ContextDescriptor> {
        self.agents.get(entity).map(|a| a.context.clone())
    }
}

/// Runs a scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<MetricsLog> {
    let mut world = World::new(config)?;
    while !world.is_finished() {
        world.step()?;
    }
    Ok(world.into_log())
}
