//! Per-entity persistence: the trust records DB, the append-only interaction
//! history and recommender profiles, with JSON snapshot export/import.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrustError};
use crate::trust::{init_recommender_trust, InteractionRecord, RecommenderProfile, TrustParams};
use crate::types::{EntityId, ServiceTypeId, Tick, TrustValue};

/// Stored trust in one provider for one service type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRecord {
    pub service_type: ServiceTypeId,
    pub service_attrs: Vec<String>,
    pub trv: TrustValue,
    pub last_updated: Tick,
    pub provider_id: EntityId,
}

impl TrustRecord {
    fn key(&self) -> RecordKey {
        (self.provider_id.clone(), self.service_type.clone())
    }
}

type RecordKey = (EntityId, ServiceTypeId);

/// A record is stale once strictly more than `ttl` ticks have passed since its update.
pub fn expired(record: &TrustRecord, t_cur: Tick, ttl: Tick) -> bool {
    t_cur.saturating_sub(record.last_updated) > ttl
}

/// Result of a history lookup: the unexpired matching interactions and
/// whether there are enough of them to rely on direct trust alone.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryQuery {
    pub records: Vec<InteractionRecord>,
    pub adequate: bool,
}

/// Everything one entity has stored. Owned and mutated by that entity only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StoreSnapshot", into = "StoreSnapshot")]
pub struct StoreView {
    owner_id: EntityId,
    trust_records: BTreeMap<RecordKey, TrustRecord>,
    interactions: Vec<InteractionRecord>,
    recommenders: BTreeMap<EntityId, RecommenderProfile>,
}

impl StoreView {
    pub fn new(owner_id: EntityId) -> Self {
        Self {
            owner_id,
            trust_records: BTreeMap::new(),
            interactions: Vec::new(),
            recommenders: BTreeMap::new(),
        }
    }

    pub fn owner_id(&self) -> &EntityId {
        &self.owner_id
    }

    /// Inserts or replaces the record for `(provider_id, service_type)`,
    /// stamping it with `now`.
    pub fn upsert_trust_record(&mut self, mut record: TrustRecord, now: Tick) {
        record.last_updated = now;
        self.trust_records.insert(record.key(), record);
    }

    pub fn trust_record(
        &self,
        provider_id: &EntityId,
        service_type: &ServiceTypeId,
    ) -> Option<&TrustRecord> {
        self.trust_records
            .get(&(provider_id.clone(), service_type.clone()))
    }

    pub fn trust_records(&self) -> impl Iterator<Item = &TrustRecord> {
        self.trust_records.values()
    }

    /// All records about `provider_id`, across service types.
    pub fn records_about<'a>(
        &'a self,
        provider_id: &'a EntityId,
    ) -> impl Iterator<Item = &'a TrustRecord> + 'a {
        self.trust_records
            .values()
            .filter(move |r| &r.provider_id == provider_id)
    }

    pub fn append_interaction(&mut self, record: InteractionRecord) -> Result<()> {
        if let Some(last) = self.interactions.last() {
            if record.t_occ < last.t_occ {
                return Err(TrustError::OutOfOrder {
                    last: last.t_occ,
                    got: record.t_occ,
                });
            }
        }
        if !(-1.0..=1.0).contains(&record.satisfaction) {
            return Err(TrustError::InvalidInput(format!(
                "satisfaction {} outside [-1, 1]",
                record.satisfaction
            )));
        }
        self.interactions.push(record);
        Ok(())
    }

    pub fn interactions(&self) -> &[InteractionRecord] {
        &self.interactions
    }

    pub fn query_history(
        &self,
        provider_id: &EntityId,
        service_type: &ServiceTypeId,
        t_cur: Tick,
        params: &TrustParams,
    ) -> HistoryQuery {
        let records: Vec<_> = self
            .interactions
            .iter()
            .filter(|r| &r.provider_id == provider_id && &r.service_type == service_type)
            .filter(|r| r.t_occ <= t_cur && t_cur - r.t_occ <= params.record_ttl)
            .cloned()
            .collect();
        let adequate = records.len() >= params.adequacy_min_records;
        HistoryQuery { records, adequate }
    }

    /// Most recent interaction with `provider_id` for `service_type`, expired or not.
    pub fn latest_interaction(
        &self,
        provider_id: &EntityId,
        service_type: &ServiceTypeId,
    ) -> Option<&InteractionRecord> {
        self.interactions
            .iter()
            .rev()
            .find(|r| &r.provider_id == provider_id && &r.service_type == service_type)
    }

    /// The highest-trust record for `service_type` at or above `min_trv`.
    /// Ties go to the smallest provider id; `exclude` is never returned.
    pub fn find_recommendable(
        &self,
        service_type: &ServiceTypeId,
        min_trv: f64,
        exclude: Option<&EntityId>,
    ) -> Option<&TrustRecord> {
        self.trust_records
            .values()
            .filter(|r| &r.service_type == service_type && r.trv.get() >= min_trv)
            .filter(|r| Some(&r.provider_id) != exclude)
            .reduce(|best, r| if r.trv > best.trv { r } else { best })
    }

    pub fn recommender(&self, id: &EntityId) -> Option<&RecommenderProfile> {
        self.recommenders.get(id)
    }

    pub fn recommenders(&self) -> impl Iterator<Item = &RecommenderProfile> {
        self.recommenders.values()
    }

    /// Returns the profile for `id`, creating it from the stored trust in
    /// `id` as a provider if it does not exist yet.
    pub fn ensure_recommender(&mut self, id: &EntityId) -> &mut RecommenderProfile {
        if !self.recommenders.contains_key(id) {
            let rt = init_recommender_trust(self.records_about(id));
            self.recommenders
                .insert(id.clone(), RecommenderProfile::new(id.clone(), rt));
        }
        self.recommenders.get_mut(id).expect("inserted above")
    }

    pub fn recommender_mut(&mut self, id: &EntityId) -> Option<&mut RecommenderProfile> {
        self.recommenders.get_mut(id)
    }

    /// Every value each recommender has reported, keyed by recommender.
    pub fn reported_values(&self) -> BTreeMap<EntityId, Vec<TrustValue>> {
        self.recommenders
            .iter()
            .map(|(id, p)| (id.clone(), p.recommended_values.clone()))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| TrustError::Snapshot(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| TrustError::Snapshot(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreSnapshot {
    owner_id: EntityId,
    trust_records: Vec<TrustRecord>,
    interactions: Vec<InteractionRecord>,
    recommenders: Vec<RecommenderProfile>,
}

impl From<StoreView> for StoreSnapshot {
    fn from(v: StoreView) -> Self {
        Self {
            owner_id: v.owner_id,
            trust_records: v.trust_records.into_values().collect(),
            interactions: v.interactions,
            recommenders: v.recommenders.into_values().collect(),
        }
    }
}

impl TryFrom<StoreSnapshot> for StoreView {
    type Error = TrustError;

    fn try_from(s: StoreSnapshot) -> Result<Self> {
        let mut view = StoreView::new(s.owner_id);
        for r in s.trust_records {
            if view.trust_records.insert(r.key(), r.clone()).is_some() {
                return Err(TrustError::Snapshot(format!(
                    "duplicate trust record for ({}, {})",
                    r.provider_id, r.service_type
                )));
            }
        }
        for i in s.interactions {
            view.append_interaction(i)?;
        }
        for p in s.recommenders {
            if p.accuracy_history
                .iter()
                .any(|(d, _)| !(0.0..=1.0).contains(d))
            {
                return Err(TrustError::Snapshot(format!(
                    "recommender {} has a delta outside [0, 1]",
                    p.recommender_id
                )));
            }
            let id = p.recommender_id.clone();
            if view.recommenders.insert(id.clone(), p).is_some() {
                return Err(TrustError::Snapshot(format!("duplicate recommender {id}")));
            }
        }
        Ok(view)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ContextDescriptor;

    fn record(provider: &str, st: &str, trv: f64) -> TrustRecord {
        TrustRecord {
            service_type: st.into(),
            service_attrs: vec!["quality".into()],
            trv: TrustValue::new(trv).unwrap(),
            last_updated: 0,
            provider_id: provider.into(),
        }
    }

    fn interaction(provider: &str, t: Tick) -> InteractionRecord {
        InteractionRecord {
            provider_id: provider.into(),
            service_type: "print".into(),
            service_attrs: vec![0.5],
            context_attrs: ContextDescriptor::new(),
            satisfaction: 1.0,
            t_occ: t,
        }
    }

    #[test]
    fn upsert_semantics() {
        let mut s = StoreView::new("me".into());
        s.upsert_trust_record(record("a", "print", 0.1), 3);
        assert_eq!(s.trust_records().count(), 1);
        s.upsert_trust_record(record("a", "print", 0.7), 4);
        assert_eq!(s.trust_records().count(), 1);
        let r = s.trust_record(&"a".into(), &"print".into()).unwrap();
        assert_eq!((r.trv.get(), r.last_updated), (0.7, 4));
        s.upsert_trust_record(record("b", "print", 0.2), 4);
        assert_eq!(s.trust_records().count(), 2);
    }

    #[test]
    fn expiry_boundary() {
        let mut r = record("a", "s", 0.1);
        r.last_updated = 10;
        assert!(!expired(&r, 10, 5));
        assert!(!expired(&r, 15, 5));
        assert!(expired(&r, 16, 5));
    }

    #[test]
    fn append_enforces_order() {
        let mut s = StoreView::new("me".into());
        s.append_interaction(interaction("a", 5)).unwrap();
        assert_eq!(s.interactions().len(), 1);
        assert_eq!(
            s.append_interaction(interaction("a", 3)),
            Err(TrustError::OutOfOrder { last: 5, got: 3 })
        );
        s.append_interaction(interaction("a", 5)).unwrap();
        assert_eq!(s.interactions().len(), 2);
    }

    #[test]
    fn query_history_adequacy_and_expiry() {
        let p = TrustParams {
            adequacy_min_records: 3,
            record_ttl: 10,
            ..TrustParams::default()
        };
        let mut s = StoreView::new("me".into());
        let q = s.query_history(&"a".into(), &"print".into(), 0, &p);
        assert!(q.records.is_empty() && !q.adequate);

        for t in [20, 21, 22] {
            s.append_interaction(interaction("a", t)).unwrap();
        }
        let q = s.query_history(&"a".into(), &"print".into(), 25, &p);
        assert_eq!(q.records.len(), 3);
        assert!(q.adequate);

        // first two are now older than ttl
        let q = s.query_history(&"a".into(), &"print".into(), 31, &p);
        assert_eq!(q.records.len(), 2);
        let q = s.query_history(&"a".into(), &"print".into(), 32, &p);
        assert_eq!(q.records.len(), 1);
        assert!(!q.adequate);

        // other providers are not counted
        let q = s.query_history(&"b".into(), &"print".into(), 25, &p);
        assert!(q.records.is_empty());
    }

    #[test]
    fn find_recommendable_picks_best_above_threshold() {
        let mut s = StoreView::new("me".into());
        assert!(s.find_recommendable(&"print".into(), 0.5, None).is_none());
        s.upsert_trust_record(record("a", "print", 0.3), 0);
        s.upsert_trust_record(record("b", "print", 0.9), 0);
        s.upsert_trust_record(record("c", "scan", 1.0), 0);
        let r = s.find_recommendable(&"print".into(), 0.5, None).unwrap();
        assert_eq!(r.provider_id.as_str(), "b");
        assert!(s.find_recommendable(&"print".into(), 0.95, None).is_none());
        assert!(s
            .find_recommendable(&"print".into(), 0.5, Some(&"b".into()))
            .is_none());
    }

    #[test]
    fn recommender_initialized_from_records() {
        let mut s = StoreView::new("me".into());
        s.upsert_trust_record(record("r", "print", 0.5), 0);
        s.upsert_trust_record(record("r", "scan", 0.7), 0);
        assert!((s.ensure_recommender(&"r".into()).rt.get() - 0.6).abs() < 1e-12);
        assert_eq!(s.ensure_recommender(&"new".into()).rt, TrustValue::ZERO);
    }

    #[test]
    fn snapshot_round_trip_and_schema() {
        let mut s = StoreView::new("me".into());
        s.upsert_trust_record(record("a", "print", 0.4), 2);
        s.append_interaction(interaction("a", 2)).unwrap();
        s.ensure_recommender(&"a".into())
            .accuracy_history
            .push((0.1, 2));
        let json = s.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["owner_id", "trust_records", "interactions", "recommenders"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["trust_records"][0]["provider_id"], "a");
        assert_eq!(v["interactions"][0]["t_occ"], 2);
        assert_eq!(StoreView::from_json(&json).unwrap(), s);
    }

    #[test]
    fn snapshot_import_rejects_invalid() {
        let mut s = StoreView::new("me".into());
        s.append_interaction(interaction("a", 5)).unwrap();
        s.append_interaction(interaction("a", 6)).unwrap();
        let json = s.to_json().unwrap().replace("\"t_occ\": 6", "\"t_occ\": 1");
        assert!(StoreView::from_json(&json).is_err());

        let mut s = StoreView::new("me".into());
        s.upsert_trust_record(record("a", "print", 0.4), 2);
        let json = s.to_json().unwrap().replace("0.4", "1.4");
        assert!(StoreView::from_json(&json).is_err());
    }
}
