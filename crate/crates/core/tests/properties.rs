mod oracle;

use std::collections::BTreeMap;

use proptest::prelude::*;

use ctxtrust::fuzzy::{self, AttributeWeights, FuzzyMembership, ProviderScore};
use ctxtrust::provider::{process_request, Capability, ProviderResponse};
use ctxtrust::requester::ServiceRequest;
use ctxtrust::store::{StoreView, TrustRecord};
use ctxtrust::trust::{self, InteractionRecord, TrustParams, WeightedRecommendation};
use ctxtrust::{ContextDescriptor, EntityId, TrustValue};

fn tv(v: f64) -> TrustValue {
    TrustValue::new(v).unwrap()
}

fn interaction(sd: f64, t: u64) -> InteractionRecord {
    InteractionRecord {
        provider_id: "p".into(),
        service_type: "s".into(),
        service_attrs: vec![0.5],
        context_attrs: ContextDescriptor::new(),
        satisfaction: sd,
        t_occ: t,
    }
}

fn signed() -> impl Strategy<Value = f64> {
    -1.0..=1.0f64
}

fn positive_rt() -> impl Strategy<Value = f64> {
    (1e-3..=1.0f64).prop_filter("positive", |v| *v > 0.0)
}

/// Normalized weights and matching values for 1..=4 attributes.
fn weighted_values() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01..1.0f64, n),
            prop::collection::vec(0.0..=1.0f64, n),
        )
            .prop_map(|(raw, v)| {
                let total: f64 = raw.iter().sum();
                (raw.iter().map(|x| x / total).collect(), v)
            })
    })
}

proptest! {
    #[test]
    fn direct_trust_is_bounded_by_its_satisfactions(
        sds in prop::collection::vec(signed(), 1..12),
        gaps in prop::collection::vec(0u64..50, 12),
        decay in 0.01..0.99f64,
    ) {
        let t_cur = 60;
        let history: Vec<_> = sds.iter().zip(&gaps).map(|(sd, g)| interaction(*sd, t_cur - g)).collect();
        let params = TrustParams { decay_base: decay, ..TrustParams::default() };
        let dt = trust::direct_trust(&history, t_cur, &params).unwrap().get();
        let lo = sds.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= dt && dt <= hi, "{dt} outside [{lo}, {hi}]");
    }

    #[test]
    fn recent_sign_wins_for_equal_magnitudes(
        mag in 0.01..=1.0f64,
        recent_positive: bool,
        t_old in 0u64..50,
        extra in 1u64..50,
        decay in 0.01..0.99f64,
    ) {
        let t_new = t_old + extra;
        let s = if recent_positive { mag } else { -mag };
        let history = [interaction(-s, t_old), interaction(s, t_new)];
        let params = TrustParams { decay_base: decay, ..TrustParams::default() };
        let dt = trust::direct_trust(&history, t_new + 3, &params).unwrap().get();
        prop_assert_eq!(dt > 0.0, recent_positive, "dt {}", dt);
        prop_assert!(dt != 0.0);
    }

    #[test]
    fn direct_trust_matches_naive_sum(
        history in prop::collection::vec((signed(), 0u64..=8), 1..=5),
        decay in 0.01..0.99f64,
    ) {
        let t_cur = 8;
        let records: Vec<_> = history.iter().map(|&(sd, gap)| interaction(sd, t_cur - gap)).collect();
        let naive: Vec<_> = history.iter().map(|&(sd, gap)| (sd, t_cur - gap)).collect();
        let params = TrustParams { decay_base: decay, ..TrustParams::default() };
        let got = trust::direct_trust(&records, t_cur, &params).unwrap().get();
        let want = oracle::direct(&naive, t_cur, decay);
        prop_assert!(oracle::rel_close(got, want, 1e-12), "{got} vs {want}");
    }

    #[test]
    fn recommender_update_is_monotone_in_factor(
        rt in positive_rt(),
        a in -30.0..2.0f64,
        b in -30.0..2.0f64,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let new_lo = trust::update_recommender_trust(tv(rt), lo).get();
        let new_hi = trust::update_recommender_trust(tv(rt), hi).get();
        prop_assert!(new_lo <= new_hi);
        prop_assert!((-1.0..=1.0).contains(&new_lo) && (-1.0..=1.0).contains(&new_hi));
    }

    #[test]
    fn indirect_trust_ignores_common_scale(
        recs in prop::collection::vec((positive_rt(), signed()), 1..8),
        c in 0.01..1.0f64,
    ) {
        let base: Vec<_> = recs.iter().map(|&(r, t)| (tv(r), tv(t))).collect();
        let scaled: Vec<_> = recs.iter().map(|&(r, t)| (tv(r * c), tv(t))).collect();
        let a = trust::indirect_trust(&base).unwrap().get();
        let b = trust::indirect_trust(&scaled).unwrap().get();
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn blend_endpoints(dt in signed(), it in signed(), adequate: bool) {
        let one = TrustParams { beta: 1.0, ..TrustParams::default() };
        let zero = TrustParams { beta: 0.0, ..TrustParams::default() };
        prop_assert_eq!(trust::combine_trust(Some(tv(dt)), Some(tv(it)), &one, adequate).unwrap().get(), dt);
        prop_assert_eq!(trust::combine_trust(Some(tv(dt)), Some(tv(it)), &zero, false).unwrap().get(), it);
        prop_assert_eq!(trust::combine_trust(Some(tv(dt)), Some(tv(it)), &zero, true).unwrap().get(), dt);
    }

    #[test]
    fn flagged_recommenders_change_nothing(
        honest in prop::collection::vec((positive_rt(), -0.7..0.7f64), 1..6),
        liar_rt in positive_rt(),
        liar_trv in signed(),
        liar_history in prop::collection::vec(0.85..=1.0f64, 3..8),
    ) {
        let params = TrustParams::default();
        let mut reported: BTreeMap<EntityId, Vec<TrustValue>> = BTreeMap::new();
        let mut recs: Vec<_> = honest
            .iter()
            .enumerate()
            .map(|(i, &(rt, trv))| {
                let id = EntityId::new(format!("h{i}"));
                reported.insert(id.clone(), vec![tv(trv)]);
                WeightedRecommendation { recommender: id, rt: tv(rt), trv: tv(trv) }
            })
            .collect();
        let before = trust::indirect_trust(&trust::screen_recommendations(&recs, &reported, &params)).unwrap();

        let liar = EntityId::new("liar");
        let history: Vec<_> = liar_history.iter().map(|v| tv(*v)).collect();
        prop_assert!(trust::detect_dishonest(&history, &params));
        reported.insert(liar.clone(), history);
        recs.push(WeightedRecommendation { recommender: liar, rt: tv(liar_rt), trv: tv(liar_trv) });
        let after = trust::indirect_trust(&trust::screen_recommendations(&recs, &reported, &params)).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn memberships_partition_unity(v in 0.0..=1.0f64) {
        let m = fuzzy::membership(v).unwrap();
        prop_assert!((m.sum() - 1.0).abs() <= 1e-9);
        for c in [m.good, m.average, m.bad] {
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn fuzzy_evaluation_stays_in_unit_interval((w, values) in weighted_values()) {
        let weights = AttributeWeights::new(w).unwrap();
        let sp = fuzzy::evaluate_provider(&weights, &fuzzy::memberships(&values).unwrap()).unwrap();
        for c in [sp.good, sp.average, sp.bad] {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&c), "{c}");
        }
    }

    #[test]
    fn selection_ignores_common_offset(
        v in prop::collection::vec(-1.0..=1.0f64, 1..8),
        shift in -1.0..=1.0f64,
    ) {
        // offsets that are exact in binary keep ties as ties
        let shift = (shift * 64.0).round() / 64.0;
        let v: Vec<f64> = v.iter().map(|x| (x * 64.0).round() / 64.0).collect();
        let scores = |offset: f64| -> Vec<ProviderScore> {
            v.iter()
                .enumerate()
                .map(|(i, x)| ProviderScore {
                    provider_id: EntityId::new(format!("p{i}")),
                    sp: FuzzyMembership::default(),
                    v: x + offset,
                })
                .collect()
        };
        let a = fuzzy::select_target(&scores(0.0)).unwrap().clone();
        let b = fuzzy::select_target(&scores(shift)).unwrap().clone();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn selection_matches_brute_force_on_grid(
        providers in prop::collection::vec(
            (0u8..=20, prop::collection::vec(0u8..=10, 3)),
            1..=4,
        ),
        n_attrs in 1usize..=3,
        raw_w in prop::collection::vec(1u8..=10, 3),
        alpha_step in 0u8..=10,
    ) {
        let alpha = alpha_step as f64 / 10.0;
        let total: f64 = raw_w[..n_attrs].iter().map(|w| *w as f64).sum();
        let w: Vec<f64> = raw_w[..n_attrs].iter().map(|x| *x as f64 / total).collect();
        let weights = AttributeWeights::new(w.clone()).unwrap();
        let ids: Vec<String> = (0..providers.len()).map(|i| format!("p{i}")).collect();
        let mut scores = vec![];
        let mut brute = vec![];
        for (i, (trv_step, vals)) in providers.iter().enumerate() {
            let trv = *trv_step as f64 / 10.0 - 1.0;
            let values: Vec<f64> = vals[..n_attrs].iter().map(|v| *v as f64 / 10.0).collect();
            let sp = fuzzy::evaluate_provider(&weights, &fuzzy::memberships(&values).unwrap()).unwrap();
            scores.push(ProviderScore {
                provider_id: EntityId::new(ids[i].as_str()),
                sp,
                v: fuzzy::score_provider(tv(trv), sp.good, alpha),
            });
            let rows: Vec<_> = values.iter().map(|v| oracle::membership(*v)).collect();
            brute.push(oracle::score(trv, oracle::weighted_rows(&w, &rows)[0], alpha));
        }
        let picked = fuzzy::select_target(&scores).unwrap().as_str().to_string();
        prop_assert_eq!(picked, ids[oracle::argmax(&ids, &brute)].clone());
    }

    #[test]
    fn provide_iff_every_threshold_met(
        pairs in prop::collection::vec((0u8..=10, 0u8..=10), 1..5),
    ) {
        let rv: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 10.0).collect();
        let thresholds: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 10.0).collect();
        let request = ServiceRequest::new(
            "s",
            thresholds.iter().enumerate().map(|(i, t)| (format!("a{i}"), *t)).collect(),
        )
        .unwrap();
        let cap = Capability {
            service_type: "s".into(),
            values: rv.iter().enumerate().map(|(i, v)| (format!("a{i}"), *v)).collect(),
        };
        let store = StoreView::new("me".into());
        let resp = process_request(&"you".into(), &request, Some(&cap), &store, 0.3);
        let meets = rv.iter().zip(&thresholds).all(|(r, t)| r >= t);
        prop_assert_eq!(matches!(resp, ProviderResponse::Provide(_)), meets);
    }

    #[test]
    fn recommendations_respect_min_trv(
        trvs in prop::collection::vec(signed(), 0..6),
        min_trv in -1.0..=1.0f64,
    ) {
        let mut store = StoreView::new("me".into());
        for (i, t) in trvs.iter().enumerate() {
            store.upsert_trust_record(
                TrustRecord {
                    service_type: "s".into(),
                    service_attrs: vec!["a0".into()],
                    trv: tv(*t),
                    last_updated: 0,
                    provider_id: EntityId::new(format!("p{i}")),
                },
                0,
            );
        }
        let request = ServiceRequest::new("s", vec![("a0".into(), 0.9)]).unwrap();
        let cap = Capability { service_type: "s".into(), values: BTreeMap::from([("a0".into(), 0.1)]) };
        match process_request(&"you".into(), &request, Some(&cap), &store, min_trv) {
            ProviderResponse::Recommend(rec) => {
                prop_assert!(rec.record.trv.get() >= min_trv);
                let best = trvs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(rec.record.trv.get(), best);
            }
            ProviderResponse::NoResponse => prop_assert!(trvs.iter().all(|t| *t < min_trv)),
            ProviderResponse::Provide(_) => prop_assert!(false, "threshold not met"),
        }
    }

    #[test]
    fn adequacy_never_lost_by_fresh_appends(
        mut ticks in prop::collection::vec(0u64..40, 0..10),
        min in 1usize..5,
        ttl in 0u64..20,
    ) {
        ticks.sort_unstable();
        let t_cur = 40;
        let params = TrustParams { adequacy_min_records: min, record_ttl: ttl, ..TrustParams::default() };
        let mut store = StoreView::new("me".into());
        for t in &ticks {
            store.append_interaction(interaction(0.5, *t)).unwrap();
        }
        let before = store.query_history(&"p".into(), &"s".into(), t_cur, &params);
        store.append_interaction(interaction(-0.5, t_cur)).unwrap();
        let after = store.query_history(&"p".into(), &"s".into(), t_cur, &params);
        prop_assert_eq!(after.records.len(), before.records.len() + 1);
        prop_assert!(!before.adequate || after.adequate);
        prop_assert_eq!(store.interactions().len(), ticks.len() + 1);
    }

    #[test]
    fn upsert_then_fetch_round_trips(trv in signed(), last in 0u64..100, now in 0u64..100) {
        let mut store = StoreView::new("me".into());
        let rec = TrustRecord {
            service_type: "s".into(),
            service_attrs: vec!["a".into(), "b".into()],
            trv: tv(trv),
            last_updated: last,
            provider_id: "p".into(),
        };
        store.upsert_trust_record(rec.clone(), now);
        let got = store.trust_record(&"p".into(), &"s".into()).unwrap().clone();
        prop_assert_eq!(got, TrustRecord { last_updated: now, ..rec });
    }
}
