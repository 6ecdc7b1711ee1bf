use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Duration, TimeZone, Utc};
use gridscope_core::embedding::{classical_mds, pairwise_distances, Metric};
use gridscope_core::ingest::{
    merge_profiles, parse_events_file, synthesize, window_profiles, ActivityEvent, Anomaly, ParseMode, ScenarioConfig,
    WindowSpec, WindowedProfiles,
};
use gridscope_core::topic_grids::{self_risk, topic_shower, ActivityProfile, DEFAULT_SMOOTHING};
use gridscope_core::{split_diffuse, GridShape};
use proptest::prelude::*;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn four_hour_spec() -> WindowSpec {
    WindowSpec::new(Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap(), Duration::hours(4), 3).unwrap()
}

fn table(p: &WindowedProfiles) -> Vec<(String, usize, Vec<(String, f64)>)> {
    let spec = four_hour_spec();
    p.profiles
        .iter()
        .map(|pr| {
            let w = spec.index_of(pr.window.start).unwrap();
            (pr.entity_id.clone(), w, pr.weights.iter().map(|(t, v)| (t.clone(), *v)).collect())
        })
        .collect()
}

#[test]
fn ten_event_fixture_matches_hand_table() {
    let parsed = parse_events_file(&fixture("ten_events.jsonl"), ParseMode::Strict).unwrap();
    assert_eq!(parsed.events.len(), 10);
    let profiles = window_profiles(&parsed.events, &four_hour_spec(), None);
    let s = |t: &str, v: f64| (t.to_string(), v);
    let expected = vec![
        ("u1".to_string(), 0, vec![s("t1", 3.0)]),
        ("u1".to_string(), 1, vec![s("t2", 4.0)]),
        ("u1".to_string(), 2, vec![s("t3", 1.0)]),
        ("u2".to_string(), 0, vec![]),
        ("u2".to_string(), 1, vec![s("t1", 0.5)]),
        ("u2".to_string(), 2, vec![s("t3", 5.0)]),
    ];
    assert_eq!(table(&profiles), expected);
    assert_eq!(profiles.dropped, 2);

    let only_u2 = window_profiles(&parsed.events, &four_hour_spec(), Some(&BTreeSet::from(["u2".to_string()])));
    assert_eq!(only_u2.entities(), BTreeSet::from(["u2"]));
}

#[test]
fn csv_fixture_keeps_order_and_defaults() {
    let parsed = parse_events_file(&fixture("three_events.csv"), ParseMode::Strict).unwrap();
    let summary: Vec<(&str, f64)> = parsed.events.iter().map(|e| (e.topic.as_str(), e.weight)).collect();
    assert_eq!(summary, vec![("t1", 1.0), ("t2", 1.0), ("t1", 2.5)]);
    assert!(parsed.events.windows(2).all(|w| w[0].ts < w[1].ts));
}

fn arb_events() -> impl Strategy<Value = Vec<ActivityEvent>> {
    let origin = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
    proptest::collection::vec(
        (-3_600i64..15 * 3_600, 0usize..3, 0usize..4, prop_oneof![Just(1.0), 0.0f64..5.0]),
        0..80,
    )
    .prop_map(move |rows| {
        rows.into_iter()
            .map(|(s, e, t, w)| ActivityEvent {
                ts: origin + Duration::seconds(s),
                entity: format!("u{e}"),
                topic: format!("t{t}"),
                weight: w,
            })
            .collect()
    })
}

fn approx_same(a: &WindowedProfiles, b: &WindowedProfiles) -> bool {
    a.dropped == b.dropped
        && a.profiles.len() == b.profiles.len()
        && a.profiles.iter().zip(&b.profiles).all(|(x, y)| {
            x.entity_id == y.entity_id
                && x.window == y.window
                && x.event_counts == y.event_counts
                && x.weights.keys().eq(y.weights.keys())
                && x.weights.iter().all(|(t, v)| (v - y.weights[t]).abs() < 1e-9)
        })
}

proptest! {
    #[test]
    fn aggregation_is_additive(a in arb_events(), b in arb_events()) {
        let spec = four_hour_spec();
        let joined: Vec<ActivityEvent> = a.iter().chain(&b).cloned().collect();
        let whole = window_profiles(&joined, &spec, None);
        let parts = merge_profiles(&window_profiles(&a, &spec, None), &window_profiles(&b, &spec, None));
        prop_assert!(approx_same(&whole, &parts));
        let flipped = merge_profiles(&window_profiles(&b, &spec, None), &window_profiles(&a, &spec, None));
        prop_assert!(approx_same(&parts, &flipped));
    }

    #[test]
    fn weight_is_conserved(events in arb_events()) {
        let spec = four_hour_spec();
        let p = window_profiles(&events, &spec, None);
        let in_range: f64 = events.iter().filter(|e| spec.index_of(e.ts).is_some()).map(|e| e.weight).sum();
        let total: f64 = p.profiles.iter().map(ActivityProfile::total).sum();
        prop_assert!((in_range - total).abs() < 1e-9);
        let outside = events.iter().filter(|e| spec.index_of(e.ts).is_none()).count();
        prop_assert_eq!(p.dropped, outside);
    }
}

fn universe(cfg: &ScenarioConfig) -> Vec<String> {
    cfg.topic_ids()
}

fn risk_at(profiles: &WindowedProfiles, entity: &str, w: usize, u: &[String]) -> BTreeMap<String, f64> {
    let mine: Vec<ActivityProfile> = profiles.for_entity(entity).cloned().collect();
    self_risk(&mine[w], &mine[..w], u, DEFAULT_SMOOTHING).unwrap().values
}

#[test]
fn quiet_scenarios_stay_quiet() {
    let cfg = ScenarioConfig::default();
    let u = universe(&cfg);
    let (mut low, mut total) = (0usize, 0usize);
    for seed in 0..20 {
        let s = synthesize(&cfg, seed).unwrap();
        let p = window_profiles(&s.events, &s.window_spec, None);
        for entity in &s.entities {
            for w in 1..cfg.windows {
                for v in risk_at(&p, entity, w, &u).values() {
                    total += 1;
                    low += usize::from(*v < 0.2);
                }
            }
        }
    }
    assert!(low as f64 >= 0.95 * total as f64, "{low}/{total} below 0.2");
}

fn planted() -> ScenarioConfig {
    ScenarioConfig {
        anomalies: vec![Anomaly { entity: "u1".into(), topic: "t5".into(), window: 3, multiplier: 20.0 }],
        ..ScenarioConfig::default()
    }
}

#[test]
fn planted_anomaly_tops_self_risk() {
    let cfg = planted();
    let u = universe(&cfg);
    let hits = (0..20)
        .filter(|&seed| {
            let s = synthesize(&cfg, seed).unwrap();
            let p = window_profiles(&s.events, &s.window_spec, None);
            let r = risk_at(&p, "u1", 3, &u);
            let top = r.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0.clone();
            top == "t5"
        })
        .count();
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn planted_spike_stands_out_in_the_shower() {
    let cfg = planted();
    let s = synthesize(&cfg, 4).unwrap();
    let emb = classical_mds(&pairwise_distances(&s.vectors, Metric::Euclidean).unwrap(), 2).unwrap();
    let a = split_diffuse(&emb.cloud, &GridShape::balanced(cfg.topics, 2).unwrap()).unwrap();
    let p = window_profiles(&s.events, &s.window_spec, None);
    let series: Vec<_> = p.for_entity("u1").map(|pr| (pr.window, pr.weights.clone())).collect();
    let shower = topic_shower(&a, &series).unwrap();
    assert_eq!(shower.layers.len(), cfg.windows);
    let t5: Vec<f64> = shower.layers.iter().map(|l| l["t5"]).collect();
    for (w, v) in t5.iter().enumerate() {
        if w != 3 {
            assert!(t5[3] > *v);
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = serde_json::to_vec(&synthesize(&planted(), 99).unwrap()).unwrap();
    let b = serde_json::to_vec(&synthesize(&planted(), 99).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn anomaly_scales_expected_weight() {
    // Mean of the planted cell over seeds, against the mean of the same cell
    // in a clean scenario.
    let clean = ScenarioConfig::default();
    let cell = |cfg: &ScenarioConfig, seed| {
        let s = synthesize(cfg, seed).unwrap();
        let p = window_profiles(&s.events, &s.window_spec, None);
        p.get("u1", &s.window_spec.window(3)).unwrap().weight("t5")
    };
    let n = 30;
    let hot: f64 = (0..n).map(|s| cell(&planted(), s)).sum::<f64>() / n as f64;
    let cold: f64 = (0..n).map(|s| cell(&clean, s)).sum::<f64>() / n as f64;
    let ratio = hot / cold;
    assert!((15.0..25.0).contains(&ratio), "ratio {ratio}");
}
