//! Synthetic behavioural logs with planted anomalies.
//!
//! Each entity has a stable preference for every topic. The number of events
//! for (entity, topic, window) is Poisson with mean
//! `base_rate · preference · multiplier`, where the multiplier is 1 except for
//! planted anomalies. Topic vectors are Gaussian clusters so that MDS and the
//! grid layout have structure to preserve.

use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{ActivityEvent, IngestError, Result, WindowSpec};
use crate::embedding::HighDimVectors;
use crate::topic_grids::TopicInfo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub entity: String,
    pub topic: String,
    /// Zero-based window index.
    pub window: usize,
    pub multiplier: f64,
}

/// Generator settings. Entities are named `u1..`, topics `t1..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub entities: usize,
    pub topics: usize,
    pub windows: usize,
    pub origin: DateTime<Utc>,
    pub window_seconds: i64,
    /// Mean events per (entity, topic, window) at preference 1.
    pub base_rate: f64,
    /// Preferences are drawn uniformly from `[1 - spread, 1 + spread]`.
    pub preference_spread: f64,
    pub clusters: usize,
    pub vector_dims: usize,
    pub cluster_spread: f64,
    pub keywords_per_topic: usize,
    pub anomalies: Vec<Anomaly>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            entities: 8,
            topics: 16,
            windows: 8,
            origin: Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap(),
            window_seconds: 86_400,
            base_rate: 100.0,
            preference_spread: 0.3,
            clusters: 4,
            vector_dims: 24,
            cluster_spread: 0.35,
            keywords_per_topic: 4,
            anomalies: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn entity_ids(&self) -> Vec<String> {
        (1..=self.entities).map(|i| format!("u{i}")).collect()
    }

    pub fn topic_ids(&self) -> Vec<String> {
        (1..=self.topics).map(|i| format!("t{i}")).collect()
    }

    pub fn window_spec(&self) -> Result<WindowSpec> {
        WindowSpec::new(self.origin, Duration::seconds(self.window_seconds), self.windows)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IngestError::Scenario(m));
        if self.entities == 0 || self.topics == 0 || self.windows == 0 {
            return bad("entities, topics and windows must all be positive".into());
        }
        if self.clusters == 0 || self.vector_dims == 0 || self.keywords_per_topic == 0 {
            return bad("clusters, vector_dims and keywords_per_topic must be positive".into());
        }
        if !(self.base_rate.is_finite() && self.base_rate >= 0.0) {
            return bad(format!("base_rate must be nonnegative, got {}", self.base_rate));
        }
        if !(0.0..1.0).contains(&self.preference_spread) {
            return bad(format!("preference_spread must be in [0, 1), got {}", self.preference_spread));
        }
        let entities: BTreeSet<String> = self.entity_ids().into_iter().collect();
        let topics: BTreeSet<String> = self.topic_ids().into_iter().collect();
        for a in &self.anomalies {
            if !entities.contains(&a.entity) {
                return bad(format!("anomaly references unknown entity {:?}", a.entity));
            }
            if !topics.contains(&a.topic) {
                return bad(format!("anomaly references unknown topic {:?}", a.topic));
            }
            if a.window >= self.windows {
                return bad(format!("anomaly references unknown window {}", a.window));
            }
            if !(a.multiplier.is_finite() && a.multiplier >= 0.0) {
                return bad(format!("anomaly multiplier must be nonnegative, got {}", a.multiplier));
            }
        }
        self.window_spec().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub entities: Vec<String>,
    pub topics: Vec<TopicInfo>,
    pub vectors: HighDimVectors,
    pub window_spec: WindowSpec,
    /// Sorted by timestamp, then entity, then topic.
    pub events: Vec<ActivityEvent>,
}

pub fn synthesize(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entities = config.entity_ids();
    let topic_ids = config.topic_ids();
    let spec = config.window_spec()?;

    // Topic vectors: cluster centres plus per-topic noise.
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let centres: Vec<Vec<f64>> = (0..config.clusters)
        .map(|_| (0..config.vector_dims).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    let cluster_of = |t: usize| t % config.clusters;
    let vectors: Vec<Vec<f64>> = (0..config.topics)
        .map(|t| {
            centres[cluster_of(t)]
                .iter()
                .map(|c| c + config.cluster_spread * unit.sample(&mut rng))
                .collect()
        })
        .collect();

    // Neighbouring topics in a cluster share their lead keyword.
    let topics: Vec<TopicInfo> = topic_ids
        .iter()
        .enumerate()
        .map(|(t, id)| {
            let c = cluster_of(t);
            let rank_in_cluster = t / config.clusters;
            let mut keywords = vec![format!("c{c}-k{}", rank_in_cluster / 2)];
            keywords.extend((1..config.keywords_per_topic).map(|k| format!("{id}-k{k}")));
            TopicInfo::new(id.clone(), keywords)
        })
        .collect();

    let spread = config.preference_spread;
    let preference: Vec<Vec<f64>> = (0..config.entities)
        .map(|_| (0..config.topics).map(|_| rng.random_range(1.0 - spread..=1.0 + spread)).collect())
        .collect();
    let multipliers: HashMap<(&str, &str, usize), f64> = config
        .anomalies
        .iter()
        .map(|a| ((a.entity.as_str(), a.topic.as_str(), a.window), a.multiplier))
        .collect();

    let mut events = Vec::new();
    for w in 0..config.windows {
        let window = spec.window(w);
        for (e, entity) in entities.iter().enumerate() {
            for (t, topic) in topic_ids.iter().enumerate() {
                let m = multipliers.get(&(entity.as_str(), topic.as_str(), w)).copied().unwrap_or(1.0);
                let mean = config.base_rate * preference[e][t] * m;
                let count = if mean > 0.0 {
                    Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64
                } else {
                    0
                };
                for _ in 0..count {
                    let offset = rng.random_range(0..config.window_seconds);
                    events.push(ActivityEvent {
                        ts: window.start + Duration::seconds(offset),
                        entity: entity.clone(),
                        topic: topic.clone(),
                        weight: 1.0,
                    });
                }
            }
        }
    }
    events.sort_by(|a, b| (a.ts, &a.entity, &a.topic).cmp(&(b.ts, &b.entity, &b.topic)));

    Ok(Scenario {
        entities,
        topics,
        vectors: HighDimVectors::new(topic_ids, vectors).expect("generated vectors are consistent"),
        window_spec: spec,
        events,
    })
}
