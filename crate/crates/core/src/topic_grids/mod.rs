//! Topic grids: topics bound to lattice cells, carrying activity and risk
//! values, plus the curtain and shower time stacks.

mod grid;
mod risk;
mod time;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sd::SdError;

pub use grid::{build_topic_grid, GridCell, GridMeta, TopicGrid};
pub use risk::{peer_risk, self_risk, RiskGrid, RiskKind, DEFAULT_SMOOTHING};
pub use time::{topic_curtain, topic_shower, topic_shower_for, StackAxis, TimeStack};

pub type TopicId = String;
pub type Distribution = BTreeMap<TopicId, f64>;

#[derive(Debug, Error, PartialEq)]
pub enum TopicGridError {
    #[error("topic universe is empty")]
    EmptyUniverse,
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("duplicate topic {0:?}")]
    DuplicateTopic(String),
    #[error("topic {0:?} has no keywords")]
    NoKeywords(String),
    #[error("smoothing must be finite and nonnegative, got {0}")]
    BadSmoothing(f64),
    #[error("weight for {topic:?} must be finite and nonnegative, got {weight}")]
    BadWeight { topic: String, weight: f64 },
    #[error("window start {start} is not before end {end}")]
    EmptyWindow { start: DateTime<Utc>, end: DateTime<Utc> },
    #[error("profile for {found:?} where {expected:?} was expected")]
    EntityMismatch { expected: String, found: String },
    #[error("{entity:?} appears among its own peers")]
    SelfInPeers { entity: String },
    #[error("peer set is empty")]
    NoPeers,
    #[error("windows {a} and {b} overlap")]
    OverlappingWindows { a: Window, b: Window },
    #[error("windows are not in increasing order at position {0}")]
    UnorderedWindows(usize),
    #[error("baseline share of {0:?} is zero while current activity is not; use positive smoothing")]
    ZeroBaseline(String),
    #[error("assignment and topics cover different ids: {0}")]
    PlacementMismatch(String),
    #[error(transparent)]
    Sd(#[from] SdError),
}

pub type Result<T> = std::result::Result<T, TopicGridError>;

/// A topic and its keywords, most relevant first. Keyword lists may repeat
/// across topics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicInfo {
    pub topic_id: TopicId,
    pub keywords: Vec<String>,
    /// Id of this topic's point in the embedding; the topic id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_ref: Option<String>,
}

impl TopicInfo {
    pub fn new(topic_id: impl Into<String>, keywords: Vec<String>) -> Self {
        TopicInfo { topic_id: topic_id.into(), keywords, embedding_ref: None }
    }

    pub fn embedding_id(&self) -> &str {
        self.embedding_ref.as_deref().unwrap_or(&self.topic_id)
    }

    pub fn top_keyword(&self) -> &str {
        self.keywords.first().map(String::as_str).unwrap_or_default()
    }
}

/// Checks that topic ids are unique and keyword lists nonempty.
pub fn validate_topics(topics: &[TopicInfo]) -> Result<()> {
    let mut seen = HashSet::new();
    for t in topics {
        if t.keywords.is_empty() {
            return Err(TopicGridError::NoKeywords(t.topic_id.clone()));
        }
        if !seen.insert(t.topic_id.as_str()) {
            return Err(TopicGridError::DuplicateTopic(t.topic_id.clone()));
        }
    }
    Ok(())
}

/// Half-open time interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl Window {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        if start >= end {
            return Err(TopicGridError::EmptyWindow { start, end });
        }
        Ok(Window { start, end })
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Window) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start.to_rfc3339(), self.end.to_rfc3339())
    }
}

/// Nonnegative per-topic activity of one entity over one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub entity_id: String,
    pub window: Window,
    pub weights: BTreeMap<TopicId, f64>,
    /// Number of events behind each weight, when known.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub event_counts: BTreeMap<TopicId, u64>,
}

impl ActivityProfile {
    pub fn new(entity_id: impl Into<String>, window: Window, weights: BTreeMap<TopicId, f64>) -> Result<Self> {
        for (topic, &weight) in &weights {
            if !weight.is_finite() || weight < 0.0 {
                return Err(TopicGridError::BadWeight { topic: topic.clone(), weight });
            }
        }
        Ok(ActivityProfile {
            entity_id: entity_id.into(),
            window,
            weights,
            event_counts: BTreeMap::new(),
        })
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn weight(&self, topic: &str) -> f64 {
        self.weights.get(topic).copied().unwrap_or(0.0)
    }
}

/// Smoothed share of each topic in `universe`:
/// `q_t = (w_t + λ) / (Σ w + λ·|T|)`.
///
/// With no mass at all (zero weights and `λ = 0`) the result is uniform,
/// the limit of any positive smoothing.
pub fn normalize_profile(profile: &ActivityProfile, smoothing: f64, universe: &[TopicId]) -> Result<Distribution> {
    normalize_weights(&profile.weights, smoothing, universe)
}

pub(crate) fn normalize_weights(
    weights: &BTreeMap<TopicId, f64>,
    smoothing: f64,
    universe: &[TopicId],
) -> Result<Distribution> {
    if universe.is_empty() {
        return Err(TopicGridError::EmptyUniverse);
    }
    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(TopicGridError::BadSmoothing(smoothing));
    }
    let known: HashSet<&str> = universe.iter().map(String::as_str).collect();
    if let Some(unknown) = weights.keys().find(|t| !known.contains(t.as_str())) {
        return Err(TopicGridError::UnknownTopic(unknown.clone()));
    }
    let total: f64 = universe.iter().map(|t| weights.get(t).copied().unwrap_or(0.0)).sum();
    let denom = total + smoothing * universe.len() as f64;
    if denom == 0.0 {
        let share = 1.0 / universe.len() as f64;
        return Ok(universe.iter().map(|t| (t.clone(), share)).collect());
    }
    Ok(universe
        .iter()
        .map(|t| (t.clone(), (weights.get(t).copied().unwrap_or(0.0) + smoothing) / denom))
        .collect())
}
