//! The five-panel bundle for one entity and window: current and historical
//! activity, self risk, peer activity and peer risk, all on one layout.

use std::collections::BTreeMap;
use std::str::FromStr;

use gridscope_core::topic_grids::{
    build_topic_grid, peer_risk, self_risk, topic_curtain, topic_shower_for, ActivityProfile, GridMeta, StackAxis,
    TimeStack, TopicGrid, Window, DEFAULT_SMOOTHING,
};
use gridscope_core::GridAssignment;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMetric {
    Current,
    Historical,
    SelfRisk,
    Peer,
    PeerRisk,
}

impl GridMetric {
    pub const ALL: [GridMetric; 5] =
        [GridMetric::Current, GridMetric::Historical, GridMetric::SelfRisk, GridMetric::Peer, GridMetric::PeerRisk];

    pub fn name(self) -> &'static str {
        match self {
            GridMetric::Current => "current",
            GridMetric::Historical => "historical",
            GridMetric::SelfRisk => "self_risk",
            GridMetric::Peer => "peer",
            GridMetric::PeerRisk => "peer_risk",
        }
    }
}

impl FromStr for GridMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        GridMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?}; expected one of current, historical, self_risk, peer, peer_risk"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub smoothing: f64,
    /// How many windows before the current one form the history; all of
    /// them when `None`.
    pub history_windows: Option<usize>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { smoothing: DEFAULT_SMOOTHING, history_windows: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowRef {
    pub index: usize,
    pub start: chrono::DateTime<chrono::Utc>,
    pub end: chrono::DateTime<chrono::Utc>,
}

impl WindowRef {
    pub fn new(index: usize, w: Window) -> Self {
        WindowRef { index, start: w.start, end: w.end }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Bundle {
    pub schema_version: u32,
    pub entity: String,
    pub window: WindowRef,
    pub assignment: GridAssignment,
    pub current: TopicGrid,
    pub historical: TopicGrid,
    pub self_risk: TopicGrid,
    pub peer_activity: TopicGrid,
    pub peer_risk: TopicGrid,
    pub warnings: Vec<String>,
}

impl Bundle {
    pub fn grid(&self, metric: GridMetric) -> &TopicGrid {
        match metric {
            GridMetric::Current => &self.current,
            GridMetric::Historical => &self.historical,
            GridMetric::SelfRisk => &self.self_risk,
            GridMetric::Peer => &self.peer_activity,
            GridMetric::PeerRisk => &self.peer_risk,
        }
    }
}

fn sum_weights<'a>(profiles: impl IntoIterator<Item = &'a ActivityProfile>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for p in profiles {
        for (t, w) in &p.weights {
            *out.entry(t.clone()).or_default() += w;
        }
    }
    out
}

pub fn build_bundle(ds: &Dataset, entity: &str, window: usize, opts: &PipelineOptions) -> Result<Bundle> {
    let w = ds.window(window)?;
    let mine = ds.profiles_of(entity)?;
    let current = mine[window];
    let first = opts.history_windows.map_or(0, |h| window.saturating_sub(h));
    let history: Vec<ActivityProfile> = mine[first..window].iter().map(|p| (*p).clone()).collect();
    let peers: Vec<ActivityProfile> = ds
        .entities
        .iter()
        .filter(|e| e.as_str() != entity)
        .filter_map(|e| ds.profiles.get(e, &w).cloned())
        .collect();

    let mut warnings = Vec::new();
    let self_values = self_risk(current, &history, &ds.universe, opts.smoothing)?;
    warnings.extend(self_values.warnings.iter().cloned());
    let peer_values = if peers.is_empty() {
        warnings.push("no peers; peer risk is zero".to_string());
        BTreeMap::new()
    } else {
        peer_risk(current, &peers, &ds.universe, opts.smoothing)?.values
    };
    let mut peer_mean = sum_weights(&peers);
    if !peers.is_empty() {
        peer_mean.values_mut().for_each(|v| *v /= peers.len() as f64);
    }

    let grid = |values: &BTreeMap<String, f64>, metric: GridMetric| -> Result<TopicGrid> {
        Ok(build_topic_grid(&ds.assignment, &ds.topics, values)?.with_meta(GridMeta {
            entity: Some(entity.to_string()),
            window: Some(w),
            kind: Some(metric.name().to_string()),
        }))
    };
    Ok(Bundle {
        schema_version: SCHEMA_VERSION,
        entity: entity.to_string(),
        window: WindowRef::new(window, w),
        assignment: ds.assignment.clone(),
        current: grid(&current.weights, GridMetric::Current)?,
        historical: grid(&sum_weights(history.iter()), GridMetric::Historical)?,
        self_risk: grid(&self_values.values, GridMetric::SelfRisk)?,
        peer_activity: grid(&peer_mean, GridMetric::Peer)?,
        peer_risk: grid(&peer_values, GridMetric::PeerRisk)?,
        warnings,
    })
}

/// Values of one metric for every window, as a curtain or a shower.
pub fn timeline(
    ds: &Dataset,
    entity: &str,
    metric: GridMetric,
    axis: StackAxis,
    opts: &PipelineOptions,
) -> Result<TimeStack> {
    ds.profiles_of(entity)?;
    let series = (0..ds.windows.len())
        .map(|i| {
            let b = build_bundle(ds, entity, i, opts)?;
            let values = b.grid(metric).cells.iter().map(|c| (c.topic_id.clone(), c.value)).collect();
            Ok((ds.windows[i], values))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(match axis {
        StackAxis::Curtain => topic_curtain(&ds.topics, &ds.embedding1d, &series)?,
        StackAxis::Shower => topic_shower_for(&ds.assignment, &ds.topics, &series)?,
    })
}

/// The topic with the largest value in `grid`, lowest id first on ties.
pub fn top_topic(grid: &TopicGrid) -> Option<&str> {
    grid.cells
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value).then_with(|| b.topic_id.cmp(&a.topic_id)))
        .map(|c| c.topic_id.as_str())
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowActivity {
    pub window: WindowRef,
    pub event_count: u64,
    pub weight: f64,
}

/// Everything behind one cell: the topic, its value under each metric, and
/// the entity's per-window event counts for it.
#[derive(Debug, Clone, Serialize)]
pub struct Detail {
    pub schema_version: u32,
    pub entity: String,
    pub window: WindowRef,
    pub topic_id: String,
    pub keywords: Vec<String>,
    pub cell: Vec<usize>,
    pub rank: usize,
    pub values: BTreeMap<&'static str, f64>,
    pub breakdown: Vec<WindowActivity>,
    /// Events for this topic by all other entities in the window.
    pub peer_event_count: u64,
}

pub fn detail(ds: &Dataset, entity: &str, window: usize, topic: &str, opts: &PipelineOptions) -> Result<Detail> {
    let info = ds.topic(topic).ok_or_else(|| Error::NotFound(format!("topic {topic:?}")))?;
    let bundle = build_bundle(ds, entity, window, opts)?;
    let values = GridMetric::ALL
        .into_iter()
        .map(|m| (m.name(), bundle.grid(m).value(topic).unwrap_or(0.0)))
        .collect();
    let breakdown = ds
        .profiles_of(entity)?
        .into_iter()
        .enumerate()
        .map(|(i, p)| WindowActivity {
            window: WindowRef::new(i, p.window),
            event_count: p.event_counts.get(topic).copied().unwrap_or(0),
            weight: p.weight(topic),
        })
        .collect();
    let w = ds.windows[window];
    let peer_event_count = ds
        .profiles
        .profiles
        .iter()
        .filter(|p| p.entity_id != entity && p.window == w)
        .map(|p| p.event_counts.get(topic).copied().unwrap_or(0))
        .sum();
    Ok(Detail {
        schema_version: SCHEMA_VERSION,
        entity: entity.to_string(),
        window: bundle.window,
        topic_id: info.topic_id.clone(),
        keywords: info.keywords.clone(),
        cell: ds.cell(info).to_vec(),
        rank: ds.ranks[&info.topic_id],
        values,
        breakdown,
        peer_event_count,
    })
}
