use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{validate_topics, Result, TopicGridError, TopicId, TopicInfo, Window};
use crate::cloud::GridShape;
use crate::sd::GridAssignment;

/// One lattice cell of a rendered topic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub x: usize,
    pub y: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<usize>,
    pub topic_id: TopicId,
    pub keyword: String,
    pub keywords: Vec<String>,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicGrid {
    pub shape: GridShape,
    /// Row-major: sorted by `z`, then `y`, then `x`.
    pub cells: Vec<GridCell>,
    #[serde(default)]
    pub metadata: GridMeta,
}

impl TopicGrid {
    pub fn with_meta(mut self, metadata: GridMeta) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn value(&self, topic: &str) -> Option<f64> {
        self.cells.iter().find(|c| c.topic_id == topic).map(|c| c.value)
    }

    /// `(x, y, z, topic)` of every cell, for comparing layouts across value maps.
    pub fn geometry(&self) -> Vec<(usize, usize, Option<usize>, &str)> {
        self.cells.iter().map(|c| (c.x, c.y, c.z, c.topic_id.as_str())).collect()
    }
}

/// Places each topic at its assigned cell and attaches `values[topic]`
/// (0 for topics without a value).
pub fn build_topic_grid(
    assignment: &GridAssignment,
    topics: &[TopicInfo],
    values: &BTreeMap<TopicId, f64>,
) -> Result<TopicGrid> {
    validate_topics(topics)?;
    check_coverage(assignment, topics)?;
    let known: BTreeSet<&str> = topics.iter().map(|t| t.topic_id.as_str()).collect();
    if let Some(unknown) = values.keys().find(|t| !known.contains(t.as_str())) {
        return Err(TopicGridError::UnknownTopic(unknown.clone()));
    }

    let mut cells: Vec<GridCell> = topics
        .iter()
        .map(|t| {
            let c = assignment.cell(t.embedding_id()).expect("coverage checked");
            GridCell {
                x: c[0],
                y: c.get(1).copied().unwrap_or(0),
                z: c.get(2).copied(),
                topic_id: t.topic_id.clone(),
                keyword: t.top_keyword().to_string(),
                keywords: t.keywords.clone(),
                value: values.get(&t.topic_id).copied().unwrap_or(0.0),
            }
        })
        .collect();
    cells.sort_by_key(|c| (c.z, c.y, c.x));
    Ok(TopicGrid { shape: assignment.shape().clone(), cells, metadata: GridMeta::default() })
}

pub(super) fn check_coverage(assignment: &GridAssignment, topics: &[TopicInfo]) -> Result<()> {
    let refs: BTreeSet<&str> = topics.iter().map(TopicInfo::embedding_id).collect();
    if refs.len() != topics.len() {
        return Err(TopicGridError::PlacementMismatch("two topics share one embedding point".into()));
    }
    let placed: BTreeSet<&str> = assignment.cells().keys().map(String::as_str).collect();
    if let Some(missing) = refs.difference(&placed).next() {
        return Err(TopicGridError::PlacementMismatch(format!("{missing:?} has no cell")));
    }
    if let Some(extra) = placed.difference(&refs).next() {
        return Err(TopicGridError::PlacementMismatch(format!("cell for {extra:?} has no topic")));
    }
    Ok(())
}
