//! Time stacks: the curtain (topics ranked on one axis, time on the other)
//! and the shower (one 2D grid layer per window).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::grid::check_coverage;
use super::{validate_topics, Result, TopicGridError, TopicId, TopicInfo, Window};
use crate::cloud::{GridShape, PointCloud};
use crate::sd::{sd_1d, GridAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StackAxis {
    Curtain,
    Shower,
}

impl std::str::FromStr for StackAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "curtain" => Ok(StackAxis::Curtain),
            "shower" => Ok(StackAxis::Shower),
            other => Err(format!("unknown time format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeStack {
    pub axis: StackAxis,
    /// `[k]` for a curtain; the 2D (or 3D) lattice for a shower.
    pub shape: GridShape,
    pub windows: Vec<Window>,
    /// Topic → 1D rank (curtain) or lattice cell (shower).
    pub placement: BTreeMap<TopicId, Vec<usize>>,
    /// One map per window, covering every placed topic.
    pub layers: Vec<BTreeMap<TopicId, f64>>,
}

fn check_windows(series: &[(Window, BTreeMap<TopicId, f64>)]) -> Result<()> {
    for (i, pair) in series.windows(2).enumerate() {
        if pair[1].0.start < pair[0].0.end {
            return Err(TopicGridError::UnorderedWindows(i + 1));
        }
    }
    Ok(())
}

fn fill_layers(
    series: &[(Window, BTreeMap<TopicId, f64>)],
    topics: &BTreeSet<&str>,
) -> Result<Vec<BTreeMap<TopicId, f64>>> {
    series
        .iter()
        .map(|(_, values)| {
            if let Some(unknown) = values.keys().find(|t| !topics.contains(t.as_str())) {
                return Err(TopicGridError::UnknownTopic(unknown.clone()));
            }
            Ok(topics
                .iter()
                .map(|&t| (t.to_string(), values.get(t).copied().unwrap_or(0.0)))
                .collect())
        })
        .collect()
}

/// Ranks topics by their 1D embedding coordinate and passes the per-window
/// values through.
pub fn topic_curtain(
    topics: &[TopicInfo],
    embedding1d: &PointCloud,
    series: &[(Window, BTreeMap<TopicId, f64>)],
) -> Result<TimeStack> {
    validate_topics(topics)?;
    if embedding1d.dims() != 1 {
        return Err(TopicGridError::PlacementMismatch(format!(
            "curtain embedding must be 1D, got {}D",
            embedding1d.dims()
        )));
    }
    check_windows(series)?;
    let coords = topics
        .iter()
        .map(|t| {
            embedding1d
                .get(t.embedding_id())
                .map(|p| (t.topic_id.clone(), p.coords[0]))
                .ok_or_else(|| TopicGridError::PlacementMismatch(format!("{:?} has no 1D coordinate", t.topic_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let ranks = sd_1d(&coords)?;
    let ids: BTreeSet<&str> = topics.iter().map(|t| t.topic_id.as_str()).collect();
    Ok(TimeStack {
        axis: StackAxis::Curtain,
        shape: GridShape::new(vec![topics.len()]).expect("nonempty topic list"),
        windows: series.iter().map(|(w, _)| *w).collect(),
        placement: ranks.into_iter().map(|(t, r)| (t, vec![r])).collect(),
        layers: fill_layers(series, &ids)?,
    })
}

/// Stacks one layer per window on the shared `assignment`. Series keys and
/// placement keys are the assignment ids.
pub fn topic_shower(
    assignment: &GridAssignment,
    series: &[(Window, BTreeMap<TopicId, f64>)],
) -> Result<TimeStack> {
    check_windows(series)?;
    let ids: BTreeSet<&str> = assignment.cells().keys().map(String::as_str).collect();
    Ok(TimeStack {
        axis: StackAxis::Shower,
        shape: assignment.shape().clone(),
        windows: series.iter().map(|(w, _)| *w).collect(),
        placement: assignment.cells().clone(),
        layers: fill_layers(series, &ids)?,
    })
}

/// Shower over topics whose embedding ids differ from their topic ids.
pub fn topic_shower_for(
    assignment: &GridAssignment,
    topics: &[TopicInfo],
    series: &[(Window, BTreeMap<TopicId, f64>)],
) -> Result<TimeStack> {
    validate_topics(topics)?;
    check_coverage(assignment, topics)?;
    check_windows(series)?;
    let ids: BTreeSet<&str> = topics.iter().map(|t| t.topic_id.as_str()).collect();
    Ok(TimeStack {
        axis: StackAxis::Shower,
        shape: assignment.shape().clone(),
        windows: series.iter().map(|(w, _)| *w).collect(),
        placement: topics
            .iter()
            .map(|t| (t.topic_id.clone(), assignment.cell(t.embedding_id()).expect("covered").to_vec()))
            .collect(),
        layers: fill_layers(series, &ids)?,
    })
}
