//! A data directory loaded into memory, with the shared grid layout and the
//! curtain ranks computed once.
//!
//! Files:
//!
//! | file | contents |
//! |---|---|
//! | `topics.json` | array of `{topic_id, keywords, embedding_ref?}` |
//! | `vectors.json` | `{ids, vectors}` high-dimensional topic vectors |
//! | `embedding.csv` | optional precomputed 2D layout input (`id,x,y`); replaces MDS |
//! | `events.jsonl` or `events.csv` | activity events |
//! | `windows.json` | `{origin, width_seconds, count}` |

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use gridscope_core::embedding::{
    classical_mds, cloud_distances, import_embedding, pairwise_distances, DistanceMatrix, HighDimVectors, Metric,
    MdsWarning,
};
use gridscope_core::ingest::{parse_events_file, window_profiles, ParseMode, WindowSpec, WindowedProfiles};
use gridscope_core::topic_grids::{validate_topics, ActivityProfile, TopicInfo, Window};
use gridscope_core::{sd_1d, split_diffuse, GridAssignment, GridShape, PointCloud};

use crate::error::{read_json, Error, Result};

pub const TOPICS_FILE: &str = "topics.json";
pub const VECTORS_FILE: &str = "vectors.json";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const EVENTS_JSONL_FILE: &str = "events.jsonl";
pub const EVENTS_CSV_FILE: &str = "events.csv";
pub const WINDOWS_FILE: &str = "windows.json";

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub metric: Metric,
    pub parse_mode: ParseMode,
    /// Used when the directory has no `windows.json`.
    pub window_spec: Option<WindowSpec>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { metric: Metric::Euclidean, parse_mode: ParseMode::Strict, window_spec: None }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub topics: Vec<TopicInfo>,
    /// Topic ids in file order.
    pub universe: Vec<String>,
    pub window_spec: WindowSpec,
    pub windows: Vec<Window>,
    /// 2D layout input, keyed by embedding id.
    pub embedding: PointCloud,
    /// 1D coordinates for the curtain, keyed by embedding id.
    pub embedding1d: PointCloud,
    pub assignment: GridAssignment,
    /// Topic id → curtain position.
    pub ranks: BTreeMap<String, usize>,
    pub profiles: WindowedProfiles,
    pub entities: Vec<String>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn load(dir: &Path, opts: &LoadOptions) -> Result<Dataset> {
        if !dir.is_dir() {
            return Err(Error::Input(format!("data directory {} does not exist", dir.display())));
        }
        let topics: Vec<TopicInfo> = read_json(&dir.join(TOPICS_FILE))?;
        validate_topics(&topics)?;
        if topics.is_empty() {
            return Err(Error::Input(format!("{TOPICS_FILE} lists no topics")));
        }
        let mut warnings = Vec::new();

        let (embedding, distances) = if dir.join(EMBEDDING_FILE).is_file() {
            let cloud = select_points(&import_embedding(&dir.join(EMBEDDING_FILE))?, &topics)?;
            if cloud.dims() != 2 {
                return Err(Error::Input(format!("{EMBEDDING_FILE} must be 2D, got {}D", cloud.dims())));
            }
            let d = cloud_distances(&cloud);
            (cloud, d)
        } else {
            let vectors: HighDimVectors = read_json(&dir.join(VECTORS_FILE))?;
            let d = pairwise_distances(&select_vectors(&vectors, &topics)?, opts.metric)?;
            let out = mds_or_trivial(&d, 2, &mut warnings)?;
            (out, d)
        };
        let embedding1d = mds_or_trivial(&distances, 1, &mut warnings)?;

        let shape = GridShape::balanced(topics.len(), 2)?;
        let assignment = split_diffuse(&embedding, &shape)?;
        let ranks = {
            let coords: Vec<(String, f64)> = topics
                .iter()
                .map(|t| (t.topic_id.clone(), embedding1d.get(t.embedding_id()).expect("selected").coords[0]))
                .collect();
            sd_1d(&coords)?
        };

        let window_spec = if dir.join(WINDOWS_FILE).is_file() {
            let spec: WindowSpec = read_json(&dir.join(WINDOWS_FILE))?;
            spec.validate()?;
            spec
        } else {
            opts.window_spec
                .ok_or_else(|| Error::Input(format!("no {WINDOWS_FILE} and no default window spec configured")))?
        };

        let events_path = [EVENTS_JSONL_FILE, EVENTS_CSV_FILE]
            .iter()
            .map(|f| dir.join(f))
            .find(|p| p.is_file())
            .ok_or_else(|| Error::Input(format!("no {EVENTS_JSONL_FILE} or {EVENTS_CSV_FILE} in {}", dir.display())))?;
        let parsed = parse_events_file(&events_path, opts.parse_mode)?;
        for r in &parsed.rejected {
            warnings.push(format!("skipped event line {}: {}", r.line, r.message));
        }
        let known: BTreeSet<&str> = topics.iter().map(|t| t.topic_id.as_str()).collect();
        if let Some(ev) = parsed.events.iter().find(|e| !known.contains(e.topic.as_str())) {
            return Err(Error::Input(format!("event for {:?} names unknown topic {:?}", ev.entity, ev.topic)));
        }
        let profiles = window_profiles(&parsed.events, &window_spec, None);
        if profiles.dropped > 0 {
            warnings.push(format!("{} events fall outside the windows and were dropped", profiles.dropped));
        }
        let entities = profiles.entities().into_iter().map(String::from).collect();

        Ok(Dataset {
            universe: topics.iter().map(|t| t.topic_id.clone()).collect(),
            topics,
            windows: window_spec.windows(),
            window_spec,
            embedding,
            embedding1d,
            assignment,
            ranks,
            profiles,
            entities,
            warnings,
        })
    }

    pub fn topic(&self, id: &str) -> Option<&TopicInfo> {
        self.topics.iter().find(|t| t.topic_id == id)
    }

    pub fn has_entity(&self, entity: &str) -> bool {
        self.entities.iter().any(|e| e == entity)
    }

    pub fn window(&self, index: usize) -> Result<Window> {
        self.windows
            .get(index)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("window {index} (have {})", self.windows.len())))
    }

    /// Cell of a topic in the shared layout.
    pub fn cell(&self, topic: &TopicInfo) -> &[usize] {
        self.assignment.cell(topic.embedding_id()).expect("every topic is placed")
    }

    /// The entity's profiles, one per window.
    pub fn profiles_of(&self, entity: &str) -> Result<Vec<&ActivityProfile>> {
        if !self.has_entity(entity) {
            return Err(Error::NotFound(format!("entity {entity:?}")));
        }
        Ok(self.profiles.profiles.iter().filter(|p| p.entity_id == entity).collect())
    }
}

/// The directory named by `--data-dir`, falling back to `GRIDSCOPE_DATA_DIR`.
pub fn resolve_data_dir(flag: Option<&Path>, configured: Option<&Path>) -> Result<PathBuf> {
    flag.or(configured)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("GRIDSCOPE_DATA_DIR").map(PathBuf::from))
        .ok_or_else(|| Error::Input("no data directory: pass --data-dir or set GRIDSCOPE_DATA_DIR".into()))
}

fn select_vectors(vectors: &HighDimVectors, topics: &[TopicInfo]) -> Result<HighDimVectors> {
    let index: BTreeMap<&str, usize> = vectors.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut ids = Vec::with_capacity(topics.len());
    let mut rows = Vec::with_capacity(topics.len());
    for t in topics {
        let i = index
            .get(t.embedding_id())
            .ok_or_else(|| Error::Input(format!("{VECTORS_FILE} has no vector for {:?}", t.embedding_id())))?;
        ids.push(t.embedding_id().to_string());
        rows.push(vectors.vectors()[*i].clone());
    }
    Ok(HighDimVectors::new(ids, rows)?)
}

fn select_points(cloud: &PointCloud, topics: &[TopicInfo]) -> Result<PointCloud> {
    let points = topics
        .iter()
        .map(|t| {
            cloud
                .get(t.embedding_id())
                .cloned()
                .ok_or_else(|| Error::Input(format!("{EMBEDDING_FILE} has no point for {:?}", t.embedding_id())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud::new(cloud.dims(), points)?)
}

/// MDS, except that a single topic sits at the origin.
fn mds_or_trivial(d: &DistanceMatrix, dims: usize, warnings: &mut Vec<String>) -> Result<PointCloud> {
    if d.n() <= dims {
        return Ok(PointCloud::from_pairs(d.ids().iter().map(|id| (id.clone(), vec![0.0; dims])))?);
    }
    let out = classical_mds(d, dims)?;
    for w in &out.warnings {
        warnings.push(match w {
            MdsWarning::Degenerate => format!("{dims}D MDS: all distances are zero"),
            MdsWarning::NegativeEigenvalue { axis, value } => {
                format!("{dims}D MDS: eigenvalue {value:.3e} on axis {axis} clamped to zero")
            }
            MdsWarning::NotConverged { iterations, relative_residual } => {
                format!("{dims}D MDS: eigensolver stopped after {iterations} iterations (residual {relative_residual:.1e})")
            }
        });
    }
    Ok(out.cloud)
}
