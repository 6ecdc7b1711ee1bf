use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gridscope_core::embedding::{
    classical_mds, export_embedding_csv, EmbeddingError, import_embedding, pairwise_distances, read_distance_matrix_csv,
    HighDimVectors, Metric,
};
use gridscope_core::ingest::{synthesize, Anomaly, ParseMode, ScenarioConfig};
use gridscope_core::metrics::{score_cloud, score_layout, PairSet};
use gridscope_core::{split_diffuse, GridAssignment, GridShape};
use serde_json::json;

use crate::dataset::{self, resolve_data_dir, Dataset, LoadOptions};
use crate::error::{read_json, to_json, Error, Result};
use crate::pipeline::{build_bundle, PipelineOptions, SCHEMA_VERSION};
use crate::service::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "gridscope", version, about = "Uniform topic grids from embeddings and activity logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Place an embedding on a lattice, one point per cell.
    Layout(LayoutArgs),
    /// Classical MDS of vectors (JSON) or a distance matrix (CSV).
    Mds(MdsArgs),
    /// Overlap, density and order/distance preservation scores.
    Metrics(MetricsArgs),
    /// Current, historical, self-risk, peer and peer-risk grids for one entity and window.
    Pipeline(PipelineArgs),
    /// Write a synthetic data directory.
    Simulate(SimulateArgs),
    /// Serve a data directory over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    /// Embedding file: CSV with header id,x[,y[,z]] or JSON.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Lattice sides, e.g. 8x8 or 4x4x4.
    #[arg(long)]
    pub shape: GridShape,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MdsArgs {
    /// `.csv`: distance matrix with ids in the first row and column; otherwise `{ids, vectors}` JSON.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    /// Distance for vector input: euclidean or cosine.
    #[arg(long, default_value = "euclidean")]
    pub metric: Metric,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Embedding file.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Assignment JSON from `layout`; computed with split-diffuse when absent.
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    /// Lattice for the computed assignment; a near-square one when absent.
    #[arg(long)]
    pub shape: Option<GridShape>,
    /// Pairs closer than this count as overlapping.
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    /// Histogram bins per axis for the input cloud; the lattice side when absent.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Cap on the number of point pairs visited by the pair scores.
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Data directory; defaults to $GRIDSCOPE_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Topic distance for MDS: euclidean or cosine.
    #[arg(long, default_value = "euclidean")]
    pub metric: Metric,
    /// Skip malformed event lines instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub entity: String,
    /// Zero-based window index.
    #[arg(long)]
    pub window: usize,
    /// Additive smoothing of the baselines.
    #[arg(long, default_value_t = gridscope_core::topic_grids::DEFAULT_SMOOTHING)]
    pub smoothing: f64,
    /// Number of preceding windows in the history; all of them when absent.
    #[arg(long)]
    pub history_windows: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON; every field optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Extra planted anomaly as entity:topic:window:multiplier, e.g. u1:t5:3:20.
    #[arg(long, value_parser = parse_anomaly)]
    pub anomaly: Vec<Anomaly>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service JSON config: bind, port, data_dir, smoothing, history_windows, window_spec, cors_allow.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<std::net::IpAddr>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "euclidean")]
    pub metric: Metric,
    #[arg(long)]
    pub lenient: bool,
}

fn parse_anomaly(s: &str) -> std::result::Result<Anomaly, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [entity, topic, window, multiplier] = parts[..] else {
        return Err("expected entity:topic:window:multiplier".into());
    };
    Ok(Anomaly {
        entity: entity.to_string(),
        topic: topic.to_string(),
        window: window.parse().map_err(|_| format!("bad window {window:?}"))?,
        multiplier: multiplier.parse().map_err(|_| format!("bad multiplier {multiplier:?}"))?,
    })
}

fn import(path: &Path) -> Result<gridscope_core::PointCloud> {
    import_embedding(path).map_err(|e| match e {
        EmbeddingError::Io(source) => Error::Read { path: path.to_path_buf(), source },
        other => other.into(),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::write(path)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Internal(format!("stdout: {e}"))),
    }
}

fn load(args: &DataArgs, configured: Option<&Path>, config: Option<&ServiceConfig>) -> Result<Dataset> {
    let dir = resolve_data_dir(args.data_dir.as_deref(), configured)?;
    let opts = LoadOptions {
        metric: args.metric,
        parse_mode: if args.lenient { ParseMode::Lenient } else { ParseMode::Strict },
        window_spec: config.and_then(|c| c.window_spec),
    };
    let ds = Dataset::load(&dir, &opts)?;
    for w in &ds.warnings {
        log::warn!("{w}");
    }
    Ok(ds)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Layout(a) => {
            let cloud = import(&a.input)?;
            let assignment = split_diffuse(&cloud, &a.shape)?;
            emit(a.out.as_deref(), &to_json(&assignment)?)
        }
        Command::Mds(a) => {
            let d = if a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                read_distance_matrix_csv(std::fs::File::open(&a.input).map_err(Error::read(&a.input))?)?
            } else {
                let v: HighDimVectors = read_json(&a.input)?;
                pairwise_distances(&v, a.metric)?
            };
            let out = classical_mds(&d, a.dims)?;
            for w in &out.warnings {
                log::warn!("{}", serde_json::to_string(w).unwrap_or_default());
            }
            let mut buf = Vec::new();
            export_embedding_csv(&out.cloud, &mut buf)?;
            emit(a.out.as_deref(), &String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))?)
        }
        Command::Metrics(a) => {
            let cloud = import(&a.input)?;
            let assignment: GridAssignment = match &a.assignment {
                Some(path) => read_json(path)?,
                None => {
                    let shape = match &a.shape {
                        Some(s) => s.clone(),
                        None => GridShape::balanced(cloud.len(), cloud.dims())?,
                    };
                    split_diffuse(&cloud, &shape)?
                }
            };
            let bins = a.bins.unwrap_or_else(|| assignment.shape().sides().iter().copied().max().unwrap_or(1));
            let pairs = a.max_pairs.map_or(PairSet::All, PairSet::AtMost);
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "points": cloud.len(),
                "shape": assignment.shape(),
                "cloud": score_cloud(&cloud, a.radius, bins)?,
                "layout": score_layout(&cloud, &assignment, a.radius, pairs)?,
            });
            emit(a.out.as_deref(), &to_json(&report)?)
        }
        Command::Pipeline(a) => {
            let ds = load(&a.data, None, None)?;
            let opts = PipelineOptions { smoothing: a.smoothing, history_windows: a.history_windows };
            let mut bundle = build_bundle(&ds, &a.entity, a.window, &opts)?;
            bundle.warnings.splice(0..0, ds.warnings.iter().cloned());
            emit(a.out.as_deref(), &to_json(&bundle)?)
        }
        Command::Simulate(a) => {
            let mut config: ScenarioConfig = match &a.config {
                Some(path) => read_json(path)?,
                None => ScenarioConfig::default(),
            };
            config.anomalies.extend(a.anomaly);
            let s = synthesize(&config, a.seed)?;
            std::fs::create_dir_all(&a.out_dir).map_err(Error::write(&a.out_dir))?;
            let put = |name: &str, text: String| {
                let path = a.out_dir.join(name);
                std::fs::write(&path, text).map_err(Error::write(&path))
            };
            put(dataset::TOPICS_FILE, to_json(&s.topics)?)?;
            put(dataset::VECTORS_FILE, to_json(&s.vectors)?)?;
            put(dataset::WINDOWS_FILE, to_json(&s.window_spec)?)?;
            put("scenario.json", to_json(&json!({ "seed": a.seed, "config": config }))?)?;
            let mut events = String::new();
            for e in &s.events {
                events.push_str(&serde_json::to_string(e).map_err(|e| Error::Internal(e.to_string()))?);
                events.push('\n');
            }
            put(dataset::EVENTS_JSONL_FILE, events)?;
            eprintln!(
                "wrote {} events for {} entities over {} windows to {}",
                s.events.len(),
                s.entities.len(),
                config.windows,
                a.out_dir.display()
            );
            Ok(())
        }
        Command::Serve(a) => {
            let mut config: ServiceConfig = match &a.config {
                Some(path) => read_json(path)?,
                None => ServiceConfig::default(),
            };
            if let Some(b) = a.bind {
                config.bind = b;
            }
            if let Some(p) = a.port {
                config.port = p;
            }
            let data = DataArgs { data_dir: a.data_dir.clone(), metric: a.metric, lenient: a.lenient };
            let ds = load(&data, config.data_dir.clone().as_deref(), Some(&config))?;
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::Internal(e.to_string()))?;
            rt.block_on(service::serve(ds, config))
        }
    }
}
