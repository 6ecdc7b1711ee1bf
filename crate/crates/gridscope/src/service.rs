//! Read-only JSON API over a loaded [`Dataset`].

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr};
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use gridscope_core::ingest::WindowSpec;
use gridscope_core::topic_grids::{GridCell, StackAxis};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::dataset::Dataset;
use crate::error::Error;
use crate::pipeline::{build_bundle, detail, timeline, GridMetric, PipelineOptions, WindowRef, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub data_dir: Option<PathBuf>,
    pub smoothing: f64,
    pub history_windows: Option<usize>,
    /// Windowing for data directories without `windows.json`.
    pub window_spec: Option<WindowSpec>,
    /// Origins allowed by CORS; `"*"` allows any.
    pub cors_allow: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            data_dir: None,
            smoothing: gridscope_core::topic_grids::DEFAULT_SMOOTHING,
            history_windows: None,
            window_spec: None,
            cors_allow: Vec::new(),
        }
    }
}

impl ServiceConfig {
    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions { smoothing: self.smoothing, history_windows: self.history_windows }
    }
}

struct AppState {
    ds: Dataset,
    opts: PipelineOptions,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    parameter: Option<String>,
}

impl ApiError {
    fn bad_param(name: &str, message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, message: message.into(), parameter: Some(name.to_string()) }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Internal(_) | Error::Write { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError { status, message: e.to_string(), parameter: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "schema_version": SCHEMA_VERSION, "error": self.message });
        if let Some(p) = self.parameter {
            body["parameter"] = json!(p);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<serde_json::Value>, ApiError>;

fn ok<T: Serialize>(value: T) -> ApiResult {
    let mut v = serde_json::to_value(value).map_err(|e| ApiError::from(Error::Internal(e.to_string())))?;
    if let Some(obj) = v.as_object_mut() {
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    Ok(Json(v))
}

/// Query parameters checked against an allow-list, each given at most once.
struct Params(BTreeMap<String, String>);

impl Params {
    fn parse(raw: Vec<(String, String)>, allowed: &[&str]) -> Result<Params, ApiError> {
        let mut map = BTreeMap::new();
        for (k, v) in raw {
            if !allowed.contains(&k.as_str()) {
                return Err(ApiError::bad_param(&k, format!("unknown query parameter {k:?}")));
            }
            if map.insert(k.clone(), v).is_some() {
                return Err(ApiError::bad_param(&k, format!("query parameter {k:?} given twice")));
            }
        }
        Ok(Params(map))
    }

    fn required(&self, name: &str) -> Result<&str, ApiError> {
        self.0
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| ApiError::bad_param(name, format!("missing query parameter {name:?}")))
    }

    fn parsed<T: std::str::FromStr>(&self, name: &str) -> Result<T, ApiError>
    where
        T::Err: std::fmt::Display,
    {
        self.required(name)?
            .parse()
            .map_err(|e| ApiError::bad_param(name, format!("invalid {name}: {e}")))
    }

    fn window(&self, ds: &Dataset) -> Result<usize, ApiError> {
        let w: usize = self.parsed("window")?;
        ds.window(w)?;
        Ok(w)
    }
}

pub fn router(ds: Dataset, config: &ServiceConfig) -> Router {
    let state = Arc::new(AppState { ds, opts: config.pipeline_options() });
    let app = Router::new()
        .route("/api/entities", get(entities))
        .route("/api/windows", get(windows))
        .route("/api/topics/{id}", get(topic))
        .route("/api/grid", get(grid))
        .route("/api/detail", get(detail_handler))
        .route("/api/timeline", get(timeline_handler))
        .fallback(|| async {
            ApiError { status: StatusCode::NOT_FOUND, message: "no such endpoint".into(), parameter: None }
        })
        .with_state(state);
    match cors_layer(&config.cors_allow) {
        Some(layer) => app.layer(layer),
        None => app,
    }
}

fn cors_layer(allow: &[String]) -> Option<CorsLayer> {
    if allow.is_empty() {
        return None;
    }
    let origin = if allow.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(allow.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(CorsLayer::new().allow_origin(origin).allow_methods([axum::http::Method::GET]))
}

async fn entities(State(s): State<Arc<AppState>>, Query(q): Query<Vec<(String, String)>>) -> ApiResult {
    Params::parse(q, &[])?;
    ok(json!({ "entities": s.ds.entities }))
}

async fn windows(State(s): State<Arc<AppState>>, Query(q): Query<Vec<(String, String)>>) -> ApiResult {
    Params::parse(q, &[])?;
    let list: Vec<WindowRef> = s.ds.windows.iter().enumerate().map(|(i, w)| WindowRef::new(i, *w)).collect();
    ok(json!({ "windows": list }))
}

async fn topic(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<Vec<(String, String)>>,
) -> ApiResult {
    Params::parse(q, &[])?;
    let info = s.ds.topic(&id).ok_or_else(|| ApiError::from(Error::NotFound(format!("topic {id:?}"))))?;
    ok(json!({
        "topic_id": info.topic_id,
        "keywords": info.keywords,
        "cell": s.ds.cell(info),
        "rank": s.ds.ranks[&info.topic_id],
    }))
}

#[derive(Serialize)]
struct GridResponse<'a> {
    entity: &'a str,
    window: WindowRef,
    metric: &'static str,
    shape: &'a gridscope_core::GridShape,
    cells: &'a [GridCell],
    warnings: &'a [String],
}

async fn grid(State(s): State<Arc<AppState>>, Query(q): Query<Vec<(String, String)>>) -> ApiResult {
    let p = Params::parse(q, &["entity", "window", "metric"])?;
    let metric: GridMetric = p.parsed("metric")?;
    let entity = p.required("entity")?;
    let window = p.window(&s.ds)?;
    let b = build_bundle(&s.ds, entity, window, &s.opts)?;
    let g = b.grid(metric);
    ok(GridResponse {
        entity,
        window: b.window.clone(),
        metric: metric.name(),
        shape: &g.shape,
        cells: &g.cells,
        warnings: &b.warnings,
    })
}

async fn detail_handler(State(s): State<Arc<AppState>>, Query(q): Query<Vec<(String, String)>>) -> ApiResult {
    let p = Params::parse(q, &["entity", "window", "topic"])?;
    let entity = p.required("entity")?;
    let topic = p.required("topic")?;
    let window = p.window(&s.ds)?;
    ok(detail(&s.ds, entity, window, topic, &s.opts)?)
}

async fn timeline_handler(State(s): State<Arc<AppState>>, Query(q): Query<Vec<(String, String)>>) -> ApiResult {
    let p = Params::parse(q, &["entity", "metric", "format"])?;
    let metric: GridMetric = p.parsed("metric")?;
    let axis: StackAxis = match p.0.get("format") {
        None => StackAxis::Curtain,
        Some(_) => p.parsed("format")?,
    };
    let entity = p.required("entity")?;
    let stack = timeline(&s.ds, entity, metric, axis, &s.opts)?;
    let mut v = serde_json::to_value(&stack).map_err(|e| ApiError::from(Error::Internal(e.to_string())))?;
    v["entity"] = json!(entity);
    v["metric"] = json!(metric.name());
    ok(v)
}

/// Binds and serves until interrupted. Prints the bound address on stdout.
pub async fn serve(ds: Dataset, config: ServiceConfig) -> Result<(), Error> {
    let listener = tokio::net::TcpListener::bind((config.bind, config.port))
        .await
        .map_err(|e| Error::Internal(format!("cannot bind {}:{}: {e}", config.bind, config.port)))?;
    let addr = listener.local_addr().map_err(|e| Error::Internal(e.to_string()))?;
    println!("listening on http://{addr}");
    log::info!("serving {} topics, {} entities", ds.topics.len(), ds.entities.len());
    axum::serve(listener, router(ds, &config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Internal(e.to_string()))
}
