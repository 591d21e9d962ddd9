//! HTTP service: dwelling-scale prediction and aggregate lookup over
//! artifacts loaded once at startup.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};

use crate::ags::Level;
use crate::error::{Error, Result};
use crate::mc::output::{read_stats, read_suppressed, stats_file_name};
use crate::mc::{AggregateStats, Suppressed, SUPPRESSED_FILE};
use crate::population::{AgeClass, BuildingType};
use crate::predict::{DwellingModel, DwellingPrediction, DwellingQuery};

/// Alias for the national row, whose key is empty.
pub const NATIONAL_KEY: &str = "national";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub host: String,
    pub port: u16,
    /// Allowed browser origin; `*` allows any.
    pub cors_origin: String,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        ServiceSettings { host: "127.0.0.1".into(), port: 8080, cors_origin: "*".into() }
    }
}

/// Body of `POST /predict`. Categories accept codes (`single_two_family`,
/// `1945_1980`) or the long labels; a missing building type is allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub x: f64,
    pub y: f64,
    pub floor: i32,
    pub age_class: String,
    #[serde(default)]
    pub building_type: Option<String>,
    pub living_units: u32,
}

impl PredictRequest {
    pub fn query(&self) -> Result<DwellingQuery> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::InvalidInput("coordinates must be finite".into()));
        }
        if self.floor < -1 {
            return Err(Error::InvalidInput(format!("floor {} < -1", self.floor)));
        }
        Ok(DwellingQuery {
            x: self.x,
            y: self.y,
            floor: self.floor,
            age_class: self.age_class.parse::<AgeClass>()?,
            building_type: self.building_type.as_deref().map(str::parse::<BuildingType>).transpose()?,
            households: self.living_units,
        })
    }
}

pub type PredictResponse = DwellingPrediction;

/// The numeric result both the service and the offline CLI emit for a request.
pub fn predict_request(model: &DwellingModel, request: &PredictRequest) -> Result<PredictResponse> {
    model.predict(&request.query()?)
}

/// Aggregate rows keyed by AGS prefix, plus the keys withheld for being too small.
#[derive(Clone, Debug, Default)]
pub struct AggregateTable {
    stats: HashMap<String, AggregateStats>,
    suppressed: HashMap<String, Suppressed>,
}

impl AggregateTable {
    pub fn new(stats: Vec<AggregateStats>, suppressed: Vec<Suppressed>) -> Self {
        AggregateTable {
            stats: stats.into_iter().map(|s| (s.key.clone(), s)).collect(),
            suppressed: suppressed.into_iter().map(|s| (s.key.clone(), s)).collect(),
        }
    }

    /// Reads every `stats_<level>.csv` present in `dir` and `suppressed.csv`.
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::InvalidInput(format!("stats directory {} not found", dir.display())));
        }
        let mut stats = Vec::new();
        for level in Level::ALL {
            let path = dir.join(stats_file_name(level));
            if path.exists() {
                stats.extend(read_stats(&path)?);
            }
        }
        let sup = dir.join(SUPPRESSED_FILE);
        let suppressed = if sup.exists() { read_suppressed(&sup)? } else { Vec::new() };
        Ok(Self::new(stats, suppressed))
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn lookup(&self, key: &str) -> std::result::Result<&AggregateStats, Option<&Suppressed>> {
        self.stats.get(key).ok_or_else(|| self.suppressed.get(key))
    }
}

pub struct Artifacts {
    pub model: DwellingModel,
    pub aggregates: AggregateTable,
}

/// Shared between handlers; empty until the artifacts finish loading.
#[derive(Clone, Default)]
pub struct AppState {
    artifacts: Arc<OnceLock<Arc<Artifacts>>>,
}

impl AppState {
    pub fn loaded(artifacts: Artifacts) -> Self {
        let s = AppState::default();
        s.set(artifacts);
        s
    }

    /// First call wins; later calls are ignored.
    pub fn set(&self, artifacts: Artifacts) {
        let _ = self.artifacts.set(Arc::new(artifacts));
    }

    fn get(&self) -> std::result::Result<Arc<Artifacts>, ApiError> {
        self.artifacts
            .get()
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "not_loaded", "model not loaded yet"))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.into(), message: message.into(), detail: Value::Null }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::OutsideCoverage { .. } | Error::MalformedAgs(_) | Error::Degenerate(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let detail = match &e {
            Error::OutsideCoverage { x, y, layer } => json!({ "x": x, "y": y, "layer": layer }),
            Error::UnknownCategory { field, label } => json!({ "field": field, "label": label }),
            _ => Value::Null,
        };
        ApiError { status, code: e.code().into(), message: e.to_string(), detail }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

async fn health(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let a = state.get()?;
    let rasters: Vec<Value> = a
        .model
        .rasters()
        .layers()
        .iter()
        .map(|(name, g)| json!({ "name": name, "ncols": g.ncols(), "nrows": g.nrows(), "cellsize": g.cellsize() }))
        .collect();
    Ok(Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "forest": a.model.header(),
        "predictors": a.model.forest().schema().names(),
        "rasters": rasters,
        "aggregates": a.aggregates.len(),
    })))
}

async fn predict(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<PredictResponse>> {
    let a = state.get()?;
    let request: PredictRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", format!("malformed body: {e}")))?;
    let model = a.clone();
    let result = tokio::task::spawn_blocking(move || predict_request(&model.model, &request))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(result))
}

async fn aggregate(State(state): State<AppState>, UrlPath(key): UrlPath<String>) -> ApiResult<Json<AggregateStats>> {
    let a = state.get()?;
    let key = if key == NATIONAL_KEY { String::new() } else { key };
    Level::of_key(&key)?;
    match a.aggregates.lookup(&key) {
        Ok(s) => Ok(Json(s.clone())),
        Err(Some(s)) => Err(ApiError::new(StatusCode::NOT_FOUND, &s.reason, "below population threshold")
            .with_detail(json!({ "key": s.key, "level": s.level, "n": s.n }))),
        Err(None) => Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no aggregate for key `{key}`"))),
    }
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: AppState, cors_origin: &str) -> Router {
    let cors = CorsLayer::new().allow_methods([Method::GET, Method::POST]).allow_headers(Any);
    let cors = match cors_origin {
        "*" => cors.allow_origin(Any),
        o => cors.allow_origin(HeaderValue::from_str(o).unwrap_or(HeaderValue::from_static("null"))),
    };
    Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        .route("/aggregates/{key}", get(aggregate))
        .fallback(fallback)
        .layer(cors)
        .with_state(state)
}

/// What `serve` loads at startup.
#[derive(Clone, Debug)]
pub struct ServeInputs {
    pub forest: PathBuf,
    pub rasters: Vec<PathBuf>,
    pub stats_dir: Option<PathBuf>,
    pub prediction: crate::predict::PredictionSettings,
}

impl ServeInputs {
    pub fn load(&self) -> Result<Artifacts> {
        let model = DwellingModel::load(&self.forest, &self.rasters, self.prediction.clone())?;
        let aggregates = match &self.stats_dir {
            Some(dir) => AggregateTable::load(dir)?,
            None => AggregateTable::default(),
        };
        Ok(Artifacts { model, aggregates })
    }
}

/// Binds first, then loads artifacts; requests before that get 503. Runs
/// until ctrl-c. `on_bound` sees the bound address (useful with port 0).
pub async fn serve(inputs: ServeInputs, settings: &ServiceSettings, on_bound: impl FnOnce(SocketAddr)) -> Result<()> {
    let addr = format!("{}:{}", settings.host, settings.port);
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| Error::io(&addr, e))?;
    let local = listener.local_addr().map_err(|e| Error::io(&addr, e))?;
    on_bound(local);
    let state = AppState::default();
    let loader = state.clone();
    let load = tokio::task::spawn_blocking(move || inputs.load().map(|a| loader.set(a)));
    let app = router(state, &settings.cors_origin);
    let server = axum::serve(listener, app).with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    });
    let server = tokio::spawn(async move { server.await });
    match load.await {
        Ok(Ok(())) => log::info!("artifacts loaded, serving on {local}"),
        Ok(Err(e)) => {
            server.abort();
            return Err(e);
        }
        Err(e) => {
            server.abort();
            return Err(Error::InvalidInput(format!("loader failed: {e}")));
        }
    }
    server
        .await
        .map_err(|e| Error::InvalidInput(format!("server task: {e}")))?
        .map_err(|e| Error::io(&addr, e))
}
