//! HTTP routes.

use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use missingpath_core::collection::{commit_map, ingest, slug, CollectionDescriptor, IngestSpec, Inspection};
use missingpath_core::gateway::{self, EndpointConfig, QueryKind, StructuredQuery};
use missingpath_core::paths::PathPattern;
use missingpath_core::projection::zones::Zone;
use missingpath_core::projection::{project_with, ProjectionConfig, ZoneConfig};
use missingpath_core::selection::SelectionQuery;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::error::{ApiError, ApiResult};
use crate::jobs::{Job, JobKind, JobState, JobView};
use crate::log::{ActionLogEntry, LogRequest};
use crate::state::{AppState, Entry};

pub type SharedState = Arc<AppState>;

/// All routes, with CORS open to `cors_origin` (any origin when `None`).
pub fn router(state: SharedState, cors_origin: Option<&str>) -> Router {
    let origin = match cors_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::from(Any),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods(Any).allow_headers(Any);
    Router::new()
        .route("/collections", get(list_collections).post(create_collection))
        .route("/collections/{id}", get(get_collection))
        .route("/collections/{id}/paths", get(get_paths))
        .route("/collections/{id}/map", get(get_map))
        .route("/collections/{id}/projection", post(post_projection))
        .route("/collections/{id}/selection/inspect", post(post_inspect))
        .route("/collections/{id}/export", post(post_export))
        .route("/jobs/{id}", get(get_job))
        .route("/log", get(get_log).post(post_log))
        .layer(cors)
        .with_state(state)
}

/// JSON body whose decoding errors are reported as JSON.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct JsonBody<T>(pub T);

/// Query string whose decoding errors are reported as JSON.
#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct Query<T>(pub T);

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateCollection {
    pub class_uri: String,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default)]
    pub fixture: Option<String>,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default)]
    pub membership_predicate: Option<String>,
    #[serde(default)]
    pub include_membership_path: Option<bool>,
    #[serde(default)]
    pub min_coverage: Option<f64>,
    #[serde(default)]
    pub quota: Option<usize>,
    #[serde(default)]
    pub collection_id: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Accepted {
    pub collection_id: String,
    pub job_id: String,
}

fn ingest_spec(req: &CreateCollection, default_endpoint: Option<&str>) -> ApiResult<IngestSpec> {
    let source = match (&req.endpoint_url, &req.fixture) {
        (Some(_), Some(_)) => return Err(ApiError::Invalid("give either endpoint_url or fixture, not both".into())),
        (Some(s), None) | (None, Some(s)) => s.clone(),
        (None, None) => default_endpoint
            .map(str::to_string)
            .ok_or_else(|| ApiError::Invalid("no endpoint_url or fixture given and no default endpoint".into()))?,
    };
    let mut spec = IngestSpec::new(req.class_uri.clone(), source, req.max_depth.unwrap_or(3));
    if let Some(p) = &req.membership_predicate {
        spec.membership_predicate = p.clone();
    }
    spec.include_membership_path = req.include_membership_path.unwrap_or(false);
    spec.min_coverage = req.min_coverage.unwrap_or(0.0);
    spec.quota = req.quota;
    spec.validate().map_err(|e| ApiError::Invalid(e.to_string()))?;
    Ok(spec)
}

pub fn endpoint_config(spec: &IngestSpec) -> EndpointConfig {
    let mut cfg = EndpointConfig::new(spec.source.clone());
    if let Some(q) = spec.quota {
        cfg = cfg.with_quota(q);
    }
    cfg
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn create_collection(
    State(state): State<SharedState>,
    JsonBody(req): JsonBody<CreateCollection>,
) -> ApiResult<(StatusCode, Json<Accepted>)> {
    let spec = ingest_spec(&req, state.default_endpoint.as_deref())?;
    let id = req.collection_id.clone().unwrap_or_else(|| slug(&spec.class_uri));
    if !valid_id(&id) {
        return Err(ApiError::Invalid(format!("collection id {id:?} must be 1-128 letters, digits, '-' or '_'")));
    }

    // Reach the endpoint before accepting the job.
    let probe_spec = spec.clone();
    let endpoint = blocking(move || {
        let endpoint =
            gateway::open(&endpoint_config(&probe_spec)).map_err(|e| ApiError::Unavailable(e.to_string()))?;
        let probe = StructuredQuery::new(QueryKind::CountAllEntities, probe_spec.class_uri.clone())
            .with_membership(probe_spec.membership_predicate.clone());
        endpoint.execute(&probe).map_err(|e| ApiError::Unavailable(e.to_string()))?;
        Ok(endpoint)
    })
    .await?;

    let entry = state.register(CollectionDescriptor::new(&id, &spec))?;
    let job = state.jobs.create(JobKind::Ingest, &id);
    let accepted = Accepted { collection_id: id.clone(), job_id: job.id.clone() };
    tokio::task::spawn_blocking(move || {
        job.set_state(JobState::Running);
        match ingest(&entry.dir, &entry.id, &spec, endpoint.as_ref(), &job.control) {
            Ok(descriptor) => {
                entry.set_descriptor(descriptor);
                match entry.reload() {
                    Ok(_) => job.set_state(JobState::Done),
                    Err(e) => job.set_state(JobState::Failed { reason: e.to_string() }),
                }
            }
            Err(e) => {
                tracing::warn!(collection = %entry.id, error = %e, "ingest failed");
                job.set_state(JobState::Failed { reason: e.to_string() });
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(accepted)))
}

async fn list_collections(State(state): State<SharedState>) -> Json<Vec<CollectionDescriptor>> {
    Json(state.entries().iter().map(|e| e.descriptor()).collect())
}

async fn get_collection(
    State(state): State<SharedState>,
    Path(id): Path<String>,
) -> ApiResult<Json<CollectionDescriptor>> {
    Ok(Json(state.entry(&id)?.descriptor()))
}

async fn get_paths(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<Vec<PathPattern>>> {
    let entry = state.entry(&id)?;
    let c = blocking(move || entry.ready()).await?;
    Ok(Json(c.store.paths.clone()))
}

#[derive(Debug, Deserialize)]
pub struct MapParams {
    #[serde(default)]
    pub color_path: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct MapView {
    pub collection_id: String,
    pub coordinates: Vec<[f64; 2]>,
    pub zones: Vec<Zone>,
    pub config_used: ProjectionConfig,
    pub warnings: Vec<String>,
    pub default_color_path: Option<usize>,
    pub color_path: Option<usize>,
    /// Per entity, the buckets of the color path its values fall in.
    pub color_buckets: Vec<Vec<String>>,
}

async fn get_map(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    Query(params): Query<MapParams>,
) -> ApiResult<Json<MapView>> {
    let entry = state.entry(&id)?;
    let view = blocking(move || {
        let c = entry.ready()?;
        let map = c.map.as_ref().ok_or(ApiError::Core(missingpath_core::Error::NoMap))?;
        let default_color_path = c.default_color_path();
        let color_path = params.color_path.or(default_color_path);
        let color_buckets = match color_path {
            Some(p) => c.color_buckets(p)?,
            None => vec![Vec::new(); c.store.entity_count()],
        };
        Ok(MapView {
            collection_id: c.id().to_string(),
            coordinates: map.coordinates.clone(),
            zones: map.zones.clone(),
            config_used: map.config_used.clone(),
            warnings: map.warnings.clone(),
            default_color_path,
            color_path,
            color_buckets,
        })
    })
    .await?;
    Ok(Json(view))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionOverrides {
    pub n_neighbors: Option<usize>,
    pub min_dist: Option<f64>,
    pub n_epochs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionRequest {
    pub selected_path_indices: Vec<usize>,
    #[serde(default)]
    pub config: Option<ProjectionOverrides>,
}

#[derive(Debug, Serialize)]
pub struct JobAccepted {
    pub job_id: String,
}

async fn post_projection(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<ProjectionRequest>,
) -> ApiResult<(StatusCode, Json<JobAccepted>)> {
    let entry = state.entry(&id)?;
    let c = {
        let entry = entry.clone();
        blocking(move || entry.ready()).await?
    };
    let mut cfg = ProjectionConfig::new(req.selected_path_indices);
    let o = req.config.unwrap_or_default();
    cfg.n_neighbors = o.n_neighbors.unwrap_or(cfg.n_neighbors);
    cfg.min_dist = o.min_dist.unwrap_or(cfg.min_dist);
    cfg.n_epochs = o.n_epochs.unwrap_or(cfg.n_epochs);
    cfg.seed = o.seed.unwrap_or(cfg.seed);
    cfg.validate(c.store.path_count())?;

    let job = state.jobs.create(JobKind::Projection, &id);
    let start = entry.projection.lock().expect("projection lock poisoned").submit(job.clone(), cfg.clone());
    if start {
        spawn_projection(entry, job.clone(), cfg);
    }
    Ok((StatusCode::ACCEPTED, Json(JobAccepted { job_id: job.id.clone() })))
}

fn spawn_projection(entry: Arc<Entry>, job: Arc<Job>, cfg: ProjectionConfig) {
    tokio::task::spawn_blocking(move || {
        let (mut job, mut cfg) = (job, cfg);
        loop {
            let outcome = entry.ready().and_then(|c| {
                let map = project_with(&c.matrix, &cfg, &ZoneConfig::default(), &job.control)?;
                commit_map(&entry.dir, &map)?;
                entry.reload()?;
                Ok(())
            });
            job.set_state(match outcome {
                Ok(()) => JobState::Done,
                Err(ApiError::Core(missingpath_core::Error::Cancelled)) => {
                    JobState::Cancelled { reason: "cancelled".into() }
                }
                Err(e) => JobState::Failed { reason: e.to_string() },
            });
            let next = entry.projection.lock().expect("projection lock poisoned").finish();
            match next {
                Some((j, c)) => (job, cfg) = (j, c),
                None => break,
            }
        }
    });
}

async fn get_job(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<JobView>> {
    let job = state.jobs.get(&id).ok_or(ApiError::UnknownJob(id))?;
    Ok(Json(job.view()))
}

#[derive(Debug, Deserialize)]
pub struct InspectRequest {
    #[serde(flatten)]
    pub query: SelectionQuery,
    /// Keeps only these entities of the query's result.
    #[serde(default)]
    pub entity_ids: Option<Vec<usize>>,
    #[serde(default)]
    pub preferred_language: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct InspectResponse {
    pub entity_count: usize,
    #[serde(flatten)]
    pub inspection: Inspection,
}

async fn post_inspect(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<InspectRequest>,
) -> ApiResult<Json<InspectResponse>> {
    let entry = state.entry(&id)?;
    let response = blocking(move || {
        let c = entry.ready()?;
        let sel = c.selection_for(Some(&req.query), req.entity_ids.as_deref())?;
        let inspection = c.inspect_selection(&sel, req.preferred_language.as_deref())?;
        Ok(InspectResponse { entity_count: inspection.entity_ids.len(), inspection })
    })
    .await?;
    Ok(Json(response))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportRequest {
    #[serde(default)]
    pub query: Option<SelectionQuery>,
    #[serde(default)]
    pub entity_ids: Option<Vec<usize>>,
    #[serde(default)]
    pub preferred_language: Option<String>,
}

async fn post_export(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<ExportRequest>,
) -> ApiResult<Response> {
    let entry = state.entry(&id)?;
    let (name, bytes) = blocking(move || {
        let c = entry.ready()?;
        let sel = c.selection_for(req.query.as_ref(), req.entity_ids.as_deref())?;
        let bundle = c.export(&sel, req.preferred_language.as_deref(), Utc::now())?;
        Ok((bundle.zip_name(), bundle.to_zip()?))
    })
    .await?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/zip".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{name}\"")),
        ],
        axum::body::Body::from(bytes),
    )
        .into_response())
}

async fn post_log(State(state): State<SharedState>, JsonBody(req): JsonBody<LogRequest>) -> ApiResult<StatusCode> {
    if req.session_id.trim().is_empty() {
        return Err(ApiError::Invalid("session_id must not be empty".into()));
    }
    let state = state.clone();
    blocking(move || state.log.append(req).map_err(|e| ApiError::Internal(e.to_string()))).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub struct LogParams {
    pub session: String,
}

async fn get_log(State(state): State<SharedState>, Query(p): Query<LogParams>) -> Json<Vec<ActionLogEntry>> {
    Json(state.log.session(&p.session))
}
