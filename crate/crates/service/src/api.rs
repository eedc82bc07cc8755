use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use segprop_core::dataset::frame_file_name;
use segprop_core::segprop::PropagationConfig;
use segprop_core::{ClassId, Palette};

use crate::jobs::JobManager;
use crate::raster::Polygon;
use crate::store::{Store, StoreError};

pub struct AppState {
    pub store: Arc<Store>,
    pub jobs: JobManager,
}

impl AppState {
    pub fn new(store: Store, workers: usize) -> Arc<Self> {
        let store = Arc::new(store);
        Arc::new(Self {
            jobs: JobManager::new(store.clone(), workers),
            store,
        })
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::UnknownSequence(_) | StoreError::UnknownFrame { .. } => StatusCode::NOT_FOUND,
            StoreError::Conflict { .. } => StatusCode::CONFLICT,
            StoreError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Io(_) | StoreError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], Body::from(bytes)).into_response()
}

fn read_png(path: &std::path::Path) -> ApiResult<Vec<u8>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        return std::fs::read(path).map_err(|e| ApiError(StatusCode::NOT_FOUND, format!("{}: {e}", path.display())));
    }
    let img = image::open(path).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(out.into_inner())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/classes", get(list_classes))
        .route("/api/sequences", get(list_sequences))
        .route("/api/sequences/{seq}", get(get_sequence))
        .route("/api/sequences/{seq}/frames/{idx}", get(get_frame))
        .route(
            "/api/sequences/{seq}/annotations/{idx}",
            get(get_annotation).put(put_annotation),
        )
        .route("/api/sequences/{seq}/annotations/{idx}/history", get(get_history))
        .route("/api/sequences/{seq}/jobs", get(list_jobs).post(post_job))
        .route("/api/sequences/{seq}/labels/{idx}", get(get_label))
        .route("/api/jobs/{id}", get(get_job))
        .with_state(state)
}

async fn list_classes() -> impl IntoResponse {
    let palette = Palette::standard();
    let classes: Vec<_> = (0..palette.len() as u8)
        .map(|i| {
            let id = ClassId(i);
            json!({
                "id": i,
                "name": palette.name_of(id).expect("in range"),
                "color": palette.color_of(id).expect("in range"),
            })
        })
        .collect();
    Json(classes)
}

async fn list_sequences(State(s): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    let list = s
        .store
        .sequences()
        .map(|q| q.summary())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Json(list))
}

async fn get_sequence(State(s): State<Arc<AppState>>, Path(seq): Path<String>) -> ApiResult<impl IntoResponse> {
    let summary = s.store.get(&seq)?.summary()?;
    let latest = s.jobs.latest_done(&seq).map(|j| j.id);
    Ok(Json(json!({ "sequence": summary, "latest_job": latest })))
}

async fn get_frame(State(s): State<Arc<AppState>>, Path((seq, idx)): Path<(String, usize)>) -> ApiResult<Response> {
    let path = s.store.get(&seq)?.frame_path(idx)?;
    Ok(png(read_png(&path)?))
}

async fn get_annotation(
    State(s): State<Arc<AppState>>,
    Path((seq, idx)): Path<(String, usize)>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.store.get(&seq)?.annotation_state(idx)?))
}

async fn get_history(
    State(s): State<Arc<AppState>>,
    Path((seq, idx)): Path<(String, usize)>,
) -> ApiResult<impl IntoResponse> {
    let seq = s.store.get(&seq)?;
    seq.check_frame(idx)?;
    Ok(Json(seq.history(idx)?))
}

#[derive(Deserialize)]
struct PutAnnotation {
    #[serde(default)]
    frame: Option<usize>,
    revision: u64,
    polygons: Vec<Polygon>,
}

async fn put_annotation(
    State(s): State<Arc<AppState>>,
    Path((seq, idx)): Path<(String, usize)>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let seq = s.store.get(&seq)?;
    seq.check_frame(idx)?;
    let req: PutAnnotation = serde_json::from_slice(&body)
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("malformed annotation: {e}")))?;
    if req.frame.is_some_and(|f| f != idx) {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("body frame {} does not match path frame {idx}", req.frame.unwrap()),
        ));
    }
    // Rasterization and file writes are blocking work.
    let store = s.store.clone();
    let name = seq.name.clone();
    let state = tokio::task::spawn_blocking(move || store.get(&name)?.put_annotation(idx, req.revision, req.polygons))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(state))
}

#[derive(Deserialize, Default)]
struct JobRequest {
    #[serde(default)]
    config: PropagationConfig,
}

async fn post_job(
    State(s): State<Arc<AppState>>,
    Path(seq): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let sequence = s.store.get(&seq)?;
    let req: JobRequest = if body.iter().all(u8::is_ascii_whitespace) {
        JobRequest::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("malformed job request: {e}")))?
    };
    req.config
        .validate()
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let keyframes = sequence.keyframes()?;
    if keyframes.len() < 2 {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("propagation needs at least 2 keyframes, {} annotated", keyframes.len()),
        ));
    }
    let job = s.jobs.submit(&seq, req.config, keyframes);
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn list_jobs(State(s): State<Arc<AppState>>, Path(seq): Path<String>) -> ApiResult<impl IntoResponse> {
    s.store.get(&seq)?;
    Ok(Json(s.jobs.jobs_for(&seq)))
}

async fn get_job(State(s): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    s.jobs
        .get(id)
        .map(Json)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown job {id}")))
}

async fn get_label(State(s): State<Arc<AppState>>, Path((seq, idx)): Path<(String, usize)>) -> ApiResult<Response> {
    s.store.get(&seq)?.check_frame(idx)?;
    let job = s
        .jobs
        .latest_done(&seq)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no finished propagation for {seq}")))?;
    let path = job
        .labels_dir
        .expect("done jobs have outputs")
        .join(frame_file_name(idx));
    Ok(png(read_png(&path)?))
}
