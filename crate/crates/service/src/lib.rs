//! HTTP API over an immutable [`ShapeIndex`].
//!
//! | route | |
//! |---|---|
//! | `GET /healthz` | liveness |
//! | `GET /api/meta` | parts, shape count, dimension, config fingerprint |
//! | `GET /api/shapes` | ids and names |
//! | `GET /api/manifold/{part}?projection=2d` | PCA scatter `[{id, x, y}]` |
//! | `GET /api/shape/{id}/silhouette/{view}` | PNG, or PGM with `?format=pgm`; `?part=` renders one part |
//! | `POST /api/query` | blend query, ranked results with per-part costs |
//! | `POST /api/external` | register one external embedding |
//!
//! Errors are `{"code": ..., "message": ...}`.

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pickmix::geometry::{load_mesh, normalize, split_parts, MeshFormat};
use pickmix::index::{ExternalEmbedding, ExternalTable, ShapeIndex};
use pickmix::manifold::project_2d;
use pickmix::raster::{
    dodecahedron_viewpoints, render_silhouette, SilhouetteImage, MIN_RESOLUTION, VIEW_COUNT,
};
use pickmix::retrieval::{blend_retrieve, BlendQuery, RankedResult};
use pickmix::Error;
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

const MAX_SILHOUETTE_SIZE: u32 = 1024;

/// Everything a request can see. The index never changes; the external
/// table is replaced wholesale on every registration.
pub struct ApiSession {
    index: ShapeIndex,
    externals: RwLock<ExternalTable>,
    persist_ext: Option<PathBuf>,
}

impl ApiSession {
    pub fn new(index: ShapeIndex) -> Self {
        ApiSession {
            index,
            externals: RwLock::new(ExternalTable::new()),
            persist_ext: None,
        }
    }

    /// Keeps external embeddings in `path` across restarts, loading any
    /// that are already there.
    pub fn persist_externals(mut self, path: &Path) -> pickmix::Result<Self> {
        if path.exists() {
            let table = ExternalTable::new().ingest_file(&self.index, path)?;
            self.externals = RwLock::new(table);
        }
        self.persist_ext = Some(path.to_path_buf());
        Ok(self)
    }

    pub fn index(&self) -> &ShapeIndex {
        &self.index
    }

    pub fn externals(&self) -> ExternalTable {
        self.externals.read().unwrap().clone()
    }

    fn register(&self, e: ExternalEmbedding) -> pickmix::Result<()> {
        let mut table = self.externals.write().unwrap();
        let next = table.ingest(&self.index, vec![e])?;
        if let Some(path) = &self.persist_ext {
            std::fs::write(path, next.to_json())?;
        }
        *table = next;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.into(),
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::UnknownPart(_) => (StatusCode::BAD_REQUEST, "unknown_part"),
            Error::UnknownSource(_) => (StatusCode::BAD_REQUEST, "unknown_source"),
            Error::Dimension { .. } => (StatusCode::BAD_REQUEST, "dimension"),
            Error::Query(_) => (StatusCode::BAD_REQUEST, "invalid_query"),
            Error::Json(_) | Error::Parse(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            Error::DuplicateId(_) => (StatusCode::CONFLICT, "duplicate_id"),
            Error::EmptyIndex => (StatusCode::UNPROCESSABLE_ENTITY, "empty_index"),
            Error::Size(_) => (StatusCode::UNPROCESSABLE_ENTITY, "too_few_shapes"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type Shared = Arc<ApiSession>;
type ApiResult<T> = Result<T, ApiError>;

#[derive(Serialize)]
struct Meta<'a> {
    parts: &'a [String],
    shape_count: usize,
    dim: usize,
    fingerprint: String,
    resolution: u32,
}

async fn meta(State(s): State<Shared>) -> Json<serde_json::Value> {
    let index = s.index();
    Json(
        serde_json::to_value(Meta {
            parts: index.label_set(),
            shape_count: index.len(),
            dim: index.dim(),
            fingerprint: index.config().fingerprint(),
            resolution: index.config().resolution,
        })
        .unwrap(),
    )
}

#[derive(Serialize)]
struct ShapeSummary<'a> {
    id: u32,
    name: &'a str,
}

async fn shapes(State(s): State<Shared>) -> Json<serde_json::Value> {
    let list: Vec<ShapeSummary> = s
        .index()
        .shapes()
        .iter()
        .map(|r| ShapeSummary {
            id: r.id,
            name: &r.name,
        })
        .collect();
    Json(serde_json::to_value(list).unwrap())
}

#[derive(Deserialize)]
struct ProjectionParams {
    projection: Option<String>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

/// 2D PCA scatter of one part manifold, one point per indexed shape.
pub fn scatter(index: &ShapeIndex, part: &str) -> pickmix::Result<Vec<ScatterPoint>> {
    let xy = project_2d(index.manifold(part)?)?;
    Ok(index
        .shapes()
        .iter()
        .zip(xy)
        .map(|(s, [x, y])| ScatterPoint { id: s.id, x, y })
        .collect())
}

async fn manifold(
    State(s): State<Shared>,
    UrlPath(part): UrlPath<String>,
    Query(p): Query<ProjectionParams>,
) -> ApiResult<Json<Vec<ScatterPoint>>> {
    match p.projection.as_deref() {
        None | Some("2d") => {}
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                format!("unsupported projection `{other}`"),
            ))
        }
    }
    if s.index().part_position(&part).is_err() {
        return Err(ApiError::not_found(format!("unknown part `{part}`")));
    }
    Ok(Json(scatter(s.index(), &part)?))
}

#[derive(Deserialize)]
struct SilhouetteParams {
    part: Option<String>,
    format: Option<String>,
    size: Option<u32>,
}

/// Silhouette of shape `id` from viewpoint `view`, rendered from its source
/// mesh after normalization. `part` restricts it to one part.
pub fn shape_silhouette(
    index: &ShapeIndex,
    id: u32,
    view: usize,
    part: Option<&str>,
    size: u32,
) -> pickmix::Result<SilhouetteImage> {
    let row = index
        .row_of(id)
        .ok_or_else(|| Error::UnknownSource(format!("shape:{id}")))?;
    let source = Path::new(&index.shapes()[row].source);
    let format = MeshFormat::from_path(source)
        .ok_or_else(|| Error::Parse(format!("shape {id} has no renderable source")))?;
    let mesh = load_mesh(source, format, index.label_set())?;
    let (normalized, _) = normalize(&mesh)?;
    let vp = &dodecahedron_viewpoints()[view];
    match part {
        None => render_silhouette(normalized.mesh(), vp, size),
        Some(p) => {
            index.part_position(p)?;
            let (_, m) = split_parts(&normalized)
                .into_iter()
                .find(|(l, _)| l == p)
                .unwrap();
            render_silhouette(&m, vp, size)
        }
    }
}

fn to_png(img: &SilhouetteImage) -> Vec<u8> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let data: Vec<u8> = img
        .bits()
        .iter()
        .map(|&b| if b != 0 { 255 } else { 0 })
        .collect();
    let mut w = enc.write_header().expect("in-memory PNG header");
    w.write_image_data(&data).expect("in-memory PNG data");
    w.finish().expect("in-memory PNG");
    out
}

async fn silhouette(
    State(s): State<Shared>,
    UrlPath((id, view)): UrlPath<(u32, usize)>,
    Query(p): Query<SilhouetteParams>,
) -> ApiResult<Response> {
    if view >= VIEW_COUNT {
        return Err(ApiError::not_found(format!(
            "view {view} is not in 0..{VIEW_COUNT}"
        )));
    }
    if s.index().row_of(id).is_none() {
        return Err(ApiError::not_found(format!("no shape {id}")));
    }
    let size = p.size.unwrap_or(s.index().config().resolution);
    if !(MIN_RESOLUTION..=MAX_SILHOUETTE_SIZE).contains(&size) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            format!("size must be in {MIN_RESOLUTION}..={MAX_SILHOUETTE_SIZE}"),
        ));
    }
    let png = match p.format.as_deref() {
        None | Some("png") => true,
        Some("pgm") => false,
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                format!("unsupported format `{other}`"),
            ))
        }
    };
    let session = s.clone();
    let part = p.part.clone();
    let img = tokio::task::spawn_blocking(move || {
        shape_silhouette(session.index(), id, view, part.as_deref(), size)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
    .map_err(|e| match e {
        Error::UnknownPart(p) => ApiError::not_found(format!("unknown part `{p}`")),
        Error::Io(e) => ApiError::not_found(format!("source mesh unavailable: {e}")),
        Error::Parse(m) => ApiError::not_found(m),
        other => other.into(),
    })?;
    Ok(if png {
        ([(header::CONTENT_TYPE, "image/png")], to_png(&img)).into_response()
    } else {
        (
            [(header::CONTENT_TYPE, "image/x-portable-graymap")],
            img.to_pgm(),
        )
            .into_response()
    })
}

/// Runs a blend query against the session's index and external table.
pub fn run_query(session: &ApiSession, q: &BlendQuery) -> pickmix::Result<Vec<RankedResult>> {
    blend_retrieve(session.index(), &session.externals(), q)
}

async fn query(
    State(s): State<Shared>,
    body: Result<Json<BlendQuery>, JsonRejection>,
) -> ApiResult<Json<Vec<RankedResult>>> {
    let Json(q) = body?;
    Ok(Json(run_query(&s, &q)?))
}

#[derive(Serialize)]
struct Registered {
    id: String,
}

async fn external(
    State(s): State<Shared>,
    body: Result<Json<ExternalEmbedding>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let Json(e) = body?;
    let id = e.id.clone();
    s.register(e)?;
    Ok((
        StatusCode::CREATED,
        Json(serde_json::to_value(Registered { id }).unwrap()),
    ))
}

async fn healthz() -> &'static str {
    "ok"
}

/// The full API, with CORS open to any origin. Static files under
/// `static_dir`, if given, answer every other path.
pub fn router(session: Arc<ApiSession>, static_dir: Option<&Path>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers(Any);
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/api/meta", get(meta))
        .route("/api/shapes", get(shapes))
        .route("/api/manifold/{part}", get(manifold))
        .route("/api/shape/{id}/silhouette/{view}", get(silhouette))
        .route("/api/query", post(query))
        .route("/api/external", post(external))
        .with_state(session);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(cors)
}

/// Serves until SIGINT / Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
