//! Local HTTP API over the darkscan engine.
//!
//! | Route | Body | Response |
//! |---|---|---|
//! | `GET /v1/health` | | `{"status":"ok","backend":"<name>"}` |
//! | `POST /v1/classify` | `{"texts":[...]}` | `{"results":[{"probabilities":{...},"predicted":"...","flagged":[...]}]}` |
//! | `POST /v1/scan` | `{"url":"..."}` or `{"html":"...","url":"..."}` | site report JSON |
//!
//! Malformed bodies get 400, empty input 422, backend or fetch failures 502.
//! Errors carry `{"error":"<message>"}`. Browser-extension origins are
//! allowed through CORS.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use darkscan_core::detection::{flag, DetectionError};
use darkscan_core::ingest::{fetch_page, FetchConfig, IngestError, PageSource, SegmentationRules};
use darkscan_core::report::{render_report, ReportFormat};
use darkscan_core::{AggregationMode, Category, CategoryMap, ClassifierBackend, Error as CoreError, Scanner, Thresholds};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const DEFAULT_BIND: &str = "127.0.0.1:8787";

/// Origin prefixes allowed by default.
pub const EXTENSION_ORIGINS: [&str; 2] = ["chrome-extension://", "moz-extension://"];

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

pub type SharedBackend = Arc<dyn ClassifierBackend<f64>>;

#[derive(Clone)]
pub struct ServiceConfig {
    pub thresholds: Thresholds,
    pub mode: AggregationMode,
    pub rules: SegmentationRules,
    pub fetch: FetchConfig,
    /// Allowed CORS origin prefixes.
    pub allowed_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            thresholds: Thresholds::default(),
            mode: AggregationMode::default(),
            rules: SegmentationRules::default(),
            fetch: FetchConfig::default(),
            allowed_origins: EXTENSION_ORIGINS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Clone)]
struct AppState {
    backend: SharedBackend,
    config: Arc<ServiceConfig>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

fn status_for(err: &CoreError) -> StatusCode {
    match err {
        CoreError::Ingest(IngestError::InvalidUrl(_)) => StatusCode::BAD_REQUEST,
        CoreError::Ingest(IngestError::ParseFailure(_)) => StatusCode::UNPROCESSABLE_ENTITY,
        CoreError::Detection(DetectionError::EmptySite(_)) => StatusCode::UNPROCESSABLE_ENTITY,
        CoreError::Ingest(_) | CoreError::Classify(_) => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, CoreError> + Send + 'static) -> Result<T, ApiError> {
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(ApiError(status_for(&e), e.to_string())),
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

#[derive(Serialize)]
struct Health<'a> {
    status: &'static str,
    backend: &'a str,
}

async fn health(State(state): State<AppState>) -> Response {
    Json(Health {
        status: "ok",
        backend: state.backend.name(),
    })
    .into_response()
}

#[derive(Deserialize)]
struct ClassifyRequest {
    texts: Vec<String>,
}

#[derive(Serialize)]
struct ClassifyResult {
    probabilities: CategoryMap<f64>,
    predicted: Category,
    flagged: Vec<Category>,
}

#[derive(Serialize)]
struct ClassifyResponse {
    results: Vec<ClassifyResult>,
}

async fn classify(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: ClassifyRequest = parse_body(&body)?;
    if req.texts.is_empty() {
        return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, "texts must not be empty".into()));
    }
    let backend = state.backend.clone();
    let texts = req.texts;
    let distributions = blocking(move || {
        Ok(darkscan_core::classify_all(
            &*backend,
            &texts,
            darkscan_core::classifier::DEFAULT_BATCH_SIZE,
        )?)
    })
    .await?;
    let results = distributions
        .iter()
        .map(|d| ClassifyResult {
            probabilities: *d.probs(),
            predicted: d.argmax(),
            flagged: flag(d, &state.config.thresholds).into_iter().collect(),
        })
        .collect();
    Ok(Json(ClassifyResponse { results }).into_response())
}

#[derive(Deserialize)]
struct ScanRequest {
    url: Option<String>,
    html: Option<String>,
    site_id: Option<String>,
}

fn site_from_url(url: &str) -> String {
    url::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(str::to_string))
        .unwrap_or_else(|| "page".to_string())
}

async fn scan(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: ScanRequest = parse_body(&body)?;
    let (url, html) = match (req.url, req.html) {
        (url, Some(html)) => (url.unwrap_or_else(|| "about:blank".into()), Some(html)),
        (Some(url), None) => (url, None),
        (None, None) => {
            return Err(ApiError(StatusCode::BAD_REQUEST, "body needs \"url\" or \"html\"".into()));
        }
    };
    let site_id = req.site_id.unwrap_or_else(|| site_from_url(&url));
    let backend = state.backend.clone();
    let config = state.config.clone();
    let json = blocking(move || {
        let page = match html {
            Some(html) => PageSource::from_html(url, html),
            None => fetch_page(&url, &config.fetch)?,
        };
        let mut scanner = Scanner::new(&*backend)
            .with_thresholds(config.thresholds)
            .with_mode(config.mode);
        scanner.rules = config.rules.clone();
        let report = scanner.scan_site(&site_id, &[page])?;
        Ok(render_report(&report, ReportFormat::Json))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], json).into_response())
}

fn cors(origins: &[String]) -> CorsLayer {
    let prefixes: Vec<String> = origins.to_vec();
    CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(move |origin: &HeaderValue, _| {
            let origin = origin.to_str().unwrap_or("");
            prefixes.iter().any(|p| origin.starts_with(p.as_str()))
        }))
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE])
}

/// The API routes over a shared, read-only backend.
pub fn router(backend: SharedBackend, config: ServiceConfig) -> Router {
    let layer = cors(&config.allowed_origins);
    let state = AppState {
        backend,
        config: Arc::new(config),
    };
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/classify", post(classify))
        .route("/v1/scan", post(scan))
        .layer(layer)
        .with_state(state)
}

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve_listener(
    listener: tokio::net::TcpListener,
    backend: SharedBackend,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, router(backend, config))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(addr: &str, backend: SharedBackend, config: ServiceConfig) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::BindFailure {
            addr: addr.to_string(),
            source,
        })?;
    serve_listener(listener, backend, config, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

/// Runs [`serve`] on a new multi-threaded runtime, blocking the caller.
/// Backends that own a blocking HTTP client must be built before calling
/// this, outside any async context.
pub fn serve_blocking(addr: &str, backend: SharedBackend, config: ServiceConfig) -> Result<(), ServiceError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, backend, config))
}

/// A server running on its own thread; stops when dropped.
pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<Result<(), ServiceError>>>,
}

impl ServiceHandle {
    /// Binds `addr` (use port 0 for any free port) and starts serving.
    pub fn spawn(addr: &str, backend: SharedBackend, config: ServiceConfig) -> Result<Self, ServiceError> {
        let std_listener = std::net::TcpListener::bind(addr).map_err(|source| ServiceError::BindFailure {
            addr: addr.to_string(),
            source,
        })?;
        std_listener.set_nonblocking(true)?;
        let local = std_listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)?;
                serve_listener(listener, backend, config, async {
                    let _ = rx.await;
                })
                .await
            })
        });
        Ok(ServiceHandle {
            addr: local,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Stops the server and waits for it to finish.
    pub fn shutdown(mut self) -> Result<(), ServiceError> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or(Ok(())),
            None => Ok(()),
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
