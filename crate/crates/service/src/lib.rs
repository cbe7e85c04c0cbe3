//! Read-only HTTP JSON API over a loaded corpus.
//!
//! The router starts in a not-ready state; every endpoint answers
//! `503 not_ready` until [`AppState::set_ready`] installs the corpus.

mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, OnceLock};

use axum::extract::{Query, State};
use axum::http::HeaderValue;
use axum::routing::get;
use axum::{Json, Router};
use lexdrift_core::corpus::DecadeId;
use lexdrift_core::experiment::{
    self, ComparisonMatrix, ExperimentError, PairComparison, PipelineParams, QuerySet,
    ReportBundle, TauTable,
};
use lexdrift_core::feedback::{self, ExpandedQuery, FeedbackError};
use lexdrift_core::metrics::Metric;
use lexdrift_core::partition::{CollectionSummary, PartitionedCorpus};
use serde::{Deserialize, Serialize};
use tokio::sync::OnceCell;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use error::{ApiError, ErrorCode};

/// Terms returned by `/api/expand` when `top` is not given.
pub const DEFAULT_TOP: usize = 15;

struct Loaded {
    corpus: PartitionedCorpus,
    queries: QuerySet,
    params: PipelineParams,
}

type BundleCell = Arc<OnceCell<Arc<ReportBundle>>>;

#[derive(Default)]
pub struct AppState {
    loaded: OnceLock<Loaded>,
    bundles: Mutex<HashMap<String, BundleCell>>,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Convenience for callers that already hold a corpus.
    pub fn ready(
        corpus: PartitionedCorpus,
        queries: QuerySet,
        params: PipelineParams,
    ) -> Arc<Self> {
        let state = Self::new();
        state.set_ready(corpus, queries, params);
        state
    }

    /// Installs the corpus. Later calls are ignored and return false.
    pub fn set_ready(
        &self,
        corpus: PartitionedCorpus,
        queries: QuerySet,
        params: PipelineParams,
    ) -> bool {
        self.loaded
            .set(Loaded {
                corpus,
                queries,
                params,
            })
            .is_ok()
    }

    pub fn is_ready(&self) -> bool {
        self.loaded.get().is_some()
    }

    fn loaded(&self) -> Result<&Loaded, ApiError> {
        self.loaded.get().ok_or_else(ApiError::not_ready)
    }

    /// Runs the full pipeline once per parameter set; concurrent callers for
    /// the same key wait on the same computation.
    async fn bundle(self: &Arc<Self>) -> Result<Arc<ReportBundle>, ApiError> {
        let params = self.loaded()?.params;
        let cell = {
            let mut map = self.bundles.lock().expect("bundle cache poisoned");
            map.entry(params.cache_key()).or_default().clone()
        };
        let state = Arc::clone(self);
        cell.get_or_try_init(|| async move {
            let bundle = tokio::task::spawn_blocking(move || {
                let l = state.loaded()?;
                experiment::run_pipeline(&l.corpus, &l.queries, &l.params).map_err(ApiError::from)
            })
            .await
            .map_err(|e| ApiError::internal(e.to_string()))??;
            Ok::<_, ApiError>(Arc::new(bundle))
        })
        .await
        .cloned()
    }
}

/// Builds the API router. With `cors_origin` unset any origin is allowed.
pub fn router(state: Arc<AppState>, cors_origin: Option<HeaderValue>) -> Router {
    let origin = match cors_origin {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::any(),
    };
    Router::new()
        .route("/api/collections", get(collections))
        .route("/api/expand", get(expand))
        .route("/api/compare", get(compare))
        .route("/api/matrix", get(matrix))
        .layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([axum::http::Method::GET]),
        )
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}

fn parse_collection(raw: &str) -> Result<DecadeId, ApiError> {
    raw.parse().map_err(|_| {
        ApiError::new(
            ErrorCode::UnknownCollection,
            format!("no collection {raw:?}"),
        )
    })
}

fn require<'a>(value: &'a Option<String>, name: &str) -> Result<&'a str, ApiError> {
    match value.as_deref() {
        Some(v) if !v.trim().is_empty() => Ok(v),
        _ => Err(ApiError::bad_request(format!("missing parameter {name}"))),
    }
}

async fn collections(
    State(state): State<Arc<AppState>>,
) -> Result<Json<Vec<CollectionSummary>>, ApiError> {
    Ok(Json(state.loaded()?.corpus.collections()))
}

#[derive(Debug, Deserialize)]
pub struct ExpandParams {
    pub q: Option<String>,
    pub collection: Option<String>,
    pub top: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Serialize)]
pub struct ExpandView {
    pub query: String,
    pub collection: DecadeId,
    pub absent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermWeight>>,
}

async fn expand(
    State(state): State<Arc<AppState>>,
    Query(p): Query<ExpandParams>,
) -> Result<Json<ExpandView>, ApiError> {
    let loaded = state.loaded()?;
    let q = require(&p.q, "q")?;
    let collection = parse_collection(require(&p.collection, "collection")?)?;
    let top = p.top.unwrap_or(DEFAULT_TOP);
    if top == 0 {
        return Err(ApiError::bad_request("top must be at least 1"));
    }
    let expanded = feedback::expand_query(&loaded.corpus, collection, q, &loaded.params.feedback)
        .map_err(|e| ApiError::from_feedback(q, e))?;
    let terms = match &expanded {
        ExpandedQuery::Absent { .. } => None,
        ExpandedQuery::Present(e) => Some(
            e.top(top)
                .iter()
                .map(|(term, weight)| TermWeight {
                    term: term.clone(),
                    weight: *weight,
                })
                .collect(),
        ),
    };
    Ok(Json(ExpandView {
        query: q.to_owned(),
        collection,
        absent: expanded.is_absent(),
        terms,
    }))
}

#[derive(Debug, Deserialize)]
pub struct CompareParams {
    pub q: Option<String>,
    pub a: Option<String>,
    pub b: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct CompareView {
    pub query: String,
    pub a: DecadeId,
    pub b: DecadeId,
    pub a_absent: bool,
    pub b_absent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jaccard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jsd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_terms: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_only: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_only: Option<Vec<String>>,
}

impl From<PairComparison> for CompareView {
    fn from(c: PairComparison) -> Self {
        let m = c.metrics;
        Self {
            query: c.query,
            a: c.a,
            b: c.b,
            a_absent: c.a_absent,
            b_absent: c.b_absent,
            jaccard: m.as_ref().map(|m| m.jaccard),
            jsd: m.as_ref().map(|m| m.jsd),
            tau: m.as_ref().map(|m| m.tau),
            overlap_terms: m.as_ref().map(|m| m.overlap_terms.clone()),
            a_only: m.as_ref().map(|m| m.a_only.clone()),
            b_only: m.map(|m| m.b_only),
        }
    }
}

async fn compare(
    State(state): State<Arc<AppState>>,
    Query(p): Query<CompareParams>,
) -> Result<Json<CompareView>, ApiError> {
    state.loaded()?;
    let q = require(&p.q, "q")?.to_owned();
    let a = parse_collection(require(&p.a, "a")?)?;
    let b = parse_collection(require(&p.b, "b")?)?;
    let cmp = tokio::task::spawn_blocking(move || {
        let l = state.loaded()?;
        experiment::compare_pair(&l.corpus, &q, a, b, &l.params).map_err(ApiError::from)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(cmp.into()))
}

#[derive(Debug, Deserialize)]
pub struct MatrixParams {
    pub metric: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum MatrixView {
    Pairwise(ComparisonMatrix),
    Tau {
        metric: Metric,
        #[serde(flatten)]
        table: TauTable,
    },
}

async fn matrix(
    State(state): State<Arc<AppState>>,
    Query(p): Query<MatrixParams>,
) -> Result<Json<MatrixView>, ApiError> {
    state.loaded()?;
    let raw = require(&p.metric, "metric")?;
    let metric: Metric = raw
        .parse()
        .map_err(|_| ApiError::bad_request(format!("unknown metric {raw:?}")))?;
    let bundle = state.bundle().await?;
    Ok(Json(match bundle.matrix(metric) {
        Some(m) => MatrixView::Pairwise(m.clone()),
        None => MatrixView::Tau {
            metric,
            table: bundle.tau_table.clone(),
        },
    }))
}

impl From<ExperimentError> for ApiError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Feedback {
                keyword, source, ..
            } => ApiError::from_feedback(&keyword, source),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl ApiError {
    fn from_feedback(keyword: &str, e: FeedbackError) -> Self {
        match e {
            FeedbackError::UnknownCollection(c) => ApiError::new(
                ErrorCode::UnknownCollection,
                format!("collection {c} is not indexed"),
            ),
            FeedbackError::EmptyQuery(_) => ApiError::new(
                ErrorCode::UnknownQueryTermAbsent,
                format!("{keyword:?} has no indexable terms"),
            ),
            other => ApiError::internal(other.to_string()),
        }
    }
}
