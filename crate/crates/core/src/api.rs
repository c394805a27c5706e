//! JSON HTTP API over one persisted run.
//!
//! Every response body is `{"run_id": ..., "data": ...}` and carries an
//! `X-Run-Id` header. Errors use `{"run_id": ..., "error": {"code", "message"}}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::RwLock;

use crate::cluster::CampaignLabel;
use crate::identity::{IdentityReport, IdentitySuspension, SavingsEstimate};
use crate::ingest::Corpus;
use crate::labeler::{apply_review_label, FlagResult, LabelBook, LabelError, ReviewLabel, Verdict};
use crate::metrics::{campaign_posts, CampaignMetrics};
use crate::model::{Platform, Post};
use crate::phone::PhoneNumber;
use crate::pipeline::{build_report, run_dir, CampaignRow, PipelineError, RunArtifacts, LABELS_FILE};

pub const RUN_ID_HEADER: &str = "x-run-id";

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("port_in_use: {0}")]
    PortInUse(SocketAddr),
    #[error("server i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Labels(#[from] LabelError),
}

/// A loaded run plus the live label book.
#[derive(Debug)]
pub struct ServiceState {
    pub artifacts: RunArtifacts,
    pub corpus: Corpus,
    pub labels: LabelBook,
    /// Data directory for the label log and other runs; `None` keeps labels in memory.
    pub data_dir: Option<PathBuf>,
}

impl ServiceState {
    pub fn new(artifacts: RunArtifacts, corpus: Corpus, labels: LabelBook, data_dir: Option<PathBuf>) -> Self {
        let mut artifacts = artifacts;
        labels.annotate(artifacts.campaigns.iter_mut().map(|r| &mut r.campaign));
        Self {
            artifacts,
            corpus,
            labels,
            data_dir,
        }
    }

    /// Load the run `run_id` (latest when `None`) from `data_dir`.
    pub fn load(data_dir: PathBuf, run_id: Option<&str>) -> Result<Self, ServeError> {
        let (artifacts, corpus) = crate::pipeline::load_run(&data_dir, run_id)?;
        let labels = LabelBook::load(&data_dir.join(LABELS_FILE))?;
        Ok(Self::new(artifacts, corpus, labels, Some(data_dir)))
    }

    /// Digest of everything a request could mutate.
    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.artifacts).expect("artifacts serialize"));
        h.update(serde_json::to_vec(&self.labels).expect("labels serialize"));
        if let Some(dir) = &self.data_dir {
            h.update(std::fs::read(dir.join(LABELS_FILE)).unwrap_or_default());
        }
        format!("{:x}", h.finalize())
    }
}

pub type SharedState = Arc<RwLock<ServiceState>>;

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} {id}"))
    }
}

fn respond(run_id: &str, status: StatusCode, body: serde_json::Value) -> Response {
    let mut resp = (status, Json(body)).into_response();
    if let Ok(v) = HeaderValue::from_str(run_id) {
        resp.headers_mut().insert(RUN_ID_HEADER, v);
    }
    resp
}

fn ok<T: Serialize>(run_id: &str, data: &T) -> Response {
    respond(run_id, StatusCode::OK, json!({ "run_id": run_id, "data": data }))
}

fn err(run_id: &str, e: ApiError) -> Response {
    respond(
        run_id,
        e.status,
        json!({ "run_id": run_id, "error": { "code": e.code, "message": e.message } }),
    )
}

#[derive(Debug, Default, Deserialize)]
pub struct CampaignFilter {
    pub label: Option<CampaignLabel>,
    pub topic: Option<String>,
    pub country: Option<String>,
    pub platform: Option<Platform>,
    pub min_posts: Option<usize>,
}

impl CampaignFilter {
    pub fn matches(&self, row: &CampaignRow) -> bool {
        self.label.is_none_or(|l| row.label == l)
            && self.topic.as_ref().is_none_or(|t| &row.topic == t)
            && self.country.as_ref().is_none_or(|c| &row.country == c)
            && self
                .platform
                .is_none_or(|p| row.platform_counts.get(&p).is_some_and(|&n| n > 0))
            && self.min_posts.is_none_or(|m| row.post_count >= m)
    }
}

/// Campaign rows matching `filter`, largest first.
pub fn filter_campaigns(artifacts: &RunArtifacts, filter: &CampaignFilter) -> Vec<CampaignRow> {
    let mut rows: Vec<CampaignRow> = artifacts
        .campaigns
        .iter()
        .map(CampaignRow::from_record)
        .filter(|r| filter.matches(r))
        .collect();
    rows.sort_by(|a, b| {
        b.post_count
            .cmp(&a.post_count)
            .then_with(|| a.campaign_id.cmp(&b.campaign_id))
    });
    rows
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignDetail {
    pub summary: CampaignRow,
    pub phones: Vec<PhoneNumber>,
    pub top_tokens: Vec<String>,
    pub flag: FlagResult,
    pub metrics: CampaignMetrics,
    pub identities: IdentityReport,
    pub identity_suspension: IdentitySuspension,
    pub savings: Option<SavingsEstimate>,
    pub savings_unavailable: Option<String>,
    pub label_history: Vec<ReviewLabel>,
    /// Earliest posts, bounded by the configured sample size.
    pub posts_sample: Vec<Post>,
}

async fn list_campaigns(
    State(state): State<SharedState>,
    filter: Result<Query<CampaignFilter>, QueryRejection>,
) -> Response {
    let s = state.read().await;
    let run_id = s.artifacts.run_id();
    match filter {
        Ok(Query(f)) => ok(run_id, &filter_campaigns(&s.artifacts, &f)),
        Err(e) => err(
            run_id,
            ApiError::new(StatusCode::BAD_REQUEST, "bad_query", e.body_text()),
        ),
    }
}

async fn campaign_detail(State(state): State<SharedState>, Path(id): Path<String>) -> Response {
    let s = state.read().await;
    let run_id = s.artifacts.run_id();
    let Some(r) = s.artifacts.campaign(&id) else {
        return err(run_id, ApiError::not_found("campaign", &id));
    };
    let sample = s.artifacts.run.config.detail_sample_size;
    let detail = CampaignDetail {
        summary: CampaignRow::from_record(r),
        phones: r.campaign.phones.clone(),
        top_tokens: r.top_tokens.clone(),
        flag: r.flag.clone(),
        metrics: r.metrics.clone(),
        identities: r.identities.clone(),
        identity_suspension: r.identity_suspension.clone(),
        savings: r.savings.clone(),
        savings_unavailable: r.savings_unavailable.clone(),
        label_history: s.labels.history(&id).to_vec(),
        posts_sample: campaign_posts(&r.campaign, &s.corpus)
            .into_iter()
            .take(sample)
            .cloned()
            .collect(),
    };
    ok(run_id, &detail)
}

async fn campaign_metrics(State(state): State<SharedState>, Path(id): Path<String>) -> Response {
    let s = state.read().await;
    let run_id = s.artifacts.run_id();
    match s.artifacts.campaign(&id) {
        Some(r) => ok(run_id, &r.metrics),
        None => err(run_id, ApiError::not_found("campaign", &id)),
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct LabelRequest {
    pub verdict: Verdict,
    #[serde(default)]
    pub topic: String,
    #[serde(default)]
    pub reviewer: String,
    /// Run the reviewer was looking at; a mismatch is a conflict.
    pub run_id: Option<String>,
    pub reviewed_at: Option<i64>,
}

fn now_seconds() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

async fn label_campaign(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> Response {
    let mut guard = state.write().await;
    let s = &mut *guard;
    let run_id = s.artifacts.run_id().to_string();
    let req = match body {
        Ok(Json(r)) => r,
        Err(e) => {
            return err(
                &run_id,
                ApiError::new(StatusCode::BAD_REQUEST, "bad_body", e.body_text()),
            )
        }
    };
    if let Some(seen) = &req.run_id {
        if *seen != run_id {
            return err(
                &run_id,
                ApiError::new(
                    StatusCode::CONFLICT,
                    "stale_run",
                    format!("label targets run {seen}, serving {run_id}"),
                ),
            );
        }
    }
    let label = ReviewLabel {
        campaign_id: id.clone(),
        verdict: req.verdict,
        topic: req.topic,
        reviewer: req.reviewer,
        reviewed_at: req.reviewed_at.unwrap_or_else(now_seconds),
    };
    let log = s.data_dir.as_ref().map(|d| d.join(LABELS_FILE));
    let result = apply_review_label(
        &mut s.labels,
        s.artifacts.campaigns.iter_mut().map(|r| &mut r.campaign),
        label,
        log.as_deref(),
    );
    match result {
        Ok(_) => {
            let row = s.artifacts.campaign(&id).map(CampaignRow::from_record);
            ok(
                &run_id,
                &json!({ "campaign": row, "label_history": s.labels.history(&id) }),
            )
        }
        Err(LabelError::UnknownCampaign(_)) => err(&run_id, ApiError::not_found("campaign", &id)),
        Err(LabelError::MissingTopic) => err(
            &run_id,
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "missing_topic",
                LabelError::MissingTopic.to_string(),
            ),
        ),
        Err(e) => err(
            &run_id,
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "label_store", e.to_string()),
        ),
    }
}

async fn run_info(State(state): State<SharedState>, Path(id): Path<String>) -> Response {
    let s = state.read().await;
    let run_id = s.artifacts.run_id();
    if id == run_id {
        return ok(run_id, &s.artifacts.run);
    }
    let on_disk = s
        .data_dir
        .as_ref()
        .filter(|_| !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric()))
        .and_then(|d| std::fs::read_to_string(run_dir(d, &id).join("run.json")).ok())
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok());
    match on_disk {
        Some(run) => ok(run_id, &run),
        None => err(run_id, ApiError::not_found("run", &id)),
    }
}

async fn report(State(state): State<SharedState>) -> Response {
    let s = state.read().await;
    ok(s.artifacts.run_id(), &build_report(&s.artifacts, &s.corpus))
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/campaigns", get(list_campaigns))
        .route("/campaigns/{id}", get(campaign_detail))
        .route("/campaigns/{id}/metrics", get(campaign_metrics))
        .route("/campaigns/{id}/label", post(label_campaign))
        .route("/runs/{id}", get(run_info))
        .route("/report", get(report))
        .with_state(state)
}

/// Bind `addr` and serve until ctrl-c.
pub async fn serve(addr: SocketAddr, state: ServiceState) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse(addr),
        _ => ServeError::Io(e),
    })?;
    tracing::info!(addr = %listener.local_addr()?, run_id = state.artifacts.run_id(), "serving");
    let app = router(Arc::new(RwLock::new(state)));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
