//! HTTP endpoints.
//!
//! Chat sessions live in memory, one async lock each so a session's turns
//! run one at a time while different sessions proceed in parallel.
//! Evaluation runs live on disk under `eval_root` and are opened on first use.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use anyhow::Context;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use eyeqa_core::evalkit::{NextItem, Persona};
use eyeqa_core::report::{build_report, ReportInput, ReportOptions};
use eyeqa_engine::{Answer, Engine, EngineOptions, RetrievalSource, Retrieved, Session};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::config::{AppConfig, ServerSettings};
use crate::error::ApiError;
use crate::eval::{CreateRunRequest, PairwiseSubmission, RatingSubmission, Runs};

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    engine: Arc<Engine>,
    sessions: RwLock<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    runs: Runs,
    settings: ServerSettings,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, settings: ServerSettings) -> Self {
        Self {
            engine,
            sessions: RwLock::new(HashMap::new()),
            runs: Runs::new(settings.eval_root.clone()),
            settings,
        }
    }

    pub fn from_config(cfg: &AppConfig) -> anyhow::Result<Self> {
        if let Some(dir) = &cfg.server.transcript_dir {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let opts = EngineOptions {
            transcript_dir: cfg.server.transcript_dir.clone(),
            require_indexes: false,
        };
        let engine = Engine::from_registry(cfg.registry.clone(), &opts)?;
        Ok(Self::new(Arc::new(engine), cfg.server.clone()))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn session(&self, id: &str) -> ApiResult<Arc<tokio::sync::Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session_not_found", format!("no chat session `{id}`")))
    }

    fn bearer(headers: &HeaderMap) -> Option<&str> {
        headers
            .get(header::AUTHORIZATION)?
            .to_str()
            .ok()?
            .strip_prefix("Bearer ")
            .map(str::trim)
    }

    /// With a token list configured, the caller must hold the token of the
    /// rater they act as.
    fn authorize_rater(&self, headers: &HeaderMap, rater: &str) -> ApiResult<()> {
        if self.settings.rater_tokens.is_empty() {
            return Ok(());
        }
        match Self::bearer(headers).and_then(|t| self.settings.rater_tokens.get(t)) {
            Some(r) if r == rater => Ok(()),
            Some(_) => Err(ApiError::unauthorized(format!(
                "token does not belong to rater `{rater}`"
            ))),
            None => Err(ApiError::unauthorized("missing or unknown rater token")),
        }
    }

    fn authorize_admin(&self, headers: &HeaderMap) -> ApiResult<()> {
        match &self.settings.admin_token {
            Some(t) if Self::bearer(headers) != Some(t.as_str()) => Err(ApiError::unauthorized("admin token required")),
            _ => Ok(()),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let ui = ServeDir::new(&state.settings.ui_dir).append_index_html_on_directories(true);
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/variants", get(list_variants))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/debug/search", get(debug_search))
        .route("/eval/sessions", post(create_eval_session))
        .route("/eval/sessions/{id}/next", get(next_item))
        .route("/eval/sessions/{id}/report", get(report))
        .route("/eval/ratings", post(post_rating))
        .route("/eval/pairwise", post(post_pairwise))
        .nest_service("/ui", ui)
        .fallback(|| async { ApiError::not_found("no_route", "no such endpoint") })
        .with_state(state)
}

/// Serves until ctrl-c, then stops accepting and drains in-flight requests.
pub async fn serve(cfg: AppConfig) -> anyhow::Result<()> {
    let state = Arc::new(AppState::from_config(&cfg)?);
    let listener = tokio::net::TcpListener::bind(&cfg.server.bind)
        .await
        .with_context(|| format!("cannot bind {}", cfg.server.bind))?;
    tracing::info!(addr = %listener.local_addr()?, variants = ?state.engine.registry().variant_names(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await?;
    Ok(())
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    b.map(|Json(t)| t).map_err(ApiError::from)
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(t)| t).map_err(ApiError::from)
}

async fn list_variants(State(st): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(
        st.engine
            .registry()
            .variant_names()
            .into_iter()
            .map(String::from)
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub variant: String,
    #[serde(default = "default_persona")]
    pub persona: Persona,
}

fn default_persona() -> Persona {
    Persona::Patient
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub variant: String,
    pub persona: Persona,
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    req: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let req = body(req)?;
    let session = st.engine.new_session(&req.variant, req.persona)?;
    let out = SessionCreated {
        session_id: session.id.clone(),
        variant: session.variant.clone(),
        persona: session.persona,
    };
    st.sessions
        .write()
        .expect("session table poisoned")
        .insert(session.id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(out)))
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Session>> {
    let s = st.session(&id)?;
    let guard = s.lock().await;
    Ok(Json(guard.clone()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostMessage {
    pub question: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageReply {
    pub session_id: String,
    pub turn: usize,
    #[serde(flatten)]
    pub answer: Answer,
}

async fn post_message(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    req: Result<Json<PostMessage>, JsonRejection>,
) -> ApiResult<Json<MessageReply>> {
    let s = st.session(&id)?;
    let req = body(req)?;
    let mut session = s.lock().await;
    let answer = st.engine.answer(&mut session, &req.question).await?;
    Ok(Json(MessageReply {
        session_id: session.id.clone(),
        turn: session.history.len(),
        answer,
    }))
}

#[derive(Debug, Deserialize)]
pub struct SearchParams {
    pub q: String,
    pub k: Option<usize>,
    pub source: Option<RetrievalSource>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SearchReply {
    pub source: RetrievalSource,
    pub query: String,
    pub k: usize,
    pub hits: Vec<Retrieved>,
}

async fn debug_search(
    State(st): State<Arc<AppState>>,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> ApiResult<Json<SearchReply>> {
    let p = query(params)?;
    let source = match p.source {
        Some(RetrievalSource::None) => {
            return Err(ApiError::invalid("invalid_source", "source must be book or database"));
        }
        Some(s) => s,
        None => st
            .engine
            .retrievers()
            .map(|(s, _)| s)
            .next()
            .ok_or_else(|| ApiError::not_found("index_unavailable", "no index is loaded"))?,
    };
    if st.engine.retriever(source).is_none() {
        return Err(ApiError::not_found(
            "index_unavailable",
            format!("no {source} index is loaded"),
        ));
    }
    let k = p.k.unwrap_or_else(|| st.engine.k());
    let hits = st.engine.search(source, &p.q, k).await?;
    Ok(Json(SearchReply {
        source,
        query: p.q,
        k,
        hits,
    }))
}

async fn create_eval_session(
    State(st): State<Arc<AppState>>,
    headers: HeaderMap,
    req: Result<Json<CreateRunRequest>, JsonRejection>,
) -> ApiResult<Response> {
    st.authorize_admin(&headers)?;
    let req = body(req)?;
    let (summary, created) = st.runs.create(&req)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(summary)).into_response())
}

#[derive(Debug, Deserialize)]
pub struct NextParams {
    pub rater: String,
}

async fn next_item(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    params: Result<Query<NextParams>, QueryRejection>,
) -> ApiResult<Json<NextItem>> {
    let p = query(params)?;
    st.authorize_rater(&headers, &p.rater)?;
    let run = st.runs.get(&id)?;
    let item = run.lock().expect("run poisoned").next_item(&p.rater, Utc::now())?;
    Ok(Json(item))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Recorded {
    pub recorded: bool,
}

fn session_of(session: &Option<String>) -> ApiResult<&str> {
    session
        .as_deref()
        .ok_or_else(|| ApiError::invalid("missing_session", "`session` names the evaluation run"))
}

async fn post_rating(
    State(st): State<Arc<AppState>>,
    headers: HeaderMap,
    req: Result<Json<RatingSubmission>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Recorded>)> {
    let mut sub = body(req)?;
    let run = st.runs.get(session_of(&sub.session)?)?;
    st.authorize_rater(&headers, &sub.rater_id)?;
    // the server clock decides washout, never the client
    sub.timestamp = None;
    let rec = sub.into_record(Utc::now());
    run.lock().expect("run poisoned").record_rating(rec)?;
    Ok((StatusCode::CREATED, Json(Recorded { recorded: true })))
}

async fn post_pairwise(
    State(st): State<Arc<AppState>>,
    headers: HeaderMap,
    req: Result<Json<PairwiseSubmission>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Recorded>)> {
    let mut sub = body(req)?;
    let run = st.runs.get(session_of(&sub.session)?)?;
    st.authorize_rater(&headers, &sub.rater_id)?;
    sub.timestamp = None;
    let rec = sub.into_record(Utc::now());
    run.lock().expect("run poisoned").record_pairwise(rec)?;
    Ok((StatusCode::CREATED, Json(Recorded { recorded: true })))
}

#[derive(Debug, Default, Deserialize)]
pub struct ReportParams {
    pub format: Option<String>,
    /// Baseline variant for round 1 and round 2.
    pub baseline1: Option<String>,
    pub baseline2: Option<String>,
}

async fn report(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    params: Result<Query<ReportParams>, QueryRejection>,
) -> ApiResult<Response> {
    st.authorize_admin(&headers)?;
    let p = query(params)?;
    let run = st.runs.get(&id)?;
    let input = ReportInput::from_run(&run.lock().expect("run poisoned"));
    let mut opts = ReportOptions::default();
    for (round, b) in [(1u8, p.baseline1), (2, p.baseline2)] {
        if let Some(b) = b {
            opts.baselines.insert(round, b);
        }
    }
    let report = build_report(&input, &opts)?;
    match p.format.as_deref() {
        None | Some("text") => Ok((
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            report.render_text(),
        )
            .into_response()),
        Some("json") => Ok(Json(report).into_response()),
        Some(other) => Err(ApiError::invalid("invalid_format", format!("unknown format `{other}`"))),
    }
}
