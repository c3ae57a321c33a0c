#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use eyeqa_core::corpus::{chunk_corpus, Document, DocumentKind, SplitterConfig};
use eyeqa_core::evalkit::AnswerRecord;
use eyeqa_engine::gateway::{BackendConfig, Gateway, MockScript};
use eyeqa_engine::{Engine, RetrievalSource, Retriever};
use eyeqa_server::{router, AppState, ServerSettings};
use serde_json::Value;
use tower::ServiceExt;

/// Three one-chunk documents.
pub async fn three_chunk_retriever() -> Retriever {
    let doc = |id: &str, text: &str| Document {
        id: id.into(),
        text: text.into(),
        kind: DocumentKind::Freeform,
    };
    let docs = vec![
        doc(
            "glaucoma",
            "Glaucoma damages the optic nerve and is treated with pressure-lowering drops.",
        ),
        doc(
            "cataract",
            "Cataract surgery replaces the clouded lens with an artificial one.",
        ),
        doc(
            "myopia",
            "Myopia progression in children can be slowed with low-dose atropine.",
        ),
    ];
    let chunks = chunk_corpus(&docs, &SplitterConfig::default());
    assert_eq!(chunks.len(), 3);
    let embedder = Gateway::new(BackendConfig::default()).unwrap();
    Retriever::build(&chunks, &embedder).await.unwrap()
}

pub async fn engine(script: MockScript) -> Arc<Engine> {
    let mut retrievers = BTreeMap::new();
    retrievers.insert(RetrievalSource::Book, Arc::new(three_chunk_retriever().await));
    Arc::new(Engine::standard_mock(script, retrievers).unwrap())
}

pub fn settings(root: &Path) -> ServerSettings {
    ServerSettings {
        eval_root: root.join("runs"),
        ui_dir: root.join("ui"),
        ..ServerSettings::default()
    }
}

pub struct TestApp {
    pub app: Router,
    pub engine: Arc<Engine>,
    pub dir: tempfile::TempDir,
}

pub async fn app_with(script: MockScript, tweak: impl FnOnce(&mut ServerSettings)) -> TestApp {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(script).await;
    let mut s = settings(dir.path());
    tweak(&mut s);
    let app = router(Arc::new(AppState::new(engine.clone(), s)));
    TestApp { app, engine, dir }
}

pub async fn app() -> TestApp {
    app_with(MockScript::echo(), |_| {}).await
}

pub struct Reply {
    pub status: StatusCode,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text))
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>, token: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    Reply {
        status,
        text: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, None, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, Method::POST, uri, Some(body), None).await
}

pub fn answers(variant: &str, n: usize) -> Vec<AnswerRecord> {
    (0..n)
        .map(|i| AnswerRecord {
            question_id: format!("q{i}"),
            variant: variant.into(),
            question: format!("What is question {i} about?"),
            answer: format!("Answer {i}, written by a model."),
            citations: vec![],
        })
        .collect()
}
