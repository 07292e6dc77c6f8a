//! HTTP front end over [`AnnotationService`].

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use idiombench::transcripts::Transcript;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tokio::net::TcpListener;

use crate::error::ServiceError;
use crate::service::{AnnotationService, VoteSubmission};

pub type Shared = Arc<Mutex<AnnotationService>>;

type Reply = Result<Response, ServiceError>;

fn lock(state: &Shared) -> MutexGuard<'_, AnnotationService> {
    state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("malformed body: {e}")))
}

#[derive(Deserialize, Default)]
struct Register {
    annotator_id: Option<String>,
}

async fn register(State(state): State<Shared>, body: Bytes) -> Reply {
    let req: Register = if body.iter().all(u8::is_ascii_whitespace) {
        Register::default()
    } else {
        parse(&body)?
    };
    let id = lock(&state).register(req.annotator_id)?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "annotator_id": id }))).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

async fn next(State(state): State<Shared>, Path(id): Path<String>, Query(q): Query<NextQuery>) -> Reply {
    Ok(Json(lock(&state).next(&id, &q.annotator)?).into_response())
}

async fn vote(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Reply {
    let sub: VoteSubmission = parse(&body)?;
    Ok(Json(lock(&state).record_vote(&id, sub)?).into_response())
}

async fn progress(State(state): State<Shared>, Path(id): Path<String>) -> Reply {
    Ok(Json(lock(&state).progress(&id)?).into_response())
}

async fn create(State(state): State<Shared>, body: Bytes) -> Reply {
    let t: Transcript = parse(&body)?;
    let summary = lock(&state).create_transcript(&t)?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn close(State(state): State<Shared>, Path(id): Path<String>) -> Reply {
    Ok(Json(lock(&state).close(&id)?).into_response())
}

#[derive(Deserialize)]
struct ReportQuery {
    theta: Option<f64>,
    format: Option<String>,
}

async fn report(State(state): State<Shared>, Path(id): Path<String>, Query(q): Query<ReportQuery>) -> Reply {
    let theta = q.theta.unwrap_or(idiombench::adjudicate::DEFAULT_THETA);
    let r = lock(&state).report(&id, theta)?;
    Ok(match q.format.as_deref() {
        Some("text") => ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], r.render_table()).into_response(),
        None | Some("json") => Json(r).into_response(),
        Some(other) => return Err(ServiceError::BadRequest(format!("unknown format {other:?}"))),
    })
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/annotators", post(register))
        .route("/transcripts", post(create))
        .route("/transcripts/{id}/next", get(next))
        .route("/transcripts/{id}/votes", post(vote))
        .route("/transcripts/{id}/progress", get(progress))
        .route("/transcripts/{id}/close", post(close))
        .route("/transcripts/{id}/report", get(report))
        .with_state(state)
}

/// Serves `service` on `listener` until the returned future is dropped or
/// the process receives Ctrl-C.
pub async fn serve(listener: TcpListener, service: AnnotationService) -> std::io::Result<()> {
    let app = router(Arc::new(Mutex::new(service)));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}
