use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Map, Value};
use tokio::net::TcpListener;

use super::{ApiError, SessionService, SituationInput, Violation};
use crate::error::{Error, Result};
use crate::hmm::PlayCall;

type Shared = State<Arc<SessionService>>;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type Reply = std::result::Result<Response, ApiError>;

/// The `/v1` API over `service`.
pub fn router(service: Arc<SessionService>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/{id}", get(summary))
        .route("/v1/sessions/{id}/forecast", post(forecast))
        .route("/v1/sessions/{id}/plays", post(record))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(service)
}

/// Binds the listening socket, reporting a busy port explicitly.
pub async fn bind(addr: SocketAddr) -> Result<TcpListener> {
    TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => Error::Service(format!("port {} is already in use", addr.port())),
        _ => Error::Service(format!("cannot listen on {addr}: {e}")),
    })
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener, service: Arc<SessionService>) -> Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Service(e.to_string()))
}

fn object(body: &Bytes) -> std::result::Result<Map<String, Value>, ApiError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ApiError::invalid(vec![Violation::new("body", "must be a JSON object")])),
        Err(e) => Err(ApiError::invalid(vec![Violation::new(
            "body",
            format!("invalid JSON: {e}"),
        )])),
    }
}

async fn health(State(service): Shared) -> Json<super::Health> {
    Json(service.health())
}

async fn create(State(service): Shared, body: Bytes) -> Reply {
    let obj = object(&body)?;
    let mut violations = Vec::new();
    for key in obj.keys().filter(|k| !["team", "home"].contains(&k.as_str())) {
        violations.push(Violation::new(key, "unknown field"));
    }
    let team = match obj.get("team") {
        Some(Value::String(t)) if !t.trim().is_empty() => Some(t.trim().to_ascii_uppercase()),
        Some(_) => {
            violations.push(Violation::new("team", "must be a team code"));
            None
        }
        None => {
            violations.push(Violation::new("team", "required"));
            None
        }
    };
    let home = match obj.get("home") {
        None | Some(Value::Null) => Some(false),
        Some(Value::Bool(b)) => Some(*b),
        Some(_) => {
            violations.push(Violation::new("home", "must be true or false"));
            None
        }
    };
    let (Some(team), Some(home), true) = (team, home, violations.is_empty()) else {
        return Err(ApiError::invalid(violations));
    };
    let summary = service.create_session(&team, home)?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn summary(State(service): Shared, Path(id): Path<String>) -> Reply {
    Ok(Json(service.summary(&id)?).into_response())
}

async fn forecast(State(service): Shared, Path(id): Path<String>, body: Bytes) -> Reply {
    service.summary(&id)?;
    let situation = SituationInput::from_object(&object(&body)?, &[]).map_err(ApiError::invalid)?;
    Ok(Json(service.forecast(&id, &situation)?).into_response())
}

async fn record(State(service): Shared, Path(id): Path<String>, body: Bytes) -> Reply {
    service.summary(&id)?;
    let obj = object(&body)?;
    let situation = SituationInput::from_object(&obj, &["actual_call"]);
    let call = match obj.get("actual_call") {
        Some(Value::String(s)) if s == "run" => Ok(PlayCall::Run),
        Some(Value::String(s)) if s == "pass" => Ok(PlayCall::Pass),
        None => Err(Violation::new("actual_call", "required")),
        Some(_) => Err(Violation::new("actual_call", "must be \"run\" or \"pass\"")),
    };
    let (situation, call) = match (situation, call) {
        (Ok(s), Ok(c)) => (s, c),
        (s, c) => {
            let mut v = s.err().unwrap_or_default();
            v.extend(c.err());
            return Err(ApiError::invalid(v));
        }
    };
    let n_history = service.record_play(&id, &situation, call)?;
    Ok(Json(json!({ "n_history": n_history })).into_response())
}
