//! HTTP service that lets an operator guide a reaching session: propose
//! pushes or the final reach, and watch planning and execution as a stream
//! of server-sent events.

mod session;

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast;

use grtc_core::geometry::Vec2;
use grtc_core::grtc::HighLevelAction;
use grtc_core::world::{is_valid, Scene};

pub use session::{Rejection, ServiceConfig, ServiceEvent, Session, StateView};

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServiceConfig>,
    sessions: Arc<Mutex<HashMap<String, Arc<Session>>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState {
            config: Arc::new(config),
            sessions: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    /// Validate `scene_json` and start a session on it.
    pub fn create_session(&self, scene_json: &str) -> Result<Arc<Session>, String> {
        let scene = Scene::from_json(scene_json).map_err(|e| e.to_string())?;
        if !is_valid(&scene, &scene.initial).map_err(|e| e.to_string())? {
            return Err("initial state is not valid".into());
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let s = Session::start(id.clone(), scene, (*self.config).clone())?;
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, s.clone());
        Ok(s)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/action", post(submit_action))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/pick", post(pick))
        .with_state(state)
}

fn error(status: StatusCode, reason: impl Into<String>) -> Response {
    (status, Json(json!({ "error": reason.into() }))).into_response()
}

fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "unknown session")
}

async fn create_session(State(app): State<AppState>, body: String) -> Response {
    match app.create_session(&body) {
        Ok(s) => (StatusCode::CREATED, Json(json!({ "session_id": s.id }))).into_response(),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
    }
}

async fn get_state(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    match app.session(&id) {
        Some(s) => Json(s.state_view()).into_response(),
        None => not_found(),
    }
}

async fn get_log(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    match app.session(&id) {
        Some(s) => Json(s.log()).into_response(),
        None => not_found(),
    }
}

async fn submit_action(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<HighLevelAction>, JsonRejection>,
) -> Response {
    let Some(s) = app.session(&id) else {
        return not_found();
    };
    let action = match body {
        Ok(Json(a)) => a,
        Err(e) => return rejected(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()),
    };
    match s.submit_action(action) {
        Ok(()) => (StatusCode::ACCEPTED, Json(json!({ "accepted": true }))).into_response(),
        Err(Rejection::NotFound) => not_found(),
        Err(Rejection::Conflict(r)) => rejected(StatusCode::CONFLICT, r),
        Err(Rejection::Invalid(r)) => rejected(StatusCode::UNPROCESSABLE_ENTITY, r),
    }
}

fn rejected(status: StatusCode, reason: String) -> Response {
    (status, Json(json!({ "accepted": false, "reason": reason }))).into_response()
}

#[derive(Deserialize)]
struct PickRequest {
    x: f64,
    y: f64,
}

/// Resolve a click in workspace coordinates to the object under it.
async fn pick(State(app): State<AppState>, Path(id): Path<String>, Json(req): Json<PickRequest>) -> Response {
    let Some(s) = app.session(&id) else {
        return not_found();
    };
    match s.pick(Vec2::new(req.x, req.y)) {
        Some((object_id, goal)) => Json(json!({ "object_id": object_id, "goal": goal })).into_response(),
        None => error(StatusCode::UNPROCESSABLE_ENTITY, "no object at this point"),
    }
}

fn to_sse(ev: &ServiceEvent) -> Result<Event, Infallible> {
    Ok(Event::default()
        .event(ev.name())
        .data(serde_json::to_string(ev).expect("events serialize")))
}

/// Live events after `rx` was subscribed, ending with the terminal event.
fn live(rx: broadcast::Receiver<ServiceEvent>) -> impl Stream<Item = ServiceEvent> {
    stream::unfold((rx, false), |(mut rx, done)| async move {
        if done {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(ev) => {
                    let end = matches!(ev, ServiceEvent::Terminal { .. });
                    return Some((ev, (rx, end)));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    let ev = ServiceEvent::Error {
                        message: format!("{n} events dropped; resubscribe for a fresh snapshot"),
                    };
                    return Some((ev, (rx, true)));
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    })
}

async fn events(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(s) = app.session(&id) else {
        let ev = ServiceEvent::Error {
            message: "unknown session".into(),
        };
        let body = stream::iter([to_sse(&ev)]);
        return (StatusCode::NOT_FOUND, Sse::new(body)).into_response();
    };
    let (snapshot, terminal, rx) = s.subscribe();
    let head = stream::iter([snapshot]);
    let events = if terminal {
        head.boxed()
    } else {
        head.chain(live(rx)).boxed()
    };
    Sse::new(events.map(|ev| to_sse(&ev)))
        .keep_alive(KeepAlive::default())
        .into_response()
}
