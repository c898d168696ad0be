//! HTTP request API and server-sent event push channel.
//!
//! | method | path                              | body / query                          |
//! |--------|-----------------------------------|---------------------------------------|
//! | GET    | /health                           |                                       |
//! | GET    | /groups                           |                                       |
//! | POST   | /groups                           | `{group}`                             |
//! | GET    | /groups/{g}                       | full view                             |
//! | GET    | /groups/{g}/snapshot              |                                       |
//! | GET    | /groups/{g}/candidates            | `?member=`                            |
//! | GET    | /groups/{g}/log                   | raw event log                         |
//! | GET    | /groups/{g}/events                | SSE; `?since=` or `Last-Event-ID`     |
//! | POST   | /groups/{g}/join                  | `{member, nickname}`                  |
//! | POST   | /groups/{g}/chat                  | `{sender, text, restaurant?}`         |
//! | POST   | /groups/{g}/rating                | `{member, restaurant, value}`         |
//! | POST   | /groups/{g}/negative              | `{member, restaurant, value}`         |
//! | POST   | /groups/{g}/save                  | `{saver, source, restaurant, value}`  |
//! | POST   | /groups/{g}/admin/phase           | `{phase}`                             |
//! | POST   | /groups/{g}/admin/stop            |                                       |

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use groupdine_core::domain::{validate_rating, EventKind, GroupId, MemberId, Phase, PhaseReason, RestaurantId};
use groupdine_core::eventlog::encode_line;
use groupdine_core::session::{MemberList, SessionError};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;
use tokio::task::JoinHandle;

use crate::app::{valid_group_id, App};
use crate::host::{HostError, SessionHost};
use crate::push::{Digest, Push, WireEvent};

#[derive(Debug)]
pub enum ApiError {
    UnknownGroup(String),
    BadRequest(String),
    Host(HostError),
    Internal(String),
}

impl From<HostError> for ApiError {
    fn from(e: HostError) -> Self {
        ApiError::Host(e)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::Host(e.into())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

impl ApiError {
    fn status_and_kind(&self) -> (StatusCode, &'static str) {
        match self {
            ApiError::UnknownGroup(_) => (StatusCode::NOT_FOUND, "unknown_group"),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::Host(HostError::Session(e)) => {
                let status = match e.kind() {
                    "unknown_member" => StatusCode::NOT_FOUND,
                    "validation" => StatusCode::UNPROCESSABLE_ENTITY,
                    _ => StatusCode::CONFLICT,
                };
                (status, e.kind())
            }
            ApiError::Host(_) | ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApiError::UnknownGroup(g) => write!(f, "no session `{g}`"),
            ApiError::BadRequest(m) | ApiError::Internal(m) => f.write_str(m),
            ApiError::Host(e) => write!(f, "{e}"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = self.status_and_kind();
        (status, Json(json!({ "error": kind, "message": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateBody {
    pub group: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinBody {
    pub member: String,
    pub nickname: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatBody {
    pub sender: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restaurant: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingBody {
    pub member: String,
    pub restaurant: String,
    pub value: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaveBody {
    pub saver: String,
    pub source: String,
    pub restaurant: String,
    pub value: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseBody {
    pub phase: Phase,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct CandidatesQuery {
    pub member: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatesResponse {
    pub candidates: Vec<RestaurantId>,
    pub lists: Vec<MemberList>,
    /// Present when `?member=` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_options: Option<Vec<RestaurantId>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct EventsQuery {
    pub since: Option<u64>,
}

type Body<T> = Result<Json<T>, JsonRejection>;

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/groups", get(list_groups).post(create))
        .route("/groups/{group}", get(view))
        .route("/groups/{group}/snapshot", get(snapshot))
        .route("/groups/{group}/candidates", get(candidates))
        .route("/groups/{group}/log", get(log))
        .route("/groups/{group}/events", get(events))
        .route("/groups/{group}/join", post(join))
        .route("/groups/{group}/chat", post(chat))
        .route("/groups/{group}/rating", post(rating_route))
        .route("/groups/{group}/negative", post(negative))
        .route("/groups/{group}/save", post(save))
        .route("/groups/{group}/admin/phase", post(admin_phase))
        .route("/groups/{group}/admin/stop", post(admin_stop))
        .with_state(app)
}

/// Commits due ticks and deadlines in every session once per `period`.
pub fn spawn_ticker(app: Arc<App>, period: Duration) -> JoinHandle<()> {
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(period);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            interval.tick().await;
            let app = app.clone();
            match tokio::task::spawn_blocking(move || app.advance_all()).await {
                Ok(Err(e)) => eprintln!("tick failed: {e}"),
                Err(e) => eprintln!("tick task failed: {e}"),
                Ok(Ok(_)) => {}
            }
        }
    })
}

fn host(app: &App, group: &str) -> Result<Arc<SessionHost>, ApiError> {
    app.host(&GroupId::from(group))
        .ok_or_else(|| ApiError::UnknownGroup(group.to_owned()))
}

fn rating_value(value: i64) -> Result<i8, ApiError> {
    Ok(validate_rating(value).map_err(SessionError::from)?)
}

async fn submit(app: Arc<App>, group: String, kind: EventKind) -> Result<Json<WireEvent>, ApiError> {
    let host = host(&app, &group)?;
    let now = app.now_ms();
    let receipt = tokio::task::spawn_blocking(move || host.submit(kind, now))
        .await
        .map_err(|e| ApiError::Internal(format!("write task failed: {e}")))??;
    Ok(Json(receipt.event))
}

async fn list_groups(State(app): State<Arc<App>>) -> Json<Vec<GroupId>> {
    Json(app.groups())
}

async fn create(State(app): State<Arc<App>>, body: Body<CreateBody>) -> Result<Response, ApiError> {
    let Json(body) = body?;
    if !valid_group_id(&body.group) {
        return Err(ApiError::BadRequest(format!(
            "group id `{}` must be 1-64 characters of letters, digits, '-' or '_'",
            body.group
        )));
    }
    let app2 = app.clone();
    let host = tokio::task::spawn_blocking(move || app2.create(body.group.into()))
        .await
        .map_err(|e| ApiError::Internal(format!("create task failed: {e}")))??;
    Ok((StatusCode::CREATED, Json(&*host.view())).into_response())
}

async fn view(State(app): State<Arc<App>>, Path(group): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(&*host(&app, &group)?.view()).into_response())
}

async fn snapshot(State(app): State<Arc<App>>, Path(group): Path<String>) -> Result<Response, ApiError> {
    let v = host(&app, &group)?.view();
    Ok(Json(&v.snapshot).into_response())
}

async fn candidates(
    State(app): State<Arc<App>>,
    Path(group): Path<String>,
    Query(q): Query<CandidatesQuery>,
) -> Result<Json<CandidatesResponse>, ApiError> {
    let v = host(&app, &group)?.view();
    let negative_options = match q.member {
        Some(m) => Some(
            v.negative_options
                .get(&MemberId::from(m.as_str()))
                .cloned()
                .ok_or(SessionError::UnknownMember(m.into()))?,
        ),
        None => None,
    };
    Ok(Json(CandidatesResponse {
        candidates: v.candidates.clone(),
        lists: v.lists.clone(),
        negative_options,
    }))
}

async fn log(State(app): State<Arc<App>>, Path(group): Path<String>) -> Result<Response, ApiError> {
    let text: String = host(&app, &group)?
        .events()
        .iter()
        .map(|e| encode_line(e) + "\n")
        .collect();
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

fn sse_event(p: &Push) -> SseEvent {
    let e = SseEvent::default().event(p.name()).data(p.data());
    match p.id() {
        Some(id) => e.id(id.to_string()),
        None => e,
    }
}

/// Replays missed records (from `?since=` or one past `Last-Event-ID`), or
/// starts with a digest of the current snapshot, then streams live pushes.
/// A subscriber that falls behind gets a `resync` event and is disconnected.
async fn events(
    State(app): State<Arc<App>>,
    Path(group): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ApiError> {
    let host = host(&app, &group)?;
    let last_id = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let since = q.since.or(last_id.map(|id| id + 1));
    let (initial, rx) = match since {
        Some(from) => {
            let (tail, rx) = host.resume(from);
            (
                tail.iter().map(|e| Push::Event(WireEvent::from(e))).collect::<Vec<_>>(),
                rx,
            )
        }
        None => {
            let (_, rx) = host.resume(u64::MAX);
            (vec![Push::Digest(Digest::from(&host.view().snapshot))], rx)
        }
    };
    let live = stream::unfold(Some(rx), |state| async move {
        let mut rx = state?;
        match rx.recv().await {
            Ok(p) => Some((sse_event(&p), Some(rx))),
            Err(RecvError::Lagged(n)) => {
                let e = SseEvent::default()
                    .event("resync")
                    .data(json!({ "skipped": n }).to_string());
                Some((e, None))
            }
            Err(RecvError::Closed) => None,
        }
    });
    let all = stream::iter(initial.iter().map(sse_event).collect::<Vec<_>>())
        .chain(live)
        .map(Ok);
    Ok(Sse::new(all).keep_alive(KeepAlive::default()))
}

async fn join(
    State(app): State<Arc<App>>,
    Path(group): Path<String>,
    body: Body<JoinBody>,
) -> Result<Json<WireEvent>, ApiError> {
    let Json(b) = body?;
    submit(
        app,
        group,
        EventKind::Join {
            member: b.member.into(),
            nickname: b.nickname,
        },
    )
    .await
}

async fn chat(
    State(app): State<Arc<App>>,
    Path(group): Path<String>,
    body: Body<ChatBody>,
) -> Result<Json<WireEvent>, ApiError> {
    let Json(b) = body?;
    submit(
        app,
        group,
        EventKind::Chat {
            sender: b.sender.into(),
            text: b.text,
            restaurant: b.restaurant.map(Into::into),
        },
    )
    .await
}

async fn rating_handler(
    app: Arc<App>,
    group: String,
    body: Body<RatingBody>,
    negative: bool,
) -> Result<Json<WireEvent>, ApiError> {
    let Json(b) = body?;
    let (member, restaurant, value) = (b.member.into(), b.restaurant.into(), rating_value(b.value)?);
    let kind = if negative {
        EventKind::Negative {
            member,
            restaurant,
            value,
        }
    } else {
        EventKind::Rate {
            member,
            restaurant,
            value,
        }
    };
    submit(app, group, kind).await
}

async fn rating_route(
    State(app): State<Arc<App>>,
    Path(group): Path<String>,
    body: Body<RatingBody>,
) -> Result<Json<WireEvent>, ApiError> {
    rating_handler(app, group, body, false).await
}

async fn negative(
    State(app): State<Arc<App>>,
    Path(group): Path<String>,
    body: Body<RatingBody>,
) -> Result<Json<WireEvent>, ApiError> {
    rating_handler(app, group, body, true).await
}

async fn save(
    State(app): State<Arc<App>>,
    Path(group): Path<String>,
    body: Body<SaveBody>,
) -> Result<Json<WireEvent>, ApiError> {
    let Json(b) = body?;
    submit(
        app,
        group,
        EventKind::Save {
            saver: b.saver.into(),
            source: b.source.into(),
            restaurant: b.restaurant.into(),
            value: rating_value(b.value)?,
        },
    )
    .await
}

async fn admin_phase(
    State(app): State<Arc<App>>,
    Path(group): Path<String>,
    body: Body<PhaseBody>,
) -> Result<Json<WireEvent>, ApiError> {
    let Json(b) = body?;
    submit(
        app,
        group,
        EventKind::Phase {
            phase: b.phase,
            reason: PhaseReason::Admin,
        },
    )
    .await
}

/// Ends the discussion now.
async fn admin_stop(State(app): State<Arc<App>>, Path(group): Path<String>) -> Result<Json<WireEvent>, ApiError> {
    submit(
        app,
        group,
        EventKind::Phase {
            phase: Phase::Results,
            reason: PhaseReason::Admin,
        },
    )
    .await
}
