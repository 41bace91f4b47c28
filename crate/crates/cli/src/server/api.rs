use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use calib_core::analytics::{expected_score, write_response_export};
use calib_core::session::{live_histogram, EventLogWriter, QuestionTruth, RevealOutcome, SessionPhase, Timestamp};
use calib_core::{IntervalAnswer, RoundScore, Session, SessionConfig};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use super::push::PushEvent;
use super::{AppState, LiveSession, LiveState};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    pub(super) fn not_found(id: &str) -> Self {
        Self { status: StatusCode::NOT_FOUND, message: format!("no session {id:?}") }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, message: message.into() }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, message: message.into() }
    }
}

impl From<calib_core::Error> for ApiError {
    fn from(err: calib_core::Error) -> Self {
        use calib_core::Error as E;
        let status = match &err {
            E::Unauthorized(_) => StatusCode::UNAUTHORIZED,
            E::Phase(_) => StatusCode::CONFLICT,
            E::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self { status, message: err.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!("{}", self.message);
        }
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ")
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// A question as clients see it: no answer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionView {
    pub index: usize,
    pub id: String,
    pub text: String,
    pub unit: String,
}

impl QuestionView {
    fn current(session: &Session) -> Option<Self> {
        let index = match session.phase() {
            SessionPhase::QuestionOpen { index } | SessionPhase::QuestionClosed { index } => index,
            _ => return None,
        };
        session.current_question().map(|q| Self { index, id: q.id.clone(), text: q.text.clone(), unit: q.unit.clone() })
    }
}

/// Session state safe to show before reveal: neither the scoring subset
/// nor any answer is included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateView {
    pub session_id: String,
    pub iteration: u32,
    pub phase: SessionPhase,
    pub asked: usize,
    pub scored: usize,
    pub pause_seconds: u32,
    pub confidence_level: f64,
    pub participants: usize,
    pub question: Option<QuestionView>,
    /// Submissions so far for the current question.
    pub submissions: Option<usize>,
    /// Questions the requesting student has answered, when one is named.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answered: Option<Vec<String>>,
    pub results_available: bool,
}

impl StateView {
    pub(super) fn of(session: &Session, student: Option<&str>) -> Self {
        let config = session.config();
        let question = QuestionView::current(session);
        Self {
            session_id: session.id().to_string(),
            iteration: session.iteration(),
            phase: session.phase(),
            asked: config.asked,
            scored: config.scored,
            pause_seconds: config.pause_seconds,
            confidence_level: config.confidence_level,
            participants: session.participants().len(),
            submissions: question.as_ref().map(|q| session.submission_count(&q.id)),
            question,
            answered: student.map(|s| {
                session
                    .asked_questions()
                    .iter()
                    .filter(|q| session.submission(s, &q.id).is_some())
                    .map(|q| q.id.clone())
                    .collect()
            }),
            results_available: matches!(session.phase(), SessionPhase::Reveal | SessionPhase::Finished),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    iteration: Option<u32>,
    asked: Option<usize>,
    scored: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreatedView {
    pub session_id: String,
    pub instructor_token: String,
    pub iteration: u32,
    pub asked: usize,
    pub scored: usize,
    pub pause_seconds: u32,
}

pub(super) async fn create(State(app): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<CreatedView>), ApiError> {
    let body: CreateBody = if body.iter().all(u8::is_ascii_whitespace) { CreateBody::default() } else { parse_body(&body)? };
    let defaults = app.config();
    let asked = body.asked.unwrap_or(defaults.asked);
    let scored = body.scored.unwrap_or(if body.asked.is_some() { asked.min(defaults.scored) } else { defaults.scored });
    let seed = body.seed.or(defaults.seed).unwrap_or_else(rand::random);
    let mut config = SessionConfig::new(defaults.bank.clone(), asked, scored, seed);
    config.pause_seconds = defaults.pause_seconds;

    let id = format!("{:012x}", rand::random::<u64>() >> 16);
    let session = Session::create(id.clone(), config, body.iteration.unwrap_or(1))?;
    let path = defaults.data_dir.join(format!("{id}.events.jsonl"));
    let file = File::create(&path).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
    let log = EventLogWriter::create(BufWriter::new(file), &session, Timestamp::now())?;

    let view = CreatedView {
        session_id: id.clone(),
        instructor_token: session.instructor_token().to_string(),
        iteration: session.iteration(),
        asked,
        scored,
        pause_seconds: session.config().pause_seconds,
    };
    tracing::info!(session = %id, asked, scored, "session created");
    let (push, _) = broadcast::channel(256);
    let state = LiveState { session, log, logged: 0, outcome: None };
    app.insert(id, LiveSession { state: Mutex::new(state), push });
    Ok((StatusCode::CREATED, Json(view)))
}

fn session(app: &AppState, id: &str) -> Result<Arc<LiveSession>, ApiError> {
    app.get(id).ok_or_else(|| ApiError::not_found(id))
}

#[derive(Debug, Deserialize)]
struct JoinBody {
    student_id: String,
}

pub(super) async fn join(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<StateView> {
    let body: JoinBody = parse_body(&body)?;
    let live = session(&app, &id)?;
    let mut state = live.lock();
    let before = state.session.participants().len();
    state.session.join(body.student_id.trim(), Timestamp::now())?;
    state.persist()?;
    let count = state.session.participants().len();
    if count != before {
        live.publish(PushEvent::Participants { count });
    }
    Ok(Json(StateView::of(&state.session, Some(body.student_id.trim()))))
}

pub(super) async fn advance(State(app): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<StateView> {
    let live = session(&app, &id)?;
    let token = bearer(&headers).ok_or_else(|| calib_core::Error::Unauthorized("missing bearer token".into()))?;
    let mut state = live.lock();
    let from = state.session.phase();
    let to = state.session.advance(token, Timestamp::now())?;
    state.persist()?;
    live.publish(PushEvent::Phase { from, to, question: QuestionView::current(&state.session) });
    if to == SessionPhase::Reveal {
        let outcome = Arc::new(state.session.reveal_and_score()?);
        write_results(&app, &state.session, &outcome)?;
        live.publish(histogram_event(&state.session, &outcome)?);
        state.outcome = Some(outcome);
    }
    Ok(Json(StateView::of(&state.session, None)))
}

fn write_results(app: &AppState, session: &Session, outcome: &RevealOutcome) -> Result<(), ApiError> {
    let path = app.config().data_dir.join(format!("{}.results.csv", session.id()));
    let file = File::create(&path).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
    write_response_export(&session.export_rows(outcome), BufWriter::new(file))?;
    Ok(())
}

fn class_mean(scores: &[RoundScore]) -> Option<f64> {
    (!scores.is_empty()).then(|| scores.iter().map(|s| s.covered as f64).sum::<f64>() / scores.len() as f64)
}

fn histogram_event(session: &Session, outcome: &RevealOutcome) -> Result<PushEvent, ApiError> {
    let max_score = session.config().scored;
    Ok(PushEvent::Histogram {
        bins: live_histogram(&outcome.scores, max_score)?,
        max_score,
        mean: class_mean(&outcome.scores),
    })
}

#[derive(Debug, Deserialize)]
struct AnswerBody {
    student_id: String,
    question_id: String,
    lower: f64,
    upper: f64,
}

pub(super) async fn answer(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<StateView> {
    let body: AnswerBody = parse_body(&body)?;
    let live = session(&app, &id)?;
    let mut state = live.lock();
    let answer = IntervalAnswer { question_id: body.question_id.clone(), lower: body.lower, upper: body.upper };
    state.session.submit(&body.student_id, answer, Timestamp::now())?;
    state.persist()?;
    let count = state.session.submission_count(&body.question_id);
    live.publish(PushEvent::Submissions { question_id: body.question_id, count });
    Ok(Json(StateView::of(&state.session, Some(&body.student_id))))
}

#[derive(Debug, Deserialize)]
pub(super) struct StudentQuery {
    student_id: Option<String>,
}

pub(super) async fn state(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<StudentQuery>,
) -> ApiResult<StateView> {
    let live = session(&app, &id)?;
    let state = live.lock();
    Ok(Json(StateView::of(&state.session, query.student_id.as_deref())))
}

/// Scores after reveal. Everyone sees the histogram and the truths; a named
/// student also gets their own score, and the instructor gets every score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsView {
    pub session_id: String,
    pub iteration: u32,
    pub max_score: usize,
    pub histogram: Vec<usize>,
    pub mean: Option<f64>,
    pub expected_score: f64,
    pub scored_ids: BTreeSet<String>,
    pub truths: Vec<QuestionTruth>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub student: Option<RoundScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<RoundScore>>,
}

pub(super) async fn results(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<StudentQuery>,
    headers: HeaderMap,
) -> ApiResult<ResultsView> {
    let live = session(&app, &id)?;
    let state = live.lock();
    let session = &state.session;
    let outcome = match &state.outcome {
        Some(outcome) => outcome.clone(),
        None => Arc::new(session.results()?),
    };
    let student = match &query.student_id {
        Some(s) => Some(
            outcome
                .scores
                .iter()
                .find(|r| &r.student_id == s)
                .cloned()
                .ok_or_else(|| ApiError { status: StatusCode::NOT_FOUND, message: format!("{s:?} did not join") })?,
        ),
        None => None,
    };
    let instructor = bearer(&headers) == Some(session.instructor_token());
    let max_score = session.config().scored;
    Ok(Json(ResultsView {
        session_id: session.id().to_string(),
        iteration: session.iteration(),
        max_score,
        histogram: live_histogram(&outcome.scores, max_score)?,
        mean: class_mean(&outcome.scores),
        expected_score: expected_score(max_score as u32, session.config().confidence_level)?,
        scored_ids: outcome.scored_ids.clone(),
        truths: outcome.truths.clone(),
        student,
        scores: instructor.then(|| outcome.scores.clone()),
    }))
}
