use std::convert::Infallible;

use axum::extract::{Path, State};
use axum::response::sse::{Event, KeepAlive, Sse};
use calib_core::session::SessionPhase;
use futures::stream::{self, Stream, StreamExt};
use serde::Serialize;
use tokio::sync::broadcast::error::RecvError;

use super::api::{ApiError, QuestionView, StateView};
use super::AppState;

/// Messages on a session's event stream. The SSE event name is the `type`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PushEvent {
    /// Sent once when a client connects.
    State(StateView),
    Phase {
        from: SessionPhase,
        to: SessionPhase,
        question: Option<QuestionView>,
    },
    Participants { count: usize },
    Submissions { question_id: String, count: usize },
    /// Score distribution, sent when the session reaches reveal.
    Histogram { bins: Vec<usize>, max_score: usize, mean: Option<f64> },
}

impl PushEvent {
    pub fn name(&self) -> &'static str {
        match self {
            PushEvent::State(_) => "state",
            PushEvent::Phase { .. } => "phase",
            PushEvent::Participants { .. } => "participants",
            PushEvent::Submissions { .. } => "submissions",
            PushEvent::Histogram { .. } => "histogram",
        }
    }

    fn to_sse(&self) -> Event {
        let data = serde_json::to_string(self).unwrap_or_else(|e| format!("{{\"error\":{:?}}}", e.to_string()));
        Event::default().event(self.name()).data(data)
    }
}

pub(super) async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let live = app.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    // subscribe under the lock so no event slips between snapshot and stream
    let (initial, rx) = {
        let state = live.lock();
        (PushEvent::State(StateView::of(&state.session, None)), live.push.subscribe())
    };
    let updates = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(event) => return Some((event, rx)),
                Err(RecvError::Lagged(skipped)) => tracing::debug!("event stream lagged by {skipped}"),
                Err(RecvError::Closed) => return None,
            }
        }
    });
    let stream = stream::once(async move { initial }).chain(updates).map(|e| Ok(e.to_sse()));
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
