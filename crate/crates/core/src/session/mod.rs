//! The live activity state machine.
//!
//! Every mutation goes through [`Session::apply`], which is also what replay
//! folds over, so a session rebuilt from its event log is identical to the
//! live one.

mod event;
mod log;

pub use event::{EventPayload, SubmissionEvent, Timestamp};
pub use log::{read_event_log, restore_session, EventLogWriter, SessionHeader};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analytics::ResponseExportRow;
use crate::error::{Error, Result};
use crate::quiz::{score_sheet, select_scoring_subset, IntervalAnswer, QuestionBank, ResponseSheet, RoundScore, TriviaQuestion};

pub const DEFAULT_PAUSE_SECONDS: u32 = 30;
pub const DEFAULT_CONFIDENCE_LEVEL: f64 = 0.90;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub bank: QuestionBank,
    pub asked: usize,
    pub scored: usize,
    /// Advisory countdown shown to clients; questions close only when the
    /// instructor advances.
    pub pause_seconds: u32,
    pub confidence_level: f64,
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(bank: QuestionBank, asked: usize, scored: usize, seed: u64) -> Self {
        Self {
            bank,
            asked,
            scored,
            pause_seconds: DEFAULT_PAUSE_SECONDS,
            confidence_level: DEFAULT_CONFIDENCE_LEVEL,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.asked == 0 || self.scored == 0 {
            return Err(Error::validation("asked and scored must be positive"));
        }
        if self.scored > self.asked {
            return Err(Error::validation(format!("scored ({}) exceeds asked ({})", self.scored, self.asked)));
        }
        if self.asked > self.bank.len() {
            return Err(Error::validation(format!(
                "asked ({}) exceeds the {} questions in bank {:?}",
                self.asked,
                self.bank.len(),
                self.bank.name()
            )));
        }
        if self.pause_seconds == 0 {
            return Err(Error::validation("pause_seconds must be positive"));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::validation("confidence_level must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Where a session is in the activity. Question indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionPhase {
    Lobby,
    QuestionOpen { index: usize },
    QuestionClosed { index: usize },
    Reveal,
    Finished,
}

impl SessionPhase {
    /// The successor phase for a session asking `asked` questions, or `None`
    /// once finished.
    pub fn next(self, asked: usize) -> Option<SessionPhase> {
        use SessionPhase::*;
        Some(match self {
            Lobby => QuestionOpen { index: 1 },
            QuestionOpen { index } => QuestionClosed { index },
            QuestionClosed { index } if index < asked => QuestionOpen { index: index + 1 },
            QuestionClosed { .. } => Reveal,
            Reveal => Finished,
            Finished => return None,
        })
    }

    pub fn label(self) -> String {
        match self {
            SessionPhase::Lobby => "lobby".into(),
            SessionPhase::QuestionOpen { index } => format!("question_open({index})"),
            SessionPhase::QuestionClosed { index } => format!("question_closed({index})"),
            SessionPhase::Reveal => "reveal".into(),
            SessionPhase::Finished => "finished".into(),
        }
    }
}

/// The observable state of a session, used to compare a live session with
/// one rebuilt from its log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub phase: SessionPhase,
    pub participants: Vec<String>,
    pub submissions: Vec<(String, IntervalAnswer)>,
}

/// Truth disclosed at reveal for one asked question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionTruth {
    pub question_id: String,
    pub answer: f64,
    pub unit: String,
    pub scored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealOutcome {
    pub scores: Vec<RoundScore>,
    pub truths: Vec<QuestionTruth>,
    pub scored_ids: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    config: SessionConfig,
    iteration: u32,
    phase: SessionPhase,
    participants: BTreeSet<String>,
    submissions: BTreeMap<(String, String), IntervalAnswer>,
    event_log: Vec<SubmissionEvent>,
    scoring_subset: BTreeSet<String>,
    instructor_token: String,
}

impl Session {
    /// Creates a session in the lobby with a freshly issued instructor token.
    pub fn create(id: impl Into<String>, config: SessionConfig, iteration: u32) -> Result<Self> {
        let token = format!("{:032x}", rand::random::<u128>());
        Self::create_with_token(id, config, iteration, token)
    }

    pub fn create_with_token(
        id: impl Into<String>,
        config: SessionConfig,
        iteration: u32,
        instructor_token: impl Into<String>,
    ) -> Result<Self> {
        config.validate()?;
        if iteration == 0 {
            return Err(Error::validation("iteration must be positive"));
        }
        let scoring_subset = select_scoring_subset(&config.bank, config.asked, config.scored, config.seed)?;
        Ok(Self {
            id: id.into(),
            config,
            iteration,
            phase: SessionPhase::Lobby,
            participants: BTreeSet::new(),
            submissions: BTreeMap::new(),
            event_log: Vec::new(),
            scoring_subset,
            instructor_token: instructor_token.into(),
        })
    }

    /// Rebuilds a session by folding `events` over a fresh lobby.
    pub fn replay(
        id: impl Into<String>,
        config: SessionConfig,
        iteration: u32,
        instructor_token: impl Into<String>,
        events: impl IntoIterator<Item = SubmissionEvent>,
    ) -> Result<Self> {
        let mut session = Self::create_with_token(id, config, iteration, instructor_token)?;
        for event in events {
            let expected = session.event_log.len() as u64 + 1;
            if event.seq != expected {
                return Err(Error::validation(format!("event log gap: expected seq {expected}, found {}", event.seq)));
            }
            session.apply(&event.payload)?;
            session.event_log.push(event);
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn participants(&self) -> &BTreeSet<String> {
        &self.participants
    }

    pub fn event_log(&self) -> &[SubmissionEvent] {
        &self.event_log
    }

    pub fn instructor_token(&self) -> &str {
        &self.instructor_token
    }

    /// The hidden scoring subset. Clients must not see this before reveal.
    pub fn scoring_subset(&self) -> &BTreeSet<String> {
        &self.scoring_subset
    }

    pub fn asked_questions(&self) -> &[TriviaQuestion] {
        &self.config.bank.questions()[..self.config.asked]
    }

    /// The question currently open or just closed.
    pub fn current_question(&self) -> Option<&TriviaQuestion> {
        match self.phase {
            SessionPhase::QuestionOpen { index } | SessionPhase::QuestionClosed { index } => {
                self.asked_questions().get(index - 1)
            }
            _ => None,
        }
    }

    pub fn submission(&self, student_id: &str, question_id: &str) -> Option<&IntervalAnswer> {
        self.submissions.get(&(student_id.to_string(), question_id.to_string()))
    }

    pub fn submission_count(&self, question_id: &str) -> usize {
        self.submissions.keys().filter(|(_, q)| q == question_id).count()
    }

    pub fn response_sheet(&self, student_id: &str) -> ResponseSheet {
        let answers = self
            .submissions
            .iter()
            .filter(|((s, _), _)| s == student_id)
            .map(|(_, a)| a.clone())
            .collect();
        ResponseSheet::new(student_id, answers).expect("stored answers are validated and keyed by question")
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            phase: self.phase,
            participants: self.participants.iter().cloned().collect(),
            submissions: self.submissions.iter().map(|((s, _), a)| (s.clone(), a.clone())).collect(),
        }
    }

    pub fn join(&mut self, student_id: &str, at: Timestamp) -> Result<()> {
        self.record(EventPayload::Join { student_id: student_id.to_string() }, at)
    }

    /// Moves to the next phase. Requires the instructor token.
    pub fn advance(&mut self, token: &str, at: Timestamp) -> Result<SessionPhase> {
        if token != self.instructor_token {
            return Err(Error::Unauthorized("instructor token required to advance".into()));
        }
        let to = self
            .phase
            .next(self.config.asked)
            .ok_or_else(|| Error::phase("session is finished"))?;
        self.record(EventPayload::PhaseChange { from: self.phase, to }, at)?;
        Ok(to)
    }

    pub fn submit(&mut self, student_id: &str, answer: IntervalAnswer, at: Timestamp) -> Result<()> {
        self.record(EventPayload::Submit { student_id: student_id.to_string(), answer }, at)
    }

    fn record(&mut self, payload: EventPayload, at: Timestamp) -> Result<()> {
        if self.apply(&payload)? {
            let seq = self.event_log.len() as u64 + 1;
            self.event_log.push(SubmissionEvent { seq, ts: at, payload });
        }
        Ok(())
    }

    /// Validates `payload` against the current state and applies it.
    /// Returns `false` for an accepted no-op (a repeat join).
    fn apply(&mut self, payload: &EventPayload) -> Result<bool> {
        match payload {
            EventPayload::Join { student_id } => {
                match self.phase {
                    SessionPhase::Reveal | SessionPhase::Finished => {
                        return Err(Error::phase(format!("cannot join during {}", self.phase.label())));
                    }
                    _ => {}
                }
                if student_id.trim().is_empty() {
                    return Err(Error::validation("student id must not be empty"));
                }
                Ok(self.participants.insert(student_id.clone()))
            }
            EventPayload::Submit { student_id, answer } => {
                if !self.participants.contains(student_id) {
                    return Err(Error::validation(format!("student {student_id:?} has not joined")));
                }
                let SessionPhase::QuestionOpen { index } = self.phase else {
                    return Err(Error::phase(format!("no question is open ({})", self.phase.label())));
                };
                let open_id = &self.asked_questions()[index - 1].id;
                if &answer.question_id != open_id {
                    return Err(Error::phase(format!(
                        "question {:?} is not open; {open_id:?} is",
                        answer.question_id
                    )));
                }
                answer.validate()?;
                self.submissions.insert((student_id.clone(), answer.question_id.clone()), answer.clone());
                Ok(true)
            }
            EventPayload::PhaseChange { from, to } => {
                if *from != self.phase {
                    return Err(Error::phase(format!(
                        "phase change from {} but session is in {}",
                        from.label(),
                        self.phase.label()
                    )));
                }
                if self.phase.next(self.config.asked) != Some(*to) {
                    return Err(Error::phase(format!("illegal transition {} -> {}", from.label(), to.label())));
                }
                self.phase = *to;
                Ok(true)
            }
        }
    }

    /// Scores every participant over the hidden subset and discloses the
    /// truths for all asked questions. Only valid during reveal.
    pub fn reveal_and_score(&self) -> Result<RevealOutcome> {
        if self.phase != SessionPhase::Reveal {
            return Err(Error::phase(format!("scores are revealed only in reveal, not {}", self.phase.label())));
        }
        self.compute_outcome()
    }

    /// Same as [`reveal_and_score`](Self::reveal_and_score) but also allowed
    /// once the session is finished.
    pub fn results(&self) -> Result<RevealOutcome> {
        match self.phase {
            SessionPhase::Reveal | SessionPhase::Finished => self.compute_outcome(),
            phase => Err(Error::phase(format!("results are not available during {}", phase.label()))),
        }
    }

    /// One export row per (participant, scored question), in participant
    /// then bank order. Unanswered questions have empty bounds and score 0.
    pub fn export_rows(&self, outcome: &RevealOutcome) -> Vec<ResponseExportRow> {
        let mut rows = Vec::new();
        for score in &outcome.scores {
            for q in self.asked_questions().iter().filter(|q| outcome.scored_ids.contains(&q.id)) {
                let answer = self.submission(&score.student_id, &q.id);
                rows.push(ResponseExportRow {
                    session_id: self.id.clone(),
                    iteration: self.iteration,
                    student_id: score.student_id.clone(),
                    question_id: q.id.clone(),
                    lower: answer.map(|a| a.lower),
                    upper: answer.map(|a| a.upper),
                    covered: u8::from(score.per_question.get(&q.id).copied().unwrap_or(false)),
                });
            }
        }
        rows
    }

    fn compute_outcome(&self) -> Result<RevealOutcome> {
        let scores = self
            .participants
            .iter()
            .map(|s| score_sheet(&self.response_sheet(s), &self.config.bank, &self.scoring_subset))
            .collect::<Result<Vec<_>>>()?;
        let truths = self
            .asked_questions()
            .iter()
            .map(|q| QuestionTruth {
                question_id: q.id.clone(),
                answer: q.answer,
                unit: q.unit.clone(),
                scored: self.scoring_subset.contains(&q.id),
            })
            .collect();
        Ok(RevealOutcome { scores, truths, scored_ids: self.scoring_subset.clone() })
    }
}

/// Counts scores into bins `0..=max_score`.
pub fn live_histogram(scores: &[RoundScore], max_score: usize) -> Result<Vec<usize>> {
    let mut bins = vec![0; max_score + 1];
    for s in scores {
        if s.num_scored != max_score {
            return Err(Error::validation(format!(
                "score for {:?} is out of {} but the histogram is out of {max_score}",
                s.student_id, s.num_scored
            )));
        }
        bins[s.covered] += 1;
    }
    Ok(bins)
}
