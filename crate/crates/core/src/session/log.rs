//! JSON-lines persistence for session event logs.
//!
//! Line 1 is a `created` header carrying everything needed to rebuild the
//! lobby (config and bank); each following line is one [`SubmissionEvent`].

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Session, SessionConfig, SubmissionEvent, Timestamp};
use crate::error::{Error, Result};
use crate::quiz::{QuestionBank, TriviaQuestion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub seq: u64,
    pub ts: Timestamp,
    pub kind: String,
    pub session_id: String,
    pub iteration: u32,
    pub asked: usize,
    pub scored: usize,
    pub pause_seconds: u32,
    pub confidence_level: f64,
    pub seed: u64,
    pub bank_name: String,
    pub questions: Vec<TriviaQuestion>,
}

impl SessionHeader {
    pub fn for_session(session: &Session, ts: Timestamp) -> Self {
        let config = session.config();
        Self {
            seq: 0,
            ts,
            kind: "created".into(),
            session_id: session.id().to_string(),
            iteration: session.iteration(),
            asked: config.asked,
            scored: config.scored,
            pause_seconds: config.pause_seconds,
            confidence_level: config.confidence_level,
            seed: config.seed,
            bank_name: config.bank.name().to_string(),
            questions: config.bank.questions().to_vec(),
        }
    }

    pub fn config(&self) -> Result<SessionConfig> {
        let bank = QuestionBank::new(self.bank_name.clone(), self.questions.clone())?;
        Ok(SessionConfig {
            bank,
            asked: self.asked,
            scored: self.scored,
            pause_seconds: self.pause_seconds,
            confidence_level: self.confidence_level,
            seed: self.seed,
        })
    }
}

/// Appends events to a JSON-lines sink, flushing after every line.
pub struct EventLogWriter<W: Write> {
    out: W,
}

impl<W: Write> EventLogWriter<W> {
    /// Starts a new log by writing the header for `session`.
    pub fn create(mut out: W, session: &Session, ts: Timestamp) -> Result<Self> {
        write_line(&mut out, &SessionHeader::for_session(session, ts))?;
        Ok(Self { out })
    }

    pub fn append(&mut self, event: &SubmissionEvent) -> Result<()> {
        write_line(&mut self.out, event)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_event_log(input: impl BufRead) -> Result<(SessionHeader, Vec<SubmissionEvent>)> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
    let (_, first) = lines.next().ok_or_else(|| Error::validation("event log is empty"))?;
    let header: SessionHeader = serde_json::from_str(&first?).map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.kind != "created" {
        return Err(Error::Parse { line: 1, message: format!("expected a created header, found {:?}", header.kind) });
    }
    let mut events = Vec::new();
    for (index, line) in lines {
        let event = serde_json::from_str(&line?).map_err(|e| Error::Parse { line: index + 1, message: e.to_string() })?;
        events.push(event);
    }
    Ok((header, events))
}

/// Rebuilds a session from its log. The instructor token is not persisted,
/// so the caller supplies the one to use from now on.
pub fn restore_session(input: impl BufRead, instructor_token: impl Into<String>) -> Result<Session> {
    let (header, events) = read_event_log(input)?;
    let config = header.config()?;
    Session::replay(header.session_id, config, header.iteration, instructor_token, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quiz::{load_question_bank, BankFormat, IntervalAnswer, TABLE1_CSV};

    #[test]
    fn log_round_trips_through_jsonl() {
        let bank = load_question_bank(TABLE1_CSV.as_bytes(), BankFormat::Csv, "table1").unwrap();
        let mut s = Session::create_with_token("abc", SessionConfig::new(bank, 10, 10, 3), 2, "tok").unwrap();
        let mut log = EventLogWriter::create(Vec::new(), &s, Timestamp(5)).unwrap();
        s.join("ann", Timestamp(6)).unwrap();
        s.advance("tok", Timestamp(7)).unwrap();
        s.submit("ann", IntervalAnswer::new("q1", 1.0, 7.0).unwrap(), Timestamp(8)).unwrap();
        for e in s.event_log() {
            log.append(e).unwrap();
        }
        let bytes = log.into_inner();
        let text = String::from_utf8(bytes.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].contains(r#""kind":"join""#));
        assert!(lines[3].contains(r#""kind":"submit""#) && lines[3].contains(r#""lower":1.0"#));

        let restored = restore_session(bytes.as_slice(), "tok").unwrap();
        assert_eq!(restored.snapshot(), s.snapshot());
        assert_eq!(restored.iteration(), 2);
        assert_eq!(restored.event_log(), s.event_log());
    }

    #[test]
    fn gap_in_log_rejected() {
        let bank = load_question_bank(TABLE1_CSV.as_bytes(), BankFormat::Csv, "table1").unwrap();
        let mut s = Session::create_with_token("abc", SessionConfig::new(bank.clone(), 10, 10, 3), 1, "t").unwrap();
        s.join("a", Timestamp(0)).unwrap();
        s.join("b", Timestamp(0)).unwrap();
        let events = vec![s.event_log()[1].clone()];
        assert!(Session::replay("abc", SessionConfig::new(bank, 10, 10, 3), 1, "t", events).is_err());
    }
}
