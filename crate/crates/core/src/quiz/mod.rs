//! Question banks, interval answers, and coverage scoring.
//!
//! Interval bounds are treated as **closed**: an answer equal to either
//! endpoint counts as covered. The source activity never says so explicitly;
//! its worked sample scores `(1896, 1900)` as capturing 1896, which only works
//! with an inclusive lower bound.

mod bank;
mod subset;

pub use bank::{combined_corpus, load_question_bank, write_question_bank, BankFormat, APPENDIX_A_CSV, TABLE1_CSV};
pub use subset::select_scoring_subset;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trivia prompt with a single numeric truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriviaQuestion {
    pub id: String,
    pub text: String,
    pub answer: f64,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub source: Option<String>,
}

/// An ordered, non-empty list of questions with distinct ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionBank {
    name: String,
    questions: Vec<TriviaQuestion>,
}

impl QuestionBank {
    pub fn new(name: impl Into<String>, questions: Vec<TriviaQuestion>) -> Result<Self> {
        if questions.is_empty() {
            return Err(Error::validation("question bank has no questions"));
        }
        let mut seen = HashSet::with_capacity(questions.len());
        for q in &questions {
            if !seen.insert(q.id.as_str()) {
                return Err(Error::validation(format!("duplicate question id {:?}", q.id)));
            }
            if !q.answer.is_finite() {
                return Err(Error::validation(format!("question {:?} has a non-finite answer", q.id)));
            }
        }
        Ok(Self { name: name.into(), questions })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn questions(&self) -> &[TriviaQuestion] {
        &self.questions
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TriviaQuestion> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.questions.iter().map(|q| q.id.as_str())
    }
}

/// A student's `(lower, upper)` bound pair for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalAnswer {
    pub question_id: String,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalAnswer {
    /// Builds a validated interval. Point answers (`lower == upper`) are legal.
    pub fn new(question_id: impl Into<String>, lower: f64, upper: f64) -> Result<Self> {
        let answer = Self { question_id: question_id.into(), lower, upper };
        answer.validate()?;
        Ok(answer)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::validation(format!(
                "interval for {:?} has a non-finite bound",
                self.question_id
            )));
        }
        if self.lower > self.upper {
            return Err(Error::validation(format!(
                "interval for {:?} has lower bound {} above upper bound {}",
                self.question_id, self.lower, self.upper
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// All answers one student gave in a round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseSheet {
    pub student_id: String,
    answers: Vec<IntervalAnswer>,
}

impl ResponseSheet {
    pub fn new(student_id: impl Into<String>, answers: Vec<IntervalAnswer>) -> Result<Self> {
        let student_id = student_id.into();
        let mut seen = HashSet::with_capacity(answers.len());
        for a in &answers {
            a.validate()?;
            if !seen.insert(a.question_id.as_str()) {
                return Err(Error::validation(format!(
                    "student {student_id:?} answered {:?} more than once",
                    a.question_id
                )));
            }
        }
        Ok(Self { student_id, answers })
    }

    pub fn answers(&self) -> &[IntervalAnswer] {
        &self.answers
    }

    pub fn answer_for(&self, question_id: &str) -> Option<&IntervalAnswer> {
        self.answers.iter().find(|a| a.question_id == question_id)
    }
}

/// A student's coverage score over the scored questions of one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundScore {
    pub student_id: String,
    pub num_scored: usize,
    pub covered: usize,
    pub per_question: BTreeMap<String, bool>,
}

/// True iff the truth lies in the closed interval `[lower, upper]`.
pub fn score_answer(answer: &IntervalAnswer, question: &TriviaQuestion) -> Result<bool> {
    if answer.question_id != question.id {
        return Err(Error::Contract(format!(
            "answer for {:?} scored against question {:?}",
            answer.question_id, question.id
        )));
    }
    Ok(answer.contains(question.answer))
}

/// Scores a sheet over `scored_ids`. Unanswered scored questions count as
/// not covered.
pub fn score_sheet(
    sheet: &ResponseSheet,
    bank: &QuestionBank,
    scored_ids: &BTreeSet<String>,
) -> Result<RoundScore> {
    let mut per_question = BTreeMap::new();
    for id in scored_ids {
        let question = bank
            .get(id)
            .ok_or_else(|| Error::validation(format!("scored id {id:?} is not in bank {:?}", bank.name())))?;
        let hit = match sheet.answer_for(id) {
            Some(answer) => score_answer(answer, question)?,
            None => false,
        };
        per_question.insert(id.clone(), hit);
    }
    let covered = per_question.values().filter(|&&hit| hit).count();
    Ok(RoundScore {
        student_id: sheet.student_id.clone(),
        num_scored: scored_ids.len(),
        covered,
        per_question,
    })
}
