//! Calibration toolkit for the 90%-interval trivia activity.
//!
//! - [`quiz`]: question banks, interval answers and coverage scoring.
//! - [`session`]: the live, event-sourced activity state machine.
//! - [`analytics`]: score summaries, binomial references, the
//!   random-intercept logistic model, cheat flags and pre/post comparison.

pub mod analytics;
pub mod error;
pub mod quiz;
pub mod session;

pub use error::{Error, Result};
pub use quiz::{IntervalAnswer, QuestionBank, ResponseSheet, RoundScore, TriviaQuestion};
pub use session::{Session, SessionConfig, SessionPhase};
