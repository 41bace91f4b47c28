#![allow(dead_code)]

use std::collections::BTreeSet;

use calib_core::quiz::{load_question_bank, BankFormat, TABLE1_CSV};
use calib_core::{IntervalAnswer, QuestionBank, ResponseSheet};

pub fn table1() -> QuestionBank {
    load_question_bank(TABLE1_CSV.as_bytes(), BankFormat::Csv, "table1").unwrap()
}

/// The printed sample responses for the ten walkthrough questions.
pub const SAMPLE_RESPONSES: [(&str, f64, f64); 10] = [
    ("q1", 1.0, 7.0),
    ("q2", 52.0, 104.0),
    ("q3", 3.0, 200.0),
    ("q4", 50.0, 110.0),
    ("q5", 1.0, 3.0),
    ("q6", 80.0, 120.0),
    ("q7", 250.0, 300.0),
    ("q8", 1896.0, 1900.0),
    ("q9", 1000.0, 8000.0),
    ("q10", 0.0, 50.0),
];

pub const SAMPLE_COVERED: [&str; 6] = ["q1", "q3", "q4", "q8", "q9", "q10"];

pub fn sample_sheet(student: &str) -> ResponseSheet {
    let answers = SAMPLE_RESPONSES.iter().map(|&(q, lo, hi)| IntervalAnswer::new(q, lo, hi).unwrap()).collect();
    ResponseSheet::new(student, answers).unwrap()
}

pub fn all_ids(bank: &QuestionBank) -> BTreeSet<String> {
    bank.ids().map(String::from).collect()
}

use calib_core::session::{Session, SessionConfig, SessionPhase, Timestamp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOKEN: &str = "instructor";

/// Drives a fresh session with random joins, submissions (many aimed at the
/// wrong question or with reversed bounds) and advances. Returns the session
/// and how many commands were rejected.
pub fn random_session_run(seed: u64) -> (Session, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bank = calib_core::quiz::combined_corpus();
    let asked = rng.random_range(3..=15);
    let scored = rng.random_range(1..=asked);
    let config = SessionConfig::new(bank, asked, scored, seed);
    let mut session = Session::create_with_token(format!("run{seed}"), config, rng.random_range(1..=5), TOKEN).unwrap();
    let students: Vec<String> = (0..rng.random_range(1..8)).map(|i| format!("st{i}")).collect();
    let mut rejected = 0;
    let mut clock = 1_000u64;
    for _ in 0..rng.random_range(20..200) {
        clock += rng.random_range(1..500);
        let at = Timestamp(clock);
        let result = match rng.random_range(0..10) {
            0 | 1 => session.join(&students[rng.random_range(0..students.len())], at),
            2 => {
                let token = if rng.random_bool(0.9) { TOKEN } else { "guess" };
                session.advance(token, at).map(|_| ())
            }
            _ => {
                let student = &students[rng.random_range(0..students.len())];
                let question = match session.current_question() {
                    Some(open) if rng.random_bool(0.7) => open.clone(),
                    _ => {
                        let q = rng.random_range(0..asked + 2).min(session.config().bank.len() - 1);
                        session.config().bank.questions()[q].clone()
                    }
                };
                let (qid, truth) = (question.id, question.answer);
                let lo = truth * rng.random_range(0.0..1.5) - rng.random_range(0.0..10.0);
                let hi = if rng.random_bool(0.1) { lo - 1.0 } else { lo + rng.random_range(0.0..truth.abs() + 10.0) };
                session.submit(student, IntervalAnswer { question_id: qid, lower: lo, upper: hi }, at)
            }
        };
        if result.is_err() {
            rejected += 1;
        }
    }
    (session, rejected)
}

/// Advances until `phase` is reached.
pub fn advance_to(session: &mut Session, phase: SessionPhase) {
    while session.phase() != phase {
        session.advance(TOKEN, Timestamp(0)).unwrap();
    }
}

pub const CHEATER: &str = "gamer";

/// Ten honest students with widths proportional to each answer, plus one
/// student who pads nine answers with enormous intervals and gives a
/// zero-width wrong answer on the last. With `equal_widths` every student,
/// the gamer included, uses width 10 everywhere.
pub fn cheat_scenario(bank: &QuestionBank, equal_widths: bool) -> Vec<ResponseSheet> {
    let questions = bank.questions();
    let honest_width = |i: usize, answer: f64| if equal_widths { 10.0 } else { answer * (0.4 + 0.15 * i as f64) };
    let mut sheets: Vec<ResponseSheet> = (0..10)
        .map(|i| {
            let answers = questions
                .iter()
                .map(|q| {
                    let w = honest_width(i, q.answer);
                    IntervalAnswer::new(&q.id, q.answer - 0.6 * w, q.answer + 0.4 * w).unwrap()
                })
                .collect();
            ResponseSheet::new(format!("honest{i:02}"), answers).unwrap()
        })
        .collect();
    let last = questions.len() - 1;
    let gamer = questions
        .iter()
        .enumerate()
        .map(|(k, q)| {
            if equal_widths {
                IntervalAnswer::new(&q.id, q.answer - 5.0, q.answer + 5.0).unwrap()
            } else if k == last {
                IntervalAnswer::new(&q.id, -q.answer, -q.answer).unwrap()
            } else {
                let mean = (0..10).map(|i| honest_width(i, q.answer)).sum::<f64>() / 10.0;
                let w = 1e6 * mean;
                IntervalAnswer::new(&q.id, q.answer - w / 2.0, q.answer + w / 2.0).unwrap()
            }
        })
        .collect();
    sheets.push(ResponseSheet::new(CHEATER, gamer).unwrap());
    sheets
}

pub const PRE_CORRECT: [(&str, u32); 4] = [("28", 6), ("29", 11), ("30", 7), ("31", 15)];
pub const POST_CORRECT: [(&str, u32); 4] = [("28", 14), ("29", 12), ("30", 7), ("31", 13)];
pub const PRE_TOTAL: u32 = 16;
pub const POST_TOTAL: u32 = 15;
