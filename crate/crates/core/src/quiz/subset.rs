use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::QuestionBank;
use crate::error::{Error, Result};

/// Draws `scored` distinct ids uniformly without replacement from the first
/// `asked` questions of the bank. Deterministic for a given seed.
pub fn select_scoring_subset(bank: &QuestionBank, asked: usize, scored: usize, seed: u64) -> Result<BTreeSet<String>> {
    if scored > asked {
        return Err(Error::argument(format!("scored ({scored}) exceeds asked ({asked})")));
    }
    if asked > bank.len() {
        return Err(Error::argument(format!("asked ({asked}) exceeds bank size ({})", bank.len())));
    }
    if scored == 0 {
        return Err(Error::argument("scored must be positive"));
    }
    let asked_questions = &bank.questions()[..asked];
    if scored == asked {
        return Ok(asked_questions.iter().map(|q| q.id.clone()).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, asked, scored);
    Ok(picked.iter().map(|i| asked_questions[i].id.clone()).collect())
}
