use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest score on the standard ten-question round.
pub const DEFAULT_MAX_SCORE: u32 = 10;

/// Descriptive statistics for one round's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub n: usize,
    /// Smallest most-frequent score.
    pub mode: u32,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single score.
    pub sd: f64,
    /// Count per score `0..=max_score`.
    pub histogram: Vec<usize>,
}

pub fn summarize_scores(scores: &[u32]) -> Result<ScoreSummary> {
    summarize_scores_out_of(scores, DEFAULT_MAX_SCORE)
}

pub fn summarize_scores_out_of(scores: &[u32], max_score: u32) -> Result<ScoreSummary> {
    if scores.is_empty() {
        return Err(Error::argument("cannot summarize an empty score list"));
    }
    let mut histogram = vec![0usize; max_score as usize + 1];
    for &s in scores {
        if s > max_score {
            return Err(Error::argument(format!("score {s} exceeds the maximum of {max_score}")));
        }
        histogram[s as usize] += 1;
    }
    let n = scores.len();

    // first maximal bin is the smallest modal value
    let mut mode = 0;
    for (score, &count) in histogram.iter().enumerate() {
        if count > histogram[mode] {
            mode = score;
        }
    }

    // walk the histogram instead of sorting
    let value_at = |rank: usize| -> f64 {
        let mut seen = 0;
        for (score, &count) in histogram.iter().enumerate() {
            seen += count;
            if seen > rank {
                return score as f64;
            }
        }
        unreachable!("rank below n")
    };
    let median = if n % 2 == 1 { value_at(n / 2) } else { (value_at(n / 2 - 1) + value_at(n / 2)) / 2.0 };

    let mean = scores.iter().map(|&s| s as f64).sum::<f64>() / n as f64;
    let sd = if n > 1 {
        let ss: f64 = scores.iter().map(|&s| (s as f64 - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };

    Ok(ScoreSummary { n, mode: mode as u32, median, mean, sd, histogram })
}
