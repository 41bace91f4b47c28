use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correct-answer count for one question on one administration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTally {
    pub label: String,
    pub correct: u32,
    pub total: u32,
}

impl QuestionTally {
    pub fn new(label: impl Into<String>, correct: u32, total: u32) -> Self {
        Self { label: label.into(), correct, total }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrePostRow {
    pub label: String,
    pub pre_percent: f64,
    pub post_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrePostReport {
    pub per_question: Vec<PrePostRow>,
    pub pre_average: f64,
    pub post_average: f64,
}

/// Percent correct per question before and after, with unweighted averages
/// across questions. Rows follow the order of `pre`.
pub fn compare_pre_post(pre: &[QuestionTally], post: &[QuestionTally]) -> Result<PrePostReport> {
    if pre.is_empty() {
        return Err(Error::argument("no questions to compare"));
    }
    if pre.len() != post.len() {
        return Err(Error::validation(format!("pre has {} questions but post has {}", pre.len(), post.len())));
    }
    let percent = |t: &QuestionTally| -> Result<f64> {
        if t.total == 0 {
            return Err(Error::validation(format!("question {:?} has no respondents", t.label)));
        }
        if t.correct > t.total {
            return Err(Error::validation(format!("question {:?} has {} correct of {}", t.label, t.correct, t.total)));
        }
        Ok(100.0 * t.correct as f64 / t.total as f64)
    };

    let mut per_question = Vec::with_capacity(pre.len());
    for p in pre {
        let q = post
            .iter()
            .find(|q| q.label == p.label)
            .ok_or_else(|| Error::validation(format!("question {:?} is missing from the post-test", p.label)))?;
        per_question.push(PrePostRow { label: p.label.clone(), pre_percent: percent(p)?, post_percent: percent(q)? });
    }
    let n = per_question.len() as f64;
    let pre_average = per_question.iter().map(|r| r.pre_percent).sum::<f64>() / n;
    let post_average = per_question.iter().map(|r| r.post_percent).sum::<f64>() / n;
    Ok(PrePostReport { per_question, pre_average, post_average })
}
