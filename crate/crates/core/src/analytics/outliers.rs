//! Flags students whose interval widths sit far above the class on several
//! questions, the signature of padding most answers with huge intervals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quiz::{QuestionBank, ResponseSheet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthTransform {
    Raw,
    /// `ln(1 + width)`; widths span orders of magnitude across questions.
    #[default]
    Log,
}

impl WidthTransform {
    fn apply(self, width: f64) -> f64 {
        match self {
            WidthTransform::Raw => width,
            WidthTransform::Log => width.ln_1p(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagRule {
    pub z_threshold: f64,
    pub count_threshold: usize,
    pub transform: WidthTransform,
}

impl Default for FlagRule {
    fn default() -> Self {
        Self { z_threshold: 2.0, count_threshold: 3, transform: WidthTransform::Log }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheatFlag {
    pub student_id: String,
    pub flagged_questions: Vec<(String, f64)>,
    pub rule: FlagRule,
}

/// Flags students with at least `count_threshold` questions whose width
/// z-score exceeds `z_threshold`. Questions answered by fewer than two
/// students, or with zero spread, contribute no flags.
pub fn detect_outlier_intervals(responses: &[ResponseSheet], bank: &QuestionBank, rule: FlagRule) -> Result<Vec<CheatFlag>> {
    if rule.z_threshold.is_nan() || rule.z_threshold <= 0.0 {
        return Err(Error::argument("z threshold must be positive"));
    }
    if rule.count_threshold == 0 {
        return Err(Error::argument("count threshold must be at least 1"));
    }

    let mut hits: BTreeMap<usize, Vec<(String, f64)>> = BTreeMap::new();
    let mut defined = false;
    for question in bank.questions() {
        let widths: Vec<(usize, f64)> = responses
            .iter()
            .enumerate()
            .filter_map(|(i, sheet)| sheet.answer_for(&question.id).map(|a| (i, rule.transform.apply(a.width()))))
            .collect();
        if widths.len() < 2 {
            continue;
        }
        defined = true;
        let n = widths.len() as f64;
        let mean = widths.iter().map(|(_, w)| w).sum::<f64>() / n;
        let sd = (widths.iter().map(|(_, w)| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if !sd.is_finite() || sd <= 0.0 {
            continue;
        }
        for (student, w) in widths {
            let z = (w - mean) / sd;
            if z > rule.z_threshold {
                hits.entry(student).or_default().push((question.id.clone(), z));
            }
        }
    }
    if !defined {
        return Err(Error::validation("no question has two or more responses; width spread is undefined"));
    }

    Ok(hits
        .into_iter()
        .filter(|(_, flagged)| flagged.len() >= rule.count_threshold)
        .map(|(student, flagged_questions)| CheatFlag {
            student_id: responses[student].student_id.clone(),
            flagged_questions,
            rule,
        })
        .collect())
}
