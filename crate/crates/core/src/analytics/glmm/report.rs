use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CredibleInterval, GlmmFit, GlmmSpec, IterationEstimate, ScoreMode};
use crate::analytics::dataset::LongitudinalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub max_rhat: f64,
    pub min_ess: f64,
    pub converged: bool,
}

/// Machine-readable summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mode: ScoreMode,
    pub per_iteration: Vec<IterationEstimate>,
    pub sigma: CredibleInterval,
    pub diagnostics: DiagnosticsSummary,
    pub warnings: Vec<String>,
    pub spec: GlmmSpec,
}

impl FitReport {
    pub fn new(fit: &GlmmFit, mode: ScoreMode) -> Result<Self> {
        let per_iteration = (1..=fit.iterations)
            .map(|r| Ok(IterationEstimate { iteration: r, interval: fit.marginal_expected_score(r, mode)? }))
            .collect::<Result<_>>()?;
        Ok(Self {
            mode,
            per_iteration,
            sigma: fit.sigma,
            diagnostics: DiagnosticsSummary { max_rhat: fit.max_rhat(), min_ess: fit.min_ess(), converged: fit.converged },
            warnings: fit.warnings.clone(),
            spec: fit.spec.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentScoreRow {
    pub student_id: String,
    pub iteration: u32,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationPlotRow {
    pub iteration: u32,
    /// Observed mean score; empty when nobody took part that round.
    pub mean: Option<f64>,
    pub posterior_median: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Writes the two plot-ready tables: per-student trajectories and
/// per-round observed means with model estimates.
pub fn write_plot_data(
    data: &LongitudinalDataset,
    fit: &GlmmFit,
    mode: ScoreMode,
    students_out: impl Write,
    iterations_out: impl Write,
) -> Result<()> {
    let mut students = csv::Writer::from_writer(students_out);
    let mut rows: Vec<StudentScoreRow> = data
        .records()
        .iter()
        .map(|r| StudentScoreRow { student_id: r.student_id.clone(), iteration: r.iteration, score: r.covered })
        .collect();
    rows.sort_by(|a, b| (&a.student_id, a.iteration).cmp(&(&b.student_id, b.iteration)));
    for row in &rows {
        students.serialize(row).map_err(csv_io)?;
    }
    students.flush()?;

    let by_iteration = data.scores_by_iteration();
    let mut iterations = csv::Writer::from_writer(iterations_out);
    for r in 1..=fit.iterations {
        let estimate = fit.marginal_expected_score(r, mode)?;
        let mean = by_iteration.get(&r).map(|s| s.iter().map(|&y| y as f64).sum::<f64>() / s.len() as f64);
        iterations
            .serialize(IterationPlotRow {
                iteration: r,
                mean,
                posterior_median: estimate.median,
                ci_lower: estimate.ci_lower,
                ci_upper: estimate.ci_upper,
            })
            .map_err(csv_io)?;
    }
    iterations.flush()?;
    Ok(())
}

fn csv_io(err: csv::Error) -> Error {
    Error::Io(err.into())
}
