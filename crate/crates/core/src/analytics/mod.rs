//! Offline statistics over collected rounds: summaries, binomial reference
//! values, the mixed-effects coverage model, interval-width outliers and
//! pre/post comparison.

mod binomial;
mod dataset;
pub mod glmm;
pub mod grid;
mod outliers;
mod prepost;
mod simulate;
mod summary;

pub use binomial::{binomial_distribution, binomial_pmf, expected_score, logistic, logit};
pub use dataset::{
    aggregate_responses, read_longitudinal_csv, write_aggregated_csv, write_response_export, LongitudinalDataset,
    LongitudinalRecord, ResponseExportRow, AGGREGATED_HEADER, RESPONSE_EXPORT_HEADER,
};
pub use glmm::{fit_glmm, CredibleInterval, FitReport, GlmmFit, GlmmSpec, ScoreMode, SigmaPrior};
pub use grid::{brute_force_posterior, GridPosterior, GridSpec, MarginalSummary};
pub use outliers::{detect_outlier_intervals, CheatFlag, FlagRule, WidthTransform};
pub use prepost::{compare_pre_post, PrePostReport, PrePostRow, QuestionTally};
pub use simulate::simulate_cohort;
pub use summary::{summarize_scores, summarize_scores_out_of, ScoreSummary, DEFAULT_MAX_SCORE};
