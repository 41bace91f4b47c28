//! Bayesian logistic mixed-effects model of per-round coverage:
//!
//! ```text
//! y[s,r] ~ Binomial(N, p[s,r])
//! logit p[s,r] = alpha[r] + u[s]
//! u[s] ~ Normal(0, sigma²)
//! alpha[r] ~ Normal(0, 2.5²),  sigma ~ HalfNormal(1)
//! ```
//!
//! One fixed effect per round, one random intercept per student.

mod diagnostics;
mod quadrature;
mod report;
mod sampler;

pub use diagnostics::{effective_sample_size, split_rhat};
pub use quadrature::{gauss_hermite, normal_expectation};
pub use report::{write_plot_data, DiagnosticsSummary, FitReport, IterationPlotRow, StudentScoreRow};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binomial::logistic;
use super::dataset::LongitudinalDataset;
use crate::error::{Error, Result};
use sampler::{ChainOutput, Model, Observation};

/// Split-R̂ above this marks a fit as unconverged.
pub const RHAT_THRESHOLD: f64 = 1.05;
/// Gauss–Hermite nodes used for the population-averaged transform.
pub const POPULATION_QUADRATURE_NODES: usize = 21;
/// Posterior percentiles reported as (lower, median, upper).
pub const CREDIBLE_LEVEL: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaPrior {
    HalfNormal { scale: f64 },
    /// Degenerate prior pinning sigma; `value = 0` removes the random
    /// intercepts and reduces the model to pooled logistic regression.
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmmSpec {
    /// Questions scored per round; scales the expected-score transform.
    pub questions_per_round: u32,
    pub alpha_prior_scale: f64,
    pub sigma_prior: SigmaPrior,
    pub chains: usize,
    pub draws: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Run chains on the rayon pool. Output is identical either way.
    #[serde(skip)]
    pub parallel: bool,
}

impl Default for GlmmSpec {
    fn default() -> Self {
        Self {
            questions_per_round: 10,
            alpha_prior_scale: 2.5,
            sigma_prior: SigmaPrior::HalfNormal { scale: 1.0 },
            chains: 4,
            draws: 1000,
            warmup: 1000,
            seed: 1,
            parallel: true,
        }
    }
}

impl GlmmSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.questions_per_round == 0 {
            return Err(Error::argument("questions per round must be positive"));
        }
        if !self.alpha_prior_scale.is_finite() || self.alpha_prior_scale <= 0.0 {
            return Err(Error::argument("alpha prior scale must be positive"));
        }
        match self.sigma_prior {
            SigmaPrior::HalfNormal { scale } if !scale.is_finite() || scale <= 0.0 => {
                return Err(Error::argument("sigma prior scale must be positive"));
            }
            SigmaPrior::Fixed { value } if !value.is_finite() || value < 0.0 => {
                return Err(Error::argument("fixed sigma must be finite and non-negative"));
            }
            _ => {}
        }
        if self.chains < 2 {
            return Err(Error::argument("at least 2 chains are required for convergence diagnostics"));
        }
        if self.draws < 4 {
            return Err(Error::argument("at least 4 post-warmup draws per chain are required"));
        }
        Ok(())
    }
}

/// Whether expected scores are for a student with `u = 0` or averaged over
/// the student population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    #[default]
    Typical,
    Population,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "typical" => Ok(ScoreMode::Typical),
            "population" => Ok(ScoreMode::Population),
            other => Err(Error::argument(format!("unknown mode {other:?}; expected typical or population"))),
        }
    }
}

/// 5th, 50th and 95th posterior percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub median: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl CredibleInterval {
    pub fn from_draws(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let tail = (1.0 - CREDIBLE_LEVEL) / 2.0;
        Self {
            median: quantile_sorted(&values, 0.5),
            ci_lower: quantile_sorted(&values, tail),
            ci_upper: quantile_sorted(&values, 1.0 - tail),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// Linear-interpolation quantile of sorted data (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationEstimate {
    pub iteration: u32,
    #[serde(flatten)]
    pub interval: CredibleInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
    pub acceptance: f64,
}

/// Posterior draws for every chain: `values[chain]` is row-major with one row
/// of `alpha.., sigma, u..` per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DrawMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.values.first().map_or(0, |c| c.len() / self.dim())
    }

    pub fn chain_column(&self, chain: usize, param: usize) -> Vec<f64> {
        self.values[chain].iter().skip(param).step_by(self.dim()).copied().collect()
    }

    /// All chains' draws of one parameter, chain by chain.
    pub fn column(&self, param: usize) -> Vec<f64> {
        (0..self.values.len()).flat_map(|c| self.chain_column(c, param)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GlmmFit {
    pub spec: GlmmSpec,
    pub iterations: u32,
    /// Students in the canonical order used for the `u` columns.
    pub students: Vec<String>,
    pub draws: DrawMatrix,
    /// Typical-student expected correct answers per round.
    pub per_iteration: Vec<IterationEstimate>,
    pub sigma: CredibleInterval,
    pub diagnostics: Vec<ParameterDiagnostics>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl GlmmFit {
    pub fn alpha_index(&self, iteration: u32) -> Result<usize> {
        if iteration == 0 || iteration > self.iterations {
            return Err(Error::argument(format!("iteration {iteration} is outside 1..={}", self.iterations)));
        }
        Ok(iteration as usize - 1)
    }

    pub fn sigma_index(&self) -> usize {
        self.iterations as usize
    }

    pub fn alpha_draws(&self, iteration: u32) -> Result<Vec<f64>> {
        Ok(self.draws.column(self.alpha_index(iteration)?))
    }

    pub fn sigma_draws(&self) -> Vec<f64> {
        self.draws.column(self.sigma_index())
    }

    pub fn max_rhat(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.rhat).fold(1.0, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.ess).fold(f64::INFINITY, f64::min)
    }

    /// Expected correct answers in round `iteration` with a 90% equal-tailed
    /// credible interval. Meaningful only for a converged fit.
    pub fn marginal_expected_score(&self, iteration: u32, mode: ScoreMode) -> Result<CredibleInterval> {
        let alpha = self.alpha_draws(iteration)?;
        let n = self.spec.questions_per_round as f64;
        let values = match mode {
            ScoreMode::Typical => alpha.iter().map(|&a| n * logistic(a)).collect(),
            ScoreMode::Population => {
                let (nodes, weights) = gauss_hermite(POPULATION_QUADRATURE_NODES);
                alpha
                    .iter()
                    .zip(self.sigma_draws())
                    .map(|(&a, sigma)| n * normal_expectation(&nodes, &weights, sigma, |u| logistic(a + u)))
                    .collect()
            }
        };
        Ok(CredibleInterval::from_draws(values))
    }
}

/// Fits the model by adaptive Metropolis-within-Gibbs. Deterministic for a
/// given spec; chains use independent streams of one seeded generator, so
/// parallel and sequential runs agree draw for draw.
pub fn fit_glmm(data: &LongitudinalDataset, spec: &GlmmSpec) -> Result<GlmmFit> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::argument("cannot fit an empty dataset"));
    }
    let iterations = data.iterations();

    let students = canonical_student_order(data);
    let index: BTreeMap<&str, usize> = students.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut obs: Vec<Observation> = data
        .records()
        .iter()
        .map(|r| Observation {
            student: index[r.student_id.as_str()],
            iteration: r.iteration as usize - 1,
            covered: r.covered as f64,
            trials: r.num_scored as f64,
        })
        .collect();
    obs.sort_by_key(|o| (o.student, o.iteration));
    let model = Model::new(iterations as usize, students.len(), obs, spec);

    let run = |chain: usize| model.run_chain(spec, chain);
    let chains: Vec<ChainOutput> = if spec.parallel {
        (0..spec.chains).into_par_iter().map(run).collect()
    } else {
        (0..spec.chains).map(run).collect()
    };

    let mut names: Vec<String> = (1..=iterations).map(|r| format!("alpha[{r}]")).collect();
    names.push("sigma".into());
    names.extend(students.iter().map(|s| format!("u[{s}]")));
    let acceptance: Vec<f64> = (0..model.dim())
        .map(|k| chains.iter().map(|c| c.acceptance[k]).sum::<f64>() / chains.len() as f64)
        .collect();
    let draws = DrawMatrix { names, values: chains.into_iter().map(|c| c.draws).collect() };

    let diagnostics: Vec<ParameterDiagnostics> = (0..draws.dim())
        .map(|k| {
            let columns: Vec<Vec<f64>> = (0..spec.chains).map(|c| draws.chain_column(c, k)).collect();
            let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
            ParameterDiagnostics {
                name: draws.names[k].clone(),
                rhat: split_rhat(&refs),
                ess: effective_sample_size(&refs),
                acceptance: acceptance[k],
            }
        })
        .collect();
    let converged = diagnostics.iter().all(|d| d.rhat <= RHAT_THRESHOLD);

    let mut warnings = Vec::new();
    if students.len() == 1 {
        warnings.push("only one student: the random-intercept scale is weakly identified".to_string());
    }
    if !converged {
        let worst = diagnostics.iter().filter(|d| d.rhat.is_nan() || d.rhat > RHAT_THRESHOLD).map(|d| d.name.as_str()).collect::<Vec<_>>();
        warnings.push(format!("split R-hat above {RHAT_THRESHOLD} for {}", worst.join(", ")));
    }

    let mut fit = GlmmFit {
        spec: spec.clone(),
        iterations,
        students,
        sigma: CredibleInterval::from_draws(draws.column(iterations as usize)),
        draws,
        per_iteration: Vec::new(),
        diagnostics,
        converged,
        warnings,
    };
    fit.per_iteration = (1..=iterations)
        .map(|r| Ok(IterationEstimate { iteration: r, interval: fit.marginal_expected_score(r, ScoreMode::Typical)? }))
        .collect::<Result<_>>()?;
    Ok(fit)
}

/// Orders students by their data, so relabeling ids cannot change the
/// sampler's update order. Students with identical data are interchangeable.
fn canonical_student_order(data: &LongitudinalDataset) -> Vec<String> {
    // (iteration, covered, num_scored) per record
    type Signature = Vec<(u32, u32, u32)>;
    let mut signatures: BTreeMap<&str, Signature> = BTreeMap::new();
    for r in data.records() {
        signatures.entry(&r.student_id).or_default().push((r.iteration, r.covered, r.num_scored));
    }
    let mut students: Vec<(Signature, &str)> = signatures
        .into_iter()
        .map(|(id, mut sig)| {
            sig.sort_unstable();
            (sig, id)
        })
        .collect();
    students.sort();
    students.into_iter().map(|(_, id)| id.to_string()).collect()
}
