//! Brute-force lattice posterior for tiny instances of the coverage model.
//!
//! This is a reference for checking the sampler, so it shares none of its
//! code: the lattice spans `alpha_1..alpha_R` and `sigma`, each student's
//! intercept is integrated out by a midpoint rule on a standard-normal grid,
//! and marginals come from normalized summation over the lattice. Cost grows
//! exponentially in the lattice dimension, so at most three dimensions are
//! accepted.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dataset::LongitudinalDataset;
use super::glmm::{GlmmSpec, SigmaPrior};
use crate::error::{Error, Result};

pub const MAX_LATTICE_DIMENSIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alpha_points: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub sigma_points: usize,
    pub sigma_max: f64,
    /// Nodes of the midpoint rule over the standardized intercept.
    pub effect_nodes: usize,
    /// The intercept integral covers `[-effect_span, effect_span]` sds.
    pub effect_span: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            alpha_points: 200,
            alpha_min: -10.0,
            alpha_max: 10.0,
            sigma_points: 200,
            sigma_max: 5.0,
            effect_nodes: 201,
            effect_span: 8.0,
        }
    }
}

impl GridSpec {
    /// A lighter lattice for three-dimensional problems.
    pub fn coarse() -> Self {
        Self { alpha_points: 90, sigma_points: 60, effect_nodes: 121, ..Self::default() }
    }
}

/// Posterior summary of one lattice coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPosterior {
    pub alpha: Vec<MarginalSummary>,
    /// `logistic(alpha_r)` on the probability scale.
    pub success_probability: Vec<MarginalSummary>,
    /// `None` when sigma is pinned by a degenerate prior.
    pub sigma: Option<MarginalSummary>,
    /// Sum of the normalized lattice weights.
    pub total_mass: f64,
    pub alpha_marginals: Vec<Vec<f64>>,
}

fn inv_logit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `y ln p + (n − y) ln(1 − p)` at `p = inv_logit(eta)`, written without
/// cancellation for large |eta|.
fn binomial_kernel(y: f64, n: f64, eta: f64) -> f64 {
    let log_p = -((-eta).max(0.0) + (-eta.abs()).exp().ln_1p());
    let log_q = log_p - eta;
    y * log_p + (n - y) * log_q
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn brute_force_posterior(data: &LongitudinalDataset, spec: &GlmmSpec, grid: &GridSpec) -> Result<GridPosterior> {
    if data.is_empty() {
        return Err(Error::argument("cannot compute a posterior for an empty dataset"));
    }
    let iterations = data.iterations() as usize;
    let sigma_free = matches!(spec.sigma_prior, SigmaPrior::HalfNormal { .. });
    let dims = iterations + usize::from(sigma_free);
    if dims > MAX_LATTICE_DIMENSIONS {
        return Err(Error::argument(format!(
            "lattice would have {dims} dimensions; brute force is limited to {MAX_LATTICE_DIMENSIONS}"
        )));
    }
    if grid.alpha_points < 2 || grid.sigma_points < 2 || grid.effect_nodes < 1 {
        return Err(Error::argument("lattice needs at least two points per axis"));
    }

    let alpha_step = (grid.alpha_max - grid.alpha_min) / grid.alpha_points as f64;
    let alphas: Vec<f64> = (0..grid.alpha_points).map(|i| grid.alpha_min + (i as f64 + 0.5) * alpha_step).collect();
    let (sigmas, sigma_step): (Vec<f64>, f64) = match spec.sigma_prior {
        SigmaPrior::HalfNormal { .. } => {
            let step = grid.sigma_max / grid.sigma_points as f64;
            ((0..grid.sigma_points).map(|k| (k as f64 + 0.5) * step).collect(), step)
        }
        SigmaPrior::Fixed { value } => (vec![value], 0.0),
    };

    // standardized intercept nodes with log(weight * density)
    let (nodes, log_node_weights): (Vec<f64>, Vec<f64>) = if sigmas.iter().all(|&s| s == 0.0) {
        (vec![0.0], vec![0.0])
    } else {
        let step = 2.0 * grid.effect_span / grid.effect_nodes as f64;
        let z: Vec<f64> = (0..grid.effect_nodes).map(|j| -grid.effect_span + (j as f64 + 0.5) * step).collect();
        let raw: Vec<f64> = z.iter().map(|z| step * (-0.5 * z * z).exp() / (2.0 * PI).sqrt()).collect();
        let total: f64 = raw.iter().sum();
        (z, raw.iter().map(|w| (w / total).ln()).collect())
    };

    // students with identical records share a likelihood factor
    let mut per_student: BTreeMap<&str, Vec<(usize, u32, u32)>> = BTreeMap::new();
    for r in data.records() {
        per_student.entry(&r.student_id).or_default().push((r.iteration as usize - 1, r.covered, r.num_scored));
    }
    let mut groups: BTreeMap<Vec<(usize, u32, u32)>, usize> = BTreeMap::new();
    for (_, mut obs) in per_student {
        obs.sort_unstable();
        *groups.entry(obs).or_default() += 1;
    }

    // kernel[(r, y, n)][a][k][j]
    let mut kernels: BTreeMap<(usize, u32, u32), Vec<f64>> = BTreeMap::new();
    let (na, ns, nz) = (alphas.len(), sigmas.len(), nodes.len());
    for obs in groups.keys().flatten() {
        kernels.entry(*obs).or_insert_with(|| {
            let mut table = Vec::with_capacity(na * ns * nz);
            for &a in &alphas {
                for &s in &sigmas {
                    for &z in &nodes {
                        table.push(binomial_kernel(obs.1 as f64, obs.2 as f64, a + s * z));
                    }
                }
            }
            table
        });
    }

    let alpha_prior: Vec<f64> = alphas.iter().map(|a| -0.5 * (a / spec.alpha_prior_scale).powi(2)).collect();
    let sigma_prior: Vec<f64> = match spec.sigma_prior {
        SigmaPrior::HalfNormal { scale } => sigmas.iter().map(|s| -0.5 * (s / scale).powi(2)).collect(),
        SigmaPrior::Fixed { .. } => vec![0.0],
    };

    let alpha_axes = iterations;
    let points = na.pow(alpha_axes as u32) * ns;
    let mut log_post = Vec::with_capacity(points);
    let mut scratch = vec![0.0; nz];
    let mut index = vec![0usize; alpha_axes];
    for p in 0..points {
        let k = p % ns;
        let mut rest = p / ns;
        for slot in index.iter_mut().rev() {
            *slot = rest % na;
            rest /= na;
        }
        let mut lp = sigma_prior[k] + index.iter().map(|&a| alpha_prior[a]).sum::<f64>();
        for (obs, &count) in &groups {
            scratch.copy_from_slice(&log_node_weights);
            for o in obs {
                let table = &kernels[o];
                let base = (index[o.0] * ns + k) * nz;
                for (acc, v) in scratch.iter_mut().zip(&table[base..base + nz]) {
                    *acc += v;
                }
            }
            lp += count as f64 * log_sum_exp(&scratch);
        }
        log_post.push(lp);
    }

    let norm = log_sum_exp(&log_post);
    let weights: Vec<f64> = log_post.iter().map(|lp| (lp - norm).exp()).collect();
    let total_mass: f64 = weights.iter().sum();

    let mut alpha_marginals = vec![vec![0.0; na]; alpha_axes];
    let mut sigma_marginal = vec![0.0; ns];
    for (p, &w) in weights.iter().enumerate() {
        sigma_marginal[p % ns] += w;
        let mut rest = p / ns;
        for axis in (0..alpha_axes).rev() {
            alpha_marginals[axis][rest % na] += w;
            rest /= na;
        }
    }

    let alpha: Vec<MarginalSummary> =
        alpha_marginals.iter().map(|m| summarize_axis(&alphas, alpha_step, m)).collect();
    let success_probability = alpha
        .iter()
        .zip(&alpha_marginals)
        .map(|(s, m)| MarginalSummary {
            mean: alphas.iter().zip(m).map(|(a, w)| inv_logit(*a) * w).sum::<f64>() / m.iter().sum::<f64>(),
            median: inv_logit(s.median),
            q05: inv_logit(s.q05),
            q95: inv_logit(s.q95),
        })
        .collect();
    let sigma = sigma_free.then(|| summarize_axis(&sigmas, sigma_step, &sigma_marginal));

    Ok(GridPosterior { alpha, success_probability, sigma, total_mass, alpha_marginals })
}

/// Quantiles treat each cell's mass as spread uniformly over the cell.
fn summarize_axis(midpoints: &[f64], step: f64, mass: &[f64]) -> MarginalSummary {
    let total: f64 = mass.iter().sum();
    let mean = midpoints.iter().zip(mass).map(|(x, w)| x * w).sum::<f64>() / total;
    let quantile = |q: f64| -> f64 {
        let target = q * total;
        let mut cumulative = 0.0;
        for (x, w) in midpoints.iter().zip(mass) {
            if cumulative + w >= target && *w > 0.0 {
                let left = x - step / 2.0;
                return left + step * (target - cumulative) / w;
            }
            cumulative += w;
        }
        midpoints[midpoints.len() - 1] + step / 2.0
    };
    MarginalSummary { mean, median: quantile(0.5), q05: quantile(0.05), q95: quantile(0.95) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::dataset::LongitudinalRecord;

    fn data(rows: &[(&str, u32, u32)]) -> LongitudinalDataset {
        let records = rows
            .iter()
            .map(|&(s, r, y)| LongitudinalRecord { student_id: s.into(), iteration: r, covered: y, num_scored: 10 })
            .collect();
        LongitudinalDataset::new(records, None).unwrap()
    }

    #[test]
    fn kernel_matches_direct_formula() {
        for eta in [-30.0, -2.0, 0.0, 0.7, 25.0] {
            let p = inv_logit(eta);
            let direct = 3.0 * p.ln() + 7.0 * (1.0 - p).ln();
            if direct.is_finite() && eta.abs() < 20.0 {
                assert!((binomial_kernel(3.0, 10.0, eta) - direct).abs() < 1e-9, "eta {eta}");
            }
            assert!(binomial_kernel(3.0, 10.0, eta).is_finite());
        }
    }

    #[test]
    fn mass_normalizes() {
        let post = brute_force_posterior(&data(&[("a", 1, 7)]), &GlmmSpec::default(), &GridSpec::default()).unwrap();
        assert!((post.total_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_round_pushes_probability_up() {
        let post = brute_force_posterior(&data(&[("a", 1, 10)]), &GlmmSpec::default(), &GridSpec::default()).unwrap();
        assert!(post.success_probability[0].median > 0.8, "{:?}", post.success_probability[0]);
    }

    #[test]
    fn symmetric_rounds_agree() {
        let post = brute_force_posterior(&data(&[("a", 1, 5), ("a", 2, 5)]), &GlmmSpec::default(), &GridSpec::coarse()).unwrap();
        let step = 20.0 / GridSpec::coarse().alpha_points as f64;
        assert!((post.alpha[0].median - post.alpha[1].median).abs() < step);
        assert!((post.total_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refuses_large_lattices() {
        let d = data(&[("a", 1, 5), ("a", 2, 5), ("a", 3, 5)]);
        assert!(matches!(brute_force_posterior(&d, &GlmmSpec::default(), &GridSpec::coarse()), Err(Error::Argument(_))));
    }

    #[test]
    fn data_tightens_alpha() {
        // prior sd of alpha is 2.5; one 5/10 round should pull it toward 0
        let post = brute_force_posterior(&data(&[("a", 1, 5)]), &GlmmSpec::default(), &GridSpec::default()).unwrap();
        let a = post.alpha[0];
        assert!(a.median.abs() < 0.1);
        assert!(a.q95 - a.q05 < 2.0 * 1.645 * 2.5);
    }
}
