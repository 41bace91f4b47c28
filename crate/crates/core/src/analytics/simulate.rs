use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};

use super::binomial::logistic;
use super::dataset::{LongitudinalDataset, LongitudinalRecord};
use crate::error::{Error, Result};

/// Synthetic balanced cohort from the random-intercept logistic model:
/// one `u_s ~ Normal(0, sigma²)` per student, then
/// `y ~ Binomial(n, logistic(alpha_r + u_s))` for every round.
pub fn simulate_cohort(students: usize, true_alpha: &[f64], true_sigma: f64, n: u32, seed: u64) -> Result<LongitudinalDataset> {
    if students == 0 || true_alpha.is_empty() {
        return Err(Error::argument("need at least one student and one iteration"));
    }
    if !true_sigma.is_finite() || true_sigma < 0.0 {
        return Err(Error::argument(format!("sigma must be finite and non-negative, got {true_sigma}")));
    }
    if n == 0 {
        return Err(Error::argument("questions per round must be positive"));
    }
    if true_alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::argument("alpha values must be finite"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let effect = Normal::new(0.0, true_sigma).map_err(|e| Error::argument(e.to_string()))?;
    let width = students.to_string().len().max(2);
    let mut records = Vec::with_capacity(students * true_alpha.len());
    for s in 0..students {
        let u = effect.sample(&mut rng);
        let student_id = format!("s{:0width$}", s + 1);
        for (r, &alpha) in true_alpha.iter().enumerate() {
            let p = logistic(alpha + u);
            let y = Binomial::new(n as u64, p).map_err(|e| Error::argument(e.to_string()))?.sample(&mut rng);
            records.push(LongitudinalRecord { student_id: student_id.clone(), iteration: r as u32 + 1, covered: y as u32, num_scored: n });
        }
    }
    LongitudinalDataset::new(records, Some(true_alpha.len() as u32))
}
