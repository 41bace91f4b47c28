//! Adaptive random-walk Metropolis-within-Gibbs for the random-intercept
//! logistic model.
//!
//! Parameters are updated one at a time in unconstrained space, in the order
//! `alpha_1..alpha_R, log sigma, u_1..u_S`. Each coordinate has its own
//! proposal scale, tuned during warmup by Robbins–Monro steps toward a 0.44
//! acceptance rate and frozen afterwards.
//!
//! Each sweep ends with a block move that shifts every `alpha` up and every
//! `u` down by the same amount. The likelihood only sees `alpha + u`, so
//! single-coordinate updates crawl along that ridge; the shift move crosses
//! it in one step and only the priors enter its acceptance ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{GlmmSpec, SigmaPrior};

const TARGET_ACCEPTANCE: f64 = 0.44;
const ADAPTATION_DECAY: f64 = 0.6;

#[derive(Debug, Clone)]
pub(crate) struct Observation {
    pub student: usize,
    pub iteration: usize,
    pub covered: f64,
    pub trials: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub iterations: usize,
    pub students: usize,
    obs: Vec<Observation>,
    by_iteration: Vec<Vec<usize>>,
    by_student: Vec<Vec<usize>>,
    alpha_scale: f64,
    sigma_prior: SigmaPrior,
}

/// Raw output of one chain: `draws` is row-major, one row of
/// `alpha.., sigma, u..` per kept iteration.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ChainOutput {
    pub draws: Vec<f64>,
    pub acceptance: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Model {
    pub fn new(iterations: usize, students: usize, obs: Vec<Observation>, spec: &GlmmSpec) -> Self {
        let mut by_iteration = vec![Vec::new(); iterations];
        let mut by_student = vec![Vec::new(); students];
        for (i, o) in obs.iter().enumerate() {
            by_iteration[o.iteration].push(i);
            by_student[o.student].push(i);
        }
        Self {
            iterations,
            students,
            obs,
            by_iteration,
            by_student,
            alpha_scale: spec.alpha_prior_scale,
            sigma_prior: spec.sigma_prior,
        }
    }

    pub fn dim(&self) -> usize {
        self.iterations + 1 + self.students
    }

    fn sigma_slot(&self) -> usize {
        self.iterations
    }

    fn log_lik(o: &Observation, eta: f64) -> f64 {
        o.covered * eta - o.trials * softplus(eta)
    }

    fn alpha_conditional(&self, state: &State, r: usize, alpha: f64) -> f64 {
        let lik: f64 = self.by_iteration[r].iter().map(|&i| {
            let o = &self.obs[i];
            Self::log_lik(o, alpha + state.u[o.student])
        }).sum();
        lik - 0.5 * (alpha / self.alpha_scale).powi(2)
    }

    fn u_conditional(&self, state: &State, s: usize, u: f64) -> f64 {
        let lik: f64 = self.by_student[s].iter().map(|&i| {
            let o = &self.obs[i];
            Self::log_lik(o, state.alpha[o.iteration] + u)
        }).sum();
        lik - 0.5 * (u / state.sigma()).powi(2)
    }

    /// Conditional of `log sigma`, including the Jacobian `+ log sigma`.
    fn log_sigma_conditional(&self, state: &State, log_sigma: f64, prior_scale: f64) -> f64 {
        let sigma = log_sigma.exp();
        let sum_sq: f64 = state.u.iter().map(|u| u * u).sum();
        -(self.students as f64) * log_sigma - 0.5 * sum_sq / (sigma * sigma) - 0.5 * (sigma / prior_scale).powi(2)
            + log_sigma
    }

    /// Log prior terms that change under the ridge shift.
    fn shift_prior(&self, state: &State, delta: f64) -> f64 {
        let alpha: f64 = state.alpha.iter().map(|a| ((a + delta) / self.alpha_scale).powi(2)).sum();
        let sigma = state.sigma();
        let u: f64 = state.u.iter().map(|u| ((u - delta) / sigma).powi(2)).sum();
        -0.5 * (alpha + u)
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> State {
        let alpha = (0..self.iterations)
            .map(|r| {
                let (y, n) = self.by_iteration[r]
                    .iter()
                    .fold((0.0, 0.0), |(y, n), &i| (y + self.obs[i].covered, n + self.obs[i].trials));
                let p = (y + 0.5) / (n + 1.0);
                (p / (1.0 - p)).ln() + rng.random_range(-1.0..1.0)
            })
            .collect();
        let log_sigma = match self.sigma_prior {
            SigmaPrior::HalfNormal { .. } => rng.random_range(-1.5..0.5),
            SigmaPrior::Fixed { value } => value.ln(),
        };
        let u = if self.samples_u() {
            let scale = log_sigma.exp();
            (0..self.students).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
        } else {
            vec![0.0; self.students]
        };
        State { alpha, log_sigma, u }
    }

    fn samples_u(&self) -> bool {
        !matches!(self.sigma_prior, SigmaPrior::Fixed { value } if value == 0.0)
    }

    pub fn run_chain(&self, spec: &GlmmSpec, chain: usize) -> ChainOutput {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(chain as u64);

        let dim = self.dim();
        let mut state = self.initial_state(&mut rng);
        let mut log_scale = vec![(0.5f64).ln(); dim];
        let mut shift_log_scale = (0.5f64).ln();
        let mut shifts_accepted = 0usize;
        let mut accepted = vec![0usize; dim];
        let mut draws = Vec::with_capacity(spec.draws * dim);
        let total = spec.warmup + spec.draws;

        for t in 0..total {
            let warmup = t < spec.warmup;
            let gain = (t as f64 + 1.0).powf(-ADAPTATION_DECAY);

            for r in 0..self.iterations {
                let current = state.alpha[r];
                let proposal = current + log_scale[r].exp() * rng.sample::<f64, _>(StandardNormal);
                let ratio = self.alpha_conditional(&state, r, proposal) - self.alpha_conditional(&state, r, current);
                let step = metropolis(&mut rng, ratio, || state.alpha[r] = proposal);
                self.track(warmup, gain, step, &mut log_scale[r], &mut accepted[r]);
            }

            let slot = self.sigma_slot();
            if let SigmaPrior::HalfNormal { scale } = self.sigma_prior {
                let current = state.log_sigma;
                let proposal = current + log_scale[slot].exp() * rng.sample::<f64, _>(StandardNormal);
                let ratio = self.log_sigma_conditional(&state, proposal, scale)
                    - self.log_sigma_conditional(&state, current, scale);
                let step = metropolis(&mut rng, ratio, || state.log_sigma = proposal);
                self.track(warmup, gain, step, &mut log_scale[slot], &mut accepted[slot]);
            }

            if self.samples_u() {
                for s in 0..self.students {
                    let k = slot + 1 + s;
                    let current = state.u[s];
                    let proposal = current + log_scale[k].exp() * rng.sample::<f64, _>(StandardNormal);
                    let ratio = self.u_conditional(&state, s, proposal) - self.u_conditional(&state, s, current);
                    let step = metropolis(&mut rng, ratio, || state.u[s] = proposal);
                    self.track(warmup, gain, step, &mut log_scale[k], &mut accepted[k]);
                }

                let delta = shift_log_scale.exp() * rng.sample::<f64, _>(StandardNormal);
                let ratio = self.shift_prior(&state, delta) - self.shift_prior(&state, 0.0);
                let step = metropolis(&mut rng, ratio, || {
                    state.alpha.iter_mut().for_each(|a| *a += delta);
                    state.u.iter_mut().for_each(|u| *u -= delta);
                });
                self.track(warmup, gain, step, &mut shift_log_scale, &mut shifts_accepted);
            }

            if !warmup {
                draws.extend_from_slice(&state.alpha);
                draws.push(state.sigma());
                draws.extend_from_slice(&state.u);
            }
        }

        let kept = spec.draws.max(1) as f64;
        ChainOutput { draws, acceptance: accepted.iter().map(|&a| a as f64 / kept).collect() }
    }

    fn track(&self, warmup: bool, gain: f64, step: Step, log_scale: &mut f64, accepted: &mut usize) {
        if warmup {
            *log_scale += gain * (step.accept_prob - TARGET_ACCEPTANCE);
        } else if step.accepted {
            *accepted += 1;
        }
    }
}

#[derive(Debug, Clone)]
struct State {
    alpha: Vec<f64>,
    log_sigma: f64,
    u: Vec<f64>,
}

impl State {
    fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }
}

#[derive(Debug, Clone, Copy)]
struct Step {
    accept_prob: f64,
    accepted: bool,
}

/// Accepts with probability `min(1, exp(ratio))`, calling `on_accept` when
/// the move is taken.
fn metropolis(rng: &mut ChaCha8Rng, ratio: f64, on_accept: impl FnOnce()) -> Step {
    let accept_prob = if ratio.is_nan() { 0.0 } else { ratio.min(0.0).exp() };
    let accepted = rng.random::<f64>() < accept_prob;
    if accepted {
        on_accept();
    }
    Step { accept_prob, accepted }
}
