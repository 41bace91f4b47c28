//! Split-R̂ and multi-chain effective sample size.

/// Split-R̂ over equal-length chains. Each chain is halved (dropping the
/// middle draw of odd-length chains). Constant draws give 1.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let half = c.len() / 2;
            [&c[..half], &c[c.len() - half..]]
        })
        .collect();
    if halves.len() < 2 || halves[0].len() < 2 {
        return f64::NAN;
    }
    let (w, var_plus) = variance_components(&halves);
    if w == 0.0 {
        return if var_plus == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (var_plus / w).sqrt()
}

/// Returns the mean within-chain variance `W` and the pooled estimate
/// `var⁺ = (n − 1)/n · W + B/n`.
fn variance_components(chains: &[&[f64]]) -> (f64, f64) {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    (w, (n - 1.0) / n * w + b / n)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn autocovariance(xs: &[f64], mu: f64, lag: usize) -> f64 {
    let n = xs.len();
    xs[..n - lag].iter().zip(&xs[lag..]).map(|(a, b)| (a - mu) * (b - mu)).sum::<f64>() / n as f64
}

/// Effective sample size from the combined autocorrelation of all chains,
/// truncated with Geyer's initial monotone positive sequence.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let m = chains.len();
    if m == 0 || chains[0].len() < 4 {
        return f64::NAN;
    }
    let n = chains[0].len();
    let total = (m * n) as f64;
    let (w, var_plus) = variance_components(chains);
    if var_plus == 0.0 {
        return total;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let rho = |lag: usize| -> f64 {
        let mean_acov = chains.iter().zip(&means).map(|(c, &mu)| autocovariance(c, mu, lag)).sum::<f64>() / m as f64;
        1.0 - (w - mean_acov) / var_plus
    };

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / total.log10());
    total / tau
}
