use crate::error::{Error, Result};

/// `C(n, k) p^k (1 − p)^(n − k)`.
pub fn binomial_pmf(n: u64, p: f64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::argument(format!("k = {k} is outside 0..={n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::argument(format!("success probability {p} is outside [0, 1]")));
    }
    if p == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if k == n { 1.0 } else { 0.0 });
    }
    if let Some(choose) = exact_choose(n, k) {
        return Ok(choose * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
    }
    Ok((ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp())
}

/// `C(n, k)` when it is exactly representable as an f64.
fn exact_choose(n: u64, k: u64) -> Option<f64> {
    if n > 60 {
        return None;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    (c < (1u128 << 53)).then_some(c as f64)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// The pmf over `0..=n`.
pub fn binomial_distribution(n: u64, p: f64) -> Result<Vec<f64>> {
    (0..=n).map(|k| binomial_pmf(n, p, k)).collect()
}

/// Expected coverage count for someone whose intervals really hold the
/// stated level: `n · level`.
pub fn expected_score(n: u32, confidence_level: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::argument("n must be at least 1"));
    }
    if !(confidence_level > 0.0 && confidence_level < 1.0) {
        return Err(Error::argument(format!("confidence level {confidence_level} is outside (0, 1)")));
    }
    Ok(n as f64 * confidence_level)
}

/// Inverse logit, stable for large |x|.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}
