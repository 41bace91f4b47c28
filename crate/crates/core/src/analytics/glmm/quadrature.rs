//! Gauss–Hermite nodes and weights for `∫ f(x) e^{-x²} dx`.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule, found by Newton iteration on the
/// orthonormal Hermite recurrence. Nodes are returned in ascending order.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        // asymptotic starting guesses for the largest roots, then the
        // previous roots extrapolated
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// `E[f(u)]` for `u ~ Normal(0, sigma²)` with a prepared rule.
pub fn normal_expectation(nodes: &[f64], weights: &[f64], sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
    let scale = std::f64::consts::SQRT_2 * sigma;
    nodes.iter().zip(weights).map(|(&x, &w)| w * f(scale * x)).sum::<f64>() / PI.sqrt()
}
