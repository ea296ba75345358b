//! Shared test oracles.
#![allow(dead_code)]

use std::f64::consts::{LN_2, PI};

/// Nodes and weights of `n`-point Gauss–Hermite quadrature for the weight
/// `e^{-x²}`, by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[g(t)]` for `t ~ N(0, 1)`.
pub fn gaussian_expectation(n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(n);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * g(std::f64::consts::SQRT_2 * xi)).sum::<f64>() / PI.sqrt()
}

/// `B = 2` reduces to a scalar problem: with `d = √2 t/Σ + 1/Σ²` and
/// `t ~ N(0, 1)`, the weight on the true component is `s(d)` (logistic),
/// the squared error is `2 (1 − s(d))²` and the entropy is `log2(1 + e^{−d})`.
pub fn b2_mmse(sigma: f64, nodes: usize) -> f64 {
    gaussian_expectation(nodes, |t| {
        let d = std::f64::consts::SQRT_2 * t / sigma + 1.0 / (sigma * sigma);
        let miss = 1.0 / (1.0 + d.exp());
        2.0 * miss * miss
    })
}

pub fn b2_miss(sigma: f64, nodes: usize) -> f64 {
    gaussian_expectation(nodes, |t| {
        let d = std::f64::consts::SQRT_2 * t / sigma + 1.0 / (sigma * sigma);
        1.0 / (1.0 + d.exp())
    })
}

pub fn b2_entropy(sigma: f64, nodes: usize) -> f64 {
    gaussian_expectation(nodes, |t| {
        let d = std::f64::consts::SQRT_2 * t / sigma + 1.0 / (sigma * sigma);
        softplus(-d) / LN_2
    })
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Central difference of `f` at `x`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
