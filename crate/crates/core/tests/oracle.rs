mod common;

use std::f64::consts::{LN_2, PI};

use common::*;
use ssc_core::denoiser::SampleBank;
use ssc_core::{denoise_section, entropy_estimate, mmse_estimate, MCConfig, TableGrid, Tables, UnderlyingParams};

#[test]
fn quadrature_integrates_gaussian_moments() {
    let (x, w) = gauss_hermite(64);
    assert!((w.iter().sum::<f64>() - PI.sqrt()).abs() < 1e-12);
    assert!(w.iter().all(|&v| v > 0.0));
    assert!(x.windows(2).all(|p| p[0] > p[1]));
    assert!((gaussian_expectation(64, |t| t * t) - 1.0).abs() < 1e-12);
    assert!((gaussian_expectation(64, |t| t.powi(4)) - 3.0).abs() < 1e-11);
    assert!((gaussian_expectation(64, |t| (0.3 * t).exp()) - (0.045f64).exp()).abs() < 1e-12);
}

#[test]
fn oracle_converges_in_node_count() {
    // The steep logistic tail at small Σ converges slowly, but far below MC error.
    for (sigma, tol) in [(0.25, 1e-4), (0.4, 1e-6), (0.7, 1e-8), (1.5, 1e-10), (3.0, 1e-10)] {
        assert!((b2_mmse(sigma, 64) - b2_mmse(sigma, 96)).abs() < tol, "sigma={sigma}");
        assert!((b2_entropy(sigma, 64) - b2_entropy(sigma, 96)).abs() < tol, "sigma={sigma}");
    }
}

#[test]
fn oracle_satisfies_nishimori_and_immse() {
    for sigma in log_grid(0.6, 3.0, 12) {
        assert!((b2_mmse(sigma, 96) - b2_miss(sigma, 96)).abs() < 1e-9, "sigma={sigma}");
        // derivative in λ = Σ^{-2}
        let lam = sigma.powi(-2);
        let d = central_difference(|l| b2_entropy(l.powf(-0.5), 96), lam, 1e-4 * lam);
        let target = -b2_mmse(sigma, 96) / (2.0 * LN_2);
        assert!((d - target).abs() < 1e-6 * (1.0 + target.abs()), "sigma={sigma}: {d} vs {target} ratio {}", d / target);
    }
}

#[test]
fn denoiser_matches_logistic_at_b2() {
    for (z, sigma) in [([0.3, -1.2], 0.8), ([-2.0, 0.5], 1.7), ([0.0, 0.0], 0.4)] {
        let f = denoise_section(&z, sigma, 2).unwrap();
        let d = (z[0] - z[1]) / sigma + 1.0 / (sigma * sigma);
        assert!((f[0] - 1.0 / (1.0 + (-d).exp())).abs() < 1e-14);
        assert!((f[0] + f[1] - 1.0).abs() < 1e-15);
    }
}

#[test]
fn monte_carlo_matches_oracle() {
    let p = UnderlyingParams::from_snr(2, 1.0, 15.0).unwrap();
    let mc = MCConfig::new(11, 40_000);
    for sigma in [0.35, 0.8, 1.6, 2.5] {
        let m = mmse_estimate(sigma, &p, &mc).unwrap();
        let s = entropy_estimate(sigma, &p, &mc).unwrap();
        assert!((m.value - b2_mmse(sigma, 64)).abs() <= 4.0 * m.stderr, "mmse at {sigma}");
        assert!((s.value - b2_entropy(sigma, 64)).abs() <= 4.0 * s.stderr, "entropy at {sigma}");
    }
}

#[test]
fn antithetic_estimates_match_oracle() {
    let mc = MCConfig { seed: 3, n_samples: 20_000, antithetic: true };
    let bank = SampleBank::new(2, &mc).unwrap();
    for sigma in [0.5, 1.2] {
        let est = bank.evaluate(sigma);
        assert!((est.mmse.value - b2_mmse(sigma, 64)).abs() <= 4.0 * est.mmse.stderr);
        assert!((est.entropy.value - b2_entropy(sigma, 64)).abs() <= 4.0 * est.entropy.stderr);
    }
}

#[test]
fn tables_track_oracle_between_nodes() {
    let p = UnderlyingParams::from_snr(2, 1.0, 15.0).unwrap();
    let grid = TableGrid::new(0.05, 20.0, 512).unwrap();
    let t = Tables::build(&p, &grid, &MCConfig::new(5, 40_000)).unwrap();
    let nodes = grid.nodes();
    for k in (40..480).step_by(37) {
        let sigma = (nodes[k] * nodes[k + 1]).sqrt();
        let m = t.mmse.eval(sigma);
        let s = t.entropy.eval(sigma);
        let tol_m = 4.0 * t.mmse.stderr_at(sigma) + 2e-4;
        let tol_s = 4.0 * t.entropy.stderr_at(sigma) + 2e-4;
        assert!((m - b2_mmse(sigma, 64)).abs() <= tol_m, "mmse at {sigma}: {m}");
        assert!((s - b2_entropy(sigma, 64)).abs() <= tol_s, "entropy at {sigma}: {s}");
    }
}
