use std::f64::consts::LN_2;

use ssc_core::potential::{potential_energy_derivative, stationarity_bound, DEFAULT_GAP_GRID};
use ssc_core::verification::potential_slope;
use ssc_core::*;

const SNR: f64 = 15.0;

fn tables(b: usize, n: usize, points: usize) -> Tables {
    let p = UnderlyingParams::from_snr(b, 1.0, SNR).unwrap();
    Tables::build(&p, &TableGrid::for_rates(p.sigma2, 0.02, 2.5, points), &MCConfig::new(3, n)).unwrap()
}

#[test]
fn energy_derivative_matches_central_difference() {
    let p = UnderlyingParams::from_snr(4, 1.3, SNR).unwrap();
    for e in [0.02, 0.1, 0.5, 0.9] {
        let h = 1e-6;
        let fd = (potential_energy_underlying(e + h, &p) - potential_energy_underlying((e - h).max(0.0), &p))
            / (e + h - (e - h).max(0.0));
        assert!((fd - potential_energy_derivative(e, &p)).abs() < 1e-6, "E={e}");
        assert!(potential_energy_derivative(e, &p) >= 0.0);
    }
}

#[test]
fn entropy_slope_agrees_with_mmse_slope() {
    // dS_u(Σ(E))/dE from the entropy table against mmse(Σ(E)) / (2R ln2 (σ²+E)²).
    let t = tables(8, 40_000, 1024);
    let p = UnderlyingParams::from_snr(8, 1.7, SNR).unwrap();
    for e in [0.05, 0.2, 0.45, 0.8] {
        let h = 5e-3;
        let fd = (potential_underlying(e + h, &p, &t.entropy) - potential_underlying(e - h, &p, &t.entropy)) / (2.0 * h);
        let analytic = potential_slope(e, &p, &t.mmse);
        let bound = stationarity_bound(e, &p, &t.entropy, h).unwrap();
        assert!((fd - analytic).abs() <= bound, "E={e}: {fd} vs {analytic} (bound {bound})");
    }
    let v = p.sigma2 + 0.3;
    assert!((potential_slope(0.3, &p, &t.mmse) - (0.3 - t.mmse.eval(sigma_underlying(0.3, &p))) / (2.0 * p.rate * LN_2 * v * v)).abs() < 1e-15);
}

#[test]
fn potential_is_energy_minus_entropy() {
    let t = tables(4, 5_000, 256);
    let p = UnderlyingParams::from_snr(4, 1.2, SNR).unwrap();
    let curve = PotentialCurve::uniform(&p, &t, 101).unwrap();
    for i in 0..curve.e_grid.len() {
        assert_eq!(curve.f_values[i], curve.u_values[i] - curve.s_values[i]);
    }
    assert!(curve.s_values.windows(2).all(|w| w[1] >= w[0]));
    assert!(curve.u_values.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn gap_signs_track_the_fixed_points() {
    let t = tables(8, 20_000, 512);
    let cfg = IterationConfig::default();
    let low = free_energy_gap(&UnderlyingParams::from_snr(8, 1.2, SNR).unwrap(), &t, DEFAULT_GAP_GRID, &cfg).unwrap();
    assert!(low.delta_f.is_infinite() && low.is_positive());
    let mid = free_energy_gap(&UnderlyingParams::from_snr(8, 1.68, SNR).unwrap(), &t, DEFAULT_GAP_GRID, &cfg).unwrap();
    assert!(mid.delta_f.is_finite() && mid.delta_f > 0.0, "{mid:?}");
    let high = free_energy_gap(&UnderlyingParams::from_snr(8, 1.86, SNR).unwrap(), &t, DEFAULT_GAP_GRID, &cfg).unwrap();
    assert!(high.delta_f < 0.0, "{high:?}");
    let arg = high.argmin_e.unwrap();
    assert!(arg >= high.basin_sup);
}

fn sup_gap_to_limit(b: usize, n: usize) -> f64 {
    let p = UnderlyingParams::from_snr(b, 1.0, SNR).unwrap();
    let t = Tables::build(&p, &TableGrid::new(0.05, 20.0, 96).unwrap(), &MCConfig::new(1, n)).unwrap();
    let mut worst = 0.0f64;
    for r in [0.6, 1.0, 1.6, 2.0] {
        let q = p.with_rate(r);
        for i in 0..=100 {
            let e = i as f64 / 100.0;
            worst = worst.max((potential_large_b(e, &q) - potential_underlying(e, &q, &t.entropy)).abs());
        }
    }
    worst
}

#[test]
fn large_section_potential_approaches_limit() {
    let gaps: Vec<f64> = [(16, 20_000), (64, 6_000), (256, 3_000), (1024, 1_500)]
        .iter()
        .map(|&(b, n)| sup_gap_to_limit(b, n))
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    // far from the kink the curves already agree closely
    let p = UnderlyingParams::from_snr(1024, 2.0, SNR).unwrap();
    let t = Tables::build(&p, &TableGrid::new(0.05, 20.0, 96).unwrap(), &MCConfig::new(1, 1_500)).unwrap();
    for e in [0.8, 0.9, 1.0] {
        assert!((potential_large_b(e, &p) - potential_underlying(e, &p, &t.entropy)).abs() < 0.02, "E={e}");
    }
}
