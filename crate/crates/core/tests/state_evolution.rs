use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use ssc_core::state_evolution::{dominates, saturate_profile_within, tol_e0};
use ssc_core::thresholds::coupled_outcome;
use ssc_core::*;

const SNR: f64 = 15.0;

fn factory() -> &'static CachedTableFactory {
    static F: OnceLock<CachedTableFactory> = OnceLock::new();
    F.get_or_init(|| {
        CachedTableFactory::for_rates(MCConfig::new(7, 20_000), 1.0 / SNR, 0.02, 2.5, 512).unwrap()
    })
}

fn tables(b: usize) -> Arc<Tables> {
    factory().tables(&UnderlyingParams::from_snr(b, 1.0, SNR).unwrap()).unwrap()
}

fn params(b: usize, r: f64) -> UnderlyingParams {
    UnderlyingParams::from_snr(b, r, SNR).unwrap()
}

#[test]
fn underlying_iterates_are_monotone_from_both_ends() {
    let t = tables(8);
    let cfg = IterationConfig::default().traced();
    for r in [0.8, 1.5, 1.68, 1.9] {
        let p = params(8, r);
        let up = iterate_underlying(0.0, &p, &t.mmse, &cfg).unwrap();
        let down = iterate_underlying(1.0, &p, &t.mmse, &cfg).unwrap();
        assert!(up.converged && down.converged);
        assert!(up.trace.windows(2).all(|w| w[1] >= w[0]), "R={r}");
        assert!(down.trace.windows(2).all(|w| w[1] <= w[0]), "R={r}");
        assert!(up.final_value <= down.final_value);
    }
}

#[test]
fn b8_has_a_bistable_window_and_b2_does_not() {
    let cfg = IterationConfig::default();
    let p8 = params(8, 1.68);
    let t8 = tables(8);
    let e0 = iterate_underlying(0.0, &p8, &t8.mmse, &cfg).unwrap().final_value;
    let e1 = iterate_underlying(1.0, &p8, &t8.mmse, &cfg).unwrap().final_value;
    assert!(e1 - e0 > 0.3, "E0={e0} E1={e1}");

    let t2 = tables(2);
    for r in [0.5, 1.0, 1.5, 2.0] {
        let p = params(2, r);
        let e0 = iterate_underlying(0.0, &p, &t2.mmse, &cfg).unwrap().final_value;
        let e1 = iterate_underlying(1.0, &p, &t2.mmse, &cfg).unwrap().final_value;
        assert!((e1 - e0).abs() <= tol_e0(e0, &p, &t2.mmse, &cfg), "R={r}: {e0} vs {e1}");
    }
}

#[test]
fn basin_boundary_separates_the_two_attractors() {
    let p = params(8, 1.68);
    let t = tables(8);
    let cfg = IterationConfig::default();
    let basin = basin_boundary(&p, &t.mmse, &cfg).unwrap();
    assert!(!basin.whole_domain);
    let below = iterate_underlying(basin.e_bar - 1e-3, &p, &t.mmse, &cfg).unwrap().final_value;
    let above = iterate_underlying(basin.e_bar + 1e-3, &p, &t.mmse, &cfg).unwrap().final_value;
    assert!((below - basin.e0).abs() <= basin.tol_e0);
    assert!(above > basin.e0 + 0.1);
}

#[test]
fn coupling_decodes_inside_the_bistable_window() {
    let p = params(8, 1.68);
    let t = tables(8);
    let j = CouplingMatrix::new(64, 3, &DesignFunction::rectangular()).unwrap();
    let out = coupled_outcome(&p, &j, &t, &IterationConfig::default(), &IterationConfig::new(1e-8, 200_000)).unwrap();
    assert!(out.success, "max entry {} vs E0 {}", out.max_entry, out.e0);
    let stall = iterate_underlying(1.0, &p, &t.mmse, &IterationConfig::default()).unwrap().final_value;
    assert!(stall > out.e0 + 0.01);
}

#[test]
fn coupled_fixed_point_above_threshold_saturates() {
    let p = params(8, 1.9);
    let t = tables(8);
    let j = CouplingMatrix::new(96, 2, &DesignFunction::rectangular()).unwrap();
    let cfg = IterationConfig::new(1e-10, 200_000).traced();
    let rep = iterate_coupled(&ErrorProfile::pinned_ones(96, 2), &j, &p, &t.mmse, &cfg).unwrap();
    assert!(rep.converged && rep.monotone);
    assert!(rep.trace.windows(2).all(|w| dominates(&w[0].values, &w[1].values)));
    assert!(rep.final_value.satisfies_pinning());
    let e0 = iterate_underlying(0.0, &p, &t.mmse, &IterationConfig::default()).unwrap().final_value;
    let sat = saturate_profile_within(&rep.final_value.values, e0, 1e-7).unwrap();
    assert!(!sat.degenerate);
    assert!(sat.values.windows(2).all(|w| w[1] >= w[0]));
    assert!(sat.values[..=sat.r_star].iter().all(|&v| v == e0));
    assert!(sat.values[sat.r_max..].iter().all(|&v| v == sat.e_max));
    assert!(shift(&sat.values, e0).iter().zip(&sat.values).all(|(s, e)| s <= e));
}

#[test]
fn coupled_iteration_from_zero_stays_at_floor_scale() {
    let p = params(8, 1.5);
    let t = tables(8);
    let j = CouplingMatrix::new(48, 2, &DesignFunction::triangular(0.5).unwrap()).unwrap();
    let rep = iterate_coupled(&ErrorProfile::flat(48, 2, 0.0).unwrap(), &j, &p, &t.mmse, &IterationConfig::new(1e-10, 10_000).traced()).unwrap();
    assert!(rep.monotone);
    assert!(rep.trace.windows(2).all(|w| dominates(&w[1].values, &w[0].values)));
    let e0 = iterate_underlying(0.0, &p, &t.mmse, &IterationConfig::default()).unwrap().final_value;
    assert!(rep.final_value.values.iter().all(|&v| v <= e0 + 1e-9));
}

fn ordered_pair() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>)> {
    (1usize..4, 0usize..3).prop_flat_map(|(w, design)| {
        let gamma = 8 * w + 1 + 8;
        (
            Just(w),
            Just(design),
            prop::collection::vec(0.0f64..=1.0, gamma),
            prop::collection::vec(0.0f64..=1.0, gamma),
        )
            .prop_map(|(w, design, a, d)| {
                let lo: Vec<f64> = a.iter().map(|x| x * 0.7).collect();
                let hi: Vec<f64> = lo.iter().zip(&d).map(|(l, d)| (l + d * 0.3).min(1.0)).collect();
                (w, design, lo, hi)
            })
    })
}

fn design(k: usize) -> DesignFunction {
    match k {
        0 => DesignFunction::rectangular(),
        1 => DesignFunction::triangular(0.3).unwrap(),
        _ => DesignFunction::asymmetric_exponential(3.0).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coupled_step_preserves_degradation((w, d, lo, hi) in ordered_pair(), r in 0.5f64..2.2) {
        let t = tables(4);
        let p = params(4, r);
        let j = CouplingMatrix::new(lo.len(), w, &design(d)).unwrap();
        let a = se_step_coupled(&ErrorProfile::new(lo, w).unwrap(), &j, &p, &t.mmse).unwrap();
        let b = se_step_coupled(&ErrorProfile::new(hi, w).unwrap(), &j, &p, &t.mmse).unwrap();
        prop_assert!(dominates(&b.values, &a.values));
        prop_assert!(a.satisfies_pinning() && b.satisfies_pinning());
    }

    #[test]
    fn underlying_step_is_monotone(e in 0.0f64..1.0, de in 0.0f64..0.5, r in 0.1f64..2.3) {
        let t = tables(16);
        let p = params(16, r);
        let hi = (e + de).min(1.0);
        prop_assert!(se_step_underlying(hi, &p, &t.mmse) >= se_step_underlying(e, &p, &t.mmse));
    }

    #[test]
    fn interior_sigma_of_flat_profile_is_underlying(e in 0.0f64..1.0, w in 1usize..4, r in 0.2f64..2.0) {
        let gamma = 8 * w + 9;
        let p = params(2, r);
        let j = CouplingMatrix::new(gamma, w, &DesignFunction::rectangular()).unwrap();
        let prof = ErrorProfile::flat(gamma, w, e).unwrap();
        for c in j.symmetric_columns() {
            let s = sigma_coupled(&prof, &j, c, &p).unwrap();
            prop_assert!((s - sigma_underlying(e, &p)).abs() <= 1e-12 * s);
        }
    }
}
