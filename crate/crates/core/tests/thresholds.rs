use std::f64::consts::LN_2;
use std::sync::OnceLock;

use ssc_core::thresholds::ThresholdKind;
use ssc_core::*;

const SNR: f64 = 15.0;

fn factory() -> &'static CachedTableFactory {
    static F: OnceLock<CachedTableFactory> = OnceLock::new();
    F.get_or_init(|| CachedTableFactory::for_rates(MCConfig::new(7, 20_000), 1.0 / SNR, 0.02, 2.5, 512).unwrap())
}

fn base(b: usize) -> UnderlyingParams {
    UnderlyingParams::from_snr(b, 1.0, SNR).unwrap()
}

#[test]
fn closed_form_limits() {
    let (ru, rpot) = large_b_limits(&base(8));
    assert!((ru - 15.0 / (32.0 * LN_2)).abs() < 1e-12);
    assert!((rpot - 2.0).abs() < 1e-12);
    assert!((capacity(SNR) - 2.0).abs() < 1e-15);
}

#[test]
fn b8_thresholds_are_ordered_below_capacity() {
    let opts = ThresholdOptions::default();
    let ru = amp_threshold_underlying(&base(8), factory(), &opts).unwrap();
    let rpot = potential_threshold(&base(8), factory(), &opts).unwrap();
    assert_eq!(ru.kind, ThresholdKind::AmpUnderlying);
    assert!(ru.bracket_hi - ru.bracket_lo <= opts.tol_r);
    assert!(rpot.value - ru.value > 0.1, "R_u={} R_pot={}", ru.value, rpot.value);
    assert!(rpot.value < capacity(SNR));
    assert!(ru.history.iter().all(|e| e.pass == (e.rate <= ru.bracket_lo) || e.rate > ru.bracket_hi));
}

#[test]
fn coupled_threshold_saturates_potential_threshold() {
    let opts = ThresholdOptions { r_start: Some(1.4), scan_step: Some(0.05), ..ThresholdOptions::default() };
    let rpot = potential_threshold(&base(8), factory(), &opts).unwrap();
    let rc = amp_threshold_coupled(&base(8), 64, 3, &DesignFunction::rectangular(), factory(), &opts).unwrap();
    assert_eq!(rc.metadata.gamma, Some(64));
    assert!((rc.value - rpot.value).abs() < 0.01, "R_c={} R_pot={}", rc.value, rpot.value);
}

#[test]
fn b2_has_no_threshold_below_capacity() {
    let opts = ThresholdOptions::default();
    for res in [
        amp_threshold_underlying(&base(2), factory(), &opts),
        potential_threshold(&base(2), factory(), &opts),
    ] {
        assert!(matches!(res, Err(Error::Bracketing(_))), "{res:?}");
    }
}

#[test]
fn coupled_threshold_rejects_short_chains() {
    let err = amp_threshold_coupled(&base(8), 24, 3, &DesignFunction::rectangular(), factory(), &ThresholdOptions::default());
    assert!(matches!(err, Err(Error::InvalidParameter(_))));
}
