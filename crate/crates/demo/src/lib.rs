//! Browser bindings for the demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string, so the page
//! needs no generated TypeScript types. The `*_json` functions are the same
//! operations without the `JsError` wrapper and are what the native tests use.

use serde::Serialize;
use ssc_core::state_evolution::tol_e0;
use ssc_core::{
    build_coupling_matrix, capacity, free_energy_gap, iterate_coupled, iterate_underlying,
    CoupledParams, DesignFunction, ErrorProfile, IterationConfig, MCConfig, PotentialCurve,
    TableGrid, Tables, UnderlyingParams,
};
use wasm_bindgen::prelude::*;

/// Profiles kept from a coupled run for plotting.
const MAX_SNAPSHOTS: usize = 12;

#[derive(Serialize)]
struct SeCurve {
    sigma: Vec<f64>,
    mmse: Vec<f64>,
    trace: Vec<f64>,
    e0: f64,
    reaches_floor: bool,
    capacity: f64,
}

#[derive(Serialize)]
struct Potential {
    e: Vec<f64>,
    f: Vec<f64>,
    f_large_b: Vec<f64>,
    delta_f: Option<f64>,
    e0: f64,
}

#[derive(Serialize)]
struct CoupledRun {
    snapshots: Vec<Snapshot>,
    iterations: usize,
    converged: bool,
    max_final: f64,
}

#[derive(Serialize)]
struct Snapshot {
    t: usize,
    profile: Vec<f64>,
}

fn setup(b: u32, snr: f64, rate: f64, samples: u32, seed: u32) -> ssc_core::Result<(UnderlyingParams, Tables)> {
    let params = UnderlyingParams::from_snr(b as usize, rate, snr)?;
    let mc = MCConfig::new(seed as u64, samples as usize);
    let tables = Tables::build(&params, &TableGrid::default_for(&params), &mc)?;
    Ok((params, tables))
}

fn to_json<T: Serialize>(r: ssc_core::Result<T>) -> Result<String, String> {
    r.map_err(|e| e.to_string())
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

/// mmse table and the underlying SE trajectory from `E = 1`.
pub fn se_curve_json(b: u32, snr: f64, rate: f64, samples: u32, seed: u32) -> Result<String, String> {
    to_json((|| {
        let (params, tables) = setup(b, snr, rate, samples, seed)?;
        let cfg = IterationConfig::default();
        let floor = iterate_underlying(0.0, &params, &tables.mmse, &cfg)?.final_value;
        let run = iterate_underlying(1.0, &params, &tables.mmse, &cfg.traced())?;
        let tol = tol_e0(floor, &params, &tables.mmse, &cfg);
        Ok(SeCurve {
            sigma: tables.mmse.sigma_grid().to_vec(),
            mmse: tables.mmse.values().to_vec(),
            reaches_floor: (run.final_value - floor).abs() <= tol,
            trace: run.trace,
            e0: floor,
            capacity: capacity(params.snr()),
        })
    })())
}

/// `F_u` and its large-B limit on `points` nodes of `[0, 1]`, plus the gap.
pub fn potential_json(b: u32, snr: f64, rate: f64, samples: u32, seed: u32, points: u32) -> Result<String, String> {
    to_json((|| {
        let (params, tables) = setup(b, snr, rate, samples, seed)?;
        let curve = PotentialCurve::uniform(&params, &tables, points as usize)?;
        let gap = free_energy_gap(&params, &tables, 512, &IterationConfig::default())?;
        Ok(Potential {
            e: curve.e_grid,
            f: curve.f_values,
            f_large_b: curve.large_b_values,
            delta_f: gap.delta_f.is_finite().then_some(gap.delta_f),
            e0: gap.e0,
        })
    })())
}

/// Coupled SE from the pinned all-ones profile, with evenly spaced snapshots.
#[allow(clippy::too_many_arguments)]
pub fn coupled_json(
    b: u32,
    snr: f64,
    rate: f64,
    gamma: u32,
    w: u32,
    samples: u32,
    seed: u32,
    max_iters: u32,
) -> Result<String, String> {
    to_json((|| {
        let (params, tables) = setup(b, snr, rate, samples, seed)?;
        let coupled = CoupledParams::new(params, gamma as usize, w as usize, DesignFunction::rectangular())?;
        let j = build_coupling_matrix(&coupled)?;
        let init = ErrorProfile::pinned_ones(gamma as usize, w as usize);
        let cfg = IterationConfig::new(1e-8, max_iters as usize).traced();
        let run = iterate_coupled(&init, &j, &params, &tables.mmse, &cfg)?;
        let stride = run.trace.len().div_ceil(MAX_SNAPSHOTS).max(1);
        let last = run.trace.len() - 1;
        let snapshots = run
            .trace
            .into_iter()
            .enumerate()
            .filter(|(t, _)| t % stride == 0 || *t == last)
            .map(|(t, p)| Snapshot { t, profile: p.values })
            .collect();
        Ok(CoupledRun {
            snapshots,
            iterations: run.iterations,
            converged: run.converged,
            max_final: run.final_value.values.iter().cloned().fold(0.0, f64::max),
        })
    })())
}

#[wasm_bindgen]
pub fn se_curve(b: u32, snr: f64, rate: f64, samples: u32, seed: u32) -> Result<String, JsError> {
    se_curve_json(b, snr, rate, samples, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn potential(b: u32, snr: f64, rate: f64, samples: u32, seed: u32, points: u32) -> Result<String, JsError> {
    potential_json(b, snr, rate, samples, seed, points).map_err(|e| JsError::new(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn coupled(
    b: u32,
    snr: f64,
    rate: f64,
    gamma: u32,
    w: u32,
    samples: u32,
    seed: u32,
    max_iters: u32,
) -> Result<String, JsError> {
    coupled_json(b, snr, rate, gamma, w, samples, seed, max_iters).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn se_curve_decreases_to_floor_below_threshold() {
        let v = parse(se_curve_json(8, 15.0, 1.2, 5000, 3));
        let trace: Vec<f64> = serde_json::from_value(v["trace"].clone()).unwrap();
        assert_eq!(trace[0], 1.0);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(v["reaches_floor"], true);
        assert_eq!(v["capacity"], 2.0);
        assert_eq!(v["sigma"].as_array().unwrap().len(), v["mmse"].as_array().unwrap().len());
    }

    #[test]
    fn potential_gap_changes_sign_with_rate() {
        let gap = |r| parse(potential_json(8, 15.0, r, 10000, 3, 51))["delta_f"].as_f64().unwrap();
        assert!(gap(1.68) > 0.0);
        assert!(gap(1.86) < 0.0);
        let v = parse(potential_json(8, 15.0, 1.68, 2000, 3, 51));
        assert_eq!(v["e"].as_array().unwrap().len(), 51);
    }

    #[test]
    fn coupled_run_keeps_bounded_snapshots() {
        let v = parse(coupled_json(8, 15.0, 1.6, 40, 2, 5000, 3, 5000));
        let snaps = v["snapshots"].as_array().unwrap();
        assert!(snaps.len() <= MAX_SNAPSHOTS + 1);
        assert_eq!(snaps[0]["t"], 0);
        assert_eq!(snaps.last().unwrap()["t"].as_u64().unwrap(), v["iterations"].as_u64().unwrap());
        assert!(snaps.iter().all(|s| s["profile"].as_array().unwrap().len() == 40));
    }

    #[test]
    fn invalid_parameters_surface_as_errors() {
        assert!(se_curve_json(8, 15.0, 1.2, 0, 1).is_err());
        assert!(coupled_json(8, 15.0, 1.2, 10, 2, 1000, 1, 10).unwrap_err().contains("Gamma"));
    }
}
