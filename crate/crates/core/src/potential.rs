//! Potentials of the underlying and coupled ensembles.
//!
//! `F_u(E) = U_u(E) − S_u(Σ(E))` with the closed-form energy
//! `U_u(E) = (1/2R)[log2(σ²+E) − E/((σ²+E) ln 2)]` and the tabulated entropy.
//! Its derivative is `(E − mmse(Σ(E))) / (2R ln2 (σ²+E)²)`, so the stationary
//! points of `F_u` are the SE fixed points.

use std::f64::consts::LN_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ensemble::{CouplingMatrix, UnderlyingParams};
use crate::error::{invalid, Error, Result};
use crate::state_evolution::{basin_boundary, sigma_underlying, sigmas_coupled, IterationConfig};
use crate::table::{MonotoneTable, Tables};

pub fn potential_energy_underlying(e: f64, params: &UnderlyingParams) -> f64 {
    let v = params.sigma2 + e;
    (v.log2() - e / (v * LN_2)) / (2.0 * params.rate)
}

/// `dU_u/dE = E / (2R ln2 (σ²+E)²)`.
pub fn potential_energy_derivative(e: f64, params: &UnderlyingParams) -> f64 {
    let v = params.sigma2 + e;
    e / (2.0 * params.rate * LN_2 * v * v)
}

pub fn potential_underlying(e: f64, params: &UnderlyingParams, entropy: &MonotoneTable) -> f64 {
    potential_energy_underlying(e, params) - entropy.eval(sigma_underlying(e, params))
}

/// `U_u(E) − max(0, 1 − 1/(2 ln2 Σ(E)²))`, the `B → ∞` limit of `F_u`.
pub fn potential_large_b(e: f64, params: &UnderlyingParams) -> f64 {
    let s2 = params.rate * (params.sigma2 + e);
    potential_energy_underlying(e, params) - (1.0 - 1.0 / (2.0 * LN_2 * s2)).max(0.0)
}

/// `F_u`, `U_u` and `S_u` sampled on an increasing grid, with the large-B curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialCurve {
    pub e_grid: Vec<f64>,
    pub u_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub f_values: Vec<f64>,
    /// Standard error of `S_u` (and therefore of `F_u`).
    pub stderrs: Vec<f64>,
    pub large_b_values: Vec<f64>,
}

impl PotentialCurve {
    pub fn compute(params: &UnderlyingParams, tables: &Tables, e_grid: &[f64]) -> Result<Self> {
        if e_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("potential grid must be strictly increasing"));
        }
        if e_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(invalid("potential grid must lie in [0, 1]"));
        }
        let mut c = Self {
            e_grid: e_grid.to_vec(),
            u_values: Vec::with_capacity(e_grid.len()),
            s_values: Vec::with_capacity(e_grid.len()),
            f_values: Vec::with_capacity(e_grid.len()),
            stderrs: Vec::with_capacity(e_grid.len()),
            large_b_values: Vec::with_capacity(e_grid.len()),
        };
        for &e in e_grid {
            let sigma = sigma_underlying(e, params);
            let u = potential_energy_underlying(e, params);
            let s = tables.entropy.eval(sigma);
            c.u_values.push(u);
            c.s_values.push(s);
            c.f_values.push(u - s);
            c.stderrs.push(tables.entropy.stderr_at(sigma));
            c.large_b_values.push(potential_large_b(e, params));
        }
        Ok(c)
    }

    /// `n` evenly spaced points on `[0, 1]`.
    pub fn uniform(params: &UnderlyingParams, tables: &Tables, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("potential grid needs at least 2 points"));
        }
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Self::compute(params, tables, &grid)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "E,U,S,F,stderr,F_large_B")?;
        for i in 0..self.e_grid.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.e_grid[i],
                self.u_values[i],
                self.s_values[i],
                self.f_values[i],
                self.stderrs[i],
                self.large_b_values[i]
            )?;
        }
        Ok(())
    }
}

/// Free energy gap `ΔF_u = inf_{E ∉ V_0} F_u(E) − F_u(E_0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `+∞` (serialized as `"inf"`) when the basin is the whole domain.
    #[serde(with = "extended_f64")]
    pub delta_f: f64,
    pub argmin_e: Option<f64>,
    pub basin_sup: f64,
    pub e0: f64,
}

impl GapReport {
    pub fn is_positive(&self) -> bool {
        self.delta_f > 0.0
    }
}

pub const DEFAULT_GAP_GRID: usize = 512;

pub fn free_energy_gap(
    params: &UnderlyingParams,
    tables: &Tables,
    grid_size: usize,
    cfg: &IterationConfig,
) -> Result<GapReport> {
    if grid_size < 2 {
        return Err(invalid("gap grid needs at least 2 points"));
    }
    let basin = basin_boundary(params, &tables.mmse, cfg)?;
    if basin.whole_domain {
        return Ok(GapReport { delta_f: f64::INFINITY, argmin_e: None, basin_sup: 1.0, e0: basin.e0 });
    }
    let f = |e: f64| potential_underlying(e, params, &tables.entropy);
    let f0 = f(basin.e0);
    let (lo, hi) = (basin.e_bar, 1.0);
    let step = (hi - lo) / (grid_size - 1) as f64;
    let node = |i: usize| if i + 1 == grid_size { hi } else { lo + step * i as f64 };
    let best = (0..grid_size)
        .map(|i| (i, f(node(i))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap();
    let a = node(best.saturating_sub(1));
    let b = node((best + 1).min(grid_size - 1));
    let (e_min, f_min) = golden_section(f, a, b, 1e-10);
    let (e_min, f_min) = if f_min <= f(node(best)) { (e_min, f_min) } else { (node(best), f(node(best))) };
    Ok(GapReport { delta_f: f_min - f0, argmin_e: Some(e_min), basin_sup: basin.e_bar, e0: basin.e0 })
}

/// Minimizes `f` on `[a, b]`; returns the best point seen.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(a, f(a)), (b, f(b)), (c, fc), (d, fd)];
    candidates.into_iter().min_by(|x, y| x.1.total_cmp(&y.1)).unwrap()
}

/// Energy part `U_c(E) = Σ_r U_u(E_r)` of the coupled potential.
pub fn energy_coupled(profile: &[f64], params: &UnderlyingParams) -> f64 {
    profile.iter().map(|&e| potential_energy_underlying(e, params)).sum()
}

/// Entropy part `S_c(E) = Σ_c S_u(Σ_c(E))` of the coupled potential.
pub fn entropy_coupled(profile: &[f64], j: &CouplingMatrix, params: &UnderlyingParams, entropy: &MonotoneTable) -> f64 {
    sigmas_coupled(profile, j, params).into_iter().map(|s| entropy.eval(s)).sum()
}

/// `F_c(E) = U_c(E) − S_c(E)`.
pub fn potential_coupled(
    profile: &[f64],
    j: &CouplingMatrix,
    params: &UnderlyingParams,
    tables: &Tables,
) -> Result<f64> {
    if profile.len() != j.gamma() {
        return Err(Error::LengthMismatch { left: profile.len(), right: j.gamma() });
    }
    if profile.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coupled potential profile"));
    }
    Ok(energy_coupled(profile, params) - entropy_coupled(profile, j, params, &tables.entropy))
}

/// `|dF_u/dE|` at `e_fixed` by a centered difference of step `h`. Within `h`
/// of an end of `[0, 1]` the second-order one-sided stencil is used instead.
pub fn stationarity_residual(e_fixed: f64, params: &UnderlyingParams, entropy: &MonotoneTable, h: f64) -> Result<f64> {
    let f = |e: f64| potential_underlying(e, params, entropy);
    Ok(match stencil(e_fixed, h)? {
        Stencil::Centered => (f(e_fixed + h) - f(e_fixed - h)) / (2.0 * h),
        Stencil::OneSided(d) => {
            let (f0, f1, f2) = (f(e_fixed), f(e_fixed + d), f(e_fixed + 2.0 * d));
            (3.0 * (f1 - f0) - (f2 - f1)) / (2.0 * d)
        }
    }
    .abs())
}

/// `5 (stderr/h + 10 h²)`, where `stderr/h` is the Monte-Carlo error of the
/// difference quotient under common random numbers.
pub fn stationarity_bound(e_fixed: f64, params: &UnderlyingParams, entropy: &MonotoneTable, h: f64) -> Result<f64> {
    let d = |a: f64, b: f64| entropy.difference_stderr(sigma_underlying(a, params), sigma_underlying(b, params));
    let quotient_se = match stencil(e_fixed, h)? {
        Stencil::Centered => d(e_fixed - h, e_fixed + h) / (2.0 * h),
        Stencil::OneSided(s) => {
            let (e1, e2) = (e_fixed + s, e_fixed + 2.0 * s);
            (3.0 * d(e_fixed, e1) + d(e1, e2)) / (2.0 * h)
        }
    };
    Ok(5.0 * (quotient_se + 10.0 * h * h))
}

enum Stencil {
    Centered,
    /// Signed step away from the nearby boundary.
    OneSided(f64),
}

fn stencil(e: f64, h: f64) -> Result<Stencil> {
    if !(h > 0.0 && h <= 0.25) {
        return Err(invalid(format!("finite-difference step must lie in (0, 0.25], got {h}")));
    }
    if !(0.0..=1.0).contains(&e) {
        return Err(invalid(format!("E must lie in [0, 1], got {e}")));
    }
    Ok(if e - h < 0.0 {
        Stencil::OneSided(h)
    } else if e + h > 1.0 {
        Stencil::OneSided(-h)
    } else {
        Stencil::Centered
    })
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("invalid float {other:?}"))),
            },
        }
    }
}
