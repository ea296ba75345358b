//! State evolution of the underlying scalar system and of the coupled profile
//! system, with the order relations and profile transforms used by the
//! threshold-saturation argument.
//!
//! Blocks are 0-based: the pinned rows are `A = {0..3w} ∪ {Γ−3w..Γ}` and the
//! decoder-known columns are `{0..4w} ∪ {Γ−4w..Γ}`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{CouplingMatrix, UnderlyingParams};
use crate::error::{invalid, Error, Result};
use crate::table::MonotoneTable;

/// Stopping rule for SE iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    /// Sup-norm tolerance on consecutive iterates.
    pub tol: f64,
    pub max_iters: usize,
    /// Keep every iterate in the report.
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 10_000, record_trace: false }
    }
}

impl IterationConfig {
    pub fn new(tol: f64, max_iters: usize) -> Self {
        Self { tol, max_iters, record_trace: false }
    }

    pub fn traced(self) -> Self {
        Self { record_trace: true, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome of a fixed-point iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport<T> {
    #[serde(rename = "final")]
    pub final_value: T,
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub residual: f64,
    pub converged: bool,
    /// The iterates formed a componentwise monotone sequence.
    pub monotone: bool,
    /// Iterates `0..=iterations` when tracing was requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degradation {
    StrictlyDegraded,
    DegradedEqual,
    Incomparable,
    Reversed,
}

/// Smoothed error profile `E_r`, one entry per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub values: Vec<f64>,
    pub w: usize,
}

impl AsRef<[f64]> for ErrorProfile {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl ErrorProfile {
    pub fn new(values: Vec<f64>, w: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("error profile"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("profile entries must lie in [0, 1], found {v}")));
        }
        if w < 1 {
            return Err(invalid("coupling window w must be >= 1"));
        }
        Ok(Self { values, w })
    }

    pub fn flat(gamma: usize, w: usize, e: f64) -> Result<Self> {
        Self::new(vec![e; gamma], w)
    }

    /// Worst-case start: 1 off the pinned rows, 0 on them.
    pub fn pinned_ones(gamma: usize, w: usize) -> Self {
        let mut p = Self { values: vec![1.0; gamma], w };
        for r in 0..gamma {
            if p.is_pinned_row(r) {
                p.values[r] = 0.0;
            }
        }
        p
    }

    pub fn gamma(&self) -> usize {
        self.values.len()
    }

    /// `r ∈ A`.
    pub fn is_pinned_row(&self, r: usize) -> bool {
        r < 3 * self.w || r + 3 * self.w >= self.gamma()
    }

    pub fn is_pinned_column(&self, c: usize) -> bool {
        c < 4 * self.w || c + 4 * self.w >= self.gamma()
    }

    /// Every entry on `A` is exactly zero.
    pub fn satisfies_pinning(&self) -> bool {
        (0..self.gamma()).all(|r| !self.is_pinned_row(r) || self.values[r] == 0.0)
    }

    fn check_matrix(&self, j: &CouplingMatrix) -> Result<()> {
        if self.gamma() != j.gamma() {
            return Err(Error::LengthMismatch { left: self.gamma(), right: j.gamma() });
        }
        if self.w != j.w() {
            return Err(invalid(format!("profile w={} but matrix w={}", self.w, j.w())));
        }
        Ok(())
    }
}

/// `Σ(E) = sqrt(R (σ² + E))`.
#[inline]
pub fn sigma_underlying(e: f64, params: &UnderlyingParams) -> f64 {
    (params.rate * (params.sigma2 + e)).sqrt()
}

/// `T_u(E) = mmse(Σ(E))`.
#[inline]
pub fn se_step_underlying(e: f64, params: &UnderlyingParams, table: &MonotoneTable) -> f64 {
    table.eval(sigma_underlying(e, params))
}

pub fn iterate_underlying(
    e_init: f64,
    params: &UnderlyingParams,
    table: &MonotoneTable,
    cfg: &IterationConfig,
) -> Result<FixedPointReport<f64>> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&e_init) {
        return Err(invalid(format!("initial MSE must lie in [0, 1], got {e_init}")));
    }
    let mut e = e_init;
    let mut trace = if cfg.record_trace { vec![e] } else { Vec::new() };
    let mut direction = 0i8;
    let mut monotone = true;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let next = se_step_underlying(e, params, table);
        iterations += 1;
        residual = (next - e).abs();
        let d = sign(next - e);
        if d != 0 {
            if direction != 0 && d != direction {
                monotone = false;
            }
            direction = d;
        }
        e = next;
        if cfg.record_trace {
            trace.push(e);
        }
        if residual <= cfg.tol {
            break;
        }
    }
    Ok(FixedPointReport {
        final_value: e,
        iterations,
        residual,
        converged: residual <= cfg.tol,
        monotone,
        trace,
    })
}

/// MSE floor `E_0`: the fixed point reached from `E = 0`.
pub fn mse_floor(params: &UnderlyingParams, table: &MonotoneTable, cfg: &IterationConfig) -> Result<f64> {
    Ok(iterate_underlying(0.0, params, table, cfg)?.final_value)
}

/// Classification tolerance around `E_0`: `max(10 tol, 3 stderr(mmse at Σ(E_0)))`.
pub fn tol_e0(e0: f64, params: &UnderlyingParams, table: &MonotoneTable, cfg: &IterationConfig) -> f64 {
    (10.0 * cfg.tol).max(3.0 * table.stderr_at(sigma_underlying(e0, params)))
}

/// Basin of attraction `[0, e_bar)` of the MSE floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basin {
    pub e0: f64,
    pub e_bar: f64,
    pub tol_e0: f64,
    /// Every start in `[0, 1]` reaches `E_0`.
    pub whole_domain: bool,
}

pub const BASIN_PRECISION: f64 = 1e-6;

pub fn basin_boundary(
    params: &UnderlyingParams,
    table: &MonotoneTable,
    cfg: &IterationConfig,
) -> Result<Basin> {
    let e0 = mse_floor(params, table, cfg)?;
    let tol = tol_e0(e0, params, table, cfg);
    let reaches = |e: f64| -> Result<bool> {
        Ok((iterate_underlying(e, params, table, cfg)?.final_value - e0).abs() <= tol)
    };
    if reaches(1.0)? {
        return Ok(Basin { e0, e_bar: 1.0, tol_e0: tol, whole_domain: true });
    }
    let (mut lo, mut hi) = (e0.min(1.0), 1.0);
    while hi - lo > BASIN_PRECISION {
        let mid = 0.5 * (lo + hi);
        if reaches(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Basin { e0, e_bar: 0.5 * (lo + hi), tol_e0: tol, whole_domain: false })
}

/// `1/(R(σ²+E_r))` for every row.
fn row_precisions(profile: &[f64], params: &UnderlyingParams) -> Vec<f64> {
    profile.iter().map(|&e| 1.0 / (params.rate * (params.sigma2 + e))).collect()
}

/// `Σ_c = [(1/Γ) Σ_r J[r][c] / (R(σ² + E_r))]^{−1/2}`.
pub fn sigma_coupled(
    profile: &ErrorProfile,
    j: &CouplingMatrix,
    c: usize,
    params: &UnderlyingParams,
) -> Result<f64> {
    profile.check_matrix(j)?;
    if c >= j.gamma() {
        return Err(invalid(format!("column {c} out of range for Gamma={}", j.gamma())));
    }
    let prec = row_precisions(&profile.values, params);
    Ok(column_sigma(&prec, j, c))
}

#[inline]
fn column_sigma(prec: &[f64], j: &CouplingMatrix, c: usize) -> f64 {
    let s: f64 = j.band(c).map(|r| j.get(r, c) * prec[r]).sum();
    (s / j.gamma() as f64).sqrt().recip()
}

/// All `Σ_c` of a profile.
pub fn sigmas_coupled(profile: &[f64], j: &CouplingMatrix, params: &UnderlyingParams) -> Vec<f64> {
    let prec = row_precisions(profile, params);
    (0..j.gamma()).map(|c| column_sigma(&prec, j, c)).collect()
}

/// One coupled SE step `E ↦ T_c(E)`.
pub fn se_step_coupled(
    profile: &ErrorProfile,
    j: &CouplingMatrix,
    params: &UnderlyingParams,
    table: &MonotoneTable,
) -> Result<ErrorProfile> {
    profile.check_matrix(j)?;
    Ok(step_unchecked(profile, j, params, table))
}

fn step_unchecked(
    profile: &ErrorProfile,
    j: &CouplingMatrix,
    params: &UnderlyingParams,
    table: &MonotoneTable,
) -> ErrorProfile {
    let gamma = j.gamma();
    let sigmas = sigmas_coupled(&profile.values, j, params);
    let tilde: Vec<f64> = (0..gamma)
        .map(|c| if profile.is_pinned_column(c) { 0.0 } else { table.eval(sigmas[c]) })
        .collect();
    let inv_gamma = 1.0 / gamma as f64;
    let values: Vec<f64> = (0..gamma)
        .map(|r| {
            let s: f64 = j.band(r).map(|c| j.get(r, c) * tilde[c]).sum();
            (s * inv_gamma).min(1.0)
        })
        .collect();
    let out = ErrorProfile { values, w: profile.w };
    debug_assert!(out.satisfies_pinning());
    out
}

pub fn iterate_coupled(
    init: &ErrorProfile,
    j: &CouplingMatrix,
    params: &UnderlyingParams,
    table: &MonotoneTable,
    cfg: &IterationConfig,
) -> Result<FixedPointReport<ErrorProfile>> {
    cfg.validate()?;
    init.check_matrix(j)?;
    let mut cur = init.clone();
    let mut trace = if cfg.record_trace { vec![cur.clone()] } else { Vec::new() };
    let mut direction = 0i8;
    let mut monotone = true;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let next = step_unchecked(&cur, j, params, table);
        iterations += 1;
        residual = 0.0;
        for (a, b) in next.values.iter().zip(&cur.values) {
            residual = f64::max(residual, (a - b).abs());
            let d = sign(a - b);
            if d != 0 {
                if direction != 0 && d != direction {
                    monotone = false;
                }
                direction = d;
            }
        }
        cur = next;
        if cfg.record_trace {
            trace.push(cur.clone());
        }
        if residual <= cfg.tol {
            break;
        }
    }
    Ok(FixedPointReport { final_value: cur, iterations, residual, converged: residual <= cfg.tol, monotone, trace })
}

#[inline]
fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Componentwise comparison of `e` against `g`.
pub fn is_degraded(e: &[f64], g: &[f64]) -> Result<Degradation> {
    if e.len() != g.len() {
        return Err(Error::LengthMismatch { left: e.len(), right: g.len() });
    }
    let above = e.iter().zip(g).any(|(a, b)| a > b);
    let below = e.iter().zip(g).any(|(a, b)| a < b);
    Ok(match (above, below) {
        (false, false) => Degradation::DegradedEqual,
        (true, false) => Degradation::StrictlyDegraded,
        (false, true) => Degradation::Reversed,
        (true, true) => Degradation::Incomparable,
    })
}

/// `e ⪰ g` componentwise.
pub fn dominates(e: &[f64], g: &[f64]) -> bool {
    e.len() == g.len() && e.iter().zip(g).all(|(a, b)| a >= b)
}

/// Nondecreasing envelope of a fixed-point profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturatedProfile {
    pub values: Vec<f64>,
    pub r_star: usize,
    pub r_max: usize,
    pub e_max: f64,
    pub e0: f64,
    /// The source never exceeds `E_0`; the result is the constant `E_0` profile.
    pub degenerate: bool,
    /// Largest drop of the source below its running maximum on `r_star..=r_max`.
    pub shape_defect: f64,
}

/// Drops below the running maximum smaller than this are treated as round-off.
pub const SHAPE_TOLERANCE: f64 = 1e-6;

pub fn saturate_profile(fixed: &[f64], e0: f64) -> Result<SaturatedProfile> {
    saturate_profile_within(fixed, e0, 0.0)
}

/// As [`saturate_profile`], treating a source whose maximum is within `tol` of
/// `E_0` as the constant `E_0` profile.
pub fn saturate_profile_within(fixed: &[f64], e0: f64, tol: f64) -> Result<SaturatedProfile> {
    let gamma = fixed.len();
    if gamma == 0 {
        return Err(invalid("empty profile"));
    }
    if !e0.is_finite() || fixed.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("saturate_profile"));
    }
    let mut r_max = 0;
    for (r, &v) in fixed.iter().enumerate() {
        if v > fixed[r_max] {
            r_max = r;
        }
    }
    let e_max = fixed[r_max];
    if e_max <= e0 + tol {
        return Ok(SaturatedProfile {
            values: vec![e0; gamma],
            r_star: gamma - 1,
            r_max: gamma - 1,
            e_max: e0,
            e0,
            degenerate: true,
            shape_defect: 0.0,
        });
    }
    let r_star = (0..=r_max).rev().find(|&r| fixed[r] <= e0).ok_or_else(|| {
        Error::ShapeViolation(format!("no entry at or below E0={e0} left of the maximum"))
    })?;
    if let Some(r) = (0..r_star).find(|&r| fixed[r] > e0 + SHAPE_TOLERANCE) {
        return Err(Error::ShapeViolation(format!(
            "entry {r} exceeds E0 left of the plateau edge {r_star}"
        )));
    }
    let mut values = vec![e0; gamma];
    let mut running = e0;
    let mut shape_defect = 0.0f64;
    for r in r_star + 1..=r_max {
        running = running.max(fixed[r]);
        shape_defect = shape_defect.max(running - fixed[r]);
        values[r] = running;
    }
    if shape_defect > SHAPE_TOLERANCE {
        return Err(Error::ShapeViolation(format!(
            "profile decreases by {shape_defect:.3e} before reaching its maximum at {r_max}"
        )));
    }
    for v in &mut values[r_max..] {
        *v = e_max;
    }
    Ok(SaturatedProfile { values, r_star, r_max, e_max, e0, degenerate: false, shape_defect })
}

/// `[S(E)]_0 = E_0`, `[S(E)]_r = E_{r−1}`.
pub fn shift(profile: &[f64], e0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(profile.len());
    if !profile.is_empty() {
        out.push(e0);
        out.extend_from_slice(&profile[..profile.len() - 1]);
    }
    out
}

/// `max_r |E_r − E_{r−1}|` over consecutive entries.
pub fn max_profile_increment(profile: &[f64]) -> f64 {
    profile.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}
