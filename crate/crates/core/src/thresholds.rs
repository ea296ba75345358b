//! Threshold solvers: the AMP threshold `R_u`, the potential threshold `R_pot`
//! and the coupled AMP threshold `R_c(Γ, w)`, plus closed-form limits.
//!
//! The success predicates hold at low rate, fail inside the bistable window
//! and hold again once the two fixed points merge at high rate. Each solver
//! therefore scans upward from a rate where the predicate holds until it first
//! fails, then bisects that bracket.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::ensemble::{CouplingMatrix, DesignFunction, UnderlyingParams};
use crate::error::{invalid, Error, Result};
use crate::potential::{free_energy_gap, DEFAULT_GAP_GRID};
use crate::state_evolution::{
    iterate_coupled, iterate_underlying, tol_e0, ErrorProfile, IterationConfig,
};
use crate::table::{TableFactory, Tables};

/// `C = ½ log2(1 + snr)`.
pub fn capacity(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

/// `(lim R_u, lim R_pot) = ([(1+σ²) 2 ln 2]^{−1}, C)` as `B → ∞`.
pub fn large_b_limits(params: &UnderlyingParams) -> (f64, f64) {
    let s2 = params.sigma2;
    (1.0 / ((1.0 + s2) * 2.0 * LN_2), capacity(1.0 / s2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    AmpUnderlying,
    Potential,
    AmpCoupled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub tol_r: f64,
    /// First rate of the upward scan; the predicate must hold there.
    pub r_start: Option<f64>,
    /// Scan step; defaults to `C/100`.
    pub scan_step: Option<f64>,
    /// Largest rate scanned; defaults to `C`.
    pub r_cap: Option<f64>,
    pub iteration: IterationConfig,
    pub coupled_iteration: IterationConfig,
    pub gap_grid: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            tol_r: 2e-3,
            r_start: None,
            scan_step: None,
            r_cap: None,
            iteration: IterationConfig::default(),
            coupled_iteration: IterationConfig::new(1e-8, 200_000),
            gap_grid: DEFAULT_GAP_GRID,
        }
    }
}

impl ThresholdOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_r > 0.0) {
            return Err(invalid(format!("tol_R must be positive, got {}", self.tol_r)));
        }
        self.iteration.validate()?;
        self.coupled_iteration.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rate: f64,
    pub pass: bool,
}

/// Parameters needed to reproduce a threshold run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdContext {
    pub b: usize,
    pub sigma2: f64,
    pub snr: f64,
    pub gamma: Option<usize>,
    pub w: Option<usize>,
    pub design: Option<DesignFunction>,
    pub options: ThresholdOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub kind: ThresholdKind,
    pub value: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub tol: f64,
    pub evaluations: usize,
    pub history: Vec<Evaluation>,
    pub metadata: ThresholdContext,
}

/// `T_u^∞(1)` lands within `tol_e0` of `E_0`.
pub fn amp_predicate_underlying(params: &UnderlyingParams, tables: &Tables, cfg: &IterationConfig) -> Result<bool> {
    let e0 = iterate_underlying(0.0, params, &tables.mmse, cfg)?.final_value;
    let e1 = iterate_underlying(1.0, params, &tables.mmse, cfg)?.final_value;
    Ok((e1 - e0).abs() <= tol_e0(e0, params, &tables.mmse, cfg))
}

pub fn potential_predicate(
    params: &UnderlyingParams,
    tables: &Tables,
    cfg: &IterationConfig,
    gap_grid: usize,
) -> Result<bool> {
    Ok(free_energy_gap(params, tables, gap_grid, cfg)?.is_positive())
}

/// Outcome of coupled SE from the pinned all-ones profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledOutcome {
    pub e0: f64,
    pub tol_e0: f64,
    pub max_entry: f64,
    pub success: bool,
    pub converged: bool,
    pub iterations: usize,
    pub profile: Vec<f64>,
}

/// Runs coupled SE from all-ones and checks `E* ⪯ E_0·1 + tol_e0`.
///
/// Iterates from all-ones decrease, so an unconverged run whose current
/// iterate is already below the bound counts as a success.
pub fn coupled_outcome(
    params: &UnderlyingParams,
    j: &CouplingMatrix,
    tables: &Tables,
    cfg: &IterationConfig,
    coupled_cfg: &IterationConfig,
) -> Result<CoupledOutcome> {
    let e0 = iterate_underlying(0.0, params, &tables.mmse, cfg)?.final_value;
    let tol = tol_e0(e0, params, &tables.mmse, cfg);
    let init = ErrorProfile::pinned_ones(j.gamma(), j.w());
    let rep = iterate_coupled(&init, j, params, &tables.mmse, coupled_cfg)?;
    let max_entry = rep.final_value.values.iter().copied().fold(0.0, f64::max);
    if !rep.converged && max_entry > e0 + tol {
        log::warn!(
            "coupled SE at R={} stopped after {} iterations with residual {:.3e}",
            params.rate,
            rep.iterations,
            rep.residual
        );
    }
    Ok(CoupledOutcome {
        e0,
        tol_e0: tol,
        max_entry,
        success: max_entry <= e0 + tol,
        converged: rep.converged,
        iterations: rep.iterations,
        profile: rep.final_value.values,
    })
}

fn context(base: &UnderlyingParams, opts: &ThresholdOptions) -> ThresholdContext {
    ThresholdContext {
        b: base.b,
        sigma2: base.sigma2,
        snr: base.snr(),
        gamma: None,
        w: None,
        design: None,
        options: opts.clone(),
    }
}

pub fn amp_threshold_underlying(
    base: &UnderlyingParams,
    factory: &dyn TableFactory,
    opts: &ThresholdOptions,
) -> Result<ThresholdReport> {
    let pred = |r: f64| {
        let p = base.with_rate(r);
        amp_predicate_underlying(&p, &*factory.tables(&p)?, &opts.iteration)
    };
    solve(ThresholdKind::AmpUnderlying, base, opts, context(base, opts), pred)
}

pub fn potential_threshold(
    base: &UnderlyingParams,
    factory: &dyn TableFactory,
    opts: &ThresholdOptions,
) -> Result<ThresholdReport> {
    let pred = |r: f64| {
        let p = base.with_rate(r);
        potential_predicate(&p, &*factory.tables(&p)?, &opts.iteration, opts.gap_grid)
    };
    solve(ThresholdKind::Potential, base, opts, context(base, opts), pred)
}

/// Requires `Γ > 8w`.
pub fn amp_threshold_coupled(
    base: &UnderlyingParams,
    gamma: usize,
    w: usize,
    design: &DesignFunction,
    factory: &dyn TableFactory,
    opts: &ThresholdOptions,
) -> Result<ThresholdReport> {
    if w < 1 || gamma <= 8 * w {
        return Err(invalid(format!("need Gamma > 8w, got Gamma={gamma} w={w}")));
    }
    let j = CouplingMatrix::new(gamma, w, design)?;
    let pred = |r: f64| {
        let p = base.with_rate(r);
        let t = factory.tables(&p)?;
        Ok(coupled_outcome(&p, &j, &t, &opts.iteration, &opts.coupled_iteration)?.success)
    };
    let mut ctx = context(base, opts);
    ctx.gamma = Some(gamma);
    ctx.w = Some(w);
    ctx.design = Some(design.clone());
    solve(ThresholdKind::AmpCoupled, base, opts, ctx, pred)
}

fn solve<P>(
    kind: ThresholdKind,
    base: &UnderlyingParams,
    opts: &ThresholdOptions,
    metadata: ThresholdContext,
    mut pred: P,
) -> Result<ThresholdReport>
where
    P: FnMut(f64) -> Result<bool>,
{
    opts.validate()?;
    base.validate()?;
    let cap_c = capacity(base.snr());
    let step = opts.scan_step.unwrap_or(cap_c / 100.0);
    let cap = opts.r_cap.unwrap_or(cap_c);
    let start = opts.r_start.unwrap_or(step);
    if !(step > 0.0 && start > 0.0 && start < cap) {
        return Err(invalid(format!("bad scan: start={start} step={step} cap={cap}")));
    }
    let mut history = Vec::new();
    let mut eval = |r: f64, history: &mut Vec<Evaluation>| -> Result<bool> {
        let pass = pred(r)?;
        log::debug!("{kind:?}: R={r:.6} pass={pass}");
        history.push(Evaluation { rate: r, pass });
        Ok(pass)
    };

    if !eval(start, &mut history)? {
        return Err(Error::Bracketing(format!(
            "{kind:?}: predicate already fails at the scan start R={start}"
        )));
    }
    let mut lo = start;
    let hi = loop {
        let r = (lo + step).min(cap);
        if !eval(r, &mut history)? {
            break r;
        }
        if r >= cap {
            return Err(Error::Bracketing(format!(
                "{kind:?}: predicate holds on every scanned rate in [{start}, {cap}] (step {step}); \
                 no threshold below the cap (B={}, snr={})",
                base.b,
                base.snr()
            )));
        }
        lo = r;
    };
    let mut hi = hi;
    while hi - lo > opts.tol_r {
        let mid = 0.5 * (lo + hi);
        if eval(mid, &mut history)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Off-grid spot checks below the bracket.
    for k in 1..=4 {
        let r = start + (lo - start) * k as f64 / 5.0;
        if r > start && r < lo && !eval(r, &mut history)? {
            return Err(Error::NonMonotonePredicate(format!(
                "{kind:?}: predicate fails at R={r} below the passing rate {lo}"
            )));
        }
    }
    check_history(kind, &history, lo, hi)?;
    Ok(ThresholdReport {
        kind,
        value: 0.5 * (lo + hi),
        bracket_lo: lo,
        bracket_hi: hi,
        tol: opts.tol_r,
        evaluations: history.len(),
        history,
        metadata,
    })
}

fn check_history(kind: ThresholdKind, history: &[Evaluation], lo: f64, hi: f64) -> Result<()> {
    for e in history {
        if (e.rate <= lo && !e.pass) || (e.rate == hi && e.pass) {
            return Err(Error::NonMonotonePredicate(format!(
                "{kind:?}: evaluation at R={} contradicts the bracket [{lo}, {hi}]",
                e.rate
            )));
        }
    }
    Ok(())
}
