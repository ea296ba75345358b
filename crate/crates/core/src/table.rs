//! Monotone lookup tables for `mmse(Σ)` and `S_u(Σ)`.
//!
//! Both tables are estimated from one [`SampleBank`], so every node uses the
//! same noise vectors. Raw estimates are projected onto nondecreasing
//! sequences and interpolated linearly in `ln Σ`; out-of-range queries clamp
//! to the `Σ → 0` and `Σ → ∞` limits. Lookups are exactly monotone in
//! floating point, which keeps the SE operators order preserving.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::denoiser::{Accumulator, MCConfig, SampleBank, SectionSample};
use crate::ensemble::UnderlyingParams;
use crate::error::{invalid, Result};
use crate::io::worker_count;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Mmse,
    Entropy,
}

/// Log-spaced Σ grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableGrid {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub n_points: usize,
}

impl TableGrid {
    pub const DEFAULT_POINTS: usize = 256;

    pub fn new(sigma_min: f64, sigma_max: f64, n_points: usize) -> Result<Self> {
        let g = Self { sigma_min, sigma_max, n_points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite())
        {
            return Err(invalid(format!(
                "need 0 < sigma_min < sigma_max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            )));
        }
        if self.n_points < 16 {
            return Err(invalid(format!("need at least 16 table nodes, got {}", self.n_points)));
        }
        Ok(())
    }

    /// `[10⁻² sqrt(Rσ²), 10² sqrt(R(σ²+1))]` with 256 nodes.
    pub fn default_for(params: &UnderlyingParams) -> Self {
        Self::for_rates(params.sigma2, params.rate, params.rate, Self::DEFAULT_POINTS)
    }

    /// Grid covering every Σ reachable by rates in `[r_lo, r_hi]`.
    pub fn for_rates(sigma2: f64, r_lo: f64, r_hi: f64, n_points: usize) -> Self {
        Self {
            sigma_min: 1e-2 * (r_lo * sigma2).sqrt(),
            sigma_max: 1e2 * (r_hi * (sigma2 + 1.0)).sqrt(),
            n_points,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let (a, b) = (self.sigma_min.ln(), self.sigma_max.ln());
        let last = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| {
                if i == 0 {
                    self.sigma_min
                } else if i == self.n_points - 1 {
                    self.sigma_max
                } else {
                    (a + (b - a) * i as f64 / last).exp()
                }
            })
            .collect()
    }

    pub fn covers(&self, sigma: f64) -> bool {
        sigma >= self.sigma_min && sigma <= self.sigma_max
    }
}

/// Provenance recorded in table headers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub b: usize,
    /// Rate the grid was scaled for; `None` for grids shared across rates.
    pub rate: Option<f64>,
    pub sigma2: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub antithetic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneTable {
    kind: TableKind,
    meta: TableMeta,
    sigma: Vec<f64>,
    log_sigma: Vec<f64>,
    raw: Vec<f64>,
    values: Vec<f64>,
    stderrs: Vec<f64>,
    /// Standard error of `raw[i+1] − raw[i]` under common random numbers.
    diff_stderrs: Vec<f64>,
    upper: f64,
    coarse: Vec<usize>,
}

/// Matching mmse and entropy tables built from one sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub mmse: MonotoneTable,
    pub entropy: MonotoneTable,
}

impl MonotoneTable {
    fn from_raw(
        kind: TableKind,
        meta: TableMeta,
        sigma: Vec<f64>,
        raw: Vec<f64>,
        stderrs: Vec<f64>,
        diff_stderrs: Vec<f64>,
    ) -> Self {
        let upper = match kind {
            TableKind::Mmse => 1.0 - 1.0 / meta.b as f64,
            TableKind::Entropy => 1.0,
        };
        let values: Vec<f64> = isotonic_nondecreasing(&raw)
            .into_iter()
            .map(|v| v.clamp(0.0, upper))
            .collect();
        let coarse: Vec<usize> = (0..raw.len() - 1)
            .filter(|&i| {
                let se = stderrs[i].max(stderrs[i + 1]);
                se > 0.0 && (raw[i + 1] - raw[i]).abs() > 10.0 * se
            })
            .collect();
        if !coarse.is_empty() {
            log::debug!("{kind:?} table: {} intervals exceed 10 stderr", coarse.len());
        }
        let log_sigma = sigma.iter().map(|s| s.ln()).collect();
        Self { kind, meta, sigma, log_sigma, raw, values, stderrs, diff_stderrs, upper, coarse }
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn sigma_grid(&self) -> &[f64] {
        &self.sigma
    }

    /// Isotonic-projected node values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Node estimates before projection.
    pub fn raw_values(&self) -> &[f64] {
        &self.raw
    }

    pub fn stderrs(&self) -> &[f64] {
        &self.stderrs
    }

    /// Value approached as `Σ → ∞`: `1 − 1/B` for mmse, 1 for entropy.
    pub fn upper_limit(&self) -> f64 {
        self.upper
    }

    /// Intervals whose endpoint estimates differ by more than 10 standard errors.
    pub fn coarse_intervals(&self) -> &[usize] {
        &self.coarse
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma[0]
    }

    pub fn sigma_max(&self) -> f64 {
        *self.sigma.last().unwrap()
    }

    /// Segment index `i` and weight `t` with `Σ` between nodes `i` and `i+1`.
    #[inline]
    fn locate(&self, sigma: f64) -> Option<(usize, f64)> {
        let last = self.sigma.len() - 1;
        if !(sigma >= self.sigma[0]) || sigma > self.sigma[last] {
            return None;
        }
        if sigma == self.sigma[last] {
            return Some((last - 1, 1.0));
        }
        let ls = sigma.ln();
        let upper = self.log_sigma.partition_point(|&x| x <= ls).clamp(1, last);
        let i = upper - 1;
        let t = ((ls - self.log_sigma[i]) / (self.log_sigma[i + 1] - self.log_sigma[i]))
            .clamp(0.0, 1.0);
        Some((i, t))
    }

    /// Table lookup; nondecreasing in `sigma` exactly.
    #[inline]
    pub fn eval(&self, sigma: f64) -> f64 {
        match self.locate(sigma) {
            Some((i, t)) => {
                let (lo, hi) = (self.values[i], self.values[i + 1]);
                (lo + (hi - lo) * t).clamp(lo, hi)
            }
            None if sigma > self.sigma_max() => self.upper,
            None => 0.0,
        }
    }

    /// Interpolated node standard error; 0 outside the grid.
    pub fn stderr_at(&self, sigma: f64) -> f64 {
        match self.locate(sigma) {
            Some((i, t)) => self.stderrs[i] * (1.0 - t) + self.stderrs[i + 1] * t,
            None => 0.0,
        }
    }

    /// Upper bound on the standard error of `eval(b) − eval(a)`, summing the
    /// common-random-number difference errors of the covered intervals.
    pub fn difference_stderr(&self, a: f64, b: f64) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let clip = |s: f64| s.clamp(self.sigma_min(), self.sigma_max());
        let (a, b) = (clip(a), clip(b));
        let (Some((ia, ta)), Some((ib, tb))) = (self.locate(a), self.locate(b)) else {
            return 0.0;
        };
        if ia == ib {
            return self.diff_stderrs[ia] * (tb - ta);
        }
        let mut total = self.diff_stderrs[ia] * (1.0 - ta) + self.diff_stderrs[ib] * tb;
        total += self.diff_stderrs[ia + 1..ib].iter().sum::<f64>();
        total
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let m = &self.meta;
        let rate = m.rate.map_or_else(|| "*".to_string(), |r| format!("{r}"));
        writeln!(
            out,
            "# {} table B={} R={} sigma2={} seed={} n_samples={} antithetic={}",
            match self.kind {
                TableKind::Mmse => "mmse",
                TableKind::Entropy => "entropy",
            },
            m.b,
            rate,
            m.sigma2,
            m.seed,
            m.n_samples,
            m.antithetic
        )?;
        writeln!(out, "sigma,value,stderr")?;
        for i in 0..self.sigma.len() {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", self.sigma[i], self.values[i], self.stderrs[i])?;
        }
        Ok(())
    }
}

impl Tables {
    /// Builds both tables on `grid` with common random numbers.
    pub fn build(params: &UnderlyingParams, grid: &TableGrid, mc: &MCConfig) -> Result<Self> {
        Self::build_inner(params, Some(params.rate), grid, mc)
    }

    fn build_inner(
        params: &UnderlyingParams,
        rate: Option<f64>,
        grid: &TableGrid,
        mc: &MCConfig,
    ) -> Result<Self> {
        params.validate()?;
        grid.validate()?;
        let bank = SampleBank::new(params.b, mc)?;
        let sigma = grid.nodes();
        let nodes = estimate_nodes(&bank, &sigma);
        let meta = TableMeta {
            b: params.b,
            rate,
            sigma2: params.sigma2,
            seed: mc.seed,
            n_samples: mc.n_samples,
            antithetic: mc.antithetic,
        };
        let column = |f: fn(&NodeEstimate) -> f64| nodes.iter().map(f).collect::<Vec<_>>();
        let mmse = MonotoneTable::from_raw(
            TableKind::Mmse,
            meta,
            sigma.clone(),
            column(|n| n.mmse),
            column(|n| n.mmse_se),
            column(|n| n.mmse_diff_se)[1..].to_vec(),
        );
        let entropy = MonotoneTable::from_raw(
            TableKind::Entropy,
            meta,
            sigma,
            column(|n| n.entropy),
            column(|n| n.entropy_se),
            column(|n| n.entropy_diff_se)[1..].to_vec(),
        );
        Ok(Self { mmse, entropy })
    }
}

pub fn build_mmse_table(
    params: &UnderlyingParams,
    grid: &TableGrid,
    mc: &MCConfig,
) -> Result<MonotoneTable> {
    Ok(Tables::build(params, grid, mc)?.mmse)
}

pub fn build_entropy_table(
    params: &UnderlyingParams,
    grid: &TableGrid,
    mc: &MCConfig,
) -> Result<MonotoneTable> {
    Ok(Tables::build(params, grid, mc)?.entropy)
}

#[derive(Clone, Copy, Debug, Default)]
struct NodeEstimate {
    mmse: f64,
    mmse_se: f64,
    entropy: f64,
    entropy_se: f64,
    /// Difference stderr to the previous node (0 for the first node).
    mmse_diff_se: f64,
    entropy_diff_se: f64,
}

fn collect_samples(bank: &SampleBank, sigma: f64) -> Vec<SectionSample> {
    let mut out = Vec::with_capacity(bank.len());
    bank.for_each(sigma, |s| out.push(s));
    out
}

fn estimate_range(bank: &SampleBank, sigma: &[f64], range: std::ops::Range<usize>) -> Vec<NodeEstimate> {
    let upper = 1.0 - 1.0 / bank.section_size() as f64;
    let mut prev = (range.start > 0).then(|| collect_samples(bank, sigma[range.start - 1]));
    let mut out = Vec::with_capacity(range.len());
    for i in range {
        let cur = collect_samples(bank, sigma[i]);
        let (mut m, mut s) = (Accumulator::default(), Accumulator::default());
        let (mut dm, mut ds) = (Accumulator::default(), Accumulator::default());
        for (k, x) in cur.iter().enumerate() {
            m.push(x.sq_error);
            s.push(x.entropy);
            if let Some(p) = &prev {
                dm.push(x.sq_error - p[k].sq_error);
                ds.push(x.entropy - p[k].entropy);
            }
        }
        let (me, se) = (m.estimate(), s.estimate());
        out.push(NodeEstimate {
            mmse: me.value.clamp(0.0, upper),
            mmse_se: me.stderr,
            entropy: se.value.clamp(0.0, 1.0),
            entropy_se: se.stderr,
            mmse_diff_se: if prev.is_some() { dm.estimate().stderr } else { 0.0 },
            entropy_diff_se: if prev.is_some() { ds.estimate().stderr } else { 0.0 },
        });
        prev = Some(cur);
    }
    out
}

/// Nodes are estimated independently, so the split across workers does not
/// change any result bit.
fn estimate_nodes(bank: &SampleBank, sigma: &[f64]) -> Vec<NodeEstimate> {
    let workers = worker_count().min(sigma.len()).max(1);
    if workers == 1 {
        return estimate_range(bank, sigma, 0..sigma.len());
    }
    let chunk = sigma.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..sigma.len())
            .step_by(chunk)
            .map(|start| {
                let end = (start + chunk).min(sigma.len());
                scope.spawn(move || estimate_range(bank, sigma, start..end))
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("table worker panicked")).collect()
    })
}

/// Pool-adjacent-violators projection onto nondecreasing sequences (equal weights).
pub fn isotonic_nondecreasing(ys: &[f64]) -> Vec<f64> {
    // (sum, count) per block
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(ys.len());
    for &y in ys {
        blocks.push((y, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 > s1 / n1 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (s, n) in blocks {
        out.extend(std::iter::repeat_n(s / n as f64, n));
    }
    out
}

/// Source of tables for a given parameter set.
pub trait TableFactory {
    fn tables(&self, params: &UnderlyingParams) -> Result<Arc<Tables>>;
}

/// Rebuilds tables for each rate on [`TableGrid::default_for`], reusing the seed.
#[derive(Clone, Debug)]
pub struct PerRateTables {
    pub mc: MCConfig,
    pub n_points: usize,
}

impl TableFactory for PerRateTables {
    fn tables(&self, params: &UnderlyingParams) -> Result<Arc<Tables>> {
        let grid = TableGrid { n_points: self.n_points, ..TableGrid::default_for(params) };
        Ok(Arc::new(Tables::build(params, &grid, &self.mc)?))
    }
}

/// Builds one table pair per section size on a fixed grid and hands it out for
/// every rate. `mmse(Σ)` and `S_u(Σ)` do not depend on `R` or `σ²`, so this is
/// the per-rate table evaluated on a grid that covers all rates at once.
#[derive(Debug)]
pub struct CachedTableFactory {
    mc: MCConfig,
    grid: TableGrid,
    cache: Mutex<HashMap<usize, Arc<Tables>>>,
}

impl CachedTableFactory {
    pub fn new(mc: MCConfig, grid: TableGrid) -> Result<Self> {
        mc.validate()?;
        grid.validate()?;
        Ok(Self { mc, grid, cache: Mutex::new(HashMap::new()) })
    }

    /// Grid wide enough for every rate in `[r_lo, r_hi]` at noise `sigma2`.
    pub fn for_rates(mc: MCConfig, sigma2: f64, r_lo: f64, r_hi: f64, n_points: usize) -> Result<Self> {
        Self::new(mc, TableGrid::for_rates(sigma2, r_lo, r_hi, n_points))
    }

    pub fn grid(&self) -> &TableGrid {
        &self.grid
    }

    pub fn mc(&self) -> &MCConfig {
        &self.mc
    }
}

impl TableFactory for CachedTableFactory {
    fn tables(&self, params: &UnderlyingParams) -> Result<Arc<Tables>> {
        if let Some(t) = self.cache.lock().unwrap().get(&params.b) {
            return Ok(Arc::clone(t));
        }
        let built = Arc::new(Tables::build_inner(params, None, &self.grid, &self.mc)?);
        let mut cache = self.cache.lock().unwrap();
        Ok(Arc::clone(cache.entry(params.b).or_insert(built)))
    }
}

impl<T: TableFactory + ?Sized> TableFactory for &T {
    fn tables(&self, params: &UnderlyingParams) -> Result<Arc<Tables>> {
        (**self).tables(params)
    }
}
