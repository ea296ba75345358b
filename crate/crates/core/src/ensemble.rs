//! Code-ensemble parameters and the coupling-variance matrix.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Parameters of the underlying (uncoupled) ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnderlyingParams {
    /// Section size.
    pub b: usize,
    /// Code rate in bits per channel use.
    pub rate: f64,
    /// Noise variance.
    pub sigma2: f64,
}

impl UnderlyingParams {
    pub fn new(b: usize, rate: f64, sigma2: f64) -> Result<Self> {
        let p = Self { b, rate, sigma2 };
        p.validate()?;
        Ok(p)
    }

    /// Build from a signal-to-noise ratio instead of a noise variance.
    pub fn from_snr(b: usize, rate: f64, snr: f64) -> Result<Self> {
        if !(snr > 0.0) || !snr.is_finite() {
            return Err(invalid(format!("snr must be positive and finite, got {snr}")));
        }
        Self::new(b, rate, 1.0 / snr)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(invalid(format!("section size B must be >= 2, got {}", self.b)));
        }
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(invalid(format!("rate must be positive and finite, got {}", self.rate)));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(invalid(format!(
                "noise variance must be positive and finite, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    pub fn snr(&self) -> f64 {
        1.0 / self.sigma2
    }

    /// `log2(B)`, the number of bits carried by one section.
    pub fn log2_b(&self) -> f64 {
        (self.b as f64).log2()
    }

    /// Same section size and noise, different rate.
    pub fn with_rate(&self, rate: f64) -> Self {
        Self { rate, ..*self }
    }
}

/// Measurement rate `α = M/N = log2(B) / (B R)`.
pub fn measurement_rate(params: &UnderlyingParams) -> f64 {
    params.log2_b() / (params.b as f64 * params.rate)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    Rectangular,
    Triangular,
    AsymmetricExponential,
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignKind::Rectangular => "rectangular",
            DesignKind::Triangular => "triangular",
            DesignKind::AsymmetricExponential => "asymmetric-exponential",
        })
    }
}

impl std::str::FromStr for DesignKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" => Ok(DesignKind::Rectangular),
            "triangular" => Ok(DesignKind::Triangular),
            "asymmetric-exponential" => Ok(DesignKind::AsymmetricExponential),
            other => Err(invalid(format!("unknown design function '{other}'"))),
        }
    }
}

/// Window shape `g` used to build the coupling variances.
///
/// The stored shape is normalized so that `∫_{-1}^{1} g(x) dx / 2 = 1`; the
/// discrete normalization for a given window `w` is applied by
/// [`DesignFunction::sampled`]. `g0`, `gstar` and `gtilde` refer to the
/// continuously normalized shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignFunction {
    pub kind: DesignKind,
    /// Shape parameter. Triangular: edge-to-centre ratio `g(±1)/g(0)` in `(0, 1]`.
    /// Asymmetric exponential: backward-to-forward ratio `g(1)/g(-1)` (> 0).
    /// Ignored for the rectangular window.
    pub shape: f64,
    pub g0: f64,
    pub gstar: f64,
    pub gtilde: f64,
}

impl DesignFunction {
    pub fn rectangular() -> Self {
        Self::with_constants(DesignKind::Rectangular, 1.0, 1.0, 0.0)
    }

    /// `g(x) ∝ 1 − (1 − edge)|x|`.
    pub fn triangular(edge: f64) -> Result<Self> {
        if !(edge > 0.0 && edge <= 1.0) {
            return Err(invalid(format!("triangular edge ratio must lie in (0, 1], got {edge}")));
        }
        // mean of 1 - (1-edge)|x| over [-1, 1] is (1 + edge) / 2
        let scale = 2.0 / (1.0 + edge);
        Ok(Self::with_constants(
            DesignKind::Triangular,
            edge,
            scale * edge,
            scale * (1.0 - edge),
        ))
    }

    /// `g(x) ∝ ratio^{x/2}`; `x = (r − c)/w > 0` is backward coupling, so
    /// `ratio > 1` weights the backward blocks more heavily.
    pub fn asymmetric_exponential(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(invalid(format!("asymmetric ratio must be positive, got {ratio}")));
        }
        let half_log = 0.5 * ratio.ln();
        let mean = if half_log.abs() < 1e-12 { 1.0 } else { half_log.sinh() / half_log };
        let scale = 1.0 / mean;
        let g0 = scale * (-half_log.abs()).exp();
        let gstar = scale * half_log.abs() * half_log.abs().exp();
        Ok(Self::with_constants(DesignKind::AsymmetricExponential, ratio, g0, gstar))
    }

    pub fn from_kind(kind: DesignKind, shape: Option<f64>) -> Result<Self> {
        match kind {
            DesignKind::Rectangular => Ok(Self::rectangular()),
            DesignKind::Triangular => Self::triangular(shape.unwrap_or(0.5)),
            DesignKind::AsymmetricExponential => Self::asymmetric_exponential(shape.unwrap_or(2.0)),
        }
    }

    fn with_constants(kind: DesignKind, shape: f64, g0: f64, gstar: f64) -> Self {
        Self { kind, shape, g0, gstar, gtilde: gtilde(g0, gstar) }
    }

    /// Continuously normalized shape; zero outside `[-1, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() > 1.0 {
            return 0.0;
        }
        match self.kind {
            DesignKind::Rectangular => 1.0,
            DesignKind::Triangular => {
                let scale = 2.0 / (1.0 + self.shape);
                scale * (1.0 - (1.0 - self.shape) * x.abs())
            }
            DesignKind::AsymmetricExponential => {
                let half_log = 0.5 * self.shape.ln();
                let mean = if half_log.abs() < 1e-12 { 1.0 } else { half_log.sinh() / half_log };
                (half_log * x).exp() / mean
            }
        }
    }

    /// Samples `g_w(k/w)` for `k = -w..=w`, rescaled so their mean is exactly 1.
    pub fn sampled(&self, w: usize) -> Vec<f64> {
        let wf = w as f64;
        let raw: Vec<f64> = (-(w as i64)..=w as i64).map(|k| self.eval(k as f64 / wf)).collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        raw.into_iter().map(|g| g / mean).collect()
    }

    /// `(g0, gstar, gtilde)` of the window actually used at coupling width `w`.
    pub fn constants_for(&self, w: usize) -> (f64, f64, f64) {
        let wf = w as f64;
        let raw_mean = (-(w as i64)..=w as i64)
            .map(|k| self.eval(k as f64 / wf))
            .sum::<f64>()
            / (2 * w + 1) as f64;
        let g0 = self.g0 / raw_mean;
        let gstar = self.gstar / raw_mean;
        (g0, gstar, gtilde(g0, gstar))
    }
}

pub fn gtilde(g0: f64, gstar: f64) -> f64 {
    (1.0 + gstar).max(g0 + 2.0 * gstar)
}

/// Parameters of the spatially coupled ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledParams {
    pub underlying: UnderlyingParams,
    /// Number of blocks Γ.
    pub gamma: usize,
    /// Coupling window.
    pub w: usize,
    pub design: DesignFunction,
}

impl CoupledParams {
    pub fn new(
        underlying: UnderlyingParams,
        gamma: usize,
        w: usize,
        design: DesignFunction,
    ) -> Result<Self> {
        let p = Self { underlying, gamma, w, design };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.underlying.validate()?;
        if self.w < 1 {
            return Err(invalid("coupling window w must be >= 1"));
        }
        if self.gamma <= 8 * self.w {
            return Err(invalid(format!(
                "need Gamma > 8w for a well-defined code, got Gamma={} w={}",
                self.gamma, self.w
            )));
        }
        Ok(())
    }
}

/// Rate after discounting the `8w` seeded boundary blocks.
pub fn effective_rate(params: &CoupledParams) -> f64 {
    params.underlying.rate * (1.0 - 8.0 * params.w as f64 / params.gamma as f64)
}

/// Dense Γ×Γ block-variance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    gamma: usize,
    w: usize,
    design: DesignKind,
    /// Row-major entries `J[r][c]`.
    entries: Vec<f64>,
    /// Row normalization factors `γ_r`.
    row_factors: Vec<f64>,
}

impl CouplingMatrix {
    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn design(&self) -> DesignKind {
        self.design
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.gamma + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.gamma..(r + 1) * self.gamma]
    }

    pub fn row_factors(&self) -> &[f64] {
        &self.row_factors
    }

    /// Indices `k` with `|k - i| <= w` clipped to `0..Γ`; `J` vanishes elsewhere.
    #[inline]
    pub fn band(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.w)..(i + self.w + 1).min(self.gamma)
    }

    pub fn row_mean(&self, r: usize) -> f64 {
        self.row(r).iter().sum::<f64>() / self.gamma as f64
    }

    pub fn column_mean(&self, c: usize) -> f64 {
        (0..self.gamma).map(|r| self.get(r, c)).sum::<f64>() / self.gamma as f64
    }

    /// Columns on which variance symmetry holds (0-based `2w..Γ-2w`).
    pub fn symmetric_columns(&self) -> std::ops::Range<usize> {
        2 * self.w..self.gamma - 2 * self.w
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# J matrix Gamma={} w={} design={}", self.gamma, self.w, self.design)?;
        for r in 0..self.gamma {
            let line: Vec<String> = self.row(r).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// `J[r][c] = γ_r Γ g_w((r−c)/w) / (2w+1)` with `γ_r` chosen so each row has mean 1.
///
/// Rejects `Γ <= 8w`; use [`CouplingMatrix::new`] for the bare matrix.
pub fn build_coupling_matrix(params: &CoupledParams) -> Result<CouplingMatrix> {
    params.validate()?;
    CouplingMatrix::new(params.gamma, params.w, &params.design)
}

impl CouplingMatrix {
    /// Matrix for any `Γ >= 2w + 1`, without the seeding constraint `Γ > 8w`.
    pub fn new(gamma: usize, w: usize, design: &DesignFunction) -> Result<Self> {
        if w < 1 {
            return Err(invalid("coupling window w must be >= 1"));
        }
        if gamma < 2 * w + 1 {
            return Err(invalid(format!("need Gamma >= 2w+1, got Gamma={gamma} w={w}")));
        }
        let weights = design.sampled(w);
        let width = (2 * w + 1) as f64;
        let scale = gamma as f64 / width;

        let mut entries = vec![0.0; gamma * gamma];
        let mut row_factors = vec![1.0; gamma];
        for r in 0..gamma {
            let lo = r.saturating_sub(w);
            let hi = (r + w + 1).min(gamma);
            // Rows whose whole window fits keep γ_r = 1 exactly.
            let interior = r >= w && r + w < gamma;
            let factor = if interior {
                1.0
            } else {
                let covered: f64 = (lo..hi).map(|c| weights[r + w - c]).sum();
                width / covered
            };
            row_factors[r] = factor;
            for c in lo..hi {
                entries[r * gamma + c] = factor * scale * weights[r + w - c];
            }
        }
        Ok(Self { gamma, w, design: design.kind, entries, row_factors })
    }
}
