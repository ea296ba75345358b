//! Run configuration: JSON file values overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ssc_core::thresholds::ThresholdOptions;
use ssc_core::{capacity, CouplingMatrix, DesignFunction, DesignKind, IterationConfig, MCConfig, UnderlyingParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SeMode {
    Underlying,
    Coupled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "B")]
    pub b: usize,
    /// Unset for threshold solves. Other commands fall back to `C/2`.
    #[serde(rename = "R")]
    pub rate: Option<f64>,
    pub snr: f64,
    #[serde(rename = "Gamma")]
    pub gamma: usize,
    pub w: usize,
    pub design: DesignKind,
    /// Design parameter: triangular edge ratio or asymmetric backward/forward ratio.
    pub shape: Option<f64>,
    pub seed: u64,
    /// Defaults to 10⁵ for `B ≤ 16`.
    pub n_samples: Option<usize>,
    pub antithetic: bool,
    pub table_points: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub coupled_max_iters: usize,
    #[serde(rename = "tol_R")]
    pub tol_r: f64,
    /// Finite-difference step for stationarity checks.
    pub h: f64,
    pub gap_grid: usize,
    pub potential_points: usize,
    pub se_mode: SeMode,
    /// Initial MSE. Underlying default 1; coupled default is the pinned all-ones profile.
    pub e_init: Option<f64>,
    pub w_list: Vec<usize>,
    #[serde(rename = "sweep_B")]
    pub sweep_b: Vec<usize>,
    pub sweep_snr: Vec<f64>,
    pub out: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            b: 2,
            rate: None,
            snr: 15.0,
            gamma: 64,
            w: 3,
            design: DesignKind::Rectangular,
            shape: None,
            seed: 1,
            n_samples: None,
            antithetic: false,
            table_points: 256,
            tol: 1e-8,
            max_iters: 10_000,
            coupled_max_iters: 200_000,
            tol_r: 2e-3,
            h: 1e-3,
            gap_grid: 512,
            potential_points: 201,
            se_mode: SeMode::Underlying,
            e_init: None,
            w_list: vec![2, 4, 8],
            sweep_b: vec![2, 4, 8, 16],
            sweep_snr: Vec::new(),
            out: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fills derived defaults so the serialized config reproduces the run exactly.
    pub fn resolved(mut self) -> Self {
        self.n_samples = Some(self.n_samples.unwrap_or_else(|| MCConfig::default_samples(self.b)));
        if self.sweep_snr.is_empty() {
            self.sweep_snr = vec![self.snr];
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        UnderlyingParams::from_snr(self.b, self.rate.unwrap_or(1.0), self.snr)?;
        if let Some(r) = self.rate {
            if !(r > 0.0 && r.is_finite()) {
                bail!("R must be positive, got {r}");
            }
        }
        self.mc().validate()?;
        self.iteration().validate()?;
        self.coupled_iteration().validate()?;
        self.threshold_options().validate()?;
        CouplingMatrix::new(self.gamma, self.w, &self.design_function()?)?;
        if self.table_points < 16 {
            bail!("table_points must be >= 16, got {}", self.table_points);
        }
        if !(self.h > 0.0 && self.h <= 0.25) {
            bail!("h must lie in (0, 0.25], got {}", self.h);
        }
        if self.gap_grid < 2 || self.potential_points < 2 {
            bail!("gap_grid and potential_points must be >= 2");
        }
        if let Some(e) = self.e_init {
            if !(0.0..=1.0).contains(&e) {
                bail!("e_init must lie in [0, 1], got {e}");
            }
        }
        if self.w_list.contains(&0) {
            bail!("w_list entries must be >= 1");
        }
        for &b in &self.sweep_b {
            UnderlyingParams::from_snr(b, 1.0, self.snr)?;
        }
        for &snr in &self.sweep_snr {
            UnderlyingParams::from_snr(self.b, 1.0, snr)?;
        }
        Ok(())
    }

    /// Configured rate, or `C/2` when unset.
    pub fn rate_or_default(&self) -> f64 {
        self.rate.unwrap_or(0.5 * capacity(self.snr))
    }

    pub fn params(&self) -> Result<UnderlyingParams> {
        Ok(UnderlyingParams::from_snr(self.b, self.rate_or_default(), self.snr)?)
    }

    pub fn mc(&self) -> MCConfig {
        MCConfig {
            seed: self.seed,
            n_samples: self.n_samples.unwrap_or_else(|| MCConfig::default_samples(self.b)),
            antithetic: self.antithetic,
        }
    }

    pub fn design_function(&self) -> Result<DesignFunction> {
        Ok(DesignFunction::from_kind(self.design, self.shape)?)
    }

    pub fn iteration(&self) -> IterationConfig {
        IterationConfig::new(self.tol, self.max_iters)
    }

    pub fn coupled_iteration(&self) -> IterationConfig {
        IterationConfig::new(self.tol, self.coupled_max_iters)
    }

    pub fn threshold_options(&self) -> ThresholdOptions {
        ThresholdOptions {
            tol_r: self.tol_r,
            iteration: self.iteration(),
            coupled_iteration: self.coupled_iteration(),
            gap_grid: self.gap_grid,
            ..ThresholdOptions::default()
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON file with RunConfig fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Section size.
    #[arg(long = "B")]
    pub b: Option<usize>,
    /// Rate in bits per channel use.
    #[arg(long = "R")]
    pub rate: Option<f64>,
    #[arg(long)]
    pub snr: Option<f64>,
    /// Number of coupled blocks.
    #[arg(long)]
    pub gamma: Option<usize>,
    /// Coupling window.
    #[arg(long)]
    pub w: Option<usize>,
    /// rectangular, triangular or asymmetric-exponential.
    #[arg(long)]
    pub design: Option<DesignKind>,
    #[arg(long)]
    pub shape: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte-Carlo samples per table node.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub antithetic: Option<bool>,
    #[arg(long)]
    pub table_points: Option<usize>,
    /// SE convergence tolerance (sup norm).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub coupled_max_iters: Option<usize>,
    /// Threshold bisection tolerance.
    #[arg(long = "tol-R")]
    pub tol_r: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub mode: Option<SeMode>,
    #[arg(long)]
    pub e_init: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub w_list: Option<Vec<usize>>,
    #[arg(long = "sweep-B", value_delimiter = ',')]
    pub sweep_b: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_snr: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<OutputFormat>,
}

impl Overrides {
    pub fn build(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { c.$target = v; })*
            };
        }
        set!(b => b, snr => snr, gamma => gamma, w => w, design => design, seed => seed,
             antithetic => antithetic, table_points => table_points, tol => tol, max_iters => max_iters,
             coupled_max_iters => coupled_max_iters, tol_r => tol_r, h => h, mode => se_mode,
             w_list => w_list, sweep_b => sweep_b, sweep_snr => sweep_snr, out => out, format => format);
        if self.rate.is_some() {
            c.rate = self.rate;
        }
        if self.shape.is_some() {
            c.shape = self.shape;
        }
        if self.samples.is_some() {
            c.n_samples = self.samples;
        }
        if self.e_init.is_some() {
            c.e_init = self.e_init;
        }
        Ok(c)
    }
}
