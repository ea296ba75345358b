//! State evolution and the potential-function method for sparse superposition
//! codes on the AWGN channel.
//!
//! The crate covers both the underlying (uncoupled) ensemble and the spatially
//! coupled ensemble:
//!
//! * [`ensemble`]: code parameters, design functions and the coupling-variance
//!   matrix `J`.
//! * [`denoiser`]: the section-wise MMSE denoiser and Monte-Carlo estimators of
//!   `mmse(Σ)` and the entropy `S_u(Σ)`.
//! * [`table`]: monotone lookup tables built from those estimators.
//! * [`state_evolution`]: scalar and profile recursions, degradation order,
//!   saturated profiles and the shift operator.
//! * [`potential`]: underlying, coupled and large-section-size potentials and
//!   the free energy gap.
//! * [`thresholds`]: solvers for the AMP, potential and coupled thresholds.
//! * [`verification`]: numerical checks of the threshold-saturation argument.
//!
//! Indices are 0-based throughout the Rust API. CSV output uses 1-based block
//! indices.

pub mod denoiser;
pub mod ensemble;
mod error;
pub mod io;
pub mod potential;
pub mod rng;
pub mod state_evolution;
pub mod table;
pub mod thresholds;
pub mod verification;

pub use denoiser::{denoise_section, entropy_estimate, mmse_estimate, Estimate, MCConfig};
pub use ensemble::{
    build_coupling_matrix, effective_rate, measurement_rate, CoupledParams, CouplingMatrix,
    DesignFunction, DesignKind, UnderlyingParams,
};
pub use error::{Error, Result};
pub use potential::{
    free_energy_gap, potential_coupled, potential_energy_underlying, potential_large_b,
    potential_underlying, stationarity_residual, GapReport, PotentialCurve,
};
pub use state_evolution::{
    basin_boundary, is_degraded, iterate_coupled, iterate_underlying, max_profile_increment,
    saturate_profile, se_step_coupled, se_step_underlying, shift, sigma_coupled,
    sigma_underlying, Basin, Degradation, ErrorProfile, FixedPointReport, IterationConfig,
    SaturatedProfile,
};
pub use table::{CachedTableFactory, MonotoneTable, TableFactory, TableGrid, TableKind, Tables};
pub use thresholds::{
    amp_threshold_coupled, amp_threshold_underlying, capacity, large_b_limits,
    potential_threshold, ThresholdOptions, ThresholdReport,
};
pub use verification::LemmaReport;
