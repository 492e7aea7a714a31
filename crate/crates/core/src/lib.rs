//! Simulation of a robust weak measurement: a polarization qubit passes `n`
//! blocks of pre-selection, unit coupling to one shared Gaussian pointer and
//! post-selection, and a single detector click estimates the weak value of
//! the summed observable.
//!
//! * [`protocol`]: closed-form weak values, pointer moments and
//!   post-selection probability.
//! * [`density`]: single-block reduced polarization state.
//! * [`grid`]: brute-force pointer evolution used as an independent oracle.
//! * [`sim`]: seeded Monte Carlo of single-photon clicks.
//! * [`calibration`]: two-anchor affine pointer calibration.
//! * [`experiment`]: configuration, presets and the command implementations
//!   behind the `weakval` binary.
//!
//! The analytic layer and the grid are generic over [`Scalar`]; the
//! aliases below fix the common `f64` instantiation.

// `!(x > 0)` is deliberate: NaN must fail positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod density;
pub mod double_double;
pub mod error;
pub mod experiment;
pub mod format;
pub mod grid;
pub mod protocol;
pub mod scalar;
pub mod sim;

pub use double_double::DoubleDouble;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub use calibration::calibrate;
pub use density::{build_rho_alpha, wv_single_trace};
pub use grid::{cdf, evolve_joint, evolve_sequential, init_gaussian, moments, GridSpec};
pub use protocol::{
    coupling_weights, expectation_sigma_sum, final_amplitudes, pointer_std, postselect_probability,
    second_moment, sweep_beta, wv_single, wv_sum,
};
pub use sim::{anomaly_report, run_trials, sample_click, ClickOutcome, DetectorModel, RunSummary};

pub type Params = protocol::ProtocolParams<f64>;
pub type Weights = protocol::CouplingWeights<f64>;
pub type DensityMatrix = density::DensityMatrix2<f64>;
pub type PointerState = protocol::PointerSuperposition<f64>;
pub type Wavefunction = grid::GridWavefunction<f64>;
pub type Calibration = calibration::Calibration<f64>;

/// Extended-precision instantiation for badly conditioned parameters.
pub type ParamsDD = protocol::ProtocolParams<DoubleDouble>;
