//! Simulation and exact-analysis toolkit for the Poisson process with
//! uniform catastrophes.
//!
//! The process jumps at the instants of a rate-`alpha` Poisson clock. At each
//! instant it either grows by one (probability `lambda / (lambda + mu)`) or
//! falls uniformly onto one of the states below the current one. State 0
//! always moves to 1.
//!
//! Modules:
//! - [`process`]: parameters and the two trajectory samplers.
//! - [`coupling`]: the shared-clock coupling of two copies started apart.
//! - [`exact`]: transient distributions by uniformization.
//! - [`rates`]: closed-form rate functions, normalizers and tail bounds.
//! - [`lab`]: numerical experiments on the large-deviation asymptotics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod exact;
pub mod gof;
pub mod lab;
pub mod logspace;
pub mod poisson;
pub mod process;
pub mod rates;
pub mod rng;

pub use coupling::{coupled_catastrophe, max_discrepancy, simulate_coupled, CoupledTrajectory};
pub use error::{Error, Result};
pub use exact::{
    default_n_states, pushforward_step, tail_probability, transient_distribution,
    truncation_error_bound, DistributionVector, SolveOptions,
};
pub use lab::{
    empirical_rate_curve, is_estimate_tail, ldp_sandwich, lln_sup_check, ExperimentResult,
    RateCurvePoint, Sandwich,
};
pub use logspace::LogProb;
pub use process::{
    embedded_step, sample_catastrophe, simulate_decomposed, simulate_embedded, ModelParams,
    Trajectory,
};
pub use rates::{
    catastrophe_sum_bound, normalizer_psi, poisson_lower_tail_bound, rate_i1, rate_i2, rate_jk,
    rate_poisson_window, ExtReal, Regime, RegimeRateFunction, ScalingSpec,
};
