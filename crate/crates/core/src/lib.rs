//! Fixed-design nonparametric regression with pairwise negatively quadrant
//! dependent (NQD) errors.
//!
//! The estimator is the linear smoother `g_n(x) = Σ_k ω_nk(x) Y_nk` over an
//! ordered design on `[0, 1]`. The crate provides the weight families
//! (nearest-neighbour and Priestley–Chao kernel weights), validators for the
//! weight and kernel regularity conditions, Gaussian NQD error generators with
//! an empirical quadrant-dependence test, numerical checks of the supporting
//! moment inequalities and Riemann-sum limits, and a Monte Carlo harness for
//! the mean, uniform-mean and in-probability consistency results.

pub mod config;
pub mod design;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod kernels;
pub mod lemma_suite;
pub mod nqd_errors;
pub mod report;
pub mod rng;
pub mod stats;
pub mod weights;

pub mod cli;

pub use design::DesignGrid;
pub use error::{Error, Result};
pub use estimator::{bias, estimate, simulate_sample, RegressionFunction, Sample};
pub use experiments::{
    run_experiment, run_mean_convergence, run_probability_convergence, run_uniform_convergence,
    ConvergenceReport, ExperimentConfig, TheoremId,
};
pub use kernels::{check_condition_a1_a3, KernelSpec};
pub use lemma_suite::{verify_lemma22, verify_riemann_limits, BandwidthRule, LemmaReport};
pub use nqd_errors::{check_nqd, lemma21_product_check, sample_errors, ErrorModel};
pub use weights::{check_b, check_b_uniform, nn_weights, pc_weights, ConditionId, ConditionReport, WeightMatrix};

/// Version string written into every emitted artifact.
pub const TOOL_VERSION: &str = concat!("nqdreg ", env!("CARGO_PKG_VERSION"));
