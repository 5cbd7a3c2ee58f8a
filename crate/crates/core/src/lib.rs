//! Smoothed one-sided tests of multivariate moment inequalities.
//!
//! Tests `H0: μ ≥ 0` against `μ_j < 0` for some `j` using the statistic
//! `Q = Φ(Q1/Q2)`, where `Q1` combines smoothed indicators of the
//! standardized estimates with a finite-sample correction `Λ_T`. The null
//! is rejected when `Q < α`; no critical-value simulation is needed.
//!
//! The crate also ships the comparison tests based on generalized moment
//! selection, a Monte Carlo harness that reproduces size and power tables,
//! and closed-form local power with its Neyman–Pearson envelope.
//!
//! ```
//! use onesided::{compute_statistic, decide, Smoother, SymMatrix, TestInput, Tuner};
//!
//! let input = TestInput {
//!     mu_hat: vec![-0.2, 0.3],
//!     v_hat: SymMatrix::identity(2),
//!     t_obs: 250,
//!     theta_hat: vec![1.0, 1.0],
//!     smoother: Smoother::Logistic,
//!     tuner: Tuner::Sic,
//! };
//! let outcome = compute_statistic(&input).unwrap();
//! assert!(decide(&outcome, 0.05).unwrap());
//! ```

pub mod cli;
pub mod error;
pub mod gms;
pub mod moments;
pub mod montecarlo;
pub mod numerics;
pub mod power;
pub mod qp;
pub mod rng;
pub mod smoothers;
pub mod statistic;

pub use error::{Error, Result};
pub use gms::{
    gms_critical_value, gms_critical_values, gms_recenter, run_gms_test, run_gms_tests,
    statistic_value, GmsConfig, GmsInput, GmsResult, GmsStatistic, Resample,
};
pub use moments::{resolve_weights, sample_moments, toeplitz_cov, DataMatrix, WeightPolicy};
pub use montecarlo::{
    aggregate, format_summary, generate_sample, mu_power_design, mu_size_design, run_campaign,
    standardized_noise, AggregateGrid, AggregateMode, CampaignSpec, DgpScenario, Noise,
    RejectionTable, Replication, TestSpec,
};
pub use numerics::{
    cholesky, normal_cdf, normal_pdf, normal_quantile, psd_sqrt, solve_spd, SymMatrix,
};
pub use power::{local_power, np_bound, LocalAlternative};
pub use qp::{nn_project, qlr_statistic, NnProjector, NnlsSolution};
pub use rng::Stream;
pub use smoothers::{Smoother, Tuner};
pub use statistic::{compute_statistic, decide, lambda_adjustment, TestInput, TestOutcome};
