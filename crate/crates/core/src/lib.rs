//! Calibration tests for long-run default rates (LRDR) measured on
//! overlapping one-year observation windows.
//!
//! Windows that start less than a year apart share obligors, so the yearly
//! default rates are correlated. The crate provides the exact variance of the
//! LRDR, conservative variance bounds for the portfolio-level test, the
//! resulting acceptance ranges, and a Monte Carlo simulator for checking the
//! normal approximation.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common choice.

// `!(x > 0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod calibration;
pub mod error;
pub mod moments;
pub mod portfolio;
pub mod scalar;
pub mod simulator;
pub mod sum;

pub use bounds::{
    build_lp, greedy_minimize, linearization, mu_old_bound, pd_bar, sigma_alt, sigma_min, AltBound, Linearization,
    LinearizationMode, LpProblem, LpSolution, SigmaMin,
};
pub use calibration::{
    acceptance_range, grade_test, long_run_central_tendency, normal_quantile, portfolio_test, AcceptanceRange,
    Diagnostics, Method, TestConfig, TestResult,
};
pub use error::{Error, Result};
pub use moments::{
    grade_variance, inverse_count_sum, lambda_coefficients, long_run_mean, long_run_variance_exact, rate_covariance,
    realized_lrdr, state_covariance, VarianceBreakdown,
};
pub use portfolio::{
    build_panel, overlap_weight, read_panel_csv, write_panel_csv, MasterScale, ObligorRecord, Panel, PdTable,
};
pub use scalar::Real;
pub use simulator::{
    convergence_heuristic, quarterly_hazard, simulate_lrdr, simulate_panel, ConvergenceReport, Scenario, Simulation,
    SimulationSummary,
};
pub use sum::KahanSum;

pub type Panel64 = Panel<f64>;
pub type Panel32 = Panel<f32>;
pub type PdTable64 = PdTable<f64>;
pub type MasterScale64 = MasterScale<f64>;
pub type TestConfig64 = TestConfig<f64>;
pub type TestResult64 = TestResult<f64>;
pub type TestResult32 = TestResult<f32>;
pub type LpProblem64 = LpProblem<f64>;
pub type SigmaMin64 = SigmaMin<f64>;
pub type AltBound64 = AltBound<f64>;
pub type VarianceBreakdown64 = VarianceBreakdown<f64>;
