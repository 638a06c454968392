//! Statistical toolkit: rank correlations, dependent-correlation tests,
//! bootstrap intervals, OLS with Wald tests, and truth-serum scoring.

pub mod bts;
pub mod correlation;
pub mod distributions;
pub mod regression;

pub use bts::{bts_scores, BtsOutcome, BtsResponse, BtsResponseSet, BtsScore};
pub use correlation::{
    bootstrap_corr_diff, correlation_t_test, fisher_z, hotelling_t, spearman, steiger_z,
    BootstrapCi, CorrelationTriple, HotellingResult, SteigerResult,
};
pub use regression::{bonferroni, ols_fit, wald_test, RegressionFit, WaldResult};
