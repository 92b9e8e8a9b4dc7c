//! Utility of a synthetic cohort relative to its source.

mod km;
mod nonfinite;
mod propensity;
mod report;

pub use km::{km_estimate, logrank_test, stratified_logrank_test, KMCurve, LogRankResult, SurvivalSample};
pub use propensity::{null_pmse_moments, pmse, propensity_utility, PropensityResult};
pub use report::{
    compare_report, format_p, km_csv, km_curves, KmSeries, StratumResult, StratumSpec, Summary, TestOutcome,
    UtilityReport, VariableRow, S_PMSE_THRESHOLD,
};
pub use tests::{chisq_homogeneity, kolmogorov_q, ks_two_sample, mann_whitney, prop_test, welch_t, TestResult};
