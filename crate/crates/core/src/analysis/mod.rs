//! Monte Carlo estimators and the statistics used to judge them.

pub mod convergence;
pub mod distributions;
pub mod estimators;

pub use convergence::{
    fit_slope, fit_slope_unsaturated, strong_error, ErrorCurve, ErrorEntry, ErrorNorm, SlopeFit,
    StrongErrorSetup,
};
pub use distributions::{
    cdf_distance, default_bin_count, empirical_density, gamma_cdf, gamma_stationary, ks_statistic,
    EmpiricalDistribution, GammaDistribution, Histogram, KsResult,
};
pub use estimators::{
    blowup_frequency, harvest_terminal, lyapunov_ensemble, lyapunov_estimate, mean_stderr,
    moment_estimate, time_average, time_average_ensemble, BlowupReport, Ensemble, MomentEstimate,
};
