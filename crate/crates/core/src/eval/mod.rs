//! Distributional evaluation suite: statewise transport error, proper
//! scores, CDF discrepancies, quantile/tail/calibration diagnostics, and
//! point/policy metrics.

mod metrics;
mod report;
mod suite;

pub use metrics::{
    central_interval, crps, energy_distance, expected_crps, ks_distance, lcvar, mean_abs_cross,
    mean_abs_within, quantiles, ucvar,
};
pub use report::{MetricDetail, MetricReport, CSV_COLUMNS};
pub use suite::{
    calibration_summary, pit_histogram, dose_point_metrics, empirical_ew, evaluate_states,
    integrated_quantile_error, pehe_ate, policy_value_rct, qte_abs_err_per_level, qte_error,
    tail_error, weighted_mean, DoseSurface, EvalOptions, StateEval,
};
