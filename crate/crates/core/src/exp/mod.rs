//! Experiment orchestration: benchmark construction, the repetition
//! runner, the sample-size rate study, and plot-data emission.

mod benchmarks;
mod plots;
mod rate;
mod runner;

pub use benchmarks::{BenchmarkInstance, DatasetSpec, FittedMethod, MethodSpec};
pub use plots::emit_plot_data;
pub use rate::{run_rate_study, RateEstimator, RateReport, RateStudyConfig};
pub use runner::{
    load_config, read_results_csv, run, write_aggregate, EvalSettings, ExperimentConfig, Manifest,
    RepRecord, RunSummary,
};
