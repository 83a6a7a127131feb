//! The stratified adversarial estimator: objectives, training loop,
//! trained-model sampling, quantile calibration, and rate planning.

mod calibration;
mod config;
mod model;
mod objective;
mod rates;
mod trainer;

pub use calibration::{pit_value, ArmTable, CalibrationTables};
pub use config::{CalibrationConfig, Conditioning, GaniceConfig, ObjectiveMode};
pub use model::{CellLayout, TrainLogRow, TrainedModel};
pub use objective::{cell_gen_average, cell_obs_average, stratified_objective};
pub use rates::{rate_exponents, RatePlan};
pub use trainer::{dataset_state, train, validation_factual_ew, TrainOutput};
