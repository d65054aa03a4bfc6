//! Configuration-driven experiments: data generation, calibration, runs,
//! sweeps and the property-check suites behind `validate`.

mod config;
mod results;
mod run;
mod validate;

pub use config::{default_epsilon_grid, ExperimentConfig, SCHEMA_VERSION};
pub use results::{
    ExperimentSummary, GroupSummary, ResultRow, ResultsTable, RunSummary, RESULTS_HEADER,
};
pub use run::{
    calibrate, generate_data, run_experiment, run_sweep, CalibrationReport, ClientCalibrationRow,
    ExperimentOutput,
};
pub use validate::{run_suite, Suite, ValidationCheck, ValidationReport};
