//! Sensor-log formats, configuration, pipeline orchestration and reporting
//! around [`groundcal_core`].

// `!(x > y)` is how NaN gets rejected along with out-of-order values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod log;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod simgen;

pub use config::Config;
pub use error::{ConfigError, LogError, PipelineError};
pub use log::{load_sensor_log, write_sensor_log, Manifest, SensorLog};
pub use pipeline::{calibrate_prepared, check_sufficiency, lo_z_drift, prepare, run_pipeline, Prepared, ZDrift};
pub use plot::emit_plot_data;
pub use report::{ReferenceFile, RunReport};

/// Process exit status for a failed run.
pub fn exit_code(e: &PipelineError) -> u8 {
    match e {
        PipelineError::InsufficientExcitation { .. } => 3,
        PipelineError::Output { .. } => 1,
        _ => 2,
    }
}

/// Status for a run that finished without converging.
pub const EXIT_NOT_CONVERGED: u8 = 4;
