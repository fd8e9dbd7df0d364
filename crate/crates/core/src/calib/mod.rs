//! Joint estimation of the IMU-LiDAR extrinsics, fine time offset and IMU
//! biases.

pub mod dataset;
pub mod metrics;
pub mod residuals;
pub mod solver;
pub mod sufficiency;
mod types;

pub use dataset::{assemble_dataset, DatasetParams, GravityReference};
pub use metrics::evaluate;
pub use solver::{solve, solve_sequential, ParamMask};
pub use residuals::{residual_a, residual_g, residual_w};
pub use sufficiency::{data_sufficiency, Sufficiency};
pub use types::{CalibConfig, CalibErrors, CalibFrame, CalibResult, CalibState, IterationRecord};
