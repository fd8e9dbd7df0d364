//! JSON run report and the reference-extrinsics file.

use std::path::Path;

use groundcal_core::calib::{CalibErrors, CalibState, IterationRecord};
use groundcal_core::{Mat3, Rotation, Vec3};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::ConfigError;

/// Bumped whenever a field changes meaning or disappears.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One calibration state in report form. The rotation is stored as a full
/// row-major matrix so it survives the round trip exactly; the Euler angles
/// are for reading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub rotation_matrix: [[f64; 3]; 3],
    pub rotation_euler_deg: [f64; 3],
    pub translation_m: [f64; 3],
    pub fine_time_offset_s: f64,
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
}

impl From<&CalibState> for StateRecord {
    fn from(x: &CalibState) -> Self {
        let m = x.imu_to_lidar.matrix();
        Self {
            rotation_matrix: core::array::from_fn(|r| core::array::from_fn(|c| m[(r, c)])),
            rotation_euler_deg: x.imu_to_lidar.to_euler_deg().into(),
            translation_m: x.imu_in_lidar.into(),
            fine_time_offset_s: x.time_offset,
            gyro_bias: x.gyro_bias.into(),
            accel_bias: x.accel_bias.into(),
        }
    }
}

impl StateRecord {
    pub fn to_state(&self) -> Option<CalibState> {
        Some(CalibState {
            imu_to_lidar: matrix_rotation(&self.rotation_matrix)?,
            imu_in_lidar: self.translation_m.into(),
            time_offset: self.fine_time_offset_s,
            gyro_bias: self.gyro_bias.into(),
            accel_bias: self.accel_bias.into(),
        })
    }
}

fn matrix_rotation(rows: &[[f64; 3]; 3]) -> Option<Rotation> {
    Rotation::from_matrix(Mat3::from_fn(|r, c| rows[r][c])).ok()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub cost: f64,
    pub state: StateRecord,
    pub rms_w: f64,
    pub rms_a: f64,
    pub rms_g: f64,
}

impl From<&IterationRecord> for HistoryRecord {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iteration: r.iteration,
            cost: r.cost,
            state: (&r.state).into(),
            rms_w: r.rms_w,
            rms_a: r.rms_a,
            rms_g: r.rms_g,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorsRecord {
    pub rot_rmse_deg: f64,
    pub trans_rmse_m: f64,
}

impl From<CalibErrors> for ErrorsRecord {
    fn from(e: CalibErrors) -> Self {
        Self { rot_rmse_deg: e.rot_rmse_deg, trans_rmse_m: e.trans_rmse_m }
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub ground_s: f64,
    pub lo_s: f64,
    pub imu_s: f64,
    pub assemble_s: f64,
    pub solve_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub converged: bool,
    pub iterations: usize,
    pub estimate: StateRecord,
    /// Whole-frame part of the time offset, LiDAR frames.
    pub frame_offset: i32,
    /// Total IMU-minus-LiDAR clock offset, s.
    pub time_offset_s: f64,
    pub rms_w: f64,
    pub rms_a: f64,
    pub rms_g: f64,
    pub frames: usize,
    pub scans_without_ground: usize,
    pub sigma_max: f64,
    pub reference_errors: Option<ErrorsRecord>,
    pub timings: Timings,
    pub config: Config,
    pub history: Vec<HistoryRecord>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        // Only plain numbers, strings and derives: serialization cannot fail.
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Known extrinsics to score a run against. Give the rotation either as a
/// row-major matrix or as roll, pitch, yaw in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_matrix: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_euler_deg: Option<[f64; 3]>,
    pub translation_m: [f64; 3],
}

impl ReferenceFile {
    pub fn from_state(x: &CalibState) -> Self {
        let record = StateRecord::from(x);
        Self {
            rotation_matrix: Some(record.rotation_matrix),
            rotation_euler_deg: None,
            translation_m: record.translation_m,
        }
    }

    pub fn load(path: &Path) -> Result<CalibState, ConfigError> {
        let invalid = |detail: String| ConfigError::Invalid { path: path.into(), detail };
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let file: ReferenceFile = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        let rotation = match (file.rotation_matrix, file.rotation_euler_deg) {
            (Some(m), None) => matrix_rotation(&m).ok_or_else(|| invalid("rotation_matrix is not a rotation".into()))?,
            (None, Some(e)) => Rotation::from_euler_deg(&Vec3::from(e)),
            _ => return Err(invalid("give exactly one of rotation_matrix and rotation_euler_deg".into())),
        };
        Ok(CalibState::new(rotation, file.translation_m.into()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }
}
