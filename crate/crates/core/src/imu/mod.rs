//! IMU conditioning: zero-phase filtering, resampling at LiDAR stamps,
//! gravity-referenced attitude and the coarse time offset.

pub mod filter;
pub mod madgwick;
pub mod sync;

use alloc::vec::Vec;

use nalgebra::UnitQuaternion;

pub use filter::zero_phase_filter;
pub use madgwick::{CorrectionGate, MadgwickState};
pub use sync::{coarse_time_offset, downsample_to_lidar};

use crate::error::ImuError;
use crate::geometry::{Rotation, Vec3};
use crate::lo::diff::differentiate;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub timestamp: f64,
    /// rad/s
    pub gyro: Vec3,
    /// Specific force, m/s².
    pub accel: Vec3,
}

/// IMU quantities at one LiDAR stamp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuProcessed {
    pub timestamp: f64,
    pub angular_velocity: Vec3,
    pub angular_accel: Vec3,
    /// Filtered specific force, gravity included.
    pub linear_accel: Vec3,
    /// Maps ground-frame vectors into the IMU frame. Heading is arbitrary.
    pub ground_to_imu: Rotation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuConfig {
    pub imu_rate_hz: f64,
    pub filter_cutoff_hz: f64,
    pub madgwick_beta: f64,
    pub gravity_mps2: f64,
    pub max_lag_frames: usize,
    /// Length of the leading window used to level the filter and estimate
    /// gyro bias when the sensor is at rest, s.
    pub static_init_s: f64,
    /// Accelerometer correction gate; `None` runs the plain filter.
    pub gate: Option<CorrectionGate>,
}

impl Default for ImuConfig {
    fn default() -> Self {
        Self {
            imu_rate_hz: 200.0,
            filter_cutoff_hz: 10.0,
            madgwick_beta: 0.01,
            gravity_mps2: 9.81,
            max_lag_frames: 20,
            static_init_s: 1.0,
            gate: Some(CorrectionGate::default()),
        }
    }
}

/// Attitude track at every IMU sample.
pub fn madgwick_attitude(stream: &[ImuSample], cfg: &ImuConfig) -> Vec<UnitQuaternion<f64>> {
    let Some(first) = stream.first() else { return Vec::new() };
    let lead: Vec<&ImuSample> = stream
        .iter()
        .take_while(|s| s.timestamp - first.timestamp <= cfg.static_init_s)
        .collect();
    let n = lead.len() as f64;
    let mean_gyro = lead.iter().fold(Vec3::zeros(), |a, s| a + s.gyro) / n;
    let mean_accel = lead.iter().fold(Vec3::zeros(), |a, s| a + s.accel) / n;
    let at_rest = lead.iter().all(|s| {
        (s.gyro - mean_gyro).norm() < 0.05 && (s.accel.norm() - cfg.gravity_mps2).abs() < 0.2
    });

    let mut state = if at_rest {
        let mut s = MadgwickState::from_accel(&mean_accel, cfg.madgwick_beta, cfg.gravity_mps2);
        s.gyro_bias = mean_gyro;
        s
    } else {
        MadgwickState::from_accel(&first.accel, cfg.madgwick_beta, cfg.gravity_mps2)
    };
    state.gate = cfg.gate;
    madgwick::run(stream, state)
}

/// Full IMU branch: filter, resample at `lidar_timestamps`, differentiate
/// the angular rate and attach the gravity-referenced attitude.
pub fn process_imu(
    stream: &[ImuSample],
    lidar_timestamps: &[f64],
    cfg: &ImuConfig,
) -> Result<Vec<ImuProcessed>, ImuError> {
    let filtered = zero_phase_filter(stream, cfg.filter_cutoff_hz)?;
    let times: Vec<f64> = filtered.iter().map(|s| s.timestamp).collect();
    let dt = filter::uniform_interval(&times)?;
    let rate_dev = (1.0 / dt - cfg.imu_rate_hz).abs() / cfg.imu_rate_hz;
    if rate_dev > filter::MAX_RATE_JITTER {
        return Err(ImuError::InvalidParameter("measured IMU rate differs from imu_rate_hz"));
    }

    let resampled = downsample_to_lidar(&filtered, lidar_timestamps)?;
    let rates: Vec<(f64, Vec3)> = resampled.iter().map(|s| (s.timestamp, s.gyro)).collect();
    let accels = differentiate(&rates).map_err(|_| ImuError::StreamTooShort {
        found: lidar_timestamps.len(),
        required: 3,
    })?;

    let track = madgwick_attitude(&filtered, cfg);
    let attitude = sync::orientation_at(&times, &track, lidar_timestamps)?;

    Ok(resampled
        .iter()
        .zip(accels)
        .zip(attitude)
        .map(|((s, (_, alpha)), q)| ImuProcessed {
            timestamp: s.timestamp,
            angular_velocity: s.gyro,
            angular_accel: alpha,
            linear_accel: s.accel,
            ground_to_imu: Rotation::from_matrix_projected(q.to_rotation_matrix().into_inner())
                .unwrap_or_default()
                .transpose(),
        })
        .collect())
}

/// Angular acceleration from resampled rates; same scheme as the LiDAR side.
pub fn imu_central_diff(rates: &[(f64, Vec3)]) -> Result<Vec<(f64, Vec3)>, crate::error::LoError> {
    differentiate(rates)
}
