use alloc::vec::Vec;

use super::types::CalibFrame;
use crate::error::CalibError;
use crate::geometry::Vec3;
use crate::imu::ImuProcessed;
use crate::lo::LidarOdomSample;

pub const MIN_FRAMES: usize = 10;

/// Where the acceleration residual takes the direction of gravity from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GravityReference {
    /// The floor normal seen by the LiDAR in each frame. Exact whenever the
    /// floor is level, and free of the attitude filter's drift.
    #[default]
    Floor,
    /// The IMU attitude filter; gravity is removed from the specific force
    /// before the residual sees it.
    ImuAttitude,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetParams {
    /// IMU sample paired with LiDAR frame `k` is `k + frame_offset`.
    pub frame_offset: i32,
    /// Prior IMU height above the floor, m.
    pub imu_height: f64,
    pub gravity: f64,
    pub gravity_reference: GravityReference,
}

impl DatasetParams {
    pub fn new(frame_offset: i32, imu_height: f64) -> Self {
        Self { frame_offset, imu_height, gravity: 9.81, gravity_reference: GravityReference::Floor }
    }
}

/// Pairs LiDAR frame `k` with IMU sample `k + frame_offset` and splits the
/// gravity term out of the acceleration relation as `params` asks.
pub fn assemble_dataset(
    lidar: &[LidarOdomSample],
    imu: &[ImuProcessed],
    params: &DatasetParams,
) -> Result<Vec<CalibFrame>, CalibError> {
    let up = Vec3::new(0.0, 0.0, params.gravity);
    let mut frames = Vec::with_capacity(lidar.len());
    for (k, l) in lidar.iter().enumerate() {
        let j = k as i64 + params.frame_offset as i64;
        let Some(i) = usize::try_from(j).ok().and_then(|j| imu.get(j)) else { continue };
        let (imu_accel, lidar_gravity) = match params.gravity_reference {
            GravityReference::ImuAttitude => (i.linear_accel - i.ground_to_imu * up, Vec3::zeros()),
            GravityReference::Floor => {
                let ground = l.ground.ok_or(CalibError::MissingGroundObservation { index: k })?;
                (i.linear_accel, ground.normal() * params.gravity)
            }
        };
        frames.push(CalibFrame { index: k, lidar: *l, imu: *i, imu_accel, lidar_gravity, imu_height: params.imu_height });
    }
    if frames.len() < MIN_FRAMES {
        return Err(CalibError::InsufficientOverlap { found: frames.len(), required: MIN_FRAMES });
    }
    Ok(frames)
}
