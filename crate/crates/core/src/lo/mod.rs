//! LiDAR odometry: an iterated error-state Kalman filter with point-to-plane
//! and ground-plane measurements, and the per-frame kinematics it yields.

pub mod diff;
pub mod filter;
pub mod map;
pub mod odometry;

pub use filter::{LoState, MeasurementBundle, ProcessNoise};
pub use map::LocalMap;
pub use odometry::{observe_ground, run_lo, run_lo_with_ground, LoConfig};

use crate::geometry::{Rotation, Vec3};
use crate::ground::GroundObservation;

/// Kinematics of one LiDAR frame. Rates and accelerations are expressed in
/// the current LiDAR frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarOdomSample {
    pub timestamp: f64,
    /// Current LiDAR frame to first LiDAR frame.
    pub attitude: Rotation,
    /// Position in the first LiDAR frame, m.
    pub position: Vec3,
    pub angular_velocity: Vec3,
    pub linear_velocity: Vec3,
    pub angular_accel: Vec3,
    /// Acceleration of the LiDAR origin, m/s².
    pub linear_accel: Vec3,
    /// This scan's own ground observation, if the floor was found.
    pub ground: Option<GroundObservation>,
}
