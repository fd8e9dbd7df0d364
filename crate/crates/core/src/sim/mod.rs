//! Planar-motion simulator with known extrinsics.

pub mod scenario;
pub mod sensors;
pub mod trajectory;

pub use scenario::{LidarModel, NoiseSpec, Room, Scenario};
pub use sensors::{lidar_truth, synth_imu, synth_imu_direct, synth_lidar, synth_lo_direct, LidarTruth, SimScan};
pub use trajectory::{BaseKinematics, Keyframe, PlanarPose, Trajectory};
