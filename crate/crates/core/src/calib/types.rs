use alloc::vec::Vec;

use crate::geometry::{Rotation, Vec3};
use crate::ground::GroundObservation;
use crate::imu::ImuProcessed;
use crate::lo::LidarOdomSample;

/// The calibration unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CalibState {
    /// Maps IMU-frame vectors into the LiDAR frame.
    pub imu_to_lidar: Rotation,
    /// IMU origin expressed in the LiDAR frame, m.
    pub imu_in_lidar: Vec3,
    /// Sub-frame time offset left after the integer-frame shift, s.
    pub time_offset: f64,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
}

impl CalibState {
    pub fn new(imu_to_lidar: Rotation, imu_in_lidar: Vec3) -> Self {
        Self { imu_to_lidar, imu_in_lidar, ..Default::default() }
    }
}

/// One synchronized LiDAR/IMU pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibFrame {
    /// LiDAR frame index.
    pub index: usize,
    pub lidar: LidarOdomSample,
    pub imu: ImuProcessed,
    /// IMU specific force as it enters the acceleration residual, m/s².
    pub imu_accel: Vec3,
    /// Gravity the residual removes on the LiDAR side; zero when
    /// `imu_accel` already has gravity removed.
    pub lidar_gravity: Vec3,
    /// Prior IMU height above the ground, m.
    pub imu_height: f64,
}

impl CalibFrame {
    pub fn ground(&self) -> Option<&GroundObservation> {
        self.lidar.ground.as_ref()
    }
}

/// Per-residual-family weights, solver limits and the initial guess.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibConfig {
    pub rho_w: f64,
    pub rho_a: f64,
    pub rho_g: f64,
    /// Cauchy scale of the angular-rate family; the others follow the
    /// `rho` ratios.
    pub cauchy_scale: f64,
    /// Diagonal standard deviations whitening each residual family.
    pub sigma_w: Vec3,
    pub sigma_a: Vec3,
    pub sigma_g: Vec3,
    pub sv_threshold: f64,
    pub max_iterations: usize,
    pub initial: CalibState,
    /// Accept rank-deficient normal equations (ablation studies only).
    pub allow_rank_deficient: bool,
}

impl Default for CalibConfig {
    fn default() -> Self {
        Self {
            rho_w: 10.0,
            rho_a: 1.0,
            rho_g: 5.0,
            cauchy_scale: 1.0,
            sigma_w: Vec3::repeat(1.0),
            sigma_a: Vec3::repeat(1.0),
            sigma_g: Vec3::repeat(1.0),
            sv_threshold: 1.0,
            max_iterations: 200,
            initial: CalibState::default(),
            allow_rank_deficient: false,
        }
    }
}

/// Value of every parameter and residual RMS after one accepted iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub state: CalibState,
    pub rms_w: f64,
    pub rms_a: f64,
    pub rms_g: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibResult {
    pub estimate: CalibState,
    pub rms_w: f64,
    pub rms_a: f64,
    pub rms_g: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Filled when a reference calibration is known.
    pub reference_errors: Option<CalibErrors>,
    pub history: Vec<IterationRecord>,
}

/// Extrinsic error against a reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibErrors {
    pub rot_rmse_deg: f64,
    pub trans_rmse_m: f64,
}
