//! Angular-rate, acceleration and ground-plane-motion residuals.
//!
//! Jacobians are taken with respect to the 13-D error state
//! `[dθ, dp, dt, db_g, db_a]`, the rotation perturbed on the right:
//! `R <- R exp(dθ)`.

use nalgebra::{SMatrix, SVector};

use super::types::{CalibFrame, CalibState};
use crate::error::CalibError;
use crate::geometry::{skew, Mat3, Rotation, Vec3};

pub const DIM: usize = 13;
pub const ROT: usize = 0;
pub const POS: usize = 3;
pub const TIME: usize = 6;
pub const GYRO_BIAS: usize = 7;
pub const ACCEL_BIAS: usize = 10;

pub type Delta = SVector<f64, DIM>;
pub type Jacobian = SMatrix<f64, 3, DIM>;

impl CalibState {
    pub fn boxplus(&self, d: &Delta) -> CalibState {
        let dtheta = d.fixed_rows::<3>(ROT).into_owned();
        CalibState {
            imu_to_lidar: self.imu_to_lidar * Rotation::exp(&dtheta),
            imu_in_lidar: self.imu_in_lidar + d.fixed_rows::<3>(POS),
            time_offset: self.time_offset + d[TIME],
            gyro_bias: self.gyro_bias + d.fixed_rows::<3>(GYRO_BIAS),
            accel_bias: self.accel_bias + d.fixed_rows::<3>(ACCEL_BIAS),
        }
    }
}

/// `[ω]² + [α]`, the lever-arm transfer of angular motion to acceleration.
fn lever(w: &Vec3, alpha: &Vec3) -> Mat3 {
    let s = skew(w);
    s * s + skew(alpha)
}

pub fn residual_w(x: &CalibState, f: &CalibFrame) -> Vec3 {
    x.imu_to_lidar.transpose() * f.lidar.angular_velocity + x.gyro_bias
        - f.imu.angular_velocity
        - f.imu.angular_accel * x.time_offset
}

pub fn residual_w_jacobian(x: &CalibState, f: &CalibFrame) -> (Vec3, Jacobian) {
    let rotated = x.imu_to_lidar.transpose() * f.lidar.angular_velocity;
    let mut j = Jacobian::zeros();
    j.fixed_view_mut::<3, 3>(0, ROT).copy_from(&skew(&rotated));
    j.fixed_view_mut::<3, 1>(0, TIME).copy_from(&(-f.imu.angular_accel));
    j.fixed_view_mut::<3, 3>(0, GYRO_BIAS).copy_from(&Mat3::identity());
    (residual_w(x, f), j)
}

pub fn residual_a(x: &CalibState, f: &CalibFrame) -> Vec3 {
    let l = &f.lidar;
    x.imu_to_lidar * (f.imu_accel - x.accel_bias)
        - l.linear_accel
        - f.lidar_gravity
        - lever(&l.angular_velocity, &l.angular_accel) * x.imu_in_lidar
}

pub fn residual_a_jacobian(x: &CalibState, f: &CalibFrame) -> (Vec3, Jacobian) {
    let r = x.imu_to_lidar.matrix();
    let l = &f.lidar;
    let mut j = Jacobian::zeros();
    j.fixed_view_mut::<3, 3>(0, ROT)
        .copy_from(&(-r * skew(&(f.imu_accel - x.accel_bias))));
    j.fixed_view_mut::<3, 3>(0, POS)
        .copy_from(&(-lever(&l.angular_velocity, &l.angular_accel)));
    j.fixed_view_mut::<3, 3>(0, ACCEL_BIAS).copy_from(&(-r));
    (residual_a(x, f), j)
}

/// Ground-plane-motion residual. The first two rows are the horizontal
/// components of the LiDAR floor normal carried into the ground frame
/// through the IMU; they vanish when both sensors agree on "up". The third
/// row is the height relation `d_I = d_L + n_L · p`, with the IMU height
/// projected through the IMU's own up direction.
pub fn residual_g(x: &CalibState, f: &CalibFrame) -> Result<Vec3, CalibError> {
    residual_g_jacobian(x, f).map(|(r, _)| r)
}

pub fn residual_g_jacobian(x: &CalibState, f: &CalibFrame) -> Result<(Vec3, Jacobian), CalibError> {
    let ground = f.ground().ok_or(CalibError::MissingGroundObservation { index: f.index })?;
    let n_l = ground.normal();
    let d_l = ground.height();
    let r = x.imu_to_lidar;
    let imu_to_ground = f.imu.ground_to_imu.transpose();
    let up_imu = f.imu.ground_to_imu * Vec3::z();

    let normal_imu = r.transpose() * n_l;
    let tilt = imu_to_ground * normal_imu;
    let up_in_lidar = r * up_imu;
    let height = f.imu_height * n_l.dot(&up_in_lidar) - d_l - n_l.dot(&x.imu_in_lidar);

    let mut j = Jacobian::zeros();
    let d_tilt = imu_to_ground.matrix() * skew(&normal_imu);
    j.fixed_view_mut::<2, 3>(0, ROT).copy_from(&d_tilt.fixed_rows::<2>(0));
    let d_height = -(n_l.transpose() * r.matrix() * skew(&up_imu)) * f.imu_height;
    j.fixed_view_mut::<1, 3>(2, ROT).copy_from(&d_height);
    j.fixed_view_mut::<1, 3>(2, POS).copy_from(&(-n_l.transpose()));
    Ok((Vec3::new(tilt.x, tilt.y, height), j))
}
