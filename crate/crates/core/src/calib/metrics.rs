#[allow(unused_imports)]
use num_traits::Float;

use super::types::{CalibErrors, CalibState};

/// Geodesic rotation error in degrees and RMS translation error over the
/// three axes.
pub fn evaluate(estimate: &CalibState, reference: &CalibState) -> CalibErrors {
    let rot = reference.imu_to_lidar.angle_to(&estimate.imu_to_lidar).to_degrees();
    let d = estimate.imu_in_lidar - reference.imu_in_lidar;
    CalibErrors { rot_rmse_deg: rot, trans_rmse_m: (d.norm_squared() / 3.0).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Rotation, Vec3};

    #[test]
    fn identical_is_zero() {
        let x = CalibState::new(Rotation::from_euler_deg(&Vec3::new(1.0, 2.0, 90.0)), Vec3::new(0.2, 0.1, 0.3));
        assert_eq!(evaluate(&x, &x), CalibErrors { rot_rmse_deg: 0.0, trans_rmse_m: 0.0 });
    }

    #[test]
    fn one_degree_yaw() {
        let r = CalibState::new(Rotation::from_euler_deg(&Vec3::new(1.0, 2.0, 90.0)), Vec3::zeros());
        let mut e = r;
        e.imu_to_lidar = Rotation::rot_z(1f64.to_radians()) * r.imu_to_lidar;
        assert!((evaluate(&e, &r).rot_rmse_deg - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fixture_translation_offset() {
        // Offset used by the initial-guess fixtures, 0.402 m RMS.
        let r = CalibState::new(Rotation::identity(), Vec3::new(0.2, 0.1, 0.3));
        let e = CalibState::new(Rotation::identity(), Vec3::new(0.6, 0.45, 0.75));
        assert!((evaluate(&e, &r).trans_rmse_m - 0.402).abs() < 1e-3);
    }
}
