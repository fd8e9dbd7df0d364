use nalgebra::SymmetricEigen;
#[allow(unused_imports)]
use num_traits::Float;

use super::types::{CalibFrame, CalibState};
use crate::geometry::{skew, Mat3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sufficiency {
    pub sufficient: bool,
    /// Largest singular value of the stacked rotation Jacobian of the
    /// angular-rate residual.
    pub sigma_max: f64,
}

/// Excitation check: the rotation block of the angular-rate residual
/// Jacobian stacked over all frames.
pub fn data_sufficiency(frames: &[CalibFrame], x: &CalibState, threshold: f64) -> Sufficiency {
    let mut gram = Mat3::zeros();
    for f in frames {
        let b = skew(&(x.imu_to_lidar.transpose() * f.lidar.angular_velocity));
        gram += b.transpose() * b;
    }
    let lambda = SymmetricEigen::new(gram).eigenvalues.max().max(0.0);
    let sigma_max = lambda.sqrt();
    Sufficiency { sufficient: sigma_max >= threshold, sigma_max }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::dataset::assemble_dataset;
    use crate::sim::{synth_imu_direct, synth_lo_direct, Keyframe, Scenario};
    use alloc::vec;
    use alloc::vec::Vec;

    fn frames(sc: &Scenario) -> Vec<CalibFrame> {
        let lo = synth_lo_direct(sc).unwrap();
        let imu = synth_imu_direct(sc).unwrap();
        assemble_dataset(&lo, &imu, &sc.dataset_params()).unwrap()
    }

    #[test]
    fn straight_line_is_insufficient() {
        let mut sc = Scenario::standard();
        sc.keyframes = vec![
            Keyframe::new(0.0, 0.0, 0.0),
            Keyframe::new(2.0, 0.3, 0.0),
            Keyframe::new(10.0, 0.3, 0.0),
            Keyframe::new(12.0, 0.0, 0.0),
        ];
        sc.start.y = 0.0;
        sc.start.x = -3.0;
        let s = data_sufficiency(&frames(&sc), &sc.truth, 1e-9);
        assert!(!s.sufficient);
        assert!(s.sigma_max < 1e-9);
    }

    #[test]
    fn quarter_turn_is_sufficient() {
        let mut sc = Scenario::standard();
        // One quarter turn in place.
        sc.keyframes = vec![
            Keyframe::new(0.0, 0.0, 0.0),
            Keyframe::new(2.0, 0.0, 0.3),
            Keyframe::new(6.0, 0.0, 0.3),
            Keyframe::new(8.0, 0.0, 0.0),
        ];
        // Plateau plus both ramps at half rate.
        let turned: f64 = 4.0 * 0.3 + 2.0 * 2.0 * 0.15;
        assert!(turned.to_degrees() >= 90.0);
        let s = data_sufficiency(&frames(&sc), &sc.truth, 1.0);
        assert!(s.sufficient, "{}", s.sigma_max);
    }

    #[test]
    fn repetition_increases_sigma() {
        let sc = Scenario::standard();
        let fs = frames(&sc);
        let part = &fs[100..300];
        let once = data_sufficiency(part, &sc.truth, 1.0).sigma_max;
        let doubled: Vec<CalibFrame> = part.iter().chain(part.iter()).copied().collect();
        let twice = data_sufficiency(&doubled, &sc.truth, 1.0).sigma_max;
        assert!(twice > once);
        assert!((twice - once * 2f64.sqrt()).abs() < 1e-9 * twice);
    }
}
