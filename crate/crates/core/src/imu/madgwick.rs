//! Gyroscope + accelerometer Madgwick filter.
//!
//! The quaternion maps sensor coordinates into the gravity-aligned frame.
//! Heading is unobservable and starts at zero.

use alloc::vec::Vec;

use nalgebra::{Quaternion, UnitQuaternion};
#[allow(unused_imports)]
use num_traits::Float;

use super::ImuSample;
use crate::geometry::{Rotation, Vec3};

/// Gating of the accelerometer correction. The correction is applied only
/// when the sensor is close to static, so centripetal and linear
/// accelerations do not tilt the estimate.
///
/// A horizontal acceleration barely changes `|a|`, so the per-sample test
/// cannot see a robot pulling away from rest. When filtering a whole
/// stream, a sample is also rejected if any sample within `window_s` of it
/// (before or after) fails the per-sample test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionGate {
    /// Largest bias-corrected gyro norm, rad/s.
    pub max_rate: f64,
    /// Largest `| |a| - g |`, m/s².
    pub max_accel_error: f64,
    /// Half-width of the stillness window, s.
    pub window_s: f64,
}

impl Default for CorrectionGate {
    fn default() -> Self {
        Self { max_rate: 0.05, max_accel_error: 0.1, window_s: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MadgwickState {
    pub orientation: UnitQuaternion<f64>,
    pub beta: f64,
    pub gravity: f64,
    pub gyro_bias: Vec3,
    pub gate: Option<CorrectionGate>,
}

impl MadgwickState {
    pub fn new(orientation: UnitQuaternion<f64>, beta: f64, gravity: f64) -> Self {
        Self { orientation, beta, gravity, gyro_bias: Vec3::zeros(), gate: None }
    }

    /// Level the filter on a measured specific force with heading zero.
    pub fn from_accel(accel: &Vec3, beta: f64, gravity: f64) -> Self {
        Self::new(level_from_accel(accel), beta, gravity)
    }

    /// Sensor-to-level rotation.
    pub fn sensor_to_level(&self) -> Rotation {
        Rotation::from_matrix_projected(self.orientation.to_rotation_matrix().into_inner())
            .unwrap_or_default()
    }

    /// Predicted up direction in sensor coordinates.
    pub fn up_in_sensor(&self) -> Vec3 {
        self.orientation.inverse_transform_vector(&Vec3::z())
    }

    pub fn update(&mut self, gyro: &Vec3, accel: &Vec3, dt: f64) {
        let allowed = self.correction_allowed(gyro, accel);
        self.step(gyro, accel, dt, allowed);
    }

    fn step(&mut self, gyro: &Vec3, accel: &Vec3, dt: f64, correct: bool) {
        let w = gyro - self.gyro_bias;
        let q = self.orientation.quaternion();
        let (q0, q1, q2, q3) = (q.w, q.i, q.j, q.k);

        let mut dot = q * Quaternion::new(0.0, w.x, w.y, w.z) * 0.5;

        let a_norm = accel.norm();
        if a_norm > 0.0 && correct {
            let a = accel / a_norm;
            let f = [
                2.0 * (q1 * q3 - q0 * q2) - a.x,
                2.0 * (q0 * q1 + q2 * q3) - a.y,
                2.0 * (0.5 - q1 * q1 - q2 * q2) - a.z,
            ];
            let grad = Quaternion::new(
                -2.0 * q2 * f[0] + 2.0 * q1 * f[1],
                2.0 * q3 * f[0] + 2.0 * q0 * f[1] - 4.0 * q1 * f[2],
                -2.0 * q0 * f[0] + 2.0 * q3 * f[1] - 4.0 * q2 * f[2],
                2.0 * q1 * f[0] + 2.0 * q2 * f[1],
            );
            let g_norm = grad.norm();
            if g_norm > 1e-15 {
                dot -= grad * (self.beta / g_norm);
            }
        }
        self.orientation = UnitQuaternion::from_quaternion(q + dot * dt);
    }

    fn correction_allowed(&self, gyro: &Vec3, accel: &Vec3) -> bool {
        let Some(gate) = self.gate else { return true };
        (gyro - self.gyro_bias).norm() <= gate.max_rate && (accel.norm() - self.gravity).abs() <= gate.max_accel_error
    }
}

/// Roll and pitch from a static specific-force reading.
pub fn level_from_accel(accel: &Vec3) -> UnitQuaternion<f64> {
    let roll = accel.y.atan2(accel.z);
    let pitch = (-accel.x).atan2((accel.y * accel.y + accel.z * accel.z).sqrt());
    UnitQuaternion::from_euler_angles(roll, pitch, 0.0)
}

/// Runs the filter over `stream` and returns the orientation after each
/// sample (the first entry is the initial state stepped once).
pub fn run(stream: &[ImuSample], mut state: MadgwickState) -> Vec<UnitQuaternion<f64>> {
    let still = still_mask(stream, &state);
    let mut out = Vec::with_capacity(stream.len());
    let mut prev_t = stream.first().map(|s| s.timestamp).unwrap_or(0.0);
    for (s, &correct) in stream.iter().zip(&still) {
        let dt = s.timestamp - prev_t;
        if dt > 0.0 {
            state.step(&s.gyro, &s.accel, dt, correct);
        }
        prev_t = s.timestamp;
        out.push(state.orientation);
    }
    out
}

/// Samples where the gate admits an accelerometer correction, widened by
/// the gate's stillness window.
fn still_mask(stream: &[ImuSample], state: &MadgwickState) -> Vec<bool> {
    let instant: Vec<bool> = stream.iter().map(|s| state.correction_allowed(&s.gyro, &s.accel)).collect();
    let Some(gate) = state.gate.filter(|g| g.window_s > 0.0) else { return instant };
    // Running count of rejected samples, so any window is checked in O(1).
    let mut rejected = Vec::with_capacity(stream.len() + 1);
    rejected.push(0usize);
    for ok in &instant {
        rejected.push(rejected.last().unwrap() + usize::from(!ok));
    }
    let (mut lo, mut hi) = (0, 0);
    stream
        .iter()
        .map(|s| {
            while stream[lo].timestamp < s.timestamp - gate.window_s {
                lo += 1;
            }
            while hi < stream.len() && stream[hi].timestamp <= s.timestamp + gate.window_s {
                hi += 1;
            }
            rejected[hi] == rejected[lo]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mat3;

    fn static_stream(accel: Vec3, seconds: f64) -> Vec<ImuSample> {
        let n = (seconds * 200.0) as usize;
        (0..n)
            .map(|k| ImuSample { timestamp: k as f64 * 0.005, gyro: Vec3::zeros(), accel })
            .collect()
    }

    fn tilt_error(q: &UnitQuaternion<f64>, up_sensor: &Vec3) -> f64 {
        let predicted = q.inverse_transform_vector(&Vec3::z());
        predicted.angle(&up_sensor.normalize())
    }

    #[test]
    fn static_level_converges() {
        let a = Vec3::new(0.0, 0.0, 9.81);
        let qs = run(&static_stream(a, 2.0), MadgwickState::from_accel(&a, 0.1, 9.81));
        assert!(tilt_error(qs.last().unwrap(), &a).to_degrees() < 0.5);
    }

    #[test]
    fn static_tilted_roll_is_recovered() {
        let tilt = Rotation::rot_x(10f64.to_radians());
        let a = tilt.transpose() * Vec3::new(0.0, 0.0, 9.81);
        let init = MadgwickState::new(UnitQuaternion::identity(), 0.1, 9.81);
        let qs = run(&static_stream(a, 2.0), init);
        let m: Mat3 = qs.last().unwrap().to_rotation_matrix().into_inner();
        let r = Rotation::from_matrix_projected(m).unwrap().to_euler_deg();
        assert!((r.x - 10.0).abs() < 0.5, "{r}");
        assert!(r.y.abs() < 0.5);
    }

    #[test]
    fn init_from_accel_is_exact() {
        let tilt = Rotation::from_euler_deg(&Vec3::new(3.0, -7.0, 0.0));
        let a = tilt.transpose() * Vec3::new(0.0, 0.0, 9.81);
        let s = MadgwickState::from_accel(&a, 0.1, 9.81);
        assert!(s.sensor_to_level().angle_to(&tilt) < 1e-12);
    }

    #[test]
    fn gravity_error_non_increasing_when_static() {
        let a = Rotation::from_euler_deg(&Vec3::new(-20.0, 25.0, 0.0)).transpose() * Vec3::new(0.0, 0.0, 9.81);

        let levelled = run(&static_stream(a, 10.0), MadgwickState::from_accel(&a, 0.1, 9.81));
        let errs: Vec<f64> = levelled.iter().map(|q| tilt_error(q, &a)).collect();
        for w in errs[100..].windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }

        // From a wrong start the fixed-length gradient step descends until it
        // is within one step of the optimum, then dithers inside that band.
        // A quaternion step of length s turns the frame by up to 2s.
        let step = 0.1 * 0.005;
        let qs = run(&static_stream(a, 10.0), MadgwickState::new(UnitQuaternion::identity(), 0.1, 9.81));
        let errs: Vec<f64> = qs.iter().map(|q| tilt_error(q, &a)).collect();
        let settled = errs.iter().position(|&e| e < step).unwrap();
        for w in errs[100..settled].windows(2) {
            assert!(w[1] <= w[0]);
        }
        let band = errs[settled..].iter().cloned().fold(0.0, f64::max);
        assert!(band < 2.0 * step, "{band}");
        assert!(qs.iter().all(|q| (q.quaternion().norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gate_blocks_centripetal_pull() {
        let a0 = Vec3::new(0.0, 0.0, 9.81);
        let mut gated = MadgwickState::from_accel(&a0, 0.1, 9.81);
        gated.gate = Some(CorrectionGate::default());
        let mut free = gated;
        free.gate = None;
        let turning = Vec3::new(0.0, 0.3, 9.81);
        let w = Vec3::new(0.0, 0.0, 0.5);
        for _ in 0..400 {
            gated.update(&w, &turning, 0.005);
            free.update(&w, &turning, 0.005);
        }
        assert!(tilt_error(&gated.orientation, &a0) < 1e-12);
        assert!(tilt_error(&free.orientation, &a0) > 0.5f64.to_radians());
    }

    #[test]
    fn window_blocks_pull_away_from_rest() {
        // At rest for 1 s, then a slow straight-line acceleration of
        // 0.1 m/s² with a brief turn starting 0.3 s later.
        let g = 9.81;
        let stream: Vec<ImuSample> = (0..600)
            .map(|k| {
                let t = k as f64 * 0.005;
                let moving = t >= 1.0;
                let turning = t >= 1.3;
                ImuSample {
                    timestamp: t,
                    gyro: Vec3::new(0.0, 0.0, if turning { 0.2 } else { 0.0 }),
                    accel: Vec3::new(if moving { 0.1 } else { 0.0 }, 0.0, g),
                }
            })
            .collect();
        let mut state = MadgwickState::from_accel(&Vec3::new(0.0, 0.0, g), 0.1, g);
        state.gate = Some(CorrectionGate::default());
        let qs = run(&stream, state);
        assert!(tilt_error(&qs[259], &Vec3::z()) < 1e-12);

        state.gate = Some(CorrectionGate { window_s: 0.0, ..CorrectionGate::default() });
        let leaky = run(&stream, state);
        assert!(tilt_error(&leaky[259], &Vec3::z()) > 0.1f64.to_radians());
    }
}
