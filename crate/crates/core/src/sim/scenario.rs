use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::trajectory::{Keyframe, PlanarPose, Trajectory};
use crate::calib::{CalibState, DatasetParams};
use crate::error::SimError;
use crate::geometry::{Rotation, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NoiseSpec {
    /// Per-sample white noise, rad/s.
    pub gyro_std: f64,
    /// Per-sample white noise, m/s².
    pub accel_std: f64,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    /// Along-ray range noise, m.
    pub range_std: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// Consumer-grade IMU and a spinning LiDAR.
    pub fn realistic() -> Self {
        Self {
            gyro_std: 0.01,
            accel_std: 0.05,
            gyro_bias: Vec3::new(0.002, -0.003, 0.0015),
            accel_bias: Vec3::new(0.03, -0.02, 0.04),
            range_std: 0.02,
        }
    }

    /// Same noise shape with every term scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            gyro_std: self.gyro_std * factor,
            accel_std: self.accel_std * factor,
            gyro_bias: self.gyro_bias * factor,
            accel_bias: self.accel_bias * factor,
            range_std: self.range_std * factor,
        }
    }
}

/// Floor at `z = 0` and four vertical walls, centred on the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Room {
    pub half_x: f64,
    pub half_y: f64,
}

/// Multi-beam spinning LiDAR sampled at one instant per scan.
#[derive(Clone, Debug, PartialEq)]
pub struct LidarModel {
    pub elevations_deg: Vec<f64>,
    pub azimuth_count: usize,
    pub max_range: f64,
}

impl LidarModel {
    /// 16 beams over ±15° in 2° steps, 1° azimuth resolution.
    pub fn sixteen_beam() -> Self {
        Self {
            elevations_deg: (0..16).map(|i| -15.0 + 2.0 * i as f64).collect(),
            azimuth_count: 360,
            max_range: 40.0,
        }
    }

    /// Unit ray directions in the sensor frame.
    pub fn directions(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.elevations_deg.len() * self.azimuth_count);
        for &e in &self.elevations_deg {
            let (se, ce) = e.to_radians().sin_cos();
            for a in 0..self.azimuth_count {
                let az = 2.0 * core::f64::consts::PI * a as f64 / self.azimuth_count as f64;
                let (sa, ca) = az.sin_cos();
                out.push(Vec3::new(ce * ca, ce * sa, se));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub keyframes: Vec<Keyframe>,
    pub start: PlanarPose,
    /// LiDAR origin in the base frame, m.
    pub lidar_position: Vec3,
    /// LiDAR frame to base frame.
    pub lidar_to_base: Rotation,
    /// True extrinsics and biases.
    pub truth: CalibState,
    pub imu_rate_hz: f64,
    pub lidar_rate_hz: f64,
    /// IMU clock minus LiDAR clock, s.
    pub time_offset_s: f64,
    pub noise: NoiseSpec,
    pub room: Room,
    pub lidar: LidarModel,
    pub gravity: f64,
    pub seed: u64,
}

/// Default 120 s manoeuvre: circles of both handedness, spins in place,
/// straight runs and stops, all inside a 12 m x 10 m room.
pub fn standard_keyframes() -> Vec<Keyframe> {
    const K: [(f64, f64, f64); 36] = [
        (0.0, 0.0, 0.0), (2.0, 0.0, 0.0), (4.0, 0.4, 0.5), (10.0, 0.4, 0.5),
        (12.0, 0.4, -0.5), (18.0, 0.4, -0.5), (20.0, 0.2, 0.9), (26.0, 0.2, 0.9),
        (28.0, 0.0, -0.8), (32.0, 0.0, -0.8), (34.0, 0.5, -0.3), (40.0, 0.5, -0.3),
        (42.0, 0.3, 0.7), (48.0, 0.3, 0.7), (50.0, 0.6, 0.2), (54.0, 0.6, 0.2),
        (56.0, 0.3, -0.8), (62.0, 0.3, -0.8), (64.0, 0.0, 0.6), (67.0, 0.0, 0.6),
        (69.0, 0.4, 0.0), (72.0, 0.4, 0.0), (74.0, 0.4, 0.6), (80.0, 0.4, 0.6),
        (82.0, 0.2, -0.6), (88.0, 0.2, -0.6), (90.0, 0.5, 0.4), (96.0, 0.5, 0.4),
        (98.0, 0.3, -0.9), (104.0, 0.3, -0.9), (106.0, 0.0, 0.0), (108.0, 0.0, 0.0),
        (110.0, 0.4, 0.7), (116.0, 0.4, 0.7), (118.0, 0.0, 0.0), (120.0, 0.0, 0.0),
    ];
    K.iter().map(|&(t, u, r)| Keyframe::new(t, u, r)).collect()
}

impl Scenario {
    /// Noise-free standard scenario with the fixture extrinsics
    /// `(1, 2, 90)` deg and `(0.2, 0.1, 0.3)` m.
    pub fn standard() -> Self {
        Self {
            keyframes: standard_keyframes(),
            start: PlanarPose { x: -1.2, y: -3.3, yaw: 0.0 },
            lidar_position: Vec3::new(0.1, 0.0, 0.8),
            lidar_to_base: Rotation::from_euler_deg(&Vec3::new(1.5, -1.0, 0.0)),
            truth: CalibState::new(
                Rotation::from_euler_deg(&Vec3::new(1.0, 2.0, 90.0)),
                Vec3::new(0.2, 0.1, 0.3),
            ),
            imu_rate_hz: 200.0,
            lidar_rate_hz: 10.0,
            time_offset_s: 0.0,
            noise: NoiseSpec::none(),
            room: Room { half_x: 6.0, half_y: 5.0 },
            lidar: LidarModel::sixteen_beam(),
            gravity: 9.81,
            seed: 0,
        }
    }

    /// Standard scenario with realistic noise, biases and a time offset of
    /// two frames plus 12 ms.
    pub fn noisy(seed: u64) -> Self {
        let noise = NoiseSpec::realistic();
        let mut s = Self::standard().with_noise(noise);
        s.time_offset_s = 0.212;
        s.seed = seed;
        s
    }

    /// Replaces the noise and keeps `truth` biases consistent with it.
    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self.truth.gyro_bias = noise.gyro_bias;
        self.truth.accel_bias = noise.accel_bias;
        self
    }

    pub fn trajectory(&self) -> Result<Trajectory, SimError> {
        self.validate()?;
        let traj = Trajectory::new(self.keyframes.clone(), self.start)?;
        let (x0, x1, y0, y1) = traj.bounds();
        let margin = 0.5;
        if x0 < -self.room.half_x + margin
            || x1 > self.room.half_x - margin
            || y0 < -self.room.half_y + margin
            || y1 > self.room.half_y - margin
        {
            return Err(SimError::InvalidSpec("trajectory leaves the room"));
        }
        Ok(traj)
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.imu_rate_hz > 0.0 && self.lidar_rate_hz > 0.0) {
            return Err(SimError::InvalidSpec("rates must be positive"));
        }
        if !(self.room.half_x > 0.0 && self.room.half_y > 0.0) {
            return Err(SimError::InvalidSpec("room extents must be positive"));
        }
        if !(self.lidar_position.z > 0.0) || !(self.imu_position().z > 0.0) {
            return Err(SimError::InvalidSpec("sensors must sit above the floor"));
        }
        let n = &self.noise;
        if n.gyro_std < 0.0 || n.accel_std < 0.0 || n.range_std < 0.0 {
            return Err(SimError::InvalidSpec("noise levels must be non-negative"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.keyframes.last().map(|k| k.time).unwrap_or(0.0)
    }

    /// IMU frame to base frame.
    pub fn imu_to_base(&self) -> Rotation {
        self.lidar_to_base * self.truth.imu_to_lidar
    }

    /// IMU origin in the base frame.
    pub fn imu_position(&self) -> Vec3 {
        self.lidar_position + self.lidar_to_base * self.truth.imu_in_lidar
    }

    /// Height of the IMU above the floor; the calibration's height prior.
    pub fn imu_height(&self) -> f64 {
        self.imu_position().z
    }

    /// Pairing with the true integer offset and height prior.
    pub fn dataset_params(&self) -> DatasetParams {
        DatasetParams { gravity: self.gravity, ..DatasetParams::new(self.frame_offset(), self.imu_height()) }
    }

    pub fn lidar_timestamps(&self) -> Vec<f64> {
        let n = (self.duration() * self.lidar_rate_hz).round() as usize;
        (0..n).map(|k| k as f64 / self.lidar_rate_hz).collect()
    }

    pub fn imu_timestamps(&self) -> Vec<f64> {
        let n = (self.duration() * self.imu_rate_hz).round() as usize;
        (0..=n).map(|k| k as f64 / self.imu_rate_hz).collect()
    }

    /// Integer-frame part of the true time offset.
    pub fn frame_offset(&self) -> i32 {
        (self.time_offset_s * self.lidar_rate_hz).round() as i32
    }
}
