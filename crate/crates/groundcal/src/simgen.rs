//! Scenario files and synthetic log generation.
//!
//! A scenario file is TOML; every key is optional and overrides the
//! standard 120 s scenario:
//!
//! ```toml
//! seed = 3
//! noise_scale = 1.0                      # 0 = noise-free, 1 = realistic
//! time_offset_s = 0.212                  # IMU clock minus LiDAR clock
//! imu_rate_hz = 200.0
//! lidar_rate_hz = 10.0
//! truth_rotation_euler_deg = [1.0, 2.0, 90.0]
//! truth_translation_m = [0.2, 0.1, 0.3]
//! lidar_position_m = [0.1, 0.0, 0.8]     # in the robot base frame
//! lidar_tilt_euler_deg = [1.5, -1.0, 0.0]
//! room_half_extents_m = [6.0, 5.0]
//! start_pose = [-1.2, -3.3, 0.0]         # x m, y m, yaw deg
//! keyframes = [[0.0, 0.0, 0.0], [2.0, 0.4, 0.5], [4.0, 0.0, 0.0]]  # t s, speed m/s, yaw rate rad/s
//! ```

use std::path::Path;

use groundcal_core::sim::{synth_imu, synth_lidar, Keyframe, NoiseSpec, PlanarPose, Room, Scenario};
use groundcal_core::{Rotation, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, PipelineError};
use crate::log::{write_sensor_log, Manifest};
use crate::report::ReferenceFile;

pub const REFERENCE_FILE: &str = "reference.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: Option<u64>,
    pub noise_scale: Option<f64>,
    pub time_offset_s: Option<f64>,
    pub imu_rate_hz: Option<f64>,
    pub lidar_rate_hz: Option<f64>,
    pub truth_rotation_euler_deg: Option<[f64; 3]>,
    pub truth_translation_m: Option<[f64; 3]>,
    pub lidar_position_m: Option<[f64; 3]>,
    pub lidar_tilt_euler_deg: Option<[f64; 3]>,
    pub room_half_extents_m: Option<[f64; 2]>,
    pub start_pose: Option<[f64; 3]>,
    pub keyframes: Option<Vec<[f64; 3]>>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    pub fn scenario(&self) -> Scenario {
        let mut sc = Scenario::standard();
        if let Some(scale) = self.noise_scale {
            sc = sc.with_noise(NoiseSpec::realistic().scaled(scale));
        }
        let v = |a: [f64; 3]| Vec3::from(a);
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(t) = self.time_offset_s {
            sc.time_offset_s = t;
        }
        if let Some(r) = self.imu_rate_hz {
            sc.imu_rate_hz = r;
        }
        if let Some(r) = self.lidar_rate_hz {
            sc.lidar_rate_hz = r;
        }
        if let Some(e) = self.truth_rotation_euler_deg {
            sc.truth.imu_to_lidar = Rotation::from_euler_deg(&v(e));
        }
        if let Some(p) = self.truth_translation_m {
            sc.truth.imu_in_lidar = v(p);
        }
        if let Some(p) = self.lidar_position_m {
            sc.lidar_position = v(p);
        }
        if let Some(e) = self.lidar_tilt_euler_deg {
            sc.lidar_to_base = Rotation::from_euler_deg(&v(e));
        }
        if let Some([half_x, half_y]) = self.room_half_extents_m {
            sc.room = Room { half_x, half_y };
        }
        if let Some([x, y, yaw_deg]) = self.start_pose {
            sc.start = PlanarPose { x, y, yaw: yaw_deg.to_radians() };
        }
        if let Some(keys) = &self.keyframes {
            sc.keyframes = keys.iter().map(|&[t, speed, rate]| Keyframe::new(t, speed, rate)).collect();
        }
        sc
    }
}

/// Simulates `sc` and writes its sensor log and `reference.json` under
/// `out`.
pub fn write_simulated_log(sc: &Scenario, out: &Path) -> Result<(), PipelineError> {
    let imu = synth_imu(sc)?;
    let scans: Vec<_> = synth_lidar(sc)?.into_iter().map(|s| s.scan).collect();
    let manifest = Manifest::new(sc.imu_rate_hz, sc.lidar_rate_hz, sc.imu_height());
    write_sensor_log(out, &manifest, &imu, &scans)?;
    let path = out.join(REFERENCE_FILE);
    std::fs::write(&path, ReferenceFile::from_state(&sc.truth).to_json() + "\n")
        .map_err(|source| PipelineError::Output { path, source })
}
