//! TOML run configuration. Every key is optional; missing keys take the
//! library defaults. Sections: `[ground]`, `[lo]`, `[imu]`, `[calib]`.

use std::path::Path;

use groundcal_core::calib::{CalibConfig, CalibState, GravityReference};
use groundcal_core::ground::GroundSegConfig;
use groundcal_core::imu::{CorrectionGate, ImuConfig};
use groundcal_core::lo::diff::Stencil;
use groundcal_core::lo::{LoConfig, ProcessNoise};
use groundcal_core::{Rotation, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub ground: GroundSection,
    pub lo: LoSection,
    pub imu: ImuSection,
    pub calib: CalibSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSection {
    pub seed_quantile: f64,
    pub inlier_threshold_m: f64,
    pub min_ground_points: usize,
    pub refit_iterations: usize,
    pub max_tilt_deg: f64,
}

impl Default for GroundSection {
    fn default() -> Self {
        let d = GroundSegConfig::default();
        Self {
            seed_quantile: d.seed_quantile,
            inlier_threshold_m: d.inlier_threshold_m,
            min_ground_points: d.min_ground_points,
            refit_iterations: d.refit_iterations,
            max_tilt_deg: d.max_tilt_deg,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilName {
    ThreePoint,
    FivePoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoSection {
    pub voxel_size_m: f64,
    pub search_cell_m: f64,
    pub scan_voxel_m: f64,
    pub knn: usize,
    pub plane_rms_gate_m: f64,
    pub outlier_sigmas: f64,
    pub reassociate_iterations: usize,
    pub reassociate_tol_m: f64,
    pub ieskf_max_iter: usize,
    pub ieskf_tol: f64,
    pub enable_ground_residual: bool,
    pub point_noise_var: f64,
    pub ground_noise_var: [f64; 3],
    pub process_noise_angular: f64,
    pub process_noise_linear: f64,
    pub initial_velocity_var: f64,
    pub centre_rates: bool,
    pub stencil: StencilName,
}

impl Default for LoSection {
    fn default() -> Self {
        let d = LoConfig::default();
        Self {
            voxel_size_m: d.voxel_size_m,
            search_cell_m: d.search_cell_m,
            scan_voxel_m: d.scan_voxel_m,
            knn: d.knn,
            plane_rms_gate_m: d.plane_rms_gate_m,
            outlier_sigmas: d.outlier_sigmas,
            reassociate_iterations: d.reassociate_iterations,
            reassociate_tol_m: d.reassociate_tol_m,
            ieskf_max_iter: d.ieskf_max_iter,
            ieskf_tol: d.ieskf_tol,
            enable_ground_residual: d.enable_ground_residual,
            point_noise_var: d.point_noise_var,
            ground_noise_var: d.ground_noise_var.into(),
            process_noise_angular: d.process_noise.q[(0, 0)],
            process_noise_linear: d.process_noise.q[(3, 3)],
            initial_velocity_var: d.initial_velocity_var,
            centre_rates: d.centre_rates,
            stencil: match d.stencil {
                Stencil::ThreePoint => StencilName::ThreePoint,
                Stencil::FivePoint => StencilName::FivePoint,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImuSection {
    /// Taken from the log manifest when absent.
    pub imu_rate_hz: Option<f64>,
    pub filter_cutoff_hz: f64,
    pub madgwick_beta: f64,
    pub gravity_mps2: f64,
    pub max_lag_frames: usize,
    pub static_init_s: f64,
    /// Hold the attitude filter's accelerometer correction while moving.
    pub correction_gate: bool,
}

impl Default for ImuSection {
    fn default() -> Self {
        let d = ImuConfig::default();
        Self {
            imu_rate_hz: None,
            filter_cutoff_hz: d.filter_cutoff_hz,
            madgwick_beta: d.madgwick_beta,
            gravity_mps2: d.gravity_mps2,
            max_lag_frames: d.max_lag_frames,
            static_init_s: d.static_init_s,
            correction_gate: d.gate.is_some(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GravityName {
    Floor,
    ImuAttitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibSection {
    pub rho_w: f64,
    pub rho_a: f64,
    pub rho_g: f64,
    pub cauchy_scale: f64,
    /// Overrides the manifest's IMU height prior.
    pub imu_height_m: Option<f64>,
    pub sv_threshold: f64,
    /// Initial IMU-to-LiDAR rotation as roll, pitch, yaw (applied z-y-x).
    pub init_rotation_euler_deg: [f64; 3],
    pub init_translation_m: [f64; 3],
    pub max_iterations: usize,
    pub gravity_reference: GravityName,
}

impl Default for CalibSection {
    fn default() -> Self {
        let d = CalibConfig::default();
        Self {
            rho_w: d.rho_w,
            rho_a: d.rho_a,
            rho_g: d.rho_g,
            cauchy_scale: d.cauchy_scale,
            imu_height_m: None,
            sv_threshold: d.sv_threshold,
            init_rotation_euler_deg: [0.0; 3],
            init_translation_m: [0.0; 3],
            max_iterations: d.max_iterations,
            gravity_reference: GravityName::Floor,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let cfg: Config = toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        cfg.validate().map_err(|detail| ConfigError::Invalid { path: path.into(), detail })?;
        Ok(cfg)
    }

    /// Range checks the library would otherwise report deep inside a stage.
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("lo.voxel_size_m", self.lo.voxel_size_m),
            ("lo.search_cell_m", self.lo.search_cell_m),
            ("lo.scan_voxel_m", self.lo.scan_voxel_m),
            ("lo.point_noise_var", self.lo.point_noise_var),
            ("imu.filter_cutoff_hz", self.imu.filter_cutoff_hz),
            ("imu.gravity_mps2", self.imu.gravity_mps2),
            ("ground.inlier_threshold_m", self.ground.inlier_threshold_m),
        ];
        if let Some((key, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(format!("{key} must be positive, got {v}"));
        }
        if !(self.ground.seed_quantile > 0.0 && self.ground.seed_quantile <= 1.0) {
            return Err(format!("ground.seed_quantile must lie in (0, 1], got {}", self.ground.seed_quantile));
        }
        if self.lo.knn < 3 {
            return Err(format!("lo.knn must be at least 3, got {}", self.lo.knn));
        }
        if let Some(r) = self.imu.imu_rate_hz.filter(|r| !(*r > 0.0)) {
            return Err(format!("imu.imu_rate_hz must be positive, got {r}"));
        }
        Ok(())
    }

    pub fn ground_seg(&self) -> GroundSegConfig {
        let g = &self.ground;
        GroundSegConfig {
            seed_quantile: g.seed_quantile,
            inlier_threshold_m: g.inlier_threshold_m,
            min_ground_points: g.min_ground_points,
            refit_iterations: g.refit_iterations,
            max_tilt_deg: g.max_tilt_deg,
        }
    }

    pub fn lo_config(&self) -> LoConfig {
        let l = &self.lo;
        LoConfig {
            voxel_size_m: l.voxel_size_m,
            search_cell_m: l.search_cell_m,
            scan_voxel_m: l.scan_voxel_m,
            knn: l.knn,
            plane_rms_gate_m: l.plane_rms_gate_m,
            outlier_sigmas: l.outlier_sigmas,
            reassociate_iterations: l.reassociate_iterations,
            reassociate_tol_m: l.reassociate_tol_m,
            ieskf_max_iter: l.ieskf_max_iter,
            ieskf_tol: l.ieskf_tol,
            enable_ground_residual: l.enable_ground_residual,
            point_noise_var: l.point_noise_var,
            ground_noise_var: l.ground_noise_var.into(),
            process_noise: ProcessNoise::diagonal(l.process_noise_angular, l.process_noise_linear),
            initial_velocity_var: l.initial_velocity_var,
            centre_rates: l.centre_rates,
            stencil: match l.stencil {
                StencilName::ThreePoint => Stencil::ThreePoint,
                StencilName::FivePoint => Stencil::FivePoint,
            },
            ground_seg: self.ground_seg(),
        }
    }

    pub fn imu_config(&self, manifest_rate_hz: f64) -> ImuConfig {
        let i = &self.imu;
        ImuConfig {
            imu_rate_hz: i.imu_rate_hz.unwrap_or(manifest_rate_hz),
            filter_cutoff_hz: i.filter_cutoff_hz,
            madgwick_beta: i.madgwick_beta,
            gravity_mps2: i.gravity_mps2,
            max_lag_frames: i.max_lag_frames,
            static_init_s: i.static_init_s,
            gate: i.correction_gate.then(CorrectionGate::default),
        }
    }

    pub fn initial_state(&self) -> CalibState {
        let c = &self.calib;
        CalibState::new(
            Rotation::from_euler_deg(&Vec3::from(c.init_rotation_euler_deg)),
            Vec3::from(c.init_translation_m),
        )
    }

    pub fn calib_config(&self) -> CalibConfig {
        let c = &self.calib;
        CalibConfig {
            rho_w: c.rho_w,
            rho_a: c.rho_a,
            rho_g: c.rho_g,
            cauchy_scale: c.cauchy_scale,
            sv_threshold: c.sv_threshold,
            max_iterations: c.max_iterations,
            initial: self.initial_state(),
            ..CalibConfig::default()
        }
    }

    pub fn gravity_reference(&self) -> GravityReference {
        match self.calib.gravity_reference {
            GravityName::Floor => GravityReference::Floor,
            GravityName::ImuAttitude => GravityReference::ImuAttitude,
        }
    }

    /// Sets the initial guess from a full rotation rather than Euler angles.
    pub fn set_initial(&mut self, state: &CalibState) {
        self.calib.init_rotation_euler_deg = state.imu_to_lidar.to_euler_deg().into();
        self.calib.init_translation_m = state.imu_in_lidar.into();
    }
}
