use std::fs;

use groundcal::config::{GravityName, StencilName};
use groundcal::{Config, ConfigError, ReferenceFile};
use groundcal_core::calib::{CalibConfig, GravityReference};
use groundcal_core::lo::LoConfig;
use groundcal_core::{Rotation, Vec3};

fn load(text: &str) -> Result<Config, ConfigError> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, text).unwrap();
    Config::load(&path)
}

#[test]
fn empty_file_gives_library_defaults() {
    let cfg = load("").unwrap();
    assert_eq!(cfg, Config::default());
    assert_eq!(cfg.lo_config(), LoConfig::default());
    let calib = cfg.calib_config();
    let d = CalibConfig::default();
    assert_eq!((calib.rho_w, calib.rho_a, calib.rho_g), (d.rho_w, d.rho_a, d.rho_g));
    assert_eq!(cfg.gravity_reference(), GravityReference::Floor);
    assert_eq!(cfg.imu_config(400.0).imu_rate_hz, 400.0);
}

#[test]
fn sections_override_defaults() {
    let cfg = load(
        r#"
[lo]
stencil = "three_point"
enable_ground_residual = false
[imu]
imu_rate_hz = 100.0
[calib]
rho_g = 0.0
gravity_reference = "imu_attitude"
init_rotation_euler_deg = [0.0, 0.0, 90.0]
"#,
    )
    .unwrap();
    assert_eq!(cfg.lo.stencil, StencilName::ThreePoint);
    assert!(!cfg.lo_config().enable_ground_residual);
    assert_eq!(cfg.imu_config(200.0).imu_rate_hz, 100.0);
    assert_eq!(cfg.calib_config().rho_g, 0.0);
    assert_eq!(cfg.calib.gravity_reference, GravityName::ImuAttitude);
    let r = cfg.initial_state().imu_to_lidar;
    assert!(r.angle_to(&Rotation::from_euler_deg(&Vec3::new(0.0, 0.0, 90.0))) < 1e-12);
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(matches!(load("[lo]\nvoxel = 0.1\n"), Err(ConfigError::Parse { .. })));
    assert!(matches!(load("[extras]\n"), Err(ConfigError::Parse { .. })));
}

#[test]
fn out_of_range_values_are_rejected() {
    let err = load("[lo]\nvoxel_size_m = -1.0\n").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { .. }));
    assert!(err.to_string().contains("voxel_size_m") && err.to_string().contains("run.toml"));
    assert!(load("[ground]\nseed_quantile = 1.5\n").is_err());
    assert!(load("[lo]\nknn = 2\n").is_err());
}

#[test]
fn reference_accepts_either_rotation_form() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.json");
    fs::write(&path, r#"{"rotation_euler_deg": [1.0, 2.0, 90.0], "translation_m": [0.2, 0.1, 0.3]}"#).unwrap();
    let a = ReferenceFile::load(&path).unwrap();
    fs::write(&path, ReferenceFile::from_state(&a).to_json()).unwrap();
    let b = ReferenceFile::load(&path).unwrap();
    assert!(a.imu_to_lidar.angle_to(&b.imu_to_lidar) < 1e-12);
    assert_eq!(a.imu_in_lidar, b.imu_in_lidar);

    fs::write(&path, r#"{"translation_m": [0.2, 0.1, 0.3]}"#).unwrap();
    assert!(matches!(ReferenceFile::load(&path), Err(ConfigError::Invalid { .. })));
    fs::write(&path, r#"{"rotation_matrix": [[2,0,0],[0,1,0],[0,0,1]], "translation_m": [0, 0, 0]}"#).unwrap();
    assert!(matches!(ReferenceFile::load(&path), Err(ConfigError::Invalid { .. })));
}
