mod common;

use std::fs;

use groundcal::plot::{emit_plot_data, PARAMS_HEADER, RESIDUALS_HEADER, Z_DRIFT_HEADER};
use groundcal::{exit_code, load_sensor_log, lo_z_drift, run_pipeline, Config, PipelineError, ReferenceFile, RunReport};
use groundcal_core::sim::Scenario;
use groundcal_core::{Rotation, Vec3};

fn offset_config(truth: &groundcal_core::calib::CalibState) -> Config {
    let mut cfg = Config::default();
    let mut init = *truth;
    init.imu_to_lidar = truth.imu_to_lidar * Rotation::from_euler_deg(&Vec3::new(-5.0, -5.0, 5.0));
    init.imu_in_lidar += Vec3::new(0.4, 0.35, 0.45);
    cfg.set_initial(&init);
    cfg
}

fn without_timings(mut r: RunReport) -> String {
    r.timings = Default::default();
    r.to_json()
}

#[test]
fn standard_log_converges_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let sc = Scenario::standard();
    common::write(&sc, dir.path());
    let log = load_sensor_log(dir.path()).unwrap();
    let reference = ReferenceFile::load(&dir.path().join("reference.json")).unwrap();
    let cfg = offset_config(&sc.truth);

    let first = run_pipeline(&log, &cfg, Some(&reference)).unwrap();
    assert!(first.converged);
    let errors = first.reference_errors.expect("reference errors");
    assert!(errors.rot_rmse_deg < 0.1 && errors.trans_rmse_m < 0.01, "{errors:?}");
    assert!((first.time_offset_s - sc.time_offset_s).abs() < 0.01);
    assert_eq!(first.scans_without_ground, 0);

    let last = first.history.last().unwrap();
    assert_eq!(last.state, first.estimate);

    let back = RunReport::from_json(&first.to_json()).unwrap();
    assert_eq!(back, first);

    let out = tempfile::tempdir().unwrap();
    let files = emit_plot_data(Some(&first), None, out.path()).unwrap();
    assert_eq!(files.len(), 2);
    let params = fs::read_to_string(out.path().join("params_vs_iter.csv")).unwrap();
    let mut lines = params.lines();
    assert_eq!(lines.next(), Some(PARAMS_HEADER));
    let row: Vec<f64> = params.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let est = &first.estimate;
    let expect: Vec<f64> = est
        .rotation_euler_deg
        .into_iter()
        .chain(est.translation_m)
        .chain([est.fine_time_offset_s])
        .chain(est.gyro_bias)
        .chain(est.accel_bias)
        .collect();
    assert_eq!(row[2..], expect[..]);
    let residuals = fs::read_to_string(out.path().join("residuals_vs_iter.csv")).unwrap();
    assert_eq!(residuals.lines().next(), Some(RESIDUALS_HEADER));
    assert_eq!(residuals.lines().count(), first.history.len() + 1);

    let second = run_pipeline(&log, &cfg, Some(&reference)).unwrap();
    assert_eq!(without_timings(first), without_timings(second));
}

#[test]
fn straight_line_log_lacks_excitation() {
    let dir = tempfile::tempdir().unwrap();
    common::write(&common::straight_scenario(), dir.path());
    let log = load_sensor_log(dir.path()).unwrap();
    let err = run_pipeline(&log, &Config::default(), None).unwrap_err();
    match &err {
        PipelineError::InsufficientExcitation { sigma_max, threshold, .. } => assert!(sigma_max < threshold),
        e => panic!("{e}"),
    }
    assert_eq!(exit_code(&err), 3);
    assert!(err.to_string().contains(&dir.path().display().to_string()));
}

#[test]
fn z_drift_has_both_runs() {
    let dir = tempfile::tempdir().unwrap();
    common::write(&common::short_scenario(), dir.path());
    let log = load_sensor_log(dir.path()).unwrap();
    let z = lo_z_drift(&log, &Config::default()).unwrap();
    assert_eq!(z.with_ground_m.len(), log.scans.len());
    assert_eq!(z.without_ground_m.len(), log.scans.len());
    assert!(z.with_ground_m.iter().all(|h| h.abs() < 0.01));

    let out = tempfile::tempdir().unwrap();
    emit_plot_data(None, Some(&z), out.path()).unwrap();
    let text = fs::read_to_string(out.path().join("z_drift.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(Z_DRIFT_HEADER));
    for line in text.lines().skip(1) {
        let values: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(values.len(), 3);
    }
    assert_eq!(text.lines().count(), log.scans.len() + 1);
}

#[test]
fn unwritable_output_is_an_output_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let z = groundcal::ZDrift { timestamps: vec![0.0], with_ground_m: vec![0.0], without_ground_m: vec![0.0] };
    let err = emit_plot_data(None, Some(&z), &blocker.join("sub")).unwrap_err();
    assert!(matches!(err, PipelineError::Output { .. }));
    assert_eq!(exit_code(&err), 1);
}

#[test]
fn error_grows_with_noise() {
    let mut medians = Vec::new();
    for scale in [0.5, 1.0, 2.0] {
        let mut rot = Vec::new();
        let mut trans = Vec::new();
        for seed in 1..=10 {
            let mut sc = Scenario::standard().with_noise(groundcal_core::sim::NoiseSpec::realistic().scaled(scale));
            sc.seed = seed;
            sc.keyframes.retain(|k| k.time <= 58.0);
            sc.keyframes.push(groundcal_core::sim::Keyframe::new(60.0, 0.0, 0.0));
            let dir = tempfile::tempdir().unwrap();
            common::write(&sc, dir.path());
            let log = load_sensor_log(dir.path()).unwrap();
            let e = run_pipeline(&log, &offset_config(&sc.truth), Some(&sc.truth)).unwrap().reference_errors.unwrap();
            rot.push(e.rot_rmse_deg);
            trans.push(e.trans_rmse_m);
        }
        let median = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            0.5 * (v[4] + v[5])
        };
        medians.push((median(rot), median(trans)));
    }
    println!("median errors at noise x0.5, x1, x2: {medians:?}");
    for w in medians.windows(2) {
        assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1, "{medians:?}");
    }
}
