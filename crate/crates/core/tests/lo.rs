use std::time::Instant;

use groundcal_core::geometry::{ManifoldState, Rotation, Vec3};
use groundcal_core::ground::PointCloudScan;
use groundcal_core::lo::filter::point_to_plane_residuals;
use groundcal_core::lo::{run_lo, LidarOdomSample, LocalMap, LoConfig};
use groundcal_core::sim::{synth_lidar, synth_lo_direct, Keyframe, NoiseSpec, PlanarPose, Scenario};
use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scans(sc: &Scenario) -> Vec<PointCloudScan> {
    synth_lidar(sc).expect("scenario").into_iter().map(|s| s.scan).collect()
}

/// The first `seconds` of the scenario, braking to rest over the last two.
fn truncated(mut sc: Scenario, seconds: f64) -> Scenario {
    sc.keyframes.retain(|k| k.time <= seconds - 2.0);
    sc.keyframes.push(Keyframe::new(seconds, 0.0, 0.0));
    sc
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (sum / n as f64).sqrt()
}

#[test]
fn static_scans_give_zero_rates() {
    let mut sc = Scenario::standard();
    sc.keyframes = vec![Keyframe::new(0.0, 0.0, 0.0), Keyframe::new(3.0, 0.0, 0.0)];
    let lo = run_lo(&scans(&sc), &LoConfig::default()).unwrap();
    assert_eq!(lo.len(), 30);
    for s in &lo {
        for v in [s.angular_velocity, s.linear_velocity, s.angular_accel, s.linear_accel] {
            assert!(v.norm() < 1e-6, "{v:?} at {}", s.timestamp);
        }
    }
}

#[test]
fn circle_rates_within_two_percent() {
    let mut sc = Scenario::standard();
    sc.start = PlanarPose { x: 0.0, y: -1.5, yaw: 0.0 };
    sc.keyframes = vec![
        Keyframe::new(0.0, 0.0, 0.0),
        Keyframe::new(2.0, 0.5, 0.4),
        Keyframe::new(20.0, 0.5, 0.4),
        Keyframe::new(22.0, 0.0, 0.0),
    ];
    let lo = run_lo(&scans(&sc), &LoConfig::default()).unwrap();
    let truth = synth_lo_direct(&sc).unwrap();
    let rel = |pick: fn(&LidarOdomSample) -> Vec3| {
        let err = rms(lo.iter().zip(&truth).map(|(a, b)| (pick(a) - pick(b)).norm()));
        err / rms(truth.iter().map(|b| pick(b).norm()))
    };
    let (w, v) = (rel(|s| s.angular_velocity), rel(|s| s.linear_velocity));
    assert!(w < 0.02 && v < 0.02, "ω {w:.4}, v {v:.4}");
}

#[test]
fn noise_free_pose_accuracy() {
    let sc = truncated(Scenario::standard(), 30.0);
    let lo = run_lo(&scans(&sc), &LoConfig::default()).unwrap();
    let truth = synth_lo_direct(&sc).unwrap();
    for (a, b) in lo.iter().zip(&truth) {
        let dp = (a.position - b.position).norm();
        let da = a.attitude.angle_to(&b.attitude).to_degrees();
        assert!(dp < 1e-4 && da < 0.01, "t {}: {dp:.2e} m, {da:.2e} deg", a.timestamp);
    }
}

#[test]
fn ground_residual_suppresses_z_drift() {
    let sc = truncated(Scenario::standard().with_noise(NoiseSpec::realistic()), 20.0);
    let scans = scans(&sc);
    assert_eq!(scans.len(), 200);
    let truth = synth_lo_direct(&sc).unwrap();
    let final_z = |gp: bool| {
        let cfg = LoConfig { enable_ground_residual: gp, ..LoConfig::default() };
        let lo = run_lo(&scans, &cfg).unwrap();
        (lo[199].position.z - truth[199].position.z).abs()
    };
    let (with, without) = (final_z(true), final_z(false));
    println!("final |z| error: with ground {with:.3e} m, without {without:.3e} m");
    assert!(with <= 0.2 * without);
}

/// A scan displaced from the map it was built from; one Gauss-Newton step on
/// the pose block removes most of the misfit.
#[test]
fn gauss_newton_step_reduces_misfit() {
    let sc = Scenario::standard();
    let scan = &scans(&sc)[0];
    let mut map = LocalMap::new(0.05, 0.5);
    map.insert_scan(&scan.points, &Rotation::identity(), &Vec3::zeros());

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
    let x = ManifoldState {
        attitude: Rotation::exp(&(axis * 0.5f64.to_radians())),
        position: Vec3::new(0.006, -0.008, 0.0),
        ..Default::default()
    };
    let cfg = LoConfig::default();
    let before = point_to_plane_residuals(&x, &scan.points, &map, cfg.knn, cfg.plane_rms_gate_m, 1.0);
    let mut h = SMatrix::<f64, 6, 6>::zeros();
    let mut g = SVector::<f64, 6>::zeros();
    for r in &before {
        let j = r.h.fixed_columns::<6>(0).transpose();
        h += j * j.transpose();
        g += j * r.z;
    }
    let step = h.cholesky().unwrap().solve(&-g);
    let mut d = groundcal_core::geometry::Vec12::zeros();
    d.fixed_rows_mut::<6>(0).copy_from(&step);
    let moved = x.boxplus(&d);
    let cost = |x: &ManifoldState| {
        point_to_plane_residuals(x, &scan.points, &map, cfg.knn, cfg.plane_rms_gate_m, 1.0)
            .iter()
            .map(|r| r.z * r.z)
            .sum::<f64>()
    };
    let (c0, c1) = (cost(&x), cost(&moved));
    assert!(c1 <= 0.1 * c0, "{c0:.3e} -> {c1:.3e}");
}

#[test]
fn map_insert_and_query_throughput() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points: Vec<Vec3> = (0..100_000)
        .map(|_| Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(0.0..3.0)))
        .collect();
    let start = Instant::now();
    let mut map = LocalMap::new(0.1, 0.5);
    map.insert_scan(&points, &Rotation::identity(), &Vec3::zeros());
    let found: usize = points.iter().map(|p| map.nearest(p, 5).len()).sum();
    let elapsed = start.elapsed();
    assert!(found > 0);
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
}
