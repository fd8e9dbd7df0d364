//! Sensor synthesis from the ground-truth trajectory.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::scenario::Scenario;
use super::trajectory::{BaseKinematics, Trajectory};
use crate::error::SimError;
use crate::geometry::{Rotation, Vec3};
use crate::ground::{rotation_from_normals, GroundObservation, GroundPlane, PointCloudScan};
use crate::imu::{ImuProcessed, ImuSample};
use crate::lo::LidarOdomSample;

const IMU_STREAM: u64 = 1;
const LIDAR_STREAM: u64 = 2;

/// A scan with per-point floor labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SimScan {
    pub scan: PointCloudScan,
    pub is_ground: Vec<bool>,
}

/// True LiDAR pose and body kinematics at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarTruth {
    /// LiDAR to world.
    pub rotation: Rotation,
    pub origin: Vec3,
    pub angular_velocity: Vec3,
    pub linear_velocity: Vec3,
    pub angular_accel: Vec3,
    pub linear_accel: Vec3,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian3(rng: &mut ChaCha8Rng, std: f64) -> Vec3 {
    if std == 0.0 {
        return Vec3::zeros();
    }
    let mut n = || -> f64 { StandardNormal.sample(rng) };
    Vec3::new(n(), n(), n()) * std
}

pub fn lidar_truth(sc: &Scenario, k: &BaseKinematics) -> LidarTruth {
    let to_lidar = sc.lidar_to_base.transpose();
    let m = &sc.lidar_position;
    LidarTruth {
        rotation: k.rotation() * sc.lidar_to_base,
        origin: k.position + k.rotation() * m,
        angular_velocity: to_lidar * k.angular_velocity(),
        linear_velocity: to_lidar * k.point_velocity(m),
        angular_accel: to_lidar * k.angular_accel(),
        linear_accel: to_lidar * k.point_accel(m),
    }
}

/// Raw IMU stream on the IMU clock.
pub fn synth_imu(sc: &Scenario) -> Result<Vec<ImuSample>, SimError> {
    let traj = sc.trajectory()?;
    Ok(synth_imu_with(sc, &traj))
}

pub(crate) fn synth_imu_with(sc: &Scenario, traj: &Trajectory) -> Vec<ImuSample> {
    let mut rng = rng(sc.seed, IMU_STREAM);
    let to_imu = sc.imu_to_base().transpose();
    let m = sc.imu_position();
    let up = Vec3::new(0.0, 0.0, sc.gravity);
    sc.imu_timestamps()
        .into_iter()
        .map(|stamp| {
            let k = traj.at(stamp - sc.time_offset_s);
            let gyro = to_imu * k.angular_velocity() + sc.noise.gyro_bias + gaussian3(&mut rng, sc.noise.gyro_std);
            // Base is level, so world up is base up.
            let accel = to_imu * (k.point_accel(&m) + up) + sc.noise.accel_bias + gaussian3(&mut rng, sc.noise.accel_std);
            ImuSample { timestamp: stamp, gyro, accel }
        })
        .collect()
}

/// Exact IMU quantities at every LiDAR stamp, on the IMU clock, as the IMU
/// branch would produce them from perfect data.
pub fn synth_imu_direct(sc: &Scenario) -> Result<Vec<ImuProcessed>, SimError> {
    let traj = sc.trajectory()?;
    let to_imu = sc.imu_to_base().transpose();
    let m = sc.imu_position();
    let up = Vec3::new(0.0, 0.0, sc.gravity);
    Ok(sc
        .lidar_timestamps()
        .into_iter()
        .map(|stamp| {
            let k = traj.at(stamp - sc.time_offset_s);
            ImuProcessed {
                timestamp: stamp,
                angular_velocity: to_imu * k.angular_velocity() + sc.noise.gyro_bias,
                angular_accel: to_imu * k.angular_accel(),
                linear_accel: to_imu * (k.point_accel(&m) + up) + sc.noise.accel_bias,
                ground_to_imu: (k.rotation() * sc.imu_to_base()).transpose(),
            }
        })
        .collect())
}

/// Ray-cast scans at every LiDAR stamp.
pub fn synth_lidar(sc: &Scenario) -> Result<Vec<SimScan>, SimError> {
    let traj = sc.trajectory()?;
    let dirs = sc.lidar.directions();
    let mut rng = rng(sc.seed, LIDAR_STREAM);
    Ok(sc
        .lidar_timestamps()
        .into_iter()
        .map(|t| cast_scan(sc, &lidar_truth(sc, &traj.at(t)), t, &dirs, &mut rng))
        .collect())
}

fn cast_scan(sc: &Scenario, pose: &LidarTruth, t: f64, dirs: &[Vec3], rng: &mut ChaCha8Rng) -> SimScan {
    let mut points = Vec::with_capacity(dirs.len());
    let mut is_ground = Vec::with_capacity(dirs.len());
    let o = pose.origin;
    for d in dirs {
        let w = pose.rotation * d;
        let mut best = (f64::INFINITY, false);
        if w.z < 0.0 {
            best = (-o.z / w.z, true);
        }
        for (dc, oc, half) in [(w.x, o.x, sc.room.half_x), (w.y, o.y, sc.room.half_y)] {
            if dc != 0.0 {
                let hit = (dc.signum() * half - oc) / dc;
                if hit > 0.0 && hit < best.0 {
                    best = (hit, false);
                }
            }
        }
        if !(best.0 <= sc.lidar.max_range) {
            continue;
        }
        let range = if sc.noise.range_std > 0.0 {
            let n: f64 = StandardNormal.sample(rng);
            best.0 + sc.noise.range_std * n
        } else {
            best.0
        };
        points.push(d * range);
        is_ground.push(best.1);
    }
    SimScan { scan: PointCloudScan { timestamp: t, points }, is_ground }
}

/// Exact odometry outputs at every LiDAR stamp, with each scan's floor
/// observation from truth.
pub fn synth_lo_direct(sc: &Scenario) -> Result<Vec<LidarOdomSample>, SimError> {
    let traj = sc.trajectory()?;
    let stamps = sc.lidar_timestamps();
    let first = lidar_truth(sc, &traj.at(stamps[0]));
    let normal = sc.lidar_to_base.transpose() * Vec3::z();
    let ground_to_lidar = rotation_from_normals(&normal).map_err(|_| SimError::InvalidSpec("LiDAR is upside down"))?;
    let ground = GroundObservation {
        plane: GroundPlane { normal, offset: sc.lidar_position.z, inlier_count: 0, rms_residual: 0.0 },
        ground_to_lidar,
    };
    Ok(stamps
        .into_iter()
        .map(|t| {
            let l = lidar_truth(sc, &traj.at(t));
            LidarOdomSample {
                timestamp: t,
                attitude: first.rotation.transpose() * l.rotation,
                position: first.rotation.transpose() * (l.origin - first.origin),
                angular_velocity: l.angular_velocity,
                linear_velocity: l.linear_velocity,
                angular_accel: l.angular_accel,
                linear_accel: l.linear_accel,
                ground: Some(ground),
            }
        })
        .collect())
}
