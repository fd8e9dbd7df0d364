//! Scan-to-map odometry driver.

use alloc::vec;
use alloc::vec::Vec;

use super::diff::{differentiate_with, Stencil};
use super::filter::{
    ground_plane_residual, ieskf_update_with, predict, residuals_for, LoState, Mat12, MeasurementBundle,
    ProcessNoise, UpdateConfig, ANG_VEL, LIN_VEL,
};
use super::map::{voxel_downsample, LocalMap, LocalPlane};
use super::LidarOdomSample;
use crate::error::LoError;
use crate::geometry::{ManifoldState, Mat3, Vec3};
use crate::ground::{ground_observation, GroundObservation, GroundSegConfig, PointCloudScan};

/// Standard deviation of a Gaussian over its median absolute value.
const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoConfig {
    /// Map deduplication voxel, m.
    pub voxel_size_m: f64,
    /// Neighbor search cell, m; queries scan the 3x3x3 cells around a point.
    pub search_cell_m: f64,
    /// Scan downsampling voxel before matching, m.
    pub scan_voxel_m: f64,
    pub knn: usize,
    pub plane_rms_gate_m: f64,
    /// Points whose residual exceeds this many robust standard deviations
    /// (from the median absolute residual) are dropped at each iteration.
    pub outlier_sigmas: f64,
    /// Iterations that search the map afresh; later iterations keep the
    /// last pairing.
    pub reassociate_iterations: usize,
    /// A point that moved less than this since its last search keeps its
    /// plane, m.
    pub reassociate_tol_m: f64,
    pub ieskf_max_iter: usize,
    pub ieskf_tol: f64,
    pub enable_ground_residual: bool,
    /// Point-to-plane measurement variance, m².
    pub point_noise_var: f64,
    /// Ground measurement variances: two tilt rows and the height row.
    pub ground_noise_var: Vec3,
    pub process_noise: ProcessNoise,
    /// Prior variance of both velocities at the first scan.
    pub initial_velocity_var: f64,
    /// Re-centre the filtered rates on each scan before differentiating.
    pub centre_rates: bool,
    /// Scheme for centring and differentiating the rates.
    pub stencil: Stencil,
    pub ground_seg: GroundSegConfig,
}

impl Default for LoConfig {
    fn default() -> Self {
        Self {
            voxel_size_m: 0.2,
            search_cell_m: 0.5,
            scan_voxel_m: 0.2,
            knn: 5,
            plane_rms_gate_m: 0.1,
            outlier_sigmas: 3.0,
            reassociate_iterations: 3,
            reassociate_tol_m: 0.01,
            ieskf_max_iter: 10,
            ieskf_tol: 1e-6,
            enable_ground_residual: true,
            point_noise_var: 1e-3,
            ground_noise_var: Vec3::repeat(1e-6),
            process_noise: ProcessNoise::diagonal(100.0, 100.0),
            initial_velocity_var: 1.0,
            centre_rates: true,
            stencil: Stencil::FivePoint,
            ground_seg: GroundSegConfig::default(),
        }
    }
}

/// Filter output for one scan before differentiation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoTrackPoint {
    pub filtered: LoState,
    pub ground: Option<GroundObservation>,
}

/// Ground observation of every scan; `None` where the floor was not found.
pub fn observe_ground(scans: &[PointCloudScan], cfg: &GroundSegConfig) -> Vec<Option<GroundObservation>> {
    scans.iter().map(|s| ground_observation(s, cfg).ok()).collect()
}

/// Runs the filter over the scans and returns the posterior at every scan.
pub fn track(scans: &[PointCloudScan], cfg: &LoConfig) -> Result<Vec<LoTrackPoint>, LoError> {
    track_with_ground(scans, &observe_ground(scans, &cfg.ground_seg), cfg)
}

/// [`track`] with the per-scan ground observations already computed.
pub fn track_with_ground(
    scans: &[PointCloudScan],
    grounds: &[Option<GroundObservation>],
    cfg: &LoConfig,
) -> Result<Vec<LoTrackPoint>, LoError> {
    if grounds.len() != scans.len() {
        return Err(LoError::GroundCountMismatch { scans: scans.len(), grounds: grounds.len() });
    }
    if scans.len() < 3 {
        return Err(LoError::TooFewSamples { found: scans.len(), required: 3 });
    }
    if let Some(i) = scans.iter().position(|s| s.points.is_empty()) {
        return Err(LoError::EmptyScan { index: i });
    }
    if let Some(i) = scans.windows(2).position(|w| !(w[1].timestamp > w[0].timestamp)) {
        return Err(LoError::NonMonotoneScans { index: i + 1 });
    }
    let ground_to_first = match (cfg.enable_ground_residual, grounds[0]) {
        (false, _) => None,
        (true, Some(g)) => Some(g.ground_to_lidar),
        // Run the segmentation again for its error.
        (true, None) => Some(ground_observation(&scans[0], &cfg.ground_seg)?.ground_to_lidar),
    };
    let s_k = Mat3::from_diagonal(&cfg.ground_noise_var);
    let update = UpdateConfig { max_iter: cfg.ieskf_max_iter, tol: cfg.ieskf_tol };

    let mut cov = Mat12::identity() * 1e-6;
    for i in 0..3 {
        cov[(ANG_VEL + i, ANG_VEL + i)] = cfg.initial_velocity_var;
        cov[(LIN_VEL + i, LIN_VEL + i)] = cfg.initial_velocity_var;
    }
    let mut state = LoState { state: ManifoldState::default(), covariance: cov, timestamp: scans[0].timestamp };
    let mut map = LocalMap::new(cfg.voxel_size_m, cfg.search_cell_m);
    map.insert_scan(&scans[0].points, &state.state.attitude, &state.state.position);

    let mut out = Vec::with_capacity(scans.len());
    out.push(LoTrackPoint { filtered: state, ground: grounds[0] });
    for (k, scan) in scans.iter().enumerate().skip(1) {
        let prior = predict(&state, scan.timestamp - state.timestamp, &cfg.process_noise)?;
        let points = voxel_downsample(&scan.points, cfg.scan_voxel_m);
        let ground_normal = grounds[k].map(|g| g.normal());
        let mut pairs = Vec::new();
        let mut searched: Vec<Option<(Vec3, Option<LocalPlane>)>> = vec![None; points.len()];
        state = ieskf_update_with(&prior, &update, |x, it| {
            if it < cfg.reassociate_iterations.max(1) {
                pairs = associate_reusing(x, &points, &map, &mut searched, cfg);
                // The first pass runs on the predicted pose, where motion the
                // prediction missed would look like outliers.
                if it > 0 {
                    pairs = reject_outlier_pairs(x, core::mem::take(&mut pairs), cfg.outlier_sigmas);
                }
            }
            MeasurementBundle {
                points: residuals_for(x, &pairs, cfg.point_noise_var),
                ground: match (ground_to_first, ground_normal) {
                    (Some(g0), Some(n)) => Some(ground_plane_residual(x, &n, &g0, s_k)),
                    _ => None,
                },
            }
        })?;
        state.timestamp = scan.timestamp;
        map.insert_scan(&scan.points, &state.state.attitude, &state.state.position);
        out.push(LoTrackPoint { filtered: state, ground: grounds[k] });
    }
    Ok(out)
}

/// Pairs each point with its map plane, searching again only for points that
/// moved more than `reassociate_tol_m` since the last search.
fn associate_reusing(
    x: &ManifoldState,
    points: &[Vec3],
    map: &LocalMap,
    searched: &mut [Option<(Vec3, Option<LocalPlane>)>],
    cfg: &LoConfig,
) -> Vec<(Vec3, LocalPlane)> {
    let tol2 = cfg.reassociate_tol_m * cfg.reassociate_tol_m;
    points
        .iter()
        .zip(searched.iter_mut())
        .filter_map(|(p, slot)| {
            let q = x.attitude * p + x.position;
            let plane = match slot {
                Some((at, plane)) if (q - *at).norm_squared() < tol2 => *plane,
                _ => {
                    let plane = map.plane_near(&q, cfg.knn, cfg.plane_rms_gate_m);
                    *slot = Some((q, plane));
                    plane
                }
            };
            Some((*p, plane?))
        })
        .collect()
}

/// Drops pairs whose residual exceeds `sigmas` robust standard deviations.
/// Points matched to the wrong surface near edges and corners otherwise
/// bias the pose.
pub fn reject_outlier_pairs(x: &ManifoldState, mut pairs: Vec<(Vec3, LocalPlane)>, sigmas: f64) -> Vec<(Vec3, LocalPlane)> {
    if pairs.is_empty() || !(sigmas > 0.0) || !sigmas.is_finite() {
        return pairs;
    }
    let dist = |(p, pl): &(Vec3, LocalPlane)| (pl.normal.dot(&(x.attitude * p + x.position)) + pl.offset).abs();
    let mut abs: Vec<f64> = pairs.iter().map(dist).collect();
    let mid = abs.len() / 2;
    let (_, median, _) = abs.select_nth_unstable_by(mid, f64::total_cmp);
    let gate = sigmas * MAD_TO_SIGMA * *median;
    pairs.retain(|pair| dist(pair) <= gate);
    pairs
}

/// Odometry kinematics per scan: filtered rates, and accelerations from
/// central differences of those rates. The linear velocity is differentiated
/// in the first-scan frame and rotated back, so the result is the
/// acceleration of the LiDAR origin rather than the body-frame derivative.
pub fn run_lo(scans: &[PointCloudScan], cfg: &LoConfig) -> Result<Vec<LidarOdomSample>, LoError> {
    let track = track(scans, cfg)?;
    kinematics(&track, cfg.centre_rates, cfg.stencil)
}

pub fn run_lo_with_ground(
    scans: &[PointCloudScan],
    grounds: &[Option<GroundObservation>],
    cfg: &LoConfig,
) -> Result<Vec<LidarOdomSample>, LoError> {
    let track = track_with_ground(scans, grounds, cfg)?;
    kinematics(&track, cfg.centre_rates, cfg.stencil)
}

/// Body rates after the update at scan `k` are the mean rates over the
/// interval since scan `k - 1`, in frame `k - 1`: half a scan late. Combining
/// the intervals either side of scan `k` centres them on the scan; with the
/// five-point stencil the two next-outer intervals cancel the curvature
/// error as well. Rates are returned in the first-scan frame.
fn centred_rates(track: &[LoTrackPoint], stencil: Stencil) -> Vec<(Vec3, Vec3)> {
    let n = track.len();
    // Mean rates over the interval ending at scan `j`, in the first-scan frame.
    let interval = |j: usize| {
        let s = &track[j].filtered.state;
        let start = track[j - 1].filtered.state.attitude;
        (start * s.angular_velocity, start * s.linear_velocity)
    };
    let avg = |a: (Vec3, Vec3), b: (Vec3, Vec3)| ((a.0 + b.0) * 0.5, (a.1 + b.1) * 0.5);
    (0..n)
        .map(|k| match k {
            0 => interval(1),
            k if k + 1 == n => interval(k),
            k if stencil == Stencil::FivePoint && k >= 2 && k + 2 < n => {
                let (a, b, c, d) = (interval(k - 1), interval(k), interval(k + 1), interval(k + 2));
                let mix = |o: Vec3, i: Vec3, j: Vec3, p: Vec3| ((i + j) * 7.0 - (o + p)) / 12.0;
                (mix(a.0, b.0, c.0, d.0), mix(a.1, b.1, c.1, d.1))
            }
            k => avg(interval(k), interval(k + 1)),
        })
        .collect()
}

pub fn kinematics(track: &[LoTrackPoint], centre: bool, stencil: Stencil) -> Result<Vec<LidarOdomSample>, LoError> {
    let rates: Vec<(Vec3, Vec3)> = if centre {
        centred_rates(track, stencil)
    } else {
        track
            .iter()
            .map(|t| {
                let s = &t.filtered.state;
                (s.attitude * s.angular_velocity, s.attitude * s.linear_velocity)
            })
            .collect()
    };
    let series = |pick: fn(&(Vec3, Vec3)) -> Vec3| -> Vec<(f64, Vec3)> {
        track.iter().zip(&rates).map(|(t, r)| (t.filtered.timestamp, pick(r))).collect()
    };
    // Rotating the world-frame angular velocity back gives the body-frame
    // derivative too, since the correction term is `ω × ω = 0`.
    let alpha = differentiate_with(&series(|r| r.0), stencil)?;
    let accel = differentiate_with(&series(|r| r.1), stencil)?;
    Ok(track
        .iter()
        .zip(rates.iter().zip(alpha.iter().zip(&accel)))
        .map(|(t, (r, ((_, al), (_, a))))| {
            let s = &t.filtered.state;
            let back = s.attitude.transpose();
            LidarOdomSample {
                timestamp: t.filtered.timestamp,
                attitude: s.attitude,
                position: s.position,
                angular_velocity: back * r.0,
                linear_velocity: back * r.1,
                angular_accel: back * al,
                linear_accel: back * a,
                ground: t.ground,
            }
        })
        .collect())
}
