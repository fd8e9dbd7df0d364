//! Ground observation: segment the floor out of a scan, fit its plane, and
//! derive the ground-to-LiDAR rotation and the LiDAR height.

use alloc::vec::Vec;

use nalgebra::SymmetricEigen;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::GroundError;
use crate::geometry::{Mat3, Rotation, Vec3};

/// Floor used for the adaptive inlier gate so that noise-free scans still
/// reject near-floor wall returns.
const MIN_ADAPTIVE_GATE: f64 = 1e-3;
const MAX_EXTRA_REFITS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudScan {
    pub timestamp: f64,
    pub points: Vec<Vec3>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundSegConfig {
    /// Fraction of lowest-z points used as the initial seed set.
    pub seed_quantile: f64,
    pub inlier_threshold_m: f64,
    pub min_ground_points: usize,
    pub refit_iterations: usize,
    /// Planes tilted further than this from the sensor z-axis are not floor.
    pub max_tilt_deg: f64,
}

impl Default for GroundSegConfig {
    fn default() -> Self {
        Self {
            seed_quantile: 0.2,
            inlier_threshold_m: 0.05,
            min_ground_points: 50,
            refit_iterations: 3,
            max_tilt_deg: 30.0,
        }
    }
}

/// Plane `normal · x + offset = 0`, oriented so the sensor origin is on the
/// positive side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundPlane {
    pub normal: Vec3,
    pub offset: f64,
    pub inlier_count: usize,
    pub rms_residual: f64,
}

impl GroundPlane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundObservation {
    pub plane: GroundPlane,
    /// Maps ground-frame vectors into the LiDAR frame: `normal = R * e3`.
    pub ground_to_lidar: Rotation,
}

impl GroundObservation {
    pub fn normal(&self) -> Vec3 {
        self.plane.normal
    }

    /// LiDAR height above the floor.
    pub fn height(&self) -> f64 {
        self.plane.offset
    }
}

/// PCA plane fit. The normal is the eigenvector of the smallest eigenvalue.
pub fn fit_plane_pca(points: &[Vec3]) -> Result<GroundPlane, GroundError> {
    if points.len() < 3 {
        return Err(GroundError::DegenerateGeometry);
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut cov = Mat3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l_mid, l_max) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(l_max > 0.0) || l_mid <= 1e-9 * l_max {
        return Err(GroundError::DegenerateGeometry);
    }

    let mut normal: Vec3 = eig.eigenvectors.column(order[0]).into_owned();
    normal /= normal.norm();
    let mut offset = -normal.dot(&centroid);
    if offset < 0.0 {
        normal = -normal;
        offset = -offset;
    }
    let sq: f64 = points.iter().map(|p| (normal.dot(p) + offset).powi(2)).sum();
    Ok(GroundPlane {
        normal,
        offset,
        inlier_count: points.len(),
        rms_residual: (sq / n).sqrt(),
    })
}

/// Seeded iterative plane segmentation. Returns the floor points.
pub fn segment_ground(scan: &PointCloudScan, cfg: &GroundSegConfig) -> Result<Vec<Vec3>, GroundError> {
    segment(scan, cfg).map(|(pts, _)| pts)
}

fn segment(scan: &PointCloudScan, cfg: &GroundSegConfig) -> Result<(Vec<Vec3>, GroundPlane), GroundError> {
    let insufficient = |found| GroundError::InsufficientGround {
        found,
        required: cfg.min_ground_points,
    };
    let finite: Vec<Vec3> = scan.points.iter().copied().filter(|p| p.iter().all(|c| c.is_finite())).collect();
    if finite.len() < cfg.min_ground_points.max(3) {
        return Err(insufficient(finite.len()));
    }

    let mut sorted = finite.clone();
    sorted.sort_by(|a, b| a.z.total_cmp(&b.z));
    let n_seed = ((sorted.len() as f64 * cfg.seed_quantile).ceil() as usize).clamp(3, sorted.len());
    let mut plane = fit_plane_pca(&sorted[..n_seed]).map_err(|_| insufficient(0))?;

    let min_cos = cfg.max_tilt_deg.to_radians().cos();
    let mut gate = cfg.inlier_threshold_m;
    let mut inliers: Vec<Vec3> = Vec::new();
    // Near-floor wall returns leave the gate wide for a few rounds, so keep
    // refitting past the configured count until the inlier set settles.
    for round in 0..cfg.refit_iterations.max(1) + MAX_EXTRA_REFITS {
        let before = inliers.len();
        inliers = finite
            .iter()
            .copied()
            .filter(|p| plane.signed_distance(p).abs() < gate)
            .collect();
        if inliers.len() < cfg.min_ground_points {
            return Err(insufficient(inliers.len()));
        }
        if round >= cfg.refit_iterations.max(1) && inliers.len() == before {
            break;
        }
        plane = fit_plane_pca(&inliers).map_err(|_| insufficient(inliers.len()))?;
        gate = (3.0 * plane.rms_residual).clamp(MIN_ADAPTIVE_GATE, cfg.inlier_threshold_m);
    }
    inliers.retain(|p| plane.signed_distance(p).abs() < gate);
    if inliers.len() < cfg.min_ground_points {
        return Err(insufficient(inliers.len()));
    }
    plane = fit_plane_pca(&inliers).map_err(|_| insufficient(inliers.len()))?;

    if plane.normal.z.abs() < min_cos {
        return Err(insufficient(0));
    }
    Ok((inliers, plane))
}

/// Rotation taking the ground frame's `e3` onto `normal`, built from the
/// angle and axis between the two.
pub fn rotation_from_normals(normal: &Vec3) -> Result<Rotation, GroundError> {
    let n = normal / normal.norm();
    let cos = n.z.clamp(-1.0, 1.0);
    if cos < -0.999 {
        return Err(GroundError::AntiparallelNormal { cos });
    }
    let axis = Vec3::z().cross(&n);
    let sin = axis.norm();
    if sin < 1e-15 {
        return Ok(Rotation::identity());
    }
    let angle = sin.atan2(cos);
    Ok(Rotation::exp(&(axis * (angle / sin))))
}

pub fn ground_observation(scan: &PointCloudScan, cfg: &GroundSegConfig) -> Result<GroundObservation, GroundError> {
    let (_, plane) = segment(scan, cfg)?;
    let ground_to_lidar = rotation_from_normals(&plane.normal)?;
    Ok(GroundObservation { plane, ground_to_lidar })
}
