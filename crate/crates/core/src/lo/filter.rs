//! Error-state propagation and the iterated update.

use alloc::vec::Vec;

use nalgebra::{Cholesky, SMatrix, SVector};

use super::map::{LocalMap, LocalPlane};
use crate::error::LoError;
use crate::geometry::{right_jacobian, right_jacobian_inv, skew, ManifoldState, Mat3, Rotation, Vec12, Vec3};

pub type Mat12 = SMatrix<f64, 12, 12>;
pub type Mat6 = SMatrix<f64, 6, 6>;
pub type Row12 = SMatrix<f64, 1, 12>;
pub type Ground3x12 = SMatrix<f64, 3, 12>;
pub type NoiseJacobian = SMatrix<f64, 12, 6>;

// Error-state layout.
pub const ATT: usize = 0;
pub const POS: usize = 3;
pub const ANG_VEL: usize = 6;
pub const LIN_VEL: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoState {
    pub state: ManifoldState,
    pub covariance: Mat12,
    pub timestamp: f64,
}

/// Covariance of the white angular and linear velocity random walks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessNoise {
    pub q: Mat6,
}

impl ProcessNoise {
    pub fn diagonal(angular: f64, linear: f64) -> Self {
        let mut q = Mat6::zeros();
        for i in 0..3 {
            q[(i, i)] = angular;
            q[(i + 3, i + 3)] = linear;
        }
        Self { q }
    }
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self::diagonal(1e-4, 1e-2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointResidual {
    pub z: f64,
    pub h: Row12,
    pub variance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundResidual {
    pub z: Vec3,
    pub h: Ground3x12,
    pub covariance: Mat3,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasurementBundle {
    pub points: Vec<PointResidual>,
    pub ground: Option<GroundResidual>,
}

/// Constant-velocity motion over `dt`.
pub fn propagate(x: &ManifoldState, dt: f64) -> ManifoldState {
    ManifoldState {
        attitude: x.attitude * Rotation::exp(&(x.angular_velocity * dt)),
        position: x.position + x.attitude * (x.linear_velocity * dt),
        ..*x
    }
}

/// Error-state transition and noise Jacobians at zero error.
pub fn transition_jacobians(x: &ManifoldState, dt: f64) -> (Mat12, NoiseJacobian) {
    let phi = x.angular_velocity * dt;
    let r = x.attitude.matrix();
    let mut f = Mat12::identity();
    f.fixed_view_mut::<3, 3>(ATT, ATT).copy_from(Rotation::exp(&-phi).matrix());
    f.fixed_view_mut::<3, 3>(ATT, ANG_VEL).copy_from(&(right_jacobian(&phi) * dt));
    f.fixed_view_mut::<3, 3>(POS, ATT).copy_from(&(-r * skew(&x.linear_velocity) * dt));
    f.fixed_view_mut::<3, 3>(POS, LIN_VEL).copy_from(&(r * dt));
    let mut fw = NoiseJacobian::zeros();
    fw.fixed_view_mut::<3, 3>(ANG_VEL, 0).copy_from(&(Mat3::identity() * dt));
    fw.fixed_view_mut::<3, 3>(LIN_VEL, 3).copy_from(&(Mat3::identity() * dt));
    (f, fw)
}

pub fn predict(prev: &LoState, dt: f64, noise: &ProcessNoise) -> Result<LoState, LoError> {
    if !(dt > 0.0) {
        return Err(LoError::NonPositiveDt(dt));
    }
    let (f, fw) = transition_jacobians(&prev.state, dt);
    let p = f * prev.covariance * f.transpose() + fw * noise.q * fw.transpose();
    Ok(LoState {
        state: propagate(&prev.state, dt),
        covariance: (p + p.transpose()) * 0.5,
        timestamp: prev.timestamp + dt,
    })
}

/// Signed distance of a body-frame point, placed by the state's pose, to a
/// map plane `normal · x + offset = 0`, with its error-state Jacobian.
pub fn point_residual(x: &ManifoldState, point: &Vec3, normal: &Vec3, offset: f64) -> (f64, Row12) {
    let world = x.attitude * point + x.position;
    let mut h = Row12::zeros();
    h.fixed_view_mut::<1, 3>(0, ATT)
        .copy_from(&(-normal.transpose() * x.attitude.matrix() * skew(point)));
    h.fixed_view_mut::<1, 3>(0, POS).copy_from(&normal.transpose());
    (normal.dot(&world) + offset, h)
}

/// Scan points paired with the map plane nearest to where the state places
/// them. Points without a valid plane are skipped.
pub fn associate(x: &ManifoldState, points: &[Vec3], map: &LocalMap, knn: usize, rms_gate: f64) -> Vec<(Vec3, LocalPlane)> {
    points
        .iter()
        .filter_map(|p| Some((*p, map.plane_near(&(x.attitude * p + x.position), knn, rms_gate)?)))
        .collect()
}

pub fn residuals_for(x: &ManifoldState, pairs: &[(Vec3, LocalPlane)], variance: f64) -> Vec<PointResidual> {
    pairs
        .iter()
        .map(|(p, plane)| {
            let (z, h) = point_residual(x, p, &plane.normal, plane.offset);
            PointResidual { z, h, variance }
        })
        .collect()
}

/// Point-to-plane entries for every scan point whose map neighborhood fits
/// a plane.
pub fn point_to_plane_residuals(
    x: &ManifoldState,
    points: &[Vec3],
    map: &LocalMap,
    knn: usize,
    rms_gate: f64,
    variance: f64,
) -> Vec<PointResidual> {
    residuals_for(x, &associate(x, points, map, knn, rms_gate), variance)
}

/// Floor constraint against the first scan's ground frame: the current
/// scan's floor normal must stay vertical and the sensor must stay at the
/// starting height. `ground_to_first` maps ground-frame vectors into the
/// first LiDAR frame.
pub fn ground_plane_residual(x: &ManifoldState, normal: &Vec3, ground_to_first: &Rotation, covariance: Mat3) -> GroundResidual {
    let a = ground_to_first.transpose();
    let r = x.attitude;
    let tilt = a * (r * normal);
    let p = a * x.position;
    let mut h = Ground3x12::zeros();
    let d_tilt = -(a.matrix() * r.matrix() * skew(normal));
    h.fixed_view_mut::<2, 3>(0, ATT).copy_from(&d_tilt.fixed_rows::<2>(0));
    h.fixed_view_mut::<1, 3>(2, POS).copy_from(&a.matrix().row(2));
    GroundResidual { z: Vec3::new(tilt.x, tilt.y, p.z), h, covariance }
}

/// Convergence controls of the iterated update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self { max_iter: 10, tol: 1e-6 }
    }
}

fn prior_jacobian(d: &Vec12) -> Mat12 {
    let mut j = Mat12::identity();
    let dtheta = d.fixed_rows::<3>(ATT).into_owned();
    j.fixed_view_mut::<3, 3>(ATT, ATT).copy_from(&right_jacobian_inv(&dtheta));
    j
}

/// Iterated MAP update. `measure` relinearizes the measurements at each
/// iterate and is told the iteration number; the returned covariance is the
/// inverse information at the final iterate.
pub fn ieskf_update_with<F>(prior: &LoState, cfg: &UpdateConfig, mut measure: F) -> Result<LoState, LoError>
where
    F: FnMut(&ManifoldState, usize) -> MeasurementBundle,
{
    let prior_info = Cholesky::new(prior.covariance)
        .ok_or(LoError::SingularNormalEquations)?
        .inverse();
    let mut x = prior.state;
    let mut info = prior_info;
    for it in 0..cfg.max_iter.max(1) {
        let bundle = measure(&x, it);
        let d = x.boxminus(&prior.state);
        let j = prior_jacobian(&d);
        info = j.transpose() * prior_info * j;
        let mut rhs: SVector<f64, 12> = j.transpose() * prior_info * d;
        for m in &bundle.points {
            info += m.h.transpose() * m.h / m.variance;
            rhs += m.h.transpose() * (m.z / m.variance);
        }
        if let Some(g) = &bundle.ground {
            let s_inv = Cholesky::new(g.covariance).ok_or(LoError::SingularNormalEquations)?.inverse();
            info += g.h.transpose() * s_inv * g.h;
            rhs += g.h.transpose() * s_inv * g.z;
        }
        let chol = Cholesky::new(info).ok_or(LoError::SingularNormalEquations)?;
        let step = -chol.solve(&rhs);
        if !step.iter().all(|v| v.is_finite()) {
            return Err(LoError::SingularNormalEquations);
        }
        x = x.boxplus(&step);
        if step.norm() < cfg.tol {
            break;
        }
    }
    let p = Cholesky::new(info).ok_or(LoError::SingularNormalEquations)?.inverse();
    Ok(LoState { state: x, covariance: (p + p.transpose()) * 0.5, timestamp: prior.timestamp })
}

/// Update with a fixed bundle linearized at the prior mean. The bundle's
/// residuals are shifted to first order as the iterate moves.
pub fn ieskf_update(prior: &LoState, bundle: &MeasurementBundle, cfg: &UpdateConfig) -> Result<LoState, LoError> {
    ieskf_update_with(prior, cfg, |x, _| {
        let d = x.boxminus(&prior.state);
        MeasurementBundle {
            points: bundle
                .points
                .iter()
                .map(|m| PointResidual { z: m.z + (m.h * d)[0], ..*m })
                .collect(),
            ground: bundle.ground.map(|g| GroundResidual { z: g.z + g.h * d, ..g }),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v3(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
        Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
    }

    fn random_state(rng: &mut ChaCha8Rng) -> ManifoldState {
        ManifoldState {
            attitude: Rotation::exp(&v3(rng, 2.0)),
            position: v3(rng, 5.0),
            angular_velocity: v3(rng, 1.0),
            linear_velocity: v3(rng, 1.0),
        }
    }

    fn state_with_cov(x: ManifoldState, diag: f64) -> LoState {
        LoState { state: x, covariance: Mat12::identity() * diag, timestamp: 0.0 }
    }

    /// Max abs error relative to the largest analytic entry.
    fn rel_err<const R: usize, const C: usize>(a: &SMatrix<f64, R, C>, n: &SMatrix<f64, R, C>) -> f64 {
        (a - n).abs().max() / a.abs().max().max(1e-12)
    }

    fn numeric<const R: usize, const C: usize>(f: impl Fn(&SVector<f64, C>) -> SVector<f64, R>) -> SMatrix<f64, R, C> {
        let h = 1e-6;
        let mut out = SMatrix::<f64, R, C>::zeros();
        for i in 0..C {
            let mut d = SVector::<f64, C>::zeros();
            d[i] = h;
            out.set_column(i, &((f(&d) - f(&-d)) / (2.0 * h)));
        }
        out
    }

    #[test]
    fn straight_motion_advances_position() {
        let x = ManifoldState { linear_velocity: Vec3::x(), ..Default::default() };
        let p = predict(&state_with_cov(x, 1e-3), 0.1, &ProcessNoise::default()).unwrap();
        assert!((p.state.position - Vec3::new(0.1, 0.0, 0.0)).norm() < 1e-15);
        assert!(matches!(predict(&state_with_cov(x, 1e-3), 0.0, &ProcessNoise::default()), Err(LoError::NonPositiveDt(_))));
    }

    #[test]
    fn constant_yaw_rate_integrates() {
        let x = ManifoldState { angular_velocity: Vec3::z(), ..Default::default() };
        let mut s = state_with_cov(x, 1e-3);
        for _ in 0..100 {
            s = predict(&s, 0.01, &ProcessNoise::default()).unwrap();
        }
        assert!((s.state.attitude.log() - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-6);
    }

    #[test]
    fn noiseless_covariance_is_congruence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_state(&mut rng);
        let a = SMatrix::<f64, 12, 12>::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let prev = LoState { state: x, covariance: a * a.transpose(), timestamp: 0.0 };
        let zero = ProcessNoise { q: Mat6::zeros() };
        let p = predict(&prev, 0.1, &zero).unwrap();
        let (f, _) = transition_jacobians(&x, 0.1);
        let dense = f * prev.covariance * f.transpose();
        assert!((p.covariance.trace() - dense.trace()).abs() < 1e-12 * dense.trace().max(1.0));
    }

    #[test]
    fn empty_bundle_keeps_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prior = state_with_cov(random_state(&mut rng), 0.01);
        let post = ieskf_update(&prior, &MeasurementBundle::default(), &UpdateConfig::default()).unwrap();
        assert_eq!(post.state, prior.state);
        assert!((post.covariance - prior.covariance).abs().max() < 1e-15);
    }

    #[test]
    fn ground_update_matches_scalar_kalman() {
        let (p_var, s_var, z0) = (0.04, 0.01, 0.3);
        let x = ManifoldState { position: Vec3::new(0.0, 0.0, z0), ..Default::default() };
        let prior = state_with_cov(x, p_var);
        let g = ground_plane_residual(&x, &Vec3::z(), &Rotation::identity(), Mat3::identity() * s_var);
        assert!((g.z.z - z0).abs() < 1e-15);
        let bundle = MeasurementBundle { points: Vec::new(), ground: Some(g) };
        let post = ieskf_update(&prior, &bundle, &UpdateConfig::default()).unwrap();
        let expect = z0 * (1.0 - p_var / (p_var + s_var));
        assert!((post.state.position.z - expect).abs() < 1e-10);
        let expect_var = p_var * s_var / (p_var + s_var);
        assert!((post.covariance[(POS + 2, POS + 2)] - expect_var).abs() < 1e-10);
    }

    #[test]
    fn level_start_has_zero_ground_residual() {
        let g = ground_plane_residual(&ManifoldState::default(), &Vec3::z(), &Rotation::identity(), Mat3::identity());
        assert_eq!(g.z, Vec3::zeros());
        let raised = ManifoldState { position: Vec3::new(0.3, -0.2, 0.02), ..Default::default() };
        let g = ground_plane_residual(&raised, &Vec3::z(), &Rotation::identity(), Mat3::identity());
        assert!((g.z.z - 0.02).abs() < 1e-15);
    }

    #[test]
    fn point_on_plane_has_zero_residual() {
        let (z, _) = point_residual(&ManifoldState::default(), &Vec3::new(1.0, 2.0, 0.0), &Vec3::z(), 0.0);
        assert_eq!(z, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn transition_jacobians_match_finite_differences(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_state(&mut rng);
            let dt = rng.random_range(0.01..0.2);
            let (f, fw) = transition_jacobians(&x, dt);
            let base = propagate(&x, dt);
            let nf = numeric::<12, 12>(|d| propagate(&x.boxplus(d), dt).boxminus(&base));
            prop_assert!(rel_err(&f, &nf) < 1e-5);
            // Noise enters as a velocity increment of dt times the white term.
            let nw = numeric::<12, 6>(|w| {
                let mut d = Vec12::zeros();
                d.fixed_rows_mut::<3>(ANG_VEL).copy_from(&(w.fixed_rows::<3>(0) * dt));
                d.fixed_rows_mut::<3>(LIN_VEL).copy_from(&(w.fixed_rows::<3>(3) * dt));
                propagate(&x, dt).boxplus(&d).boxminus(&base)
            });
            prop_assert!(rel_err(&fw, &nw) < 1e-5);
        }

        #[test]
        fn measurement_jacobians_match_finite_differences(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_state(&mut rng);
            let p = v3(&mut rng, 10.0);
            let n = v3(&mut rng, 1.0).normalize();
            let off = rng.random_range(-3.0..3.0);
            let (_, h) = point_residual(&x, &p, &n, off);
            let nh = numeric::<1, 12>(|d| SVector::<f64, 1>::new(point_residual(&x.boxplus(d), &p, &n, off).0));
            prop_assert!(rel_err(&h, &nh) < 1e-5);

            let g_rot = Rotation::exp(&v3(&mut rng, 0.3));
            let g = ground_plane_residual(&x, &n, &g_rot, Mat3::identity());
            let ng = numeric::<3, 12>(|d| ground_plane_residual(&x.boxplus(d), &n, &g_rot, Mat3::identity()).z);
            prop_assert!(rel_err(&g.h, &ng) < 1e-5);
        }

        #[test]
        fn covariance_stays_symmetric_psd(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_state(&mut rng);
            let mut s = state_with_cov(x, 1e-2);
            for _ in 0..5 {
                s = predict(&s, 0.1, &ProcessNoise::default()).unwrap();
                let n = v3(&mut rng, 1.0).normalize();
                let g = ground_plane_residual(&s.state, &n, &Rotation::identity(), Mat3::identity() * 1e-4);
                let pts: Vec<PointResidual> = (0..20).map(|_| {
                    let (z, h) = point_residual(&s.state, &v3(&mut rng, 5.0), &v3(&mut rng, 1.0).normalize(), 0.1);
                    PointResidual { z, h, variance: 1e-3 }
                }).collect();
                s = ieskf_update(&s, &MeasurementBundle { points: pts, ground: Some(g) }, &UpdateConfig::default()).unwrap();
                let c = s.covariance;
                prop_assert!((c - c.transpose()).abs().max() < 1e-9);
                let eig = nalgebra::SymmetricEigen::new(c).eigenvalues;
                prop_assert!(eig.min() >= -1e-12);
            }
        }
    }
}
