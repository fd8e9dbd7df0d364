//! SO(3) primitives and the 12-D odometry state manifold.
//!
//! Rotations are stored as matrices throughout. Frame naming follows one rule:
//! a rotation called `a_to_b` maps coordinates expressed in frame `a` into
//! frame `b`, i.e. `x_b = a_to_b * x_a`.

use core::f64::consts::PI;
use core::ops::Mul;

use nalgebra::{Matrix3, SVector, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::GeometryError;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
/// Error-state vector of [`ManifoldState`]: `[dθ, dp, dω, dv]`.
pub type Vec12 = SVector<f64, 12>;

/// Below this angle `exp`/`log` switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;
/// Orthonormality residual accepted by validating constructors.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// `[v]_x`, the matrix with `skew(v) * w == v.cross(w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the antisymmetric part of `m`.
pub fn vee(m: &Mat3) -> Vec3 {
    0.5 * Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// A proper rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Validates `R Rᵀ = I` and `det R = 1` to [`ORTHONORMAL_TOL`].
    pub fn from_matrix(m: Mat3) -> Result<Self, GeometryError> {
        let residual = orthonormality_residual(&m);
        if !residual.is_finite() || residual > ORTHONORMAL_TOL {
            return Err(GeometryError::NonOrthonormal { residual });
        }
        Ok(Rotation(m))
    }

    /// Nearest rotation (in Frobenius norm) to an arbitrary matrix.
    pub fn from_matrix_projected(m: Mat3) -> Result<Self, GeometryError> {
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(GeometryError::NonOrthonormal { residual: f64::NAN }),
        };
        let mut d = Mat3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Self::from_matrix(u * d * v_t)
    }

    /// Rodrigues' formula.
    pub fn exp(phi: &Vec3) -> Self {
        let theta2 = phi.norm_squared();
        let theta = theta2.sqrt();
        let k = skew(phi);
        let k2 = k * k;
        let (a, b) = if theta < SMALL_ANGLE {
            (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
        } else {
            (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
        };
        Rotation(Mat3::identity() + k * a + k2 * b)
    }

    /// Principal axis-angle, norm in `[0, π]`.
    pub fn log(&self) -> Vec3 {
        log_unchecked(&self.0)
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::exp(&Vec3::new(angle, 0.0, 0.0))
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::exp(&Vec3::new(0.0, angle, 0.0))
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::exp(&Vec3::new(0.0, 0.0, angle))
    }

    /// Intrinsic Z-Y-X (yaw, pitch, roll) composition `Rz(yaw) Ry(pitch) Rx(roll)`.
    /// `angles_deg` is ordered `(roll, pitch, yaw)`.
    pub fn from_euler_deg(angles_deg: &Vec3) -> Self {
        let r = angles_deg.map(f64::to_radians);
        Self::rot_z(r.z) * Self::rot_y(r.y) * Self::rot_x(r.x)
    }

    /// Inverse of [`Rotation::from_euler_deg`]; pitch lands in `[-90°, 90°]`.
    pub fn to_euler_deg(&self) -> Vec3 {
        let m = &self.0;
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        Vec3::new(roll, pitch, yaw).map(f64::to_degrees)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Geodesic distance in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        (self.transpose() * *other).log().norm()
    }

    /// Re-projects onto SO(3) to shed accumulated round-off.
    pub fn renormalized(&self) -> Self {
        Self::from_matrix_projected(self.0).unwrap_or(*self)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

pub fn orthonormality_residual(m: &Mat3) -> f64 {
    let ortho = (m * m.transpose() - Mat3::identity()).abs().max();
    ortho.max((m.determinant() - 1.0).abs())
}

/// `log` for a raw matrix; rejects non-orthonormal input.
pub fn log_so3(m: &Mat3) -> Result<Vec3, GeometryError> {
    Rotation::from_matrix(*m).map(|r| r.log())
}

fn log_unchecked(m: &Mat3) -> Vec3 {
    let w = vee(m);
    let sin_theta = w.norm();
    let cos_theta = 0.5 * (m.trace() - 1.0);
    let theta = sin_theta.atan2(cos_theta);

    if theta < SMALL_ANGLE {
        // θ/sinθ ≈ 1 + θ²/6
        return w * (1.0 + theta * theta / 6.0);
    }
    if PI - theta > 1e-4 {
        return w * (theta / sin_theta);
    }

    // Near π the antisymmetric part vanishes; recover the axis from the
    // symmetric part and take its sign from whatever of `w` is left.
    let s = (m + m.transpose()) * 0.5 - Mat3::identity() * cos_theta;
    let one_minus_cos = 1.0 - cos_theta;
    let (mut best, mut col) = (s[(0, 0)], 0);
    for i in 1..3 {
        if s[(i, i)] > best {
            best = s[(i, i)];
            col = i;
        }
    }
    let mut axis = s.column(col).into_owned() / (best * one_minus_cos).sqrt();
    axis /= axis.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Right Jacobian of SO(3): `exp(φ + δ) ≈ exp(φ) exp(J_r(φ) δ)`.
pub fn right_jacobian(phi: &Vec3) -> Mat3 {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(phi);
    let (a, b) = if theta < 1e-5 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        ((1.0 - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    Mat3::identity() - k * a + k * k * b
}

/// Inverse of [`right_jacobian`].
pub fn right_jacobian_inv(phi: &Vec3) -> Mat3 {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(phi);
    let c = if theta < 1e-5 {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Mat3::identity() + k * 0.5 + k * k * c
}

/// LiDAR odometry state: pose of the current LiDAR frame in the first LiDAR
/// frame, plus body-frame angular and linear velocity.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ManifoldState {
    /// Current LiDAR frame to first LiDAR frame.
    pub attitude: Rotation,
    /// Position in the first LiDAR frame, m.
    pub position: Vec3,
    /// Body-frame angular velocity, rad/s.
    pub angular_velocity: Vec3,
    /// Body-frame linear velocity, m/s.
    pub linear_velocity: Vec3,
}

impl ManifoldState {
    pub fn boxplus(&self, delta: &Vec12) -> ManifoldState {
        let dtheta = delta.fixed_rows::<3>(0).into_owned();
        ManifoldState {
            attitude: self.attitude * Rotation::exp(&dtheta),
            position: self.position + delta.fixed_rows::<3>(3),
            angular_velocity: self.angular_velocity + delta.fixed_rows::<3>(6),
            linear_velocity: self.linear_velocity + delta.fixed_rows::<3>(9),
        }
    }

    /// `self ⊟ other`, the tangent vector at `other` reaching `self`.
    pub fn boxminus(&self, other: &ManifoldState) -> Vec12 {
        let mut out = Vec12::zeros();
        out.fixed_rows_mut::<3>(0)
            .copy_from(&(other.attitude.transpose() * self.attitude).log());
        out.fixed_rows_mut::<3>(3)
            .copy_from(&(self.position - other.position));
        out.fixed_rows_mut::<3>(6)
            .copy_from(&(self.angular_velocity - other.angular_velocity));
        out.fixed_rows_mut::<3>(9)
            .copy_from(&(self.linear_velocity - other.linear_velocity));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    #[test]
    fn skew_basis_and_zero() {
        assert_eq!(skew(&Vec3::zeros()), Mat3::zeros());
        let s = skew(&Vec3::x());
        assert_eq!(s, Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn exp_axis_aligned() {
        assert_eq!(*Rotation::exp(&Vec3::zeros()).matrix(), Mat3::identity());
        let r = Rotation::exp(&Vec3::new(0.0, 0.0, PI / 2.0));
        assert_relative_eq!(r * Vec3::x(), Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn log_fixed_points() {
        assert_eq!(Rotation::identity().log(), Vec3::zeros());
        let phi = Vec3::new(0.1, -0.2, 0.3);
        assert_relative_eq!(Rotation::exp(&phi).log(), phi, epsilon = 1e-9);
        let half_turn = Rotation::exp(&Vec3::new(0.0, 0.0, PI));
        assert!((half_turn.log().norm() - PI).abs() < 1e-6);
        let tilted = Rotation::exp(&(Vec3::new(1.0, 2.0, -0.5).normalize() * (PI - 1e-7)));
        assert!((tilted.log().norm() - (PI - 1e-7)).abs() < 1e-6);
    }

    #[test]
    fn log_rejects_non_orthonormal() {
        let mut m = Mat3::identity();
        m[(0, 1)] = 1e-3;
        assert!(matches!(log_so3(&m), Err(GeometryError::NonOrthonormal { .. })));
        assert!(Rotation::from_matrix(m * 2.0).is_err());
        assert!(log_so3(&Mat3::identity()).is_ok());
    }

    #[test]
    fn small_angle_branch() {
        let phi = Vec3::new(3e-9, -1e-9, 2e-9);
        let r = Rotation::exp(&phi);
        assert_relative_eq!(r.log(), phi, epsilon = 1e-20);
        assert!(orthonormality_residual(r.matrix()) < 1e-15);
    }

    #[test]
    fn euler_conventions() {
        assert_eq!(*Rotation::from_euler_deg(&Vec3::zeros()).matrix(), Mat3::identity());
        let yaw = Rotation::from_euler_deg(&Vec3::new(0.0, 0.0, 90.0));
        assert_relative_eq!(yaw * Vec3::x(), Vec3::y(), epsilon = 1e-15);
        // (-5, -5, 5) deg combines to an 8.53 deg geodesic offset.
        let offset = Rotation::from_euler_deg(&Vec3::new(-5.0, -5.0, 5.0));
        let angle = offset.log().norm().to_degrees();
        assert!((angle - 8.530578).abs() < 1e-5, "{angle}");
    }

    #[test]
    fn jacobian_inverse_pair() {
        let phi = Vec3::new(0.4, -0.7, 1.1);
        let prod = right_jacobian(&phi) * right_jacobian_inv(&phi);
        assert_relative_eq!(prod, Mat3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn right_jacobian_first_order() {
        let phi = Vec3::new(0.3, 0.2, -0.9);
        let d = Vec3::new(1e-6, -2e-6, 1.5e-6);
        let lhs = Rotation::exp(&(phi + d));
        let rhs = Rotation::exp(&phi) * Rotation::exp(&(right_jacobian(&phi) * d));
        assert!(lhs.angle_to(&rhs) < 1e-11);
    }

    #[test]
    fn projection_recovers_rotation() {
        let r = Rotation::exp(&Vec3::new(0.2, 0.5, -0.1));
        let noisy = r.matrix() + Mat3::from_element(1e-4);
        let p = Rotation::from_matrix_projected(noisy).unwrap();
        assert!(p.angle_to(&r) < 1e-3);
        assert!(orthonormality_residual(p.matrix()) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn skew_is_cross(v in vec3(), w in vec3()) {
            let s = skew(&v);
            prop_assert!((s * w - v.cross(&w)).norm() < 1e-15);
            prop_assert_eq!(s.transpose(), -s);
        }

        #[test]
        fn exp_log_round_trip(dir in vec3(), frac in 0.0..1.0f64) {
            prop_assume!(dir.norm() > 1e-3);
            let phi = dir.normalize() * frac * (PI - 1e-3);
            let back = Rotation::exp(&phi).log();
            prop_assert!((back - phi).norm() < 1e-9);
        }

        #[test]
        fn boxplus_boxminus_inverse(
            att in vec3(), p in vec3(), w in vec3(), v in vec3(),
            d in proptest::collection::vec(-1.0..1.0f64, 12),
        ) {
            let x = ManifoldState {
                attitude: Rotation::exp(&(att * 2.0)),
                position: p * 10.0,
                angular_velocity: w,
                linear_velocity: v * 3.0,
            };
            let delta = Vec12::from_column_slice(&d);
            let back = x.boxplus(&delta).boxminus(&x);
            prop_assert!((back - delta).norm() < 1e-9);
            prop_assert!(x.boxminus(&x).norm() == 0.0);
            prop_assert_eq!(x.boxplus(&Vec12::zeros()), x);
        }

        #[test]
        fn euler_round_trip(roll in -179.0..179.0f64, pitch in -85.0..85.0f64, yaw in -179.0..179.0f64) {
            let a = Vec3::new(roll, pitch, yaw);
            let back = Rotation::from_euler_deg(&a).to_euler_deg();
            prop_assert!((back - a).norm() < 1e-9);
        }
    }
}
