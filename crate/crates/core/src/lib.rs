//! Targetless IMU-LiDAR extrinsic calibration for ground robots in planar
//! motion.
//!
//! The crate is `no_std` (with `alloc`) and contains only numerics: ground
//! plane extraction, LiDAR odometry, IMU conditioning, the calibration solver
//! and a planar-motion simulator. File formats and the CLI live in the
//! `groundcal` crate.
#![no_std]
// `!(x > 0.0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod calib;
pub mod error;
pub mod geometry;
pub mod ground;
pub mod imu;
pub mod lo;
pub mod sim;

pub use error::{CalibError, GeometryError, GroundError, ImuError, LoError, SimError};
pub use geometry::{ManifoldState, Mat3, Rotation, Vec3};
