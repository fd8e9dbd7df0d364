use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("matrix is not a rotation (orthonormality residual {residual:e})")]
    NonOrthonormal { residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GroundError {
    #[error("only {found} ground points found, {required} required")]
    InsufficientGround { found: usize, required: usize },
    #[error("points are collinear or coincident")]
    DegenerateGeometry,
    #[error("ground normal points away from the sensor z-axis (n_z = {cos:.4})")]
    AntiparallelNormal { cos: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LoError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("normal equations are singular")]
    SingularNormalEquations,
    #[error("need at least {required} samples, got {found}")]
    TooFewSamples { found: usize, required: usize },
    #[error("scan {index} has no points")]
    EmptyScan { index: usize },
    #[error("scan timestamps are not strictly increasing at scan {index}")]
    NonMonotoneScans { index: usize },
    #[error("{grounds} ground observations given for {scans} scans")]
    GroundCountMismatch { scans: usize, grounds: usize },
    #[error("ground observation for the first scan failed: {0}")]
    Ground(#[from] GroundError),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ImuError {
    #[error("stream has {found} samples, at least {required} required")]
    StreamTooShort { found: usize, required: usize },
    #[error("sample interval at index {index} deviates {deviation:.1}% from the median")]
    NonUniformRate { index: usize, deviation: f64 },
    #[error("timestamp {t} lies outside the IMU stream [{start}, {end}]")]
    OutOfRangeTimestamp { t: f64, start: f64, end: f64 },
    #[error("series of length {found} too short for cross-correlation (need {required})")]
    SeriesTooShort { found: usize, required: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CalibError {
    #[error("only {found} overlapping frames after the time shift, {required} required")]
    InsufficientOverlap { found: usize, required: usize },
    #[error("frame {index} has no ground observation")]
    MissingGroundObservation { index: usize },
    #[error("normal matrix is rank deficient (condition {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(&'static str),
}
