use std::path::PathBuf;

use groundcal_core::{CalibError, ImuError, LoError, SimError};
use thiserror::Error;

/// Failure to read or write a sensor log. Every variant names its file.
#[derive(Debug, Error)]
pub enum LogError {
    #[error("load: manifest {} not found", path.display())]
    ManifestMissing { path: PathBuf },
    #[error("load: manifest {} is malformed: {source}", path.display())]
    BadManifest { path: PathBuf, source: serde_json::Error },
    #[error("load: {}: line {line}: {detail}", path.display())]
    ColumnMismatch { path: PathBuf, line: usize, detail: String },
    #[error("load: {}: line {line}: cannot parse {field:?} as a number", path.display())]
    BadNumber { path: PathBuf, line: usize, field: String },
    #[error("load: {}: timestamps not strictly increasing at line {line}", path.display())]
    NonMonotoneTimestamps { path: PathBuf, line: usize },
    #[error("load: {}: missing GCPC magic", path.display())]
    BadMagic { path: PathBuf },
    #[error("load: {}: expected {expected} bytes, found {found}", path.display())]
    ShortRead { path: PathBuf, expected: usize, found: usize },
    #[error("load: {}: file name is not scan_<index>_<t_ns>.bin", path.display())]
    BadScanName { path: PathBuf },
    #[error("load: {}: manifest declares {declared} {what}, found {found}", path.display())]
    CountMismatch { path: PathBuf, what: &'static str, declared: usize, found: usize },
    #[error("load: {}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("log io: {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config: {}: {source}", path.display())]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("config: {}: {detail}", path.display())]
    Invalid { path: PathBuf, detail: String },
}

/// Failure of one pipeline stage on the log rooted at `log`.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("lo stage on {}: {source}", log.display())]
    Lo { log: PathBuf, source: LoError },
    #[error("imu stage on {}: {source}", log.display())]
    Imu { log: PathBuf, source: ImuError },
    #[error("{stage} stage on {}: {source}", log.display())]
    Calib { log: PathBuf, stage: &'static str, source: CalibError },
    #[error(
        "sufficiency stage on {}: insufficient excitation (largest singular value {sigma_max:.4} below {threshold})",
        log.display()
    )]
    InsufficientExcitation { log: PathBuf, sigma_max: f64, threshold: f64 },
    #[error("simgen: {0}")]
    Sim(#[from] SimError),
    #[error("output {}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
}
