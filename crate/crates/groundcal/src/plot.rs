//! Plain CSV behind the parameter, residual and height plots.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::PipelineError;
use crate::pipeline::ZDrift;
use crate::report::RunReport;

pub const PARAMS_HEADER: &str =
    "iteration,cost,roll_deg,pitch_deg,yaw_deg,tx_m,ty_m,tz_m,fine_time_offset_s,bgx,bgy,bgz,bax,bay,baz";
pub const RESIDUALS_HEADER: &str = "iteration,rms_w,rms_a,rms_g";
pub const Z_DRIFT_HEADER: &str = "t,z_with_ground_m,z_without_ground_m";

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn params_csv(report: &RunReport) -> String {
    let mut out = String::from(PARAMS_HEADER) + "\n";
    for h in &report.history {
        let s = &h.state;
        let row = [h.cost]
            .into_iter()
            .chain(s.rotation_euler_deg)
            .chain(s.translation_m)
            .chain([s.fine_time_offset_s])
            .chain(s.gyro_bias)
            .chain(s.accel_bias);
        out += &format!("{},{}\n", h.iteration, join(row));
    }
    out
}

pub fn residuals_csv(report: &RunReport) -> String {
    let mut out = String::from(RESIDUALS_HEADER) + "\n";
    for h in &report.history {
        out += &format!("{},{}\n", h.iteration, join([h.rms_w, h.rms_a, h.rms_g]));
    }
    out
}

pub fn z_drift_csv(z: &ZDrift) -> String {
    let mut out = String::from(Z_DRIFT_HEADER) + "\n";
    for ((t, a), b) in z.timestamps.iter().zip(&z.with_ground_m).zip(&z.without_ground_m) {
        out += &join([*t, *a, *b]);
        out.push('\n');
    }
    out
}

fn write(path: PathBuf, text: String) -> Result<PathBuf, PipelineError> {
    fs::write(&path, text).map_err(|source| PipelineError::Output { path: path.clone(), source })?;
    Ok(path)
}

/// Writes `params_vs_iter.csv` and `residuals_vs_iter.csv` for a report, and
/// `z_drift.csv` when an odometry comparison ran. Returns the files written.
pub fn emit_plot_data(report: Option<&RunReport>, z: Option<&ZDrift>, out_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(out_dir).map_err(|source| PipelineError::Output { path: out_dir.into(), source })?;
    let mut written = Vec::new();
    if let Some(r) = report {
        written.push(write(out_dir.join("params_vs_iter.csv"), params_csv(r))?);
        written.push(write(out_dir.join("residuals_vs_iter.csv"), residuals_csv(r))?);
    }
    if let Some(z) = z {
        written.push(write(out_dir.join("z_drift.csv"), z_drift_csv(z))?);
    }
    Ok(written)
}
