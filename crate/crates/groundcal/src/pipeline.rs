//! Ground, odometry, IMU, pairing, excitation check, solve.

use std::time::Instant;

use groundcal_core::calib::{
    assemble_dataset, data_sufficiency, evaluate, solve, CalibFrame, CalibState, DatasetParams,
};
use groundcal_core::ground::GroundObservation;
use groundcal_core::imu::{coarse_time_offset, process_imu, ImuProcessed};
use groundcal_core::lo::{observe_ground, run_lo_with_ground, LidarOdomSample};

use crate::config::Config;
use crate::error::PipelineError;
use crate::log::SensorLog;
use crate::report::{RunReport, Timings, REPORT_SCHEMA_VERSION};

/// Everything upstream of the solver.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub grounds: Vec<Option<GroundObservation>>,
    pub lidar: Vec<LidarOdomSample>,
    pub imu: Vec<ImuProcessed>,
    pub frame_offset: i32,
    pub frames: Vec<CalibFrame>,
    pub timings: Timings,
}

impl Prepared {
    pub fn scans_without_ground(&self) -> usize {
        self.grounds.iter().filter(|g| g.is_none()).count()
    }
}

fn lap(clock: &mut Instant) -> f64 {
    let now = Instant::now();
    let dt = now.duration_since(*clock).as_secs_f64();
    *clock = now;
    dt
}

/// Runs every stage before the solver.
pub fn prepare(log: &SensorLog, config: &Config) -> Result<Prepared, PipelineError> {
    let root = || log.root.clone();
    let start = Instant::now();
    let mut clock = start;
    let mut timings = Timings::default();

    let lo_cfg = config.lo_config();
    let grounds = observe_ground(&log.scans, &lo_cfg.ground_seg);
    timings.ground_s = lap(&mut clock);

    let lidar = run_lo_with_ground(&log.scans, &grounds, &lo_cfg).map_err(|source| PipelineError::Lo { log: root(), source })?;
    timings.lo_s = lap(&mut clock);

    let imu_cfg = config.imu_config(log.manifest.imu_rate_hz);
    let stamps = log.lidar_timestamps();
    let imu = process_imu(&log.imu, &stamps, &imu_cfg).map_err(|source| PipelineError::Imu { log: root(), source })?;
    let speed = |v: &[groundcal_core::Vec3]| v.iter().map(|w| w.norm()).collect::<Vec<f64>>();
    let imu_rates: Vec<_> = imu.iter().map(|s| s.angular_velocity).collect();
    let lidar_rates: Vec<_> = lidar.iter().map(|s| s.angular_velocity).collect();
    let frame_offset = coarse_time_offset(&speed(&imu_rates), &speed(&lidar_rates), imu_cfg.max_lag_frames)
        .map_err(|source| PipelineError::Imu { log: root(), source })?;
    timings.imu_s = lap(&mut clock);

    let params = DatasetParams {
        frame_offset,
        imu_height: config.calib.imu_height_m.unwrap_or(log.manifest.imu_height_m),
        gravity: imu_cfg.gravity_mps2,
        gravity_reference: config.gravity_reference(),
    };
    let frames = assemble_dataset(&lidar, &imu, &params).map_err(|source| PipelineError::Calib {
        log: root(),
        stage: "assemble",
        source,
    })?;
    timings.assemble_s = lap(&mut clock);
    timings.total_s = start.elapsed().as_secs_f64();
    Ok(Prepared { grounds, lidar, imu, frame_offset, frames, timings })
}

/// Full calibration of one log. `reference` adds error metrics to the
/// report. Fails with [`PipelineError::InsufficientExcitation`] when the
/// motion cannot determine the rotation.
pub fn run_pipeline(log: &SensorLog, config: &Config, reference: Option<&CalibState>) -> Result<RunReport, PipelineError> {
    let prepared = prepare(log, config)?;
    calibrate_prepared(log, &prepared, config, reference)
}

/// The solver half of [`run_pipeline`], for callers that reuse one
/// odometry run under several solver settings.
pub fn calibrate_prepared(
    log: &SensorLog,
    prepared: &Prepared,
    config: &Config,
    reference: Option<&CalibState>,
) -> Result<RunReport, PipelineError> {
    let start = Instant::now();
    let root = &log.root;
    let cfg = config.calib_config();
    let excitation = data_sufficiency(&prepared.frames, &cfg.initial, cfg.sv_threshold);
    if !excitation.sufficient {
        return Err(PipelineError::InsufficientExcitation {
            log: root.to_path_buf(),
            sigma_max: excitation.sigma_max,
            threshold: cfg.sv_threshold,
        });
    }

    let mut result = solve(&prepared.frames, &cfg).map_err(|source| PipelineError::Calib {
        log: root.to_path_buf(),
        stage: "solve",
        source,
    })?;
    let solve_s = start.elapsed().as_secs_f64();
    result.reference_errors = reference.map(|r| evaluate(&result.estimate, r));

    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        converged: result.converged,
        iterations: result.iterations,
        estimate: (&result.estimate).into(),
        frame_offset: prepared.frame_offset,
        time_offset_s: prepared.frame_offset as f64 / log.manifest.lidar_rate_hz + result.estimate.time_offset,
        rms_w: result.rms_w,
        rms_a: result.rms_a,
        rms_g: result.rms_g,
        frames: prepared.frames.len(),
        scans_without_ground: prepared.scans_without_ground(),
        sigma_max: excitation.sigma_max,
        reference_errors: result.reference_errors.map(Into::into),
        timings: Timings { solve_s, total_s: prepared.timings.total_s + solve_s, ..prepared.timings },
        config: config.clone(),
        history: result.history.iter().map(Into::into).collect(),
    })
}

/// Excitation of a log without solving.
pub fn check_sufficiency(log: &SensorLog, config: &Config) -> Result<groundcal_core::calib::Sufficiency, PipelineError> {
    let prepared = prepare(log, config)?;
    let cfg = config.calib_config();
    Ok(data_sufficiency(&prepared.frames, &cfg.initial, cfg.sv_threshold))
}

/// Height above the first scan's floor with and without the odometry
/// ground constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct ZDrift {
    pub timestamps: Vec<f64>,
    pub with_ground_m: Vec<f64>,
    pub without_ground_m: Vec<f64>,
}

pub fn lo_z_drift(log: &SensorLog, config: &Config) -> Result<ZDrift, PipelineError> {
    let lo_error = |source| PipelineError::Lo { log: log.root.clone(), source };
    let base = config.lo_config();
    let grounds = observe_ground(&log.scans, &base.ground_seg);
    let first = grounds.first().copied().flatten().ok_or_else(|| {
        lo_error(groundcal_core::LoError::Ground(groundcal_core::GroundError::InsufficientGround {
            found: 0,
            required: base.ground_seg.min_ground_points,
        }))
    })?;
    let level = first.ground_to_lidar.transpose();
    let heights = |enable: bool| -> Result<Vec<f64>, PipelineError> {
        let cfg = groundcal_core::lo::LoConfig { enable_ground_residual: enable, ..base };
        let lo = run_lo_with_ground(&log.scans, &grounds, &cfg).map_err(lo_error)?;
        Ok(lo.iter().map(|s| (level * s.position).z).collect())
    };
    Ok(ZDrift {
        timestamps: log.lidar_timestamps(),
        with_ground_m: heights(true)?,
        without_ground_m: heights(false)?,
    })
}
