use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use groundcal::simgen::{write_simulated_log, ScenarioFile};
use groundcal::{
    check_sufficiency, emit_plot_data, exit_code, lo_z_drift, load_sensor_log, run_pipeline, Config, PipelineError,
    ReferenceFile, EXIT_NOT_CONVERGED,
};

#[derive(Parser)]
#[command(name = "groundcal", version, about = "IMU-LiDAR extrinsic calibration for ground robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate a sensor log and write report.json and plot data.
    Calibrate {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Known extrinsics; adds error metrics to the report.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Write a simulated sensor log and its reference extrinsics.
    Simgen {
        #[arg(long)]
        out: PathBuf,
        /// Scenario file (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Odometry with and without the ground constraint; writes z_drift.csv.
    LoOnly {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check whether a log has enough rotation to calibrate.
    Sufficiency {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn config(path: Option<&Path>) -> Result<Config, PipelineError> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

fn run(cli: Cli) -> Result<u8, PipelineError> {
    match cli.command {
        Command::Calibrate { log, config: cfg, out, reference } => {
            let cfg = config(cfg.as_deref())?;
            let reference = reference.as_deref().map(ReferenceFile::load).transpose()?;
            let log = load_sensor_log(&log)?;
            let report = run_pipeline(&log, &cfg, reference.as_ref())?;
            std::fs::create_dir_all(&out).map_err(|source| PipelineError::Output { path: out.clone(), source })?;
            let path = out.join("report.json");
            std::fs::write(&path, report.to_json() + "\n").map_err(|source| PipelineError::Output { path: path.clone(), source })?;
            emit_plot_data(Some(&report), None, &out)?;
            let e = &report.estimate;
            println!("rotation (roll, pitch, yaw) deg: {:?}", e.rotation_euler_deg);
            println!("translation m: {:?}", e.translation_m);
            println!("time offset s: {}", report.time_offset_s);
            if let Some(err) = report.reference_errors {
                println!("error vs reference: {:.4} deg, {:.4} m", err.rot_rmse_deg, err.trans_rmse_m);
            }
            println!("report: {}", path.display());
            if report.converged {
                Ok(0)
            } else {
                eprintln!("solver stopped after {} iterations without converging", report.iterations);
                Ok(EXIT_NOT_CONVERGED)
            }
        }
        Command::Simgen { out, config: scenario, seed } => {
            let mut file = match scenario {
                Some(p) => ScenarioFile::load(&p)?,
                None => ScenarioFile::default(),
            };
            if seed.is_some() {
                file.seed = seed;
            }
            write_simulated_log(&file.scenario(), &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::LoOnly { log, config: cfg, out } => {
            let cfg = config(cfg.as_deref())?;
            let log = load_sensor_log(&log)?;
            let z = lo_z_drift(&log, &cfg)?;
            emit_plot_data(None, Some(&z), &out)?;
            let last = |v: &[f64]| v.last().copied().unwrap_or(0.0);
            println!(
                "final height change: {:.6} m with ground constraint, {:.6} m without",
                last(&z.with_ground_m),
                last(&z.without_ground_m)
            );
            Ok(0)
        }
        Command::Sufficiency { log, config: cfg } => {
            let cfg = config(cfg.as_deref())?;
            let log = load_sensor_log(&log)?;
            let s = check_sufficiency(&log, &cfg)?;
            println!("largest singular value {:.4} (threshold {})", s.sigma_max, cfg.calib.sv_threshold);
            Ok(if s.sufficient { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
