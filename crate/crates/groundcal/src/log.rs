//! On-disk sensor log: `manifest.json`, an IMU CSV and one binary file per
//! scan.
//!
//! ```text
//! <root>/manifest.json
//! <root>/imu.csv              t,gx,gy,gz,ax,ay,az   (s, rad/s, m/s²)
//! <root>/scans/scan_<index>_<t_ns>.bin
//! ```
//!
//! A scan file is the magic `GCPC`, a little-endian `u32` point count, then
//! that many `f32` `x, y, z` triples in the LiDAR frame.

use std::fs;
use std::path::{Path, PathBuf};

use groundcal_core::ground::PointCloudScan;
use groundcal_core::imu::ImuSample;
use groundcal_core::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::LogError;

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
pub const IMU_COLUMNS: [&str; 7] = ["t", "gx", "gy", "gz", "ax", "ay", "az"];
pub const SCAN_MAGIC: &[u8; 4] = b"GCPC";
const SCAN_HEADER: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub imu_rate_hz: f64,
    pub lidar_rate_hz: f64,
    pub imu_frame: String,
    pub lidar_frame: String,
    /// Prior height of the IMU above the floor, m.
    pub imu_height_m: f64,
    pub imu_file: String,
    pub scan_dir: String,
    pub imu_count: usize,
    pub scan_count: usize,
}

impl Manifest {
    pub fn new(imu_rate_hz: f64, lidar_rate_hz: f64, imu_height_m: f64) -> Self {
        Self {
            schema_version: MANIFEST_VERSION,
            imu_rate_hz,
            lidar_rate_hz,
            imu_frame: "imu".into(),
            lidar_frame: "lidar".into(),
            imu_height_m,
            imu_file: "imu.csv".into(),
            scan_dir: "scans".into(),
            imu_count: 0,
            scan_count: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorLog {
    /// Directory the log was read from; names the log in error messages.
    pub root: PathBuf,
    pub manifest: Manifest,
    pub imu: Vec<ImuSample>,
    pub scans: Vec<PointCloudScan>,
}

impl SensorLog {
    pub fn lidar_timestamps(&self) -> Vec<f64> {
        self.scans.iter().map(|s| s.timestamp).collect()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LogError + '_ {
    move |source| LogError::Io { path: path.to_path_buf(), source }
}

pub fn scan_file_name(index: usize, timestamp: f64) -> String {
    format!("scan_{index:06}_{}.bin", seconds_to_ns(timestamp))
}

fn seconds_to_ns(t: f64) -> i64 {
    (t * 1e9).round() as i64
}

fn parse_scan_name(path: &Path) -> Option<(usize, i64)> {
    let stem = path.file_name()?.to_str()?.strip_prefix("scan_")?.strip_suffix(".bin")?;
    let (index, ns) = stem.split_once('_')?;
    Some((index.parse().ok()?, ns.parse().ok()?))
}

pub fn encode_scan(points: &[Vec3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(SCAN_HEADER + 12 * points.len());
    out.extend_from_slice(SCAN_MAGIC);
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_scan(path: &Path, bytes: &[u8]) -> Result<Vec<Vec3>, LogError> {
    if bytes.len() < 4 || &bytes[..4] != SCAN_MAGIC {
        return Err(LogError::BadMagic { path: path.to_path_buf() });
    }
    if bytes.len() < SCAN_HEADER {
        return Err(LogError::ShortRead { path: path.to_path_buf(), expected: SCAN_HEADER, found: bytes.len() });
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap_or_default()) as usize;
    let expected = SCAN_HEADER + 12 * count;
    if bytes.len() != expected {
        return Err(LogError::ShortRead { path: path.to_path_buf(), expected, found: bytes.len() });
    }
    let f = |i: usize| f32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]) as f64;
    Ok((0..count)
        .map(|k| {
            let at = SCAN_HEADER + 12 * k;
            Vec3::new(f(at), f(at + 4), f(at + 8))
        })
        .collect())
}

/// Writes `log` under `root`, creating directories as needed. The manifest's
/// counts are filled in from the streams.
pub fn write_sensor_log(root: &Path, manifest: &Manifest, imu: &[ImuSample], scans: &[PointCloudScan]) -> Result<(), LogError> {
    let manifest = Manifest { imu_count: imu.len(), scan_count: scans.len(), ..manifest.clone() };
    let scan_dir = root.join(&manifest.scan_dir);
    fs::create_dir_all(&scan_dir).map_err(io_err(&scan_dir))?;

    let manifest_path = root.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|source| LogError::BadManifest {
        path: manifest_path.clone(),
        source,
    })?;
    fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;

    let imu_path = root.join(&manifest.imu_file);
    let csv_err = |source| LogError::Csv { path: imu_path.clone(), source };
    let file = fs::File::create(&imu_path).map_err(io_err(&imu_path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(IMU_COLUMNS).map_err(csv_err)?;
    for s in imu {
        let row = [s.timestamp, s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z];
        // 17 significant digits round-trip every f64.
        w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&imu_path))?;

    for (i, scan) in scans.iter().enumerate() {
        let path = scan_dir.join(scan_file_name(i, scan.timestamp));
        fs::write(&path, encode_scan(&scan.points)).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn load_sensor_log(root: &Path) -> Result<SensorLog, LogError> {
    let manifest_path = root.join(MANIFEST);
    let text = match fs::read_to_string(&manifest_path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(LogError::ManifestMissing { path: manifest_path })
        }
        Err(e) => return Err(io_err(&manifest_path)(e)),
    };
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|source| LogError::BadManifest { path: manifest_path.clone(), source })?;

    let imu_path = root.join(&manifest.imu_file);
    let imu = read_imu_csv(&imu_path)?;
    if imu.len() != manifest.imu_count {
        return Err(LogError::CountMismatch {
            path: imu_path,
            what: "IMU samples",
            declared: manifest.imu_count,
            found: imu.len(),
        });
    }

    let scan_dir = root.join(&manifest.scan_dir);
    let scans = read_scans(&scan_dir)?;
    if scans.len() != manifest.scan_count {
        return Err(LogError::CountMismatch {
            path: scan_dir,
            what: "scans",
            declared: manifest.scan_count,
            found: scans.len(),
        });
    }
    Ok(SensorLog { root: root.to_path_buf(), manifest, imu, scans })
}

pub fn read_imu_csv(path: &Path) -> Result<Vec<ImuSample>, LogError> {
    let csv_err = |source| LogError::Csv { path: path.to_path_buf(), source };
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);
    let mut out: Vec<ImuSample> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = i + 1;
        if record.len() != IMU_COLUMNS.len() {
            return Err(LogError::ColumnMismatch {
                path: path.to_path_buf(),
                line,
                detail: format!("expected {} columns, found {}", IMU_COLUMNS.len(), record.len()),
            });
        }
        if i == 0 {
            if record.iter().map(str::trim).ne(IMU_COLUMNS) {
                return Err(LogError::ColumnMismatch {
                    path: path.to_path_buf(),
                    line,
                    detail: format!("header must be {}", IMU_COLUMNS.join(",")),
                });
            }
            continue;
        }
        let mut v = [0.0; 7];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field.trim().parse().map_err(|_| LogError::BadNumber {
                path: path.to_path_buf(),
                line,
                field: field.to_string(),
            })?;
        }
        if out.last().is_some_and(|prev| !(v[0] > prev.timestamp)) {
            return Err(LogError::NonMonotoneTimestamps { path: path.to_path_buf(), line });
        }
        out.push(ImuSample { timestamp: v[0], gyro: Vec3::new(v[1], v[2], v[3]), accel: Vec3::new(v[4], v[5], v[6]) });
    }
    Ok(out)
}

fn read_scans(dir: &Path) -> Result<Vec<PointCloudScan>, LogError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "bin") {
            let (index, ns) = parse_scan_name(&path).ok_or_else(|| LogError::BadScanName { path: path.clone() })?;
            files.push((index, ns, path));
        }
    }
    files.sort();
    let mut scans: Vec<PointCloudScan> = Vec::with_capacity(files.len());
    for (k, (index, ns, path)) in files.into_iter().enumerate() {
        if index != k {
            return Err(LogError::BadScanName { path });
        }
        let timestamp = ns as f64 / 1e9;
        if scans.last().is_some_and(|prev| !(timestamp > prev.timestamp)) {
            return Err(LogError::NonMonotoneTimestamps { path, line: index });
        }
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let points = decode_scan(&path, &bytes)?;
        scans.push(PointCloudScan { timestamp, points });
    }
    Ok(scans)
}
