//! Session directories:
//!
//! ```text
//! poses.txt          one row-major 3×4 transform (12 reals) per scan
//! scans/NNNNNN.bin   per-scan f32 quadruplets x y z intensity (sensor frame)
//! meta.txt           `sensor_id = ..`, `frame_id = ..`, one `timestamp = ..` per scan
//! labels/NNNNNN.label  optional per-point u32 labels
//! gt_poses.txt       optional drift-free poses, same format as poses.txt
//! ```
//!
//! `meta.txt` is optional so that externally produced sequences (binary scans
//! plus a 3×4 pose file) can be read as they are; missing timestamps default
//! to the scan index in seconds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::strip_comment;
use crate::error::{Error, Result};
use crate::io::{read_bytes, read_text, write_atomic};
use crate::model::{Point3, Pose, Scan, Session};

/// Allowed deviation from orthonormality for poses read from disk.
const POSE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SessionData {
    pub session: Session,
    pub sensor_id: String,
    pub labels: Option<Vec<Vec<u32>>>,
    pub gt_poses: Option<Vec<Pose>>,
}

pub fn scan_file_name(index: usize, extension: &str) -> String {
    format!("{index:06}.{extension}")
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn format_poses(poses: &[Pose]) -> String {
    let mut out = String::with_capacity(poses.len() * 200);
    for pose in poses {
        let row: Vec<String> = pose.to_row_major_3x4().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

fn parse_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = read_text(path)?;
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| parse_err(path, n, "expected 12 finite reals"))?;
        let values: [f64; 12] = values
            .try_into()
            .map_err(|v: Vec<f64>| parse_err(path, n, format!("expected 12 reals, got {}", v.len())))?;
        let pose = Pose::from_row_major_3x4(&values);
        if !pose.is_valid(POSE_TOLERANCE) {
            return Err(parse_err(
                path,
                n,
                format!("rotation is not orthonormal (error {:.3e})", pose.orthonormality_error()),
            ));
        }
        poses.push(pose);
    }
    Ok(poses)
}

fn files_with_extension(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == extension) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read_scan_points(path: &Path) -> Result<Vec<Point3>> {
    let bytes = read_bytes(path)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("length {} is not a multiple of 16 (f32 x y z intensity)", bytes.len()),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    for (i, chunk) in bytes.chunks_exact(16).enumerate() {
        let v = |k: usize| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().expect("4 bytes")) as f64;
        let p = Point3::new(v(0), v(1), v(2));
        if !p.iter().all(|c| c.is_finite()) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("point {i} is not finite"),
            });
        }
        points.push(p);
    }
    Ok(points)
}

fn read_labels(path: &Path, expected: usize) -> Result<Vec<u32>> {
    let bytes = read_bytes(path)?;
    if bytes.len() != expected * 4 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected {expected} labels, file holds {} bytes", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect())
}

struct Meta {
    sensor_id: Option<String>,
    frame_id: Option<String>,
    timestamps: Vec<f64>,
}

fn parse_meta(path: &Path) -> Result<Meta> {
    let text = read_text(path)?;
    let mut meta = Meta {
        sensor_id: None,
        frame_id: None,
        timestamps: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = strip_comment(line);
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, n, format!("expected `key = value`, got `{line}`")))?;
        let value = value.trim();
        match key.trim() {
            "sensor_id" => meta.sensor_id = Some(value.to_owned()),
            "frame_id" => meta.frame_id = Some(value.to_owned()),
            "timestamp" => meta.timestamps.push(
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, n, format!("bad timestamp `{value}`")))?,
            ),
            other => return Err(parse_err(path, n, format!("unknown meta key `{other}`"))),
        }
    }
    Ok(meta)
}

fn format_meta(sensor_id: &str, frame_id: &str, scans: &[Scan]) -> String {
    let mut out = format!("sensor_id = {sensor_id}\nframe_id = {frame_id}\n");
    for scan in scans {
        let _ = writeln!(out, "timestamp = {}", scan.timestamp);
    }
    out
}

pub fn read_session(dir: &Path) -> Result<SessionData> {
    let invalid = |message: String| Error::Validation(format!("{}: {message}", dir.display()));
    if !dir.is_dir() {
        return Err(invalid("not a session directory".into()));
    }
    let poses = parse_poses(&dir.join("poses.txt"))?;
    let scan_files = files_with_extension(&dir.join("scans"), "bin")?;
    if scan_files.len() != poses.len() {
        return Err(invalid(format!(
            "{} scan files but {} poses",
            scan_files.len(),
            poses.len()
        )));
    }
    let meta_path = dir.join("meta.txt");
    let meta = if meta_path.exists() {
        parse_meta(&meta_path)?
    } else {
        Meta {
            sensor_id: None,
            frame_id: None,
            timestamps: Vec::new(),
        }
    };
    if !meta.timestamps.is_empty() && meta.timestamps.len() != poses.len() {
        return Err(invalid(format!(
            "meta.txt lists {} timestamps for {} scans",
            meta.timestamps.len(),
            poses.len()
        )));
    }
    let mut scans = Vec::with_capacity(scan_files.len());
    for (i, path) in scan_files.iter().enumerate() {
        let t = meta.timestamps.get(i).copied().unwrap_or(i as f64);
        scans.push(Scan::new(read_scan_points(path)?, t));
    }
    let label_dir = dir.join("labels");
    let labels = if label_dir.is_dir() {
        let mut all = Vec::with_capacity(scans.len());
        for (i, (scan, file)) in scans.iter().zip(&scan_files).enumerate() {
            let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let path = label_dir.join(format!("{stem}.label"));
            if !path.exists() {
                return Err(invalid(format!("labels/ present but scan {i} has no {}", path.display())));
            }
            all.push(read_labels(&path, scan.points.len())?);
        }
        Some(all)
    } else {
        None
    };
    let gt_path = dir.join("gt_poses.txt");
    let gt_poses = if gt_path.exists() {
        let gt = parse_poses(&gt_path)?;
        if gt.len() != scans.len() {
            return Err(invalid(format!("gt_poses.txt has {} poses for {} scans", gt.len(), scans.len())));
        }
        Some(gt)
    } else {
        None
    };
    let default_frame = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "session".into());
    Ok(SessionData {
        session: Session {
            scans,
            poses,
            frame_id: meta.frame_id.unwrap_or(default_frame),
        },
        sensor_id: meta.sensor_id.unwrap_or_else(|| "unknown".into()),
        labels,
        gt_poses,
    })
}

/// Writes every file of the layout; each file is replaced atomically.
pub fn write_session(dir: &Path, data: &SessionData) -> Result<()> {
    let session = &data.session;
    let scans_dir = dir.join("scans");
    std::fs::create_dir_all(&scans_dir).map_err(|e| Error::io(&scans_dir, e))?;
    write_atomic(&dir.join("poses.txt"), format_poses(&session.poses).as_bytes())?;
    write_atomic(
        &dir.join("meta.txt"),
        format_meta(&data.sensor_id, &session.frame_id, &session.scans).as_bytes(),
    )?;
    for (i, scan) in session.scans.iter().enumerate() {
        let mut bytes = Vec::with_capacity(scan.points.len() * 16);
        for p in &scan.points {
            for v in [p.x as f32, p.y as f32, p.z as f32, 0.0] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        write_atomic(&scans_dir.join(scan_file_name(i, "bin")), &bytes)?;
    }
    if let Some(labels) = &data.labels {
        let label_dir = dir.join("labels");
        std::fs::create_dir_all(&label_dir).map_err(|e| Error::io(&label_dir, e))?;
        for (i, l) in labels.iter().enumerate() {
            let bytes: Vec<u8> = l.iter().flat_map(|v| v.to_le_bytes()).collect();
            write_atomic(&label_dir.join(scan_file_name(i, "label")), &bytes)?;
        }
    }
    if let Some(gt) = &data.gt_poses {
        write_atomic(&dir.join("gt_poses.txt"), format_poses(gt).as_bytes())?;
    }
    Ok(())
}
