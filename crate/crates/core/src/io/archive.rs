//! Binary map archive and the coverage/anchor sidecars that make it a
//! complete [`LifelongMap`].
//!
//! Archive layout (little-endian): magic `LFMAPARC`, `u32` version, `u64`
//! point count, `u64` config hash, `u32` lineage length followed by
//! length-prefixed UTF-8 session ids, then `count × [x, y, z, eps_l, eps_g]`
//! as `f32`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::text::{format_coverage, parse_coverage};
use crate::io::{put_string, read_bytes, read_text, Reader, Staged};
use crate::model::{clamp_finite, AttributedPoint, AttributedPointCloud, Point3, Pose, Scan, EPS_MAX, EPS_MIN};
use crate::pipeline::LifelongMap;

pub const ARCHIVE_MAGIC: &[u8; 8] = b"LFMAPARC";
pub const ARCHIVE_VERSION: u32 = 1;
pub const ANCHORS_MAGIC: &[u8; 8] = b"LFANCHOR";
const ANCHORS_VERSION: u32 = 1;

/// Frame id given to every map read back from disk.
pub const MAP_FRAME: &str = "map";

#[derive(Clone, Debug, PartialEq)]
pub struct MapArchive {
    pub map: AttributedPointCloud,
    pub lineage: Vec<String>,
    pub config_hash: u64,
}

pub fn encode_archive(archive: &MapArchive) -> Vec<u8> {
    let points = &archive.map.points;
    let mut out = Vec::with_capacity(64 + points.len() * 20);
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    out.extend_from_slice(&(points.len() as u64).to_le_bytes());
    out.extend_from_slice(&archive.config_hash.to_le_bytes());
    out.extend_from_slice(&(archive.lineage.len() as u32).to_le_bytes());
    for id in &archive.lineage {
        put_string(&mut out, id);
    }
    for p in points {
        for v in [p.position.x, p.position.y, p.position.z, p.eps_l, p.eps_g] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn eph_from_f32(v: f32) -> Option<f64> {
    // Compare in f32 so the stored form of 0.01 and 0.99 is accepted, then snap
    // the widened value back into the exact clamp range.
    (v >= EPS_MIN as f32 && v <= EPS_MAX as f32).then(|| clamp_finite(v as f64))
}

pub fn decode_archive(bytes: &[u8], path: &Path) -> Result<MapArchive> {
    let mut r = Reader::new(bytes, path);
    if r.take(8, "magic")? != ARCHIVE_MAGIC {
        return Err(r.error("not a map archive (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != ARCHIVE_VERSION {
        return Err(r.error(format!("unsupported archive version {version}")));
    }
    let count = r.u64("point count")?;
    let config_hash = r.u64("config hash")?;
    let lineage_len = r.u32("lineage length")?;
    let mut lineage = Vec::new();
    for _ in 0..lineage_len {
        lineage.push(r.string("session id")?);
    }
    let expected = count.checked_mul(20).filter(|&n| n == r.remaining() as u64);
    if expected.is_none() {
        return Err(r.error(format!(
            "declared {count} points but payload holds {} bytes",
            r.remaining()
        )));
    }
    let mut points = Vec::with_capacity(count as usize);
    for i in 0..count {
        let mut v = [0f32; 5];
        for slot in &mut v {
            *slot = r.f32("point")?;
        }
        if !v[..3].iter().all(|c| c.is_finite()) {
            return Err(r.error(format!("point {i} has a non-finite coordinate")));
        }
        let (Some(eps_l), Some(eps_g)) = (eph_from_f32(v[3]), eph_from_f32(v[4])) else {
            return Err(r.error(format!("point {i} has ephemerality outside [{EPS_MIN}, {EPS_MAX}]")));
        };
        let position = Point3::new(v[0] as f64, v[1] as f64, v[2] as f64);
        points.push(AttributedPoint::new(position, eps_l, eps_g));
    }
    Ok(MapArchive {
        map: AttributedPointCloud::new(points, MAP_FRAME),
        lineage,
        config_hash,
    })
}

pub fn read_archive(path: &Path) -> Result<MapArchive> {
    decode_archive(&read_bytes(path)?, path)
}

pub fn encode_anchors(anchors: &[(Scan, Pose)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(ANCHORS_MAGIC);
    out.extend_from_slice(&ANCHORS_VERSION.to_le_bytes());
    out.extend_from_slice(&(anchors.len() as u32).to_le_bytes());
    for (scan, pose) in anchors {
        for v in pose.to_row_major_3x4() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&scan.timestamp.to_le_bytes());
        for v in scan.sensor_origin.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(scan.points.len() as u32).to_le_bytes());
        for p in &scan.points {
            for v in p.iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_anchors(bytes: &[u8], path: &Path) -> Result<Vec<(Scan, Pose)>> {
    let mut r = Reader::new(bytes, path);
    if r.take(8, "magic")? != ANCHORS_MAGIC {
        return Err(r.error("not an anchor file (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != ANCHORS_VERSION {
        return Err(r.error(format!("unsupported anchor version {version}")));
    }
    let n = r.u32("scan count")?;
    let mut anchors = Vec::new();
    for s in 0..n {
        let mut m = [0f64; 12];
        for slot in &mut m {
            *slot = r.f64("pose")?;
        }
        let pose = Pose::from_row_major_3x4(&m);
        if !pose.is_valid(1e-6) {
            return Err(r.error(format!("anchor {s} pose is not a rigid transform")));
        }
        let timestamp = r.f64("timestamp")?;
        let origin = Point3::new(r.f64("origin")?, r.f64("origin")?, r.f64("origin")?);
        let count = r.u32("point count")? as usize;
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            let p = Point3::new(r.f32("point")? as f64, r.f32("point")? as f64, r.f32("point")? as f64);
            points.push(p);
        }
        let mut scan = Scan::new(points, timestamp);
        scan.sensor_origin = origin;
        anchors.push((scan, pose));
    }
    if r.remaining() != 0 {
        return Err(r.error("trailing bytes after the last anchor"));
    }
    Ok(anchors)
}

fn sidecar(path: &Path, extension: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(extension);
    PathBuf::from(name)
}

pub fn coverage_path(archive: &Path) -> PathBuf {
    sidecar(archive, "coverage")
}

pub fn anchors_path(archive: &Path) -> PathBuf {
    sidecar(archive, "anchors")
}

/// Stages the archive and both sidecars.
pub fn stage_lifelong(staged: &mut Staged, path: &Path, map: &LifelongMap) -> Result<()> {
    let archive = MapArchive {
        map: map.map.clone(),
        lineage: map.lineage.clone(),
        config_hash: map.config_hash,
    };
    staged.add(path, &encode_archive(&archive))?;
    staged.add(&coverage_path(path), format_coverage(&map.coverage).as_bytes())?;
    staged.add(&anchors_path(path), &encode_anchors(&map.anchors))?;
    Ok(())
}

pub fn load_lifelong(path: &Path) -> Result<LifelongMap> {
    let archive = read_archive(path)?;
    let cov_path = coverage_path(path);
    let coverage = parse_coverage(&read_text(&cov_path)?, &cov_path)?;
    let anc_path = anchors_path(path);
    let anchors = decode_anchors(&read_bytes(&anc_path)?, &anc_path)?;
    if archive.lineage.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "archive lineage is empty".into(),
        });
    }
    Ok(LifelongMap {
        map: archive.map,
        lineage: archive.lineage,
        config_hash: archive.config_hash,
        coverage,
        anchors,
    })
}
