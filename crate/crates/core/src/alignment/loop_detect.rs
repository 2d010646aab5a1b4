//! Polar max-height descriptor for coarse place recognition between sessions.
//!
//! A scan is binned into rings (radial) and sectors (azimuthal) around the
//! sensor; each bin stores the maximum point height above the lowest return.
//! Descriptors are compared column-wise by cosine distance under every
//! circular sector shift, and the best shift gives the relative yaw.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Pose, Scan, Session};

pub const RINGS: usize = 20;
pub const SECTORS: usize = 60;

#[derive(Clone, Debug, PartialEq)]
pub struct LoopCandidate {
    /// Index into the anchor list.
    pub map_scan_index: usize,
    /// Index into the new session.
    pub session_scan_index: usize,
    pub initial_transform: Pose,
    pub descriptor_distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolarDescriptor {
    cells: Vec<f64>,
}

impl PolarDescriptor {
    pub fn from_scan(scan: &Scan, max_radius: f64) -> Self {
        let mut cells = vec![0.0f64; RINGS * SECTORS];
        let origin = scan.sensor_origin;
        let z_min = scan
            .points
            .iter()
            .map(|p| p.z - origin.z)
            .fold(f64::INFINITY, f64::min);
        for p in &scan.points {
            let (x, y, z) = (p.x - origin.x, p.y - origin.y, p.z - origin.z);
            let r = x.hypot(y);
            if r <= 0.0 || r >= max_radius {
                continue;
            }
            let ring = ((r / max_radius) * RINGS as f64) as usize;
            let sector = sector_of(y.atan2(x));
            let cell = &mut cells[ring.min(RINGS - 1) * SECTORS + sector];
            *cell = (*cell).max(z - z_min);
        }
        PolarDescriptor { cells }
    }

    fn column(&self, sector: usize) -> impl Iterator<Item = f64> + '_ {
        (0..RINGS).map(move |r| self.cells[r * SECTORS + sector])
    }

    fn column_norms(&self) -> [f64; SECTORS] {
        let mut norms = [0.0; SECTORS];
        for (s, n) in norms.iter_mut().enumerate() {
            *n = self.column(s).map(|v| v * v).sum::<f64>().sqrt();
        }
        norms
    }

    /// Mean column cosine distance when `other`'s sector `j` is compared with
    /// this descriptor's sector `j + shift`.
    fn shifted_distance(&self, other: &PolarDescriptor, shift: usize, na: &[f64], nb: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 0..SECTORS {
            let ja = (j + shift) % SECTORS;
            if na[ja] == 0.0 || nb[j] == 0.0 {
                continue;
            }
            let dot: f64 = self.column(ja).zip(other.column(j)).map(|(a, b)| a * b).sum();
            sum += 1.0 - dot / (na[ja] * nb[j]);
            count += 1;
        }
        if count == 0 {
            1.0
        } else {
            sum / count as f64
        }
    }

    /// Best (distance, yaw) of `other` relative to `self`. The yaw rotates
    /// `other`'s sensor frame into this one's.
    pub fn compare(&self, other: &PolarDescriptor) -> (f64, f64) {
        let na = self.column_norms();
        let nb = other.column_norms();
        let mut best = (f64::INFINITY, 0usize);
        for shift in 0..SECTORS {
            let d = self.shifted_distance(other, shift, &na, &nb);
            if d < best.0 {
                best = (d, shift);
            }
        }
        let mut yaw = best.1 as f64 * 2.0 * PI / SECTORS as f64;
        if yaw > PI {
            yaw -= 2.0 * PI;
        }
        (best.0, yaw)
    }
}

fn sector_of(azimuth: f64) -> usize {
    let unit = (azimuth + PI) / (2.0 * PI);
    ((unit * SECTORS as f64) as usize).min(SECTORS - 1)
}

/// Every (anchor, session scan) pair scored by descriptor distance, best first.
///
/// Each candidate carries `T_init = anchor_pose ∘ Rz(yaw) ∘ session_pose⁻¹`.
/// Ties are broken by session index, then anchor index.
pub fn rank_loop_candidates(
    anchors: &[(Scan, Pose)],
    session: &Session,
    max_radius: f64,
) -> Result<Vec<LoopCandidate>> {
    if anchors.is_empty() || session.is_empty() {
        return Err(Error::InvalidInput("loop detection needs anchors and session scans".into()));
    }
    let anchor_desc: Vec<PolarDescriptor> = anchors
        .par_iter()
        .map(|(scan, _)| PolarDescriptor::from_scan(scan, max_radius))
        .collect();
    let session_desc: Vec<PolarDescriptor> = session
        .scans
        .par_iter()
        .map(|scan| PolarDescriptor::from_scan(scan, max_radius))
        .collect();
    let mut scored: Vec<(f64, f64, usize, usize)> = (0..session_desc.len())
        .into_par_iter()
        .flat_map_iter(|s| {
            let anchor_desc = &anchor_desc;
            let session_desc = &session_desc;
            (0..anchor_desc.len()).map(move |m| {
                let (d, yaw) = anchor_desc[m].compare(&session_desc[s]);
                (d, yaw, m, s)
            })
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.3.cmp(&b.3)).then(a.2.cmp(&b.2)));
    Ok(scored
        .into_iter()
        .map(|(distance, yaw, m, s)| {
            let offset = Pose::from_yaw(yaw, nalgebra::Vector3::zeros());
            LoopCandidate {
                map_scan_index: m,
                session_scan_index: s,
                initial_transform: anchors[m].1.compose(&offset).compose(&session.poses[s].inverse()),
                descriptor_distance: distance,
            }
        })
        .collect())
}

/// Most similar descriptor pair; fails when even the best pair is farther than `gate`.
pub fn detect_loop(
    anchors: &[(Scan, Pose)],
    session: &Session,
    max_radius: f64,
    gate: f64,
) -> Result<LoopCandidate> {
    let best = rank_loop_candidates(anchors, session, max_radius)?
        .into_iter()
        .next()
        .expect("nonempty pair set");
    if !(best.descriptor_distance <= gate) {
        return Err(Error::NoLoopFound {
            best_distance: best.descriptor_distance,
            gate,
        });
    }
    Ok(best)
}
