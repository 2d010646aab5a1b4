//! Deterministic ray casting of a scene into labeled sessions.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::SessionData;
use crate::model::{Point3, Pose, Scan, Session};
use crate::synth::scene::{Primitive, PrimitiveClass, PrimitiveKind, SceneSpec};

/// Per-point label: class code in the low 16 bits, primitive index + 1 in the high 16.
pub fn encode_label(class: PrimitiveClass, primitive: usize) -> u32 {
    (class as u32) | (((primitive + 1) as u32) << 16)
}

pub fn label_class(label: u32) -> Option<PrimitiveClass> {
    PrimitiveClass::from_code(label & 0xFFFF)
}

/// Index of the primitive a labeled point came from, if recorded.
pub fn label_primitive(label: u32) -> Option<usize> {
    (label >> 16).checked_sub(1).map(|i| i as usize)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSession {
    /// 1-based session index.
    pub index: usize,
    pub sensor_id: String,
    /// Scans in the sensor frame with drifted poses in the session's local frame.
    pub session: Session,
    pub labels: Vec<Vec<u32>>,
    /// Drift-free sensor poses in the scene (world) frame.
    pub gt_poses: Vec<Pose>,
}

impl LabeledSession {
    /// Drift-free poses in the session's local frame (the first scan's pose).
    pub fn gt_local_poses(&self) -> Vec<Pose> {
        let origin_inv = self.gt_poses[0].inverse();
        self.gt_poses.iter().map(|p| origin_inv.compose(p)).collect()
    }

    /// World-frame points of every scan under the ground-truth poses, with labels.
    pub fn gt_world_points(&self) -> (Vec<Point3>, Vec<u32>) {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for ((scan, pose), l) in self.session.scans.iter().zip(&self.gt_poses).zip(&self.labels) {
            points.extend(scan.transformed(pose));
            labels.extend_from_slice(l);
        }
        (points, labels)
    }

    /// On-disk form: drifted poses in `poses.txt`, labels and world-frame
    /// ground truth as sidecars.
    pub fn to_session_data(&self) -> SessionData {
        SessionData {
            session: self.session.clone(),
            sensor_id: self.sensor_id.clone(),
            labels: Some(self.labels.clone()),
            gt_poses: Some(self.gt_poses.clone()),
        }
    }

    pub fn point_count(&self) -> usize {
        self.session.scans.iter().map(|s| s.points.len()).sum()
    }
}

fn stream_rng(seed: u64, session: usize, scan: Option<usize>) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lane = scan.map_or(u32::MAX as u64, |s| s as u64);
    rng.set_stream(((session as u64) << 32) | lane);
    rng
}

/// Position and heading at arc length `s` along the polyline.
fn along(trajectory: &[[f64; 2]], s: f64) -> ([f64; 2], f64) {
    let segments = trajectory.len() - 1;
    let mut remaining = s;
    for k in 0..segments {
        let (a, b) = (trajectory[k], trajectory[k + 1]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let heading = (b[1] - a[1]).atan2(b[0] - a[0]);
        if remaining <= len || k + 1 == segments {
            let t = if len > 0.0 { (remaining / len).min(1.0) } else { 0.0 };
            return ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], heading);
        }
        remaining -= len;
    }
    (trajectory[0], 0.0)
}

fn polyline_length(trajectory: &[[f64; 2]]) -> f64 {
    trajectory
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum()
}

/// Drift-free world poses of one session's scans.
pub fn ground_truth_poses(spec: &SceneSpec, session: usize) -> Vec<Pose> {
    let mut rng = stream_rng(spec.seed, session, None);
    let jx = rng.random_range(-1.0..=1.0) * spec.session_jitter;
    let jy = rng.random_range(-1.0..=1.0) * spec.session_jitter;
    let jyaw = (rng.random_range(-1.0..=1.0) * spec.session_jitter_yaw).to_radians();
    let n = spec.scans_per_session;
    let length = polyline_length(&spec.trajectory);
    (0..n)
        .map(|i| {
            let s = if n > 1 { length * i as f64 / (n - 1) as f64 } else { 0.0 };
            let (xy, heading) = along(&spec.trajectory, s);
            Pose::from_yaw(
                heading + jyaw,
                Vector3::new(xy[0] + jx, xy[1] + jy, spec.sensor.height),
            )
        })
        .collect()
}

/// Local-frame poses as an upstream odometry would report them.
pub fn drifted_poses(spec: &SceneSpec, session: usize, gt: &[Pose]) -> Vec<Pose> {
    let mut rng = stream_rng(spec.seed, session, None);
    // Skip the three jitter draws so drift has its own values.
    for _ in 0..3 {
        let _: f64 = rng.random();
    }
    let direction = rng.random_range(0.0..2.0 * PI);
    let origin_inv = gt[0].inverse();
    gt.iter()
        .enumerate()
        .map(|(i, pose)| {
            let local = origin_inv.compose(pose);
            if spec.drift_per_scan == 0.0 && spec.drift_yaw_per_scan == 0.0 {
                return local;
            }
            let k = i as f64;
            let drift = Pose::from_yaw(
                (k * spec.drift_yaw_per_scan).to_radians(),
                Vector3::new(direction.cos(), direction.sin(), 0.0) * (k * spec.drift_per_scan),
            );
            drift.compose(&local)
        })
        .collect()
}

/// Distance along the ray to the first hit, if any.
fn intersect(p: &Primitive, center: &Vector3<f64>, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let inv_yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), -p.yaw.to_radians());
    let o = inv_yaw * (origin - center);
    let d = inv_yaw * dir;
    let half = p.size * 0.5;
    match p.kind {
        PrimitiveKind::Plane => {
            if d.z.abs() < 1e-12 {
                return None;
            }
            let t = -o.z / d.z;
            let hit = o + d * t;
            (t > 1e-9 && hit.x.abs() <= half.x && hit.y.abs() <= half.y).then_some(t)
        }
        PrimitiveKind::Box => {
            let mut t_enter = f64::NEG_INFINITY;
            let mut t_exit = f64::INFINITY;
            for k in 0..3 {
                if d[k].abs() < 1e-15 {
                    if o[k].abs() > half[k] {
                        return None;
                    }
                    continue;
                }
                let a = (-half[k] - o[k]) / d[k];
                let b = (half[k] - o[k]) / d[k];
                t_enter = t_enter.max(a.min(b));
                t_exit = t_exit.min(a.max(b));
            }
            (t_enter <= t_exit && t_enter > 1e-9).then_some(t_enter)
        }
    }
}

/// Sensor-frame unit ray directions, channel-major.
fn ray_directions(spec: &SceneSpec) -> Vec<Vector3<f64>> {
    let s = &spec.sensor;
    let mut dirs = Vec::with_capacity(s.channels * s.azimuth_steps);
    for c in 0..s.channels {
        let t = if s.channels > 1 { c as f64 / (s.channels - 1) as f64 } else { 0.5 };
        let elev = (s.elevation_min + t * (s.elevation_max - s.elevation_min)).to_radians();
        for a in 0..s.azimuth_steps {
            let az = 2.0 * PI * a as f64 / s.azimuth_steps as f64;
            dirs.push(Vector3::new(elev.cos() * az.cos(), elev.cos() * az.sin(), elev.sin()));
        }
    }
    dirs
}

fn render_scan(
    spec: &SceneSpec,
    session: usize,
    scan_index: usize,
    pose: &Pose,
    dirs: &[Vector3<f64>],
) -> (Vec<Point3>, Vec<u32>) {
    let active: Vec<(usize, &Primitive, Vector3<f64>)> = spec
        .primitives
        .iter()
        .enumerate()
        .filter(|(_, p)| p.exists_in(session) && p.active_at(scan_index))
        .map(|(i, p)| (i, p, p.center_at(scan_index, spec.scan_interval)))
        .collect();
    let mut rng = stream_rng(spec.seed, session, Some(scan_index));
    let noise = Normal::new(0.0, spec.sensor.noise).expect("validated noise");
    let origin = pose.translation;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for dir in dirs {
        let world_dir = pose.rotation * dir;
        let mut best: Option<(f64, usize, PrimitiveClass)> = None;
        for (i, p, center) in &active {
            if let Some(t) = intersect(p, center, &origin, &world_dir) {
                if best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, *i, p.class));
                }
            }
        }
        // One draw per ray keeps the stream aligned regardless of hits.
        let e = noise.sample(&mut rng);
        let Some((t, index, class)) = best else {
            continue;
        };
        if t > spec.sensor.max_range {
            continue;
        }
        let range = (t + e).max(1e-3);
        points.push(Point3::from(dir * range));
        labels.push(encode_label(class, index));
    }
    (points, labels)
}

/// Renders session `session` (1-based) of the scene.
pub fn render_session(spec: &SceneSpec, session: usize) -> Result<LabeledSession> {
    spec.validate()?;
    if session == 0 || session > spec.sessions {
        return Err(Error::InvalidInput(format!(
            "session {session} outside 1..={}",
            spec.sessions
        )));
    }
    let gt = ground_truth_poses(spec, session);
    let [x0, y0, x1, y1] = spec.bounds;
    if let Some((i, p)) = gt.iter().enumerate().find(|(_, p)| {
        let t = p.translation;
        t.x < x0 || t.x > x1 || t.y < y0 || t.y > y1
    }) {
        return Err(Error::InvalidInput(format!(
            "trajectory leaves the scene bounds at scan {i} ({:.2}, {:.2})",
            p.translation.x, p.translation.y
        )));
    }
    let dirs = ray_directions(spec);
    let rendered: Vec<(Vec<Point3>, Vec<u32>)> = gt
        .par_iter()
        .enumerate()
        .map(|(i, pose)| render_scan(spec, session, i, pose, &dirs))
        .collect();
    let poses = drifted_poses(spec, session, &gt);
    let base_time = (session - 1) as f64 * 1.0e4;
    let mut scans = Vec::with_capacity(rendered.len());
    let mut labels = Vec::with_capacity(rendered.len());
    for (i, (points, l)) in rendered.into_iter().enumerate() {
        if points.is_empty() {
            return Err(Error::InvalidInput(format!("scan {i} of session {session} hit nothing")));
        }
        scans.push(Scan::new(points, base_time + i as f64 * spec.scan_interval));
        labels.push(l);
    }
    Ok(LabeledSession {
        index: session,
        sensor_id: "synthetic".into(),
        session: Session {
            scans,
            poses,
            frame_id: format!("session_{session}"),
        },
        labels,
        gt_poses: gt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_ray_spec() -> SceneSpec {
        let mut spec = SceneSpec {
            scans_per_session: 1,
            ..SceneSpec::default()
        };
        spec.sensor.channels = 1;
        spec.sensor.elevation_min = 0.0;
        spec.sensor.elevation_max = 0.0;
        spec.sensor.azimuth_steps = 1;
        spec.sensor.height = 1.0;
        spec.trajectory = vec![[0.0, 0.0], [1e-9, 0.0]];
        spec
    }

    #[test]
    fn ray_hits_face_center_within_noise() {
        let mut spec = one_ray_spec();
        spec.primitives.push(Primitive::new(
            "box",
            PrimitiveKind::Box,
            PrimitiveClass::Static,
            [5.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
        ));
        let s = render_session(&spec, 1).unwrap();
        let world = s.session.scans[0].transformed(&s.gt_poses[0]);
        assert_eq!(world.len(), 1);
        assert!((world[0] - Point3::new(4.5, 0.0, 1.0)).norm() < 0.06);
    }

    #[test]
    fn passing_actor_labels_only_its_scan() {
        let mut spec = one_ray_spec();
        spec.scans_per_session = 8;
        spec.trajectory = vec![[0.0, 0.0], [1e-6, 0.0]];
        spec.primitives.push(Primitive::new("wall", PrimitiveKind::Box, PrimitiveClass::Static, [10.0, 0.0, 1.0], [0.2, 4.0, 3.0]));
        spec.primitives.push(
            Primitive::new("ped", PrimitiveKind::Box, PrimitiveClass::Dynamic, [5.0, 0.0, 1.0], [0.5, 0.5, 2.0])
                .moving([0.0, 1.0, 0.0], (5, 5)),
        );
        let s = render_session(&spec, 1).unwrap();
        for (i, l) in s.labels.iter().enumerate() {
            let expected = if i == 5 { PrimitiveClass::Dynamic } else { PrimitiveClass::Static };
            assert_eq!(label_class(l[0]), Some(expected), "scan {i}");
        }
        assert_eq!(label_primitive(s.labels[5][0]), Some(1));
    }

    #[test]
    fn leaving_bounds_is_an_error() {
        let mut spec = one_ray_spec();
        spec.bounds = [-1.0, -1.0, 1.0, 1.0];
        spec.trajectory = vec![[0.0, 0.0], [5.0, 0.0]];
        spec.scans_per_session = 3;
        assert!(render_session(&spec, 1).is_err());
    }

    #[test]
    fn zero_drift_matches_ground_truth() {
        let mut spec = one_ray_spec();
        spec.trajectory = vec![[0.0, 0.0], [3.0, 1.0]];
        spec.scans_per_session = 4;
        spec.session_jitter = 0.5;
        spec.session_jitter_yaw = 5.0;
        spec.primitives.push(Primitive::new("g", PrimitiveKind::Plane, PrimitiveClass::Static, [0.0; 3], [100.0, 100.0, 0.0]));
        spec.sensor.elevation_min = -30.0;
        spec.sensor.elevation_max = -30.0;
        let s = render_session(&spec, 1).unwrap();
        for (a, b) in s.session.poses.iter().zip(s.gt_local_poses()) {
            assert_eq!(*a, b);
        }
    }
}
