//! Shared value types: points, rigid poses, scans, sessions and attributed clouds.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Lower saturation bound for every ephemerality value.
pub const EPS_MIN: f64 = 0.01;
/// Upper saturation bound for every ephemerality value.
pub const EPS_MAX: f64 = 0.99;
/// Value every local ephemerality starts from before any ray evidence.
pub const EPS_INIT: f64 = 0.5;

/// Clamps an ephemerality into `[EPS_MIN, EPS_MAX]` so beliefs never become absorbing.
pub fn clamp_eph(value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite(value));
    }
    Ok(clamp_finite(value))
}

#[inline]
pub(crate) fn clamp_finite(value: f64) -> f64 {
    value.clamp(EPS_MIN, EPS_MAX)
}

pub fn is_finite_point(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

/// Rigid transform in SE(3), stored as an orthonormal rotation matrix and a translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose::new(Matrix3::identity(), Vector3::new(x, y, z))
    }

    /// Yaw (rotation about +z, radians) followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        Pose::new(
            *Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix(),
            translation,
        )
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose::new(*q.to_rotation_matrix().matrix(), translation)
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation)
    }

    /// Row-major 3x4 `[R | t]`, the layout used by `poses.txt`.
    pub fn from_row_major_3x4(values: &[f64; 12]) -> Self {
        let rotation = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8],
            values[9], values[10],
        );
        let translation = Vector3::new(values[3], values[7], values[11]);
        Pose::new(rotation, translation)
    }

    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Maximum deviation from orthonormality and unit determinant.
    pub fn orthonormality_error(&self) -> f64 {
        let rtr = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let ortho = rtr.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        ortho.max((self.rotation.determinant() - 1.0).abs())
    }

    pub fn is_valid(&self, tolerance: f64) -> bool {
        self.rotation.iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
            && self.orthonormality_error() <= tolerance
    }

    /// Re-orthonormalizes the rotation via its nearest rotation matrix.
    pub fn renormalized(&self) -> Pose {
        let rot = Rotation3::from_matrix_eps(&self.rotation, 1e-12, 100, Rotation3::identity());
        Pose::new(*rot.matrix(), self.translation)
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Angle (radians) of the relative rotation between two poses.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let c = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        c.acos()
    }

    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    /// Points in the sensor frame.
    pub points: Vec<Point3>,
    pub sensor_origin: Point3,
    /// Seconds; strictly increasing within a session.
    pub timestamp: f64,
}

impl Scan {
    pub fn new(points: Vec<Point3>, timestamp: f64) -> Self {
        Scan {
            points,
            sensor_origin: Point3::origin(),
            timestamp,
        }
    }

    pub fn transformed(&self, pose: &Pose) -> Vec<Point3> {
        self.points.iter().map(|p| pose.transform_point(p)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Session {
    pub scans: Vec<Scan>,
    pub poses: Vec<Pose>,
    pub frame_id: String,
}

impl Session {
    pub fn len(&self) -> usize {
        self.scans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scans.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationIssue {
    Empty,
    LengthMismatch { scans: usize, poses: usize },
    NonMonotoneTimestamp { index: usize },
    EmptyScan { index: usize },
    NonFinitePoint { scan: usize, point: usize },
    OutOfRange { scan: usize, point: usize },
    InvalidPose { index: usize },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationIssue::Empty => write!(f, "session has no scans"),
            ValidationIssue::LengthMismatch { scans, poses } => {
                write!(f, "length mismatch: {scans} scans vs {poses} poses")
            }
            ValidationIssue::NonMonotoneTimestamp { index } => {
                write!(f, "timestamp of scan {index} does not increase")
            }
            ValidationIssue::EmptyScan { index } => write!(f, "scan {index} has no points"),
            ValidationIssue::NonFinitePoint { scan, point } => {
                write!(f, "scan {scan} point {point} is not finite")
            }
            ValidationIssue::OutOfRange { scan, point } => {
                write!(f, "scan {scan} point {point} exceeds max_range")
            }
            ValidationIssue::InvalidPose { index } => {
                write!(f, "pose {index} is not a rigid transform")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let text: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        Err(Error::Validation(text.join("; ")))
    }
}

/// Lists every violated session invariant. At most one out-of-range or
/// non-finite entry is reported per scan.
pub fn validate_session(session: &Session, config: &PipelineConfig) -> ValidationReport {
    let mut issues = Vec::new();
    if session.scans.is_empty() {
        issues.push(ValidationIssue::Empty);
    }
    if session.scans.len() != session.poses.len() {
        issues.push(ValidationIssue::LengthMismatch {
            scans: session.scans.len(),
            poses: session.poses.len(),
        });
    }
    for (i, pair) in session.scans.windows(2).enumerate() {
        if !(pair[1].timestamp > pair[0].timestamp) {
            issues.push(ValidationIssue::NonMonotoneTimestamp { index: i + 1 });
        }
    }
    for (s, scan) in session.scans.iter().enumerate() {
        if scan.points.is_empty() {
            issues.push(ValidationIssue::EmptyScan { index: s });
            continue;
        }
        if let Some(p) = scan.points.iter().position(|p| !is_finite_point(p)) {
            issues.push(ValidationIssue::NonFinitePoint { scan: s, point: p });
        }
        if let Some(p) = scan
            .points
            .iter()
            .position(|p| (p - scan.sensor_origin).norm() > config.max_range)
        {
            issues.push(ValidationIssue::OutOfRange { scan: s, point: p });
        }
    }
    for (i, pose) in session.poses.iter().enumerate() {
        if !pose.is_valid(1e-6) {
            issues.push(ValidationIssue::InvalidPose { index: i });
        }
    }
    ValidationReport { issues }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttributedPoint {
    pub position: Point3,
    pub eps_l: f64,
    pub eps_g: f64,
}

impl AttributedPoint {
    pub fn new(position: Point3, eps_l: f64, eps_g: f64) -> Self {
        AttributedPoint {
            position,
            eps_l,
            eps_g,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttributedPointCloud {
    pub points: Vec<AttributedPoint>,
    pub frame_id: String,
}

impl AttributedPointCloud {
    pub fn new(points: Vec<AttributedPoint>, frame_id: impl Into<String>) -> Self {
        AttributedPointCloud {
            points,
            frame_id: frame_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !is_finite_point(&p.position) {
                return Err(Error::InvalidInput(format!("point {i} is not finite")));
            }
            for v in [p.eps_l, p.eps_g] {
                if !(EPS_MIN..=EPS_MAX).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "point {i} ephemerality {v} outside [{EPS_MIN}, {EPS_MAX}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn session_of(n_scans: usize, n_poses: usize) -> Session {
        Session {
            scans: (0..n_scans)
                .map(|i| Scan::new(vec![Point3::new(1.0, 0.0, 0.0)], i as f64))
                .collect(),
            poses: vec![Pose::identity(); n_poses],
            frame_id: "s".into(),
        }
    }

    #[test]
    fn valid_session_has_empty_report() {
        let report = validate_session(&session_of(3, 3), &PipelineConfig::default());
        assert!(report.is_valid(), "{:?}", report);
    }

    #[test]
    fn length_mismatch_reported() {
        let report = validate_session(&session_of(3, 2), &PipelineConfig::default());
        assert!(report
            .issues
            .contains(&ValidationIssue::LengthMismatch { scans: 3, poses: 2 }));
    }

    #[test]
    fn out_of_range_point_reported() {
        let config = PipelineConfig::default();
        let mut session = session_of(3, 3);
        session.scans[1]
            .points
            .push(Point3::new(2.0 * config.max_range, 0.0, 0.0));
        let report = validate_session(&session, &config);
        assert!(report
            .issues
            .contains(&ValidationIssue::OutOfRange { scan: 1, point: 1 }));
    }

    #[test]
    fn non_monotone_timestamps_reported() {
        let mut session = session_of(3, 3);
        session.scans[2].timestamp = 1.0;
        let report = validate_session(&session, &PipelineConfig::default());
        assert_eq!(
            report.issues,
            vec![ValidationIssue::NonMonotoneTimestamp { index: 2 }]
        );
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_eph(0.5).unwrap(), 0.5);
        assert_eq!(clamp_eph(1.0).unwrap(), 0.99);
        assert_eq!(clamp_eph(-0.2).unwrap(), 0.01);
        assert!(clamp_eph(f64::NAN).is_err());
        assert!(clamp_eph(f64::INFINITY).is_err());
    }

    #[test]
    fn row_major_roundtrip() {
        let pose = Pose::from_yaw(0.3, Vector3::new(1.0, 2.0, 3.0));
        let back = Pose::from_row_major_3x4(&pose.to_row_major_3x4());
        assert_eq!(pose, back);
    }

    #[test]
    fn quaternion_boundary_conversion() {
        let q = UnitQuaternion::from_euler_angles(0.1, -0.2, 0.7);
        let pose = Pose::from_quaternion(q, Vector3::new(0.5, 0.0, -1.0));
        assert!(pose.orthonormality_error() < 1e-12);
        assert!(pose.to_quaternion().angle_to(&q) < 1e-12);
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            -3.2f64..3.2,
            -1.5f64..1.5,
            -3.2f64..3.2,
            -50.0f64..50.0,
            -50.0f64..50.0,
            -50.0f64..50.0,
        )
            .prop_map(|(r, p, y, x, yy, z)| {
                Pose::from_quaternion(
                    UnitQuaternion::from_euler_angles(r, p, y),
                    Vector3::new(x, yy, z),
                )
            })
    }

    proptest! {
        #[test]
        fn composition_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            for (l, r) in left.rotation.iter().zip(right.rotation.iter()) {
                prop_assert!((l - r).abs() < 1e-9);
            }
            for (l, r) in left.translation.iter().zip(right.translation.iter()) {
                prop_assert!((l - r).abs() < 1e-9);
            }
        }

        #[test]
        fn pose_times_inverse_is_identity(a in arb_pose()) {
            let id = a.compose(&a.inverse());
            prop_assert!((id.rotation - Matrix3::identity()).amax() < 1e-9);
            prop_assert!(id.translation.amax() < 1e-9);
            prop_assert!(a.orthonormality_error() < 1e-9);
        }

        #[test]
        fn transform_roundtrip(a in arb_pose(), x in -80.0f64..80.0, y in -80.0f64..80.0, z in -10.0f64..10.0) {
            let p = Point3::new(x, y, z);
            let back = a.inverse().transform_point(&a.transform_point(&p));
            prop_assert!((back - p).amax() < 1e-9);
        }

        #[test]
        fn clamp_is_idempotent(x in -10.0f64..10.0) {
            let once = clamp_eph(x).unwrap();
            prop_assert_eq!(clamp_eph(once).unwrap(), once);
        }
    }
}
