//! Local ephemerality estimation by ray evidence and extraction of the cleaned session map.
//!
//! Every map point starts at ε_l = 0.5. Each ray endpoint (occupied sample)
//! and each interior ray sample (free sample) looks up its `knn` nearest map
//! points and fuses the distance kernel into their ε_l, one sample at a time.
//! Samples are consumed in scan order, occupied before free within a scan.

use rayon::prelude::*;

use crate::alignment::AlignedSession;
use crate::belief;
use crate::config::PipelineConfig;
use crate::model::{AttributedPoint, AttributedPointCloud, Point3, Pose, Scan, EPS_INIT};
use crate::spatial::{voxel_downsample, CoverageGrid, KdIndex, Neighbor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Occupied,
    Free,
}

/// Occupied and free samples of one scan, in the map frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScanRays {
    pub scan_index: usize,
    pub occupied: Vec<Point3>,
    pub free: Vec<Point3>,
}

impl ScanRays {
    pub fn samples(&self) -> impl Iterator<Item = (SampleKind, &Point3)> {
        self.occupied
            .iter()
            .map(|p| (SampleKind::Occupied, p))
            .chain(self.free.iter().map(|p| (SampleKind::Free, p)))
    }

    pub fn len(&self) -> usize {
        self.occupied.len() + self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty() && self.free.is_empty()
    }
}

/// Ray samples for a whole session, grouped per scan in processing order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RaySampleSet {
    pub scans: Vec<ScanRays>,
}

impl RaySampleSet {
    pub fn len(&self) -> usize {
        self.scans.iter().map(ScanRays::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.scans.iter().all(ScanRays::is_empty)
    }

    pub fn coverage(&self, cell: f64) -> CoverageGrid {
        let mut grid = CoverageGrid::new(cell);
        for s in &self.scans {
            grid.extend(&s.occupied);
            grid.extend(&s.free);
        }
        grid
    }
}

/// Endpoints and interior samples of every ray of `scan`, in the map frame.
///
/// Free samples sit at `step, 2·step, …` from the sensor origin and stop while
/// still more than `margin` short of the endpoint.
pub fn sample_rays(scan: &Scan, pose: &Pose, step: f64, margin: f64) -> ScanRays {
    assert!(step > 0.0, "free-space step must be positive");
    let origin = scan.sensor_origin;
    let mut rays = ScanRays {
        scan_index: 0,
        occupied: Vec::with_capacity(scan.points.len()),
        free: Vec::new(),
    };
    for p in &scan.points {
        rays.occupied.push(pose.transform_point(p));
        let dir = p - origin;
        let length = dir.norm();
        if length == 0.0 {
            continue;
        }
        let unit = dir / length;
        let limit = length - margin;
        let mut j = 1usize;
        loop {
            let d = step * j as f64;
            if d >= limit {
                break;
            }
            rays.free.push(pose.transform_point(&(origin + unit * d)));
            j += 1;
        }
    }
    rays
}

pub fn session_rays(scans: &[Scan], poses: &[Pose], config: &PipelineConfig) -> RaySampleSet {
    let scans = scans
        .par_iter()
        .zip(poses.par_iter())
        .enumerate()
        .map(|(i, (scan, pose))| {
            let mut rays = sample_rays(scan, pose, config.free_sample_step, config.endpoint_margin);
            rays.scan_index = i;
            rays
        })
        .collect();
    RaySampleSet { scans }
}

/// Distance kernel: occupied evidence pulls below α near an endpoint, free evidence pushes above α.
pub fn propagation_kernel(x: f64, kind: SampleKind, config: &PipelineConfig) -> f64 {
    let (alpha, beta) = (config.alpha, config.beta);
    match kind {
        SampleKind::Occupied => {
            let s = config.sigma_o;
            (alpha * (1.0 - (-(x * x) / (s * s)).exp()) + beta).min(alpha)
        }
        SampleKind::Free => {
            let s = config.sigma_f;
            (alpha * (1.0 + (-(x * x) / (s * s)).exp()) - beta).max(alpha)
        }
    }
}

/// Distance beyond which the kernel is exactly `α`, so fusion leaves ε_l unchanged.
pub fn kernel_cutoff(kind: SampleKind, config: &PipelineConfig) -> f64 {
    let (alpha, beta) = (config.alpha, config.beta);
    if beta <= 0.0 {
        return f64::INFINITY;
    }
    if beta >= alpha {
        return 0.0;
    }
    let sigma = match kind {
        SampleKind::Occupied => config.sigma_o,
        SampleKind::Free => config.sigma_f,
    };
    // Slack keeps rounding near the crossover on the inclusive side.
    sigma * (alpha / beta).ln().sqrt() * 1.001
}

pub fn bayes_update_local(prev: f64, evidence: f64) -> f64 {
    belief::fuse(prev, evidence)
}

/// Aggregated session map in the map frame, every point at ε_l = 0.5.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionMapWithEph {
    pub cloud: AttributedPointCloud,
}

impl SessionMapWithEph {
    pub fn from_positions(positions: Vec<Point3>, frame_id: impl Into<String>) -> Self {
        let points = positions
            .into_iter()
            .map(|p| AttributedPoint::new(p, EPS_INIT, EPS_INIT))
            .collect();
        SessionMapWithEph {
            cloud: AttributedPointCloud::new(points, frame_id),
        }
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn eps_l(&self) -> Vec<f64> {
        self.cloud.points.iter().map(|p| p.eps_l).collect()
    }
}

/// Union of every scan placed at its refined pose, optionally voxel-compacted.
pub fn aggregate_session(aligned: &AlignedSession, compact_cell: Option<f64>) -> SessionMapWithEph {
    aggregate_scans(&aligned.session.scans, &aligned.refined_poses, &aligned.session.frame_id, compact_cell)
}

pub fn aggregate_scans(
    scans: &[Scan],
    poses: &[Pose],
    frame_id: &str,
    compact_cell: Option<f64>,
) -> SessionMapWithEph {
    let positions: Vec<Point3> = scans
        .iter()
        .zip(poses)
        .flat_map(|(scan, pose)| scan.points.iter().map(move |p| pose.transform_point(p)))
        .collect();
    let mut map = SessionMapWithEph::from_positions(positions, frame_id);
    if let Some(cell) = compact_cell {
        // All attributes are still 0.5, so the max rule leaves them untouched.
        map.cloud = voxel_downsample(&map.cloud, cell);
    }
    map
}

/// Indexed ε_l propagation over the map.
pub struct Propagator<'a> {
    index: KdIndex,
    config: &'a PipelineConfig,
    cutoffs: [f64; 2],
}

impl<'a> Propagator<'a> {
    /// Returns `None` for an empty map.
    pub fn new(map: &SessionMapWithEph, config: &'a PipelineConfig) -> Option<Self> {
        let index = KdIndex::build(map.cloud.positions()).ok()?;
        let cutoffs = [
            kernel_cutoff(SampleKind::Occupied, config),
            kernel_cutoff(SampleKind::Free, config),
        ];
        Some(Propagator { index, config, cutoffs })
    }

    /// Applies one scan's samples to `eps`, in occupied-then-free order.
    ///
    /// Neighbor lookup runs in parallel; fusion is applied afterwards in sample
    /// order, so the result does not depend on the worker count. Neighbors past
    /// the kernel cutoff are skipped: their evidence is exactly neutral.
    pub fn apply_scan(&self, eps: &mut [f64], rays: &ScanRays) {
        let k = self.config.knn;
        let samples: Vec<(SampleKind, &Point3)> = rays.samples().collect();
        let neighbors: Vec<Vec<Neighbor>> = samples
            .par_iter()
            .with_min_len(256)
            .map(|(kind, p)| {
                let cutoff = match kind {
                    SampleKind::Occupied => self.cutoffs[0],
                    SampleKind::Free => self.cutoffs[1],
                };
                self.index.knn_within(p, k, cutoff)
            })
            .collect();
        for ((kind, _), found) in samples.iter().zip(&neighbors) {
            for n in found {
                let f = propagation_kernel(n.distance, *kind, self.config);
                eps[n.id] = bayes_update_local(eps[n.id], f);
            }
        }
    }
}

pub fn propagate_ephemerality(
    map: &SessionMapWithEph,
    rays: &RaySampleSet,
    config: &PipelineConfig,
) -> SessionMapWithEph {
    let mut out = map.clone();
    let Some(propagator) = Propagator::new(map, config) else {
        return out;
    };
    let mut eps = map.eps_l();
    for _ in 0..config.passes {
        for scan in &rays.scans {
            propagator.apply_scan(&mut eps, scan);
        }
    }
    for (p, e) in out.cloud.points.iter_mut().zip(eps) {
        p.eps_l = e;
    }
    out
}

/// Splits by `ε_l < τ_l`: the first cloud holds static points, the second the removed ones.
pub fn extract_static(
    map: &SessionMapWithEph,
    tau_l: f64,
) -> (AttributedPointCloud, AttributedPointCloud) {
    let frame = &map.cloud.frame_id;
    let (kept, removed): (Vec<AttributedPoint>, Vec<AttributedPoint>) =
        map.cloud.points.iter().partition(|p| p.eps_l < tau_l);
    (
        AttributedPointCloud::new(kept, frame.clone()),
        AttributedPointCloud::new(removed, frame.clone()),
    )
}

/// Output of the whole local stage for one aligned session.
#[derive(Clone, Debug)]
pub struct CleanedSession {
    pub map: SessionMapWithEph,
    pub cleaned: AttributedPointCloud,
    pub removed: AttributedPointCloud,
    pub coverage: CoverageGrid,
}

/// Aggregation, ray propagation and thresholding for a session at the given poses.
///
/// Rays are generated and consumed one scan at a time to bound memory.
pub fn clean_session(
    scans: &[Scan],
    poses: &[Pose],
    frame_id: &str,
    config: &PipelineConfig,
) -> CleanedSession {
    let compact = config.compact.then_some(config.voxel_size);
    let mut map = aggregate_scans(scans, poses, frame_id, compact);
    let mut coverage = CoverageGrid::new(config.coverage_cell);
    if let Some(propagator) = Propagator::new(&map, config) {
        let mut eps = map.eps_l();
        for pass in 0..config.passes {
            for (i, (scan, pose)) in scans.iter().zip(poses).enumerate() {
                let mut rays = sample_rays(scan, pose, config.free_sample_step, config.endpoint_margin);
                rays.scan_index = i;
                if pass == 0 {
                    coverage.extend(&rays.occupied);
                    coverage.extend(&rays.free);
                }
                propagator.apply_scan(&mut eps, &rays);
            }
        }
        for (p, e) in map.cloud.points.iter_mut().zip(eps) {
            p.eps_l = e;
        }
    }
    let (cleaned, removed) = extract_static(&map, config.tau_l);
    CleanedSession {
        map,
        cleaned,
        removed,
        coverage,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn cfg() -> PipelineConfig {
        PipelineConfig::default()
    }

    #[test]
    fn kernel_closed_form_values() {
        let c = cfg();
        assert_eq!(propagation_kernel(0.0, SampleKind::Occupied, &c), 0.1);
        assert_eq!(propagation_kernel(0.0, SampleKind::Free, &c), 0.9);
        assert_eq!(propagation_kernel(1e6, SampleKind::Occupied, &c), 0.5);
        assert_eq!(propagation_kernel(1e6, SampleKind::Free, &c), 0.5);
        let crossover = c.sigma_o * 5f64.ln().sqrt();
        assert!((propagation_kernel(crossover, SampleKind::Occupied, &c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_neutral_past_cutoff() {
        let c = cfg();
        for kind in [SampleKind::Occupied, SampleKind::Free] {
            let cut = kernel_cutoff(kind, &c);
            for k in 0..100 {
                let x = cut * (1.0 + k as f64 * 0.01);
                assert_eq!(propagation_kernel(x, kind, &c), c.alpha);
            }
            assert_ne!(propagation_kernel(cut * 0.99, kind, &c), c.alpha);
            for p in [0.01, 0.123, 0.5, 0.77, 0.99] {
                assert_eq!(bayes_update_local(p, c.alpha), p);
            }
        }
    }

    #[test]
    fn bayes_local_examples() {
        assert!((bayes_update_local(0.5, 0.1) - 0.1).abs() < 1e-15);
        assert_eq!(bayes_update_local(0.5, 0.5), 0.5);
        assert!((bayes_update_local(0.1, 0.1) - 0.01 / 0.82).abs() < 1e-15);
    }

    #[test]
    fn ray_sampling_respects_the_endpoint_margin() {
        let scan = Scan::new(vec![Point3::new(2.3, 0.0, 0.0)], 0.0);
        let rays = sample_rays(&scan, &Pose::identity(), 0.5, 0.5);
        assert_eq!(rays.occupied, vec![Point3::new(2.3, 0.0, 0.0)]);
        let xs: Vec<f64> = rays.free.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.5, 1.0, 1.5]);

        let short = Scan::new(vec![Point3::new(0.0, 0.6, 0.0)], 0.0);
        let rays = sample_rays(&short, &Pose::identity(), 0.5, 0.5);
        assert!(rays.free.is_empty());
        assert_eq!(rays.occupied.len(), 1);
    }

    #[test]
    fn free_samples_lie_on_the_transformed_ray() {
        let scan = Scan::new(vec![Point3::new(3.0, 4.0, 0.0)], 0.0);
        let pose = Pose::from_yaw(0.7, Vector3::new(1.0, -2.0, 0.5));
        let rays = sample_rays(&scan, &pose, 0.5, 0.5);
        let origin = pose.transform_point(&Point3::origin());
        let end = rays.occupied[0];
        let dir = (end - origin).normalize();
        for f in &rays.free {
            let v = f - origin;
            assert!((v - dir * v.dot(&dir)).norm() < 1e-12);
            assert!((end - f).norm() > 0.5);
        }
        // identity pose: colinear with the raw ray
        let rays = sample_rays(&scan, &Pose::identity(), 0.5, 0.5);
        for f in &rays.free {
            assert!((f.x * 4.0 - f.y * 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn endpoint_on_a_map_point_drops_it_to_beta() {
        let map = SessionMapWithEph::from_positions(vec![Point3::new(2.0, 0.0, 0.0)], "m");
        let mut config = cfg();
        config.knn = 1;
        let rays = RaySampleSet {
            scans: vec![ScanRays {
                scan_index: 0,
                occupied: vec![Point3::new(2.0, 0.0, 0.0)],
                free: vec![],
            }],
        };
        let out = propagate_ephemerality(&map, &rays, &config);
        assert!((out.cloud.points[0].eps_l - 0.1).abs() < 1e-15);
    }

    #[test]
    fn nearby_free_sample_raises_above_0_85() {
        let map = SessionMapWithEph::from_positions(vec![Point3::new(0.0, 0.05, 0.0)], "m");
        let rays = RaySampleSet {
            scans: vec![ScanRays {
                scan_index: 0,
                occupied: vec![],
                free: vec![Point3::origin()],
            }],
        };
        let config = PipelineConfig {
            sigma_f: 0.4,
            ..cfg()
        };
        let out = propagate_ephemerality(&map, &rays, &config);
        let expected_f = 0.5 * (1.0 + (-(0.05f64 * 0.05) / 0.16).exp()) - 0.1;
        assert!((expected_f - 0.89225).abs() < 1e-4);
        assert!((out.cloud.points[0].eps_l - expected_f).abs() < 1e-12);
        assert!(out.cloud.points[0].eps_l > 0.85);
    }

    #[test]
    fn unselected_points_stay_at_half() {
        let mut pts: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64 * 0.01, 0.0, 0.0)).collect();
        pts.push(Point3::new(50.0, 0.0, 0.0));
        let map = SessionMapWithEph::from_positions(pts, "m");
        let rays = RaySampleSet {
            scans: vec![ScanRays {
                scan_index: 0,
                occupied: vec![Point3::origin()],
                free: vec![Point3::new(0.02, 0.0, 0.0)],
            }],
        };
        let out = propagate_ephemerality(&map, &rays, &cfg());
        assert_eq!(out.cloud.points[10].eps_l, 0.5);
    }

    #[test]
    fn repeated_endpoint_hits_follow_closed_form() {
        let mut config = cfg();
        config.knn = 1;
        let map = SessionMapWithEph::from_positions(vec![Point3::origin()], "m");
        for n in 1..=5 {
            let rays = RaySampleSet {
                scans: (0..n)
                    .map(|i| ScanRays {
                        scan_index: i,
                        occupied: vec![Point3::origin()],
                        free: vec![],
                    })
                    .collect(),
            };
            let out = propagate_ephemerality(&map, &rays, &config);
            let a = 0.1f64.powi(n as i32) * 0.5;
            let b = 0.9f64.powi(n as i32) * 0.5;
            let expected = (a / (a + b)).clamp(0.01, 0.99);
            assert!((out.cloud.points[0].eps_l - expected).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn extraction_uses_a_strict_threshold() {
        let map = SessionMapWithEph::from_positions(vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)], "m");
        let (cleaned, removed) = extract_static(&map, 0.5);
        assert!(cleaned.is_empty());
        assert_eq!(removed.len(), 2);
        let (cleaned, removed) = extract_static(&map, 0.99);
        assert_eq!(cleaned.len(), 2);
        assert!(removed.is_empty());
    }

    #[test]
    fn aggregation_unions_scans_at_half() {
        let a: Vec<Point3> = (0..100).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let b: Vec<Point3> = (0..100).map(|i| Point3::new(i as f64, 5.0, 0.0)).collect();
        let scans = vec![Scan::new(a.clone(), 0.0), Scan::new(b, 1.0)];
        let poses = vec![Pose::identity(); 2];
        let map = aggregate_scans(&scans, &poses, "m", None);
        assert_eq!(map.len(), 200);
        assert!(map.cloud.points.iter().all(|p| p.eps_l == 0.5));
        assert_eq!(map.cloud.points[3].position, a[3]);

        let overlapping = vec![Scan::new(a.clone(), 0.0), Scan::new(a, 1.0)];
        let compacted = aggregate_scans(&overlapping, &poses, "m", Some(0.1));
        assert!(compacted.len() <= 200);
        assert_eq!(compacted.len(), 100);
    }

    #[test]
    fn no_discretization_separates_wall_from_ray_path() {
        // A wall point and a point 0.05 m in front of it on a ray path.
        let wall = Point3::new(5.0, 0.0, 0.0);
        let path = Point3::new(4.95, 0.0, 0.0);
        let map = SessionMapWithEph::from_positions(vec![wall, path], "m");
        let mut config = cfg();
        config.knn = 1;
        // Endpoint at the wall; a free sample passing through the path point.
        let rays = RaySampleSet {
            scans: vec![ScanRays {
                scan_index: 0,
                occupied: vec![wall],
                free: vec![Point3::new(4.9, 0.0, 0.0)],
            }],
        };
        let out = propagate_ephemerality(&map, &rays, &config);
        assert!(out.cloud.points[0].eps_l < 0.5);
        assert!(out.cloud.points[1].eps_l > 0.5);
    }
}
