//! Ephemerality-weighted generalized ICP (distribution-to-distribution).
//!
//! Each correspondence contributes `w · dᵀ (Σ_map + R Σ_scan Rᵀ)⁻¹ d` with
//! `w = 1 − ε_g` of the matched map point. Covariances are plane-regularized.
//! The pose is updated by Gauss–Newton steps composed on the left.

use nalgebra::{Matrix3, Matrix6, Rotation3, SMatrix, SymmetricEigen, Vector3, Vector6};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::model::{AttributedPointCloud, Point3, Pose};
use crate::spatial::{downsample_points, KdIndex};

/// Eigenvalues substituted for the local covariance, largest first.
const PLANE_EIGENVALUES: [f64; 3] = [1.0, 1.0, 1e-3];
const STEP_TOLERANCE: f64 = 1e-6;
const MIN_SCAN_POINTS: usize = 50;
const CHUNK: usize = 512;

type Jacobian = SMatrix<f64, 3, 6>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GicpSettings {
    pub max_iterations: usize,
    pub neighbors: usize,
    pub max_correspondence: f64,
    pub scan_voxel: f64,
    pub max_range: f64,
}

impl GicpSettings {
    pub fn from_config(config: &PipelineConfig) -> Self {
        GicpSettings {
            max_iterations: config.gicp_max_iterations,
            neighbors: config.gicp_neighbors,
            max_correspondence: config.gicp_max_correspondence,
            scan_voxel: config.scan_voxel,
            max_range: config.max_range,
        }
    }
}

impl Default for GicpSettings {
    fn default() -> Self {
        Self::from_config(&PipelineConfig::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegistrationResult {
    pub transform: Pose,
    pub converged: bool,
    pub iterations: usize,
    pub final_cost: f64,
    pub inlier_fraction: f64,
}

/// Covariance of the neighborhood with its spectrum replaced by (1, 1, 1e-3).
pub fn regularized_covariance(neighborhood: &[Point3]) -> Matrix3<f64> {
    if neighborhood.len() < 3 {
        return Matrix3::identity();
    }
    let n = neighborhood.len() as f64;
    let mean = neighborhood
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords)
        / n;
    let mut cov = Matrix3::zeros();
    for p in neighborhood {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = Matrix3::zeros();
    for (rank, &col) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(col);
        out += PLANE_EIGENVALUES[rank] * v * v.transpose();
    }
    out
}

fn covariances_of(points: &[Point3], index: &KdIndex, k: usize) -> Vec<Matrix3<f64>> {
    points
        .par_iter()
        .with_min_len(256)
        .map(|p| {
            let hood: Vec<Point3> = index.knn(p, k).iter().map(|n| *index.point(n.id)).collect();
            regularized_covariance(&hood)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    /// `1 − ε_g` of the matched map point.
    Ephemerality,
    /// Every correspondence weighs 1 (plain GICP).
    Uniform,
}

/// Map side of the registration: index, covariances and per-point weights.
pub struct RegistrationTarget {
    index: KdIndex,
    covariances: Vec<Matrix3<f64>>,
    weights: Vec<f64>,
    settings: GicpSettings,
}

/// Scan side, prepared once and reused across registrations.
#[derive(Clone, Debug)]
pub struct PreparedScan {
    points: Vec<Point3>,
    covariances: Vec<Matrix3<f64>>,
}

impl PreparedScan {
    /// Range-filters and decimates the scan, then estimates local covariances.
    pub fn new(points: &[Point3], settings: &GicpSettings) -> Result<Self> {
        let in_range: Vec<Point3> = points
            .iter()
            .filter(|p| p.coords.norm() <= settings.max_range)
            .copied()
            .collect();
        let decimated = if settings.scan_voxel > 0.0 {
            downsample_points(&in_range, settings.scan_voxel)
        } else {
            in_range
        };
        if decimated.len() < MIN_SCAN_POINTS {
            return Err(Error::InvalidInput(format!(
                "scan has {} points after filtering, at least {MIN_SCAN_POINTS} required",
                decimated.len()
            )));
        }
        let index = KdIndex::build(decimated.clone())?;
        let covariances = covariances_of(&decimated, &index, settings.neighbors);
        Ok(PreparedScan {
            points: decimated,
            covariances,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy)]
struct Normal {
    h: Matrix6<f64>,
    g: Vector6<f64>,
    cost: f64,
    inliers: usize,
}

impl Normal {
    fn zero() -> Self {
        Normal {
            h: Matrix6::zeros(),
            g: Vector6::zeros(),
            cost: 0.0,
            inliers: 0,
        }
    }

    fn add(&mut self, other: &Normal) {
        self.h += other.h;
        self.g += other.g;
        self.cost += other.cost;
        self.inliers += other.inliers;
    }
}

#[inline]
fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Exponential map of `[ω; v]` onto SE(3).
pub fn se3_exp(delta: &Vector6<f64>) -> Pose {
    let omega = Vector3::new(delta[0], delta[1], delta[2]);
    let v = Vector3::new(delta[3], delta[4], delta[5]);
    let theta = omega.norm();
    let w = skew(&omega);
    let (a, b) = if theta < 1e-8 {
        (0.5 - theta * theta / 24.0, 1.0 / 6.0 - theta * theta / 120.0)
    } else {
        let t2 = theta * theta;
        ((1.0 - theta.cos()) / t2, (theta - theta.sin()) / (t2 * theta))
    };
    let jac = Matrix3::identity() + a * w + b * w * w;
    Pose::new(*Rotation3::new(omega).matrix(), jac * v)
}

impl RegistrationTarget {
    pub fn new(map: &AttributedPointCloud, weighting: Weighting, settings: GicpSettings) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::InvalidInput("registration map is empty".into()));
        }
        let positions = map.positions();
        let index = KdIndex::build(positions.clone())?;
        let covariances = covariances_of(&positions, &index, settings.neighbors);
        let weights = map
            .points
            .iter()
            .map(|p| match weighting {
                Weighting::Ephemerality => 1.0 - p.eps_g,
                Weighting::Uniform => 1.0,
            })
            .collect();
        Ok(RegistrationTarget {
            index,
            covariances,
            weights,
            settings,
        })
    }

    pub fn settings(&self) -> &GicpSettings {
        &self.settings
    }

    fn linearize(&self, scan: &PreparedScan, pose: &Pose, gate: f64) -> Normal {
        let gate2 = gate * gate;
        let rot = pose.rotation;
        let partials: Vec<Normal> = scan
            .points
            .par_chunks(CHUNK)
            .zip(scan.covariances.par_chunks(CHUNK))
            .map(|(pts, covs)| {
                let mut acc = Normal::zero();
                for (p, cov_s) in pts.iter().zip(covs) {
                    let q = pose.transform_point(p);
                    let nn = self.index.knn(&q, 1)[0];
                    if nn.distance * nn.distance > gate2 {
                        continue;
                    }
                    acc.inliers += 1;
                    let w = self.weights[nn.id];
                    if w <= 0.0 {
                        continue;
                    }
                    let combined = self.covariances[nn.id] + rot * cov_s * rot.transpose();
                    let Some(info) = combined.try_inverse() else {
                        continue;
                    };
                    let d = self.index.point(nn.id) - q;
                    let mut jac = Jacobian::zeros();
                    jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&q.coords));
                    jac.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-Matrix3::identity()));
                    let jt_info = jac.transpose() * info;
                    acc.h += w * jt_info * jac;
                    acc.g += w * jt_info * d;
                    acc.cost += w * d.dot(&(info * d));
                }
                acc
            })
            .collect();
        // Fixed chunking plus an ordered sum keeps results independent of the thread count.
        let mut total = Normal::zero();
        for p in &partials {
            total.add(p);
        }
        total
    }

    pub fn register(&self, scan: &PreparedScan, init: &Pose) -> Result<RegistrationResult> {
        self.register_with_gate(scan, init, self.settings.max_correspondence)
    }

    /// [`register`](Self::register) with an explicit correspondence gate.
    pub fn register_with_gate(&self, scan: &PreparedScan, init: &Pose, gate: f64) -> Result<RegistrationResult> {
        let mut pose = *init;
        let mut converged = false;
        let mut iterations = 0;
        let mut normal = Normal::zero();
        for _ in 0..self.settings.max_iterations {
            iterations += 1;
            normal = self.linearize(scan, &pose, gate);
            if normal.inliers < 6 {
                return Err(Error::Degenerate { condition: 0.0 });
            }
            let eig = SymmetricEigen::new(normal.h);
            let max = eig.eigenvalues.amax();
            let min = eig.eigenvalues.min();
            let condition = if max > 0.0 { min / max } else { 0.0 };
            if !condition.is_finite() || condition <= 1e-12 {
                return Err(Error::Degenerate { condition });
            }
            let step = match normal.h.cholesky() {
                Some(ch) => ch.solve(&(-normal.g)),
                None => return Err(Error::Degenerate { condition }),
            };
            pose = se3_exp(&step).compose(&pose).renormalized();
            if step.norm() < STEP_TOLERANCE {
                converged = true;
                break;
            }
        }
        if converged {
            normal = self.linearize(scan, &pose, gate);
        }
        Ok(RegistrationResult {
            transform: pose,
            converged: converged && normal.cost.is_finite(),
            iterations,
            final_cost: normal.cost,
            inlier_fraction: normal.inliers as f64 / scan.len() as f64,
        })
    }
}

/// Registers `scan` (sensor frame) against `map`, starting from `init`.
pub fn weighted_gicp(
    scan: &[Point3],
    map: &AttributedPointCloud,
    init: &Pose,
    settings: &GicpSettings,
) -> Result<RegistrationResult> {
    let target = RegistrationTarget::new(map, Weighting::Ephemerality, *settings)?;
    let prepared = PreparedScan::new(scan, settings)?;
    target.register(&prepared, init)
}

/// Same as [`weighted_gicp`] with every correspondence weighted equally.
pub fn unweighted_gicp(
    scan: &[Point3],
    map: &AttributedPointCloud,
    init: &Pose,
    settings: &GicpSettings,
) -> Result<RegistrationResult> {
    let target = RegistrationTarget::new(map, Weighting::Uniform, *settings)?;
    let prepared = PreparedScan::new(scan, settings)?;
    target.register(&prepared, init)
}
