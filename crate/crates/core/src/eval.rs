//! Alignment (AC, RMSE, CD) and cleaning (PR, RR, F1) metrics.
//!
//! Metrics that have no defined value (no inliers, empty ground truth) are
//! `None` and print as `undefined`, never as zero.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Point3;
use crate::spatial::KdIndex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentMetrics {
    pub ac: f64,
    pub rmse: Option<f64>,
    pub cd: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CleaningMetrics {
    pub pr: Option<f64>,
    pub rr: Option<f64>,
    pub f1: Option<f64>,
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_owned(), |x| format!("{x:.6}"))
}

pub fn f1_score(pr: f64, rr: f64) -> f64 {
    if pr + rr > 0.0 {
        2.0 * pr * rr / (pr + rr)
    } else {
        0.0
    }
}

/// Nearest-neighbor distance from each query into `target`, in query order.
fn nn_distances(queries: &[Point3], target: &KdIndex) -> Vec<f64> {
    queries.par_iter().map(|q| target.nearest(q).distance).collect()
}

fn inlier_stats(distances: &[f64], sigma: f64) -> (usize, f64, f64) {
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &d in distances {
        if d <= sigma {
            count += 1;
            sum += d;
            sum_sq += d * d;
        }
    }
    (count, sum, sum_sq)
}

/// AC and RMSE use the a→b correspondences; CD adds the mean inlier distance
/// of each direction, each direction gated on its own.
pub fn alignment_metrics(a: &[Point3], b: &[Point3], sigma_inlier: f64) -> Result<AlignmentMetrics> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("alignment metrics need two nonempty clouds".into()));
    }
    let index_a = KdIndex::build(a.to_vec())?;
    let index_b = KdIndex::build(b.to_vec())?;
    let (n_ab, sum_ab, sq_ab) = inlier_stats(&nn_distances(a, &index_b), sigma_inlier);
    let (n_ba, sum_ba, _) = inlier_stats(&nn_distances(b, &index_a), sigma_inlier);
    let ac = n_ab as f64 / a.len() as f64;
    let rmse = (n_ab > 0).then(|| (sq_ab / n_ab as f64).sqrt());
    let cd = (n_ab > 0 && n_ba > 0).then(|| sum_ab / n_ab as f64 + sum_ba / n_ba as f64);
    Ok(AlignmentMetrics { ac, rmse, cd })
}

/// PR: ground-truth static points that kept a cleaned neighbor within
/// `match_radius`. RR: ground-truth dynamic points that lost theirs.
pub fn cleaning_metrics(
    cleaned: &[Point3],
    gt_static: &[Point3],
    gt_dynamic: &[Point3],
    match_radius: f64,
) -> Result<CleaningMetrics> {
    let index = if cleaned.is_empty() {
        None
    } else {
        Some(KdIndex::build(cleaned.to_vec())?)
    };
    let matched = |set: &[Point3]| -> usize {
        match &index {
            None => 0,
            Some(index) => set
                .par_iter()
                .filter(|p| index.nearest(p).distance <= match_radius)
                .count(),
        }
    };
    let pr = (!gt_static.is_empty()).then(|| matched(gt_static) as f64 / gt_static.len() as f64);
    let rr = (!gt_dynamic.is_empty())
        .then(|| (gt_dynamic.len() - matched(gt_dynamic)) as f64 / gt_dynamic.len() as f64);
    let f1 = match (pr, rr) {
        (Some(p), Some(r)) => Some(f1_score(p, r)),
        _ => None,
    };
    Ok(CleaningMetrics { pr, rr, f1 })
}

impl AlignmentMetrics {
    /// Single-line `metric=value` record.
    pub fn record(&self) -> String {
        format!("ac={:.6} rmse={} cd={}", self.ac, show(self.rmse), show(self.cd))
    }

    pub fn table(&self) -> String {
        format!(
            "metric  value\nAC      {:.6}\nRMSE    {}\nCD      {}\n",
            self.ac,
            show(self.rmse),
            show(self.cd)
        )
    }
}

impl CleaningMetrics {
    pub fn record(&self) -> String {
        format!("pr={} rr={} f1={}", show(self.pr), show(self.rr), show(self.f1))
    }

    pub fn table(&self) -> String {
        format!(
            "metric  value\nPR      {}\nRR      {}\nF1      {}\n",
            show(self.pr),
            show(self.rr),
            show(self.f1)
        )
    }
}

impl fmt::Display for AlignmentMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.record())
    }
}

impl fmt::Display for CleaningMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.record())
    }
}
