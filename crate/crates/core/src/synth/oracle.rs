//! Exhaustive-search reference for local ephemerality propagation.

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::removal::{bayes_update_local, propagation_kernel, RaySampleSet, SessionMapWithEph};
use crate::spatial::squared_distance;

pub const ORACLE_MAX_POINTS: usize = 5_000;
pub const ORACLE_MAX_SAMPLES: usize = 50_000;

/// Same propagation order and fusion as the indexed implementation, with
/// neighbors found by sorting every map point by (squared distance, id).
pub fn oracle_ephemerality(
    map: &SessionMapWithEph,
    rays: &RaySampleSet,
    config: &PipelineConfig,
) -> Result<Vec<f64>> {
    if map.len() > ORACLE_MAX_POINTS || rays.len() > ORACLE_MAX_SAMPLES {
        return Err(Error::TooLarge(format!(
            "{} points / {} samples exceeds {ORACLE_MAX_POINTS} / {ORACLE_MAX_SAMPLES}",
            map.len(),
            rays.len()
        )));
    }
    let positions = map.cloud.positions();
    let mut eps = map.eps_l();
    if positions.is_empty() {
        return Ok(eps);
    }
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(positions.len());
    for _ in 0..config.passes {
        for scan in &rays.scans {
            for (kind, sample) in scan.samples() {
                order.clear();
                order.extend(positions.iter().enumerate().map(|(i, p)| (squared_distance(sample, p), i)));
                order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for &(d2, id) in order.iter().take(config.knn) {
                    let f = propagation_kernel(d2.sqrt(), kind, config);
                    eps[id] = bayes_update_local(eps[id], f);
                }
            }
        }
    }
    Ok(eps)
}
