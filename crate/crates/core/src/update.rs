//! Cross-session map update: point classification, global ephemerality rules,
//! delta maps, static-map extraction and change heatmaps.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::belief;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::model::{clamp_finite, AttributedPoint, AttributedPointCloud, Point3, EPS_INIT};
use crate::spatial::{cell_of, voxel_downsample, CellKey, CoverageGrid, KdIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PointCategory {
    /// Present in both the previous map and the session.
    Coexisting,
    /// In the previous map, absent from an observed region of the session.
    Deleted,
    /// New in the session, inside a previously observed region.
    Emerged,
    /// In the previous map, in a region the session did not observe.
    PrevExploredOnly,
    /// New in the session, in a region never observed before.
    NewlyExplored,
}

impl PointCategory {
    pub const ALL: [PointCategory; 5] = [
        PointCategory::Coexisting,
        PointCategory::Deleted,
        PointCategory::Emerged,
        PointCategory::PrevExploredOnly,
        PointCategory::NewlyExplored,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PointCategory::Coexisting => "coexisting",
            PointCategory::Deleted => "deleted",
            PointCategory::Emerged => "emerged",
            PointCategory::PrevExploredOnly => "prev_explored_only",
            PointCategory::NewlyExplored => "newly_explored",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Categories that describe points of the previous map.
    pub fn is_prev_side(self) -> bool {
        matches!(
            self,
            PointCategory::Coexisting | PointCategory::Deleted | PointCategory::PrevExploredOnly
        )
    }
}

/// Category of each point, plus the matched point on the other side for `Coexisting`.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub prev: Vec<(PointCategory, Option<usize>)>,
    pub session: Vec<(PointCategory, Option<usize>)>,
}

impl Classification {
    pub fn count(&self, category: PointCategory) -> usize {
        self.prev
            .iter()
            .chain(self.session.iter())
            .filter(|(c, _)| *c == category)
            .count()
    }
}

fn nearest_within(index: Option<&KdIndex>, p: &Point3, radius: f64) -> Option<usize> {
    let nn = index?.nearest(p);
    (nn.distance <= radius).then_some(nn.id)
}

/// Nearest-neighbor matching within `nn_radius`, then coverage tests for unmatched points.
pub fn classify_points(
    prev_map: &AttributedPointCloud,
    session_map: &AttributedPointCloud,
    prev_cov: Option<&CoverageGrid>,
    curr_cov: Option<&CoverageGrid>,
    nn_radius: f64,
) -> Result<Classification> {
    let (Some(prev_cov), Some(curr_cov)) = (prev_cov, curr_cov) else {
        return Err(Error::InvalidInput(
            "classification requires coverage grids for both sessions".into(),
        ));
    };
    let prev_index = KdIndex::build(prev_map.positions()).ok();
    let session_index = KdIndex::build(session_map.positions()).ok();
    let prev = prev_map
        .points
        .par_iter()
        .map(|p| match nearest_within(session_index.as_ref(), &p.position, nn_radius) {
            Some(j) => (PointCategory::Coexisting, Some(j)),
            None if curr_cov.contains(&p.position) => (PointCategory::Deleted, None),
            None => (PointCategory::PrevExploredOnly, None),
        })
        .collect();
    let session = session_map
        .points
        .par_iter()
        .map(|p| match nearest_within(prev_index.as_ref(), &p.position, nn_radius) {
            Some(j) => (PointCategory::Coexisting, Some(j)),
            None if prev_cov.contains(&p.position) => (PointCategory::Emerged, None),
            None => (PointCategory::NewlyExplored, None),
        })
        .collect();
    Ok(Classification { prev, session })
}

/// Fuses the previous global belief with the current local one.
pub fn bayes_update_global(prev_eps_g: f64, eps_l: f64) -> f64 {
    belief::fuse(prev_eps_g, eps_l)
}

/// `γ = ρ^{1/3}` with `ρ = min(1, neighbors within r / saturation)`.
pub fn objectness_from_count(count: usize, saturation: f64) -> f64 {
    let rho = (count as f64 / saturation).min(1.0);
    rho.cbrt()
}

/// Objectness of every member of `set` relative to the rest of the set.
pub fn objectness(set: &[Point3], radius: f64, saturation: f64) -> Vec<f64> {
    let Ok(index) = KdIndex::build(set.to_vec()) else {
        return Vec::new();
    };
    set.par_iter()
        .map(|p| objectness_from_count(index.radius_count(p, radius), saturation))
        .collect()
}

/// Deleted points: Bayes fusion of the previous belief with the (clamped) objectness.
pub fn update_deleted(prev_eps_g: f64, gamma: f64) -> f64 {
    belief::fuse(prev_eps_g, clamp_finite(gamma))
}

/// Emerged points: `clamp(k · (2 − γ) · ε_l)`.
pub fn update_emerged(eps_l: f64, gamma: f64, k: f64) -> f64 {
    clamp_finite(k * (2.0 - gamma) * eps_l)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaRecord {
    pub position: Point3,
    pub category: PointCategory,
    pub eps_g_before: f64,
    pub eps_g_after: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl DeltaRecord {
    pub fn new(position: Point3, category: PointCategory, before: f64, after: f64, gamma: f64) -> Self {
        DeltaRecord {
            position,
            category,
            eps_g_before: before,
            eps_g_after: after,
            delta: after - before,
            gamma,
        }
    }
}

/// Per-session change log. Records of previous-map points come first, in map
/// order, followed by the points the session added, in the order they were
/// appended to the map. New points use 0.5 as their "before" value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeltaMap {
    pub session_id: String,
    pub config_hash: u64,
    pub records: Vec<DeltaRecord>,
}

#[derive(Clone, Debug)]
pub struct MergeOutput {
    pub map: AttributedPointCloud,
    pub delta: DeltaMap,
    pub classification: Classification,
}

/// Rounds coordinates to the archive's 32-bit precision.
pub fn quantize(p: &Point3) -> Point3 {
    Point3::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64)
}

/// Merges a cleaned session map into the previous lifelong map.
pub fn merge_and_update(
    prev_map: &AttributedPointCloud,
    cleaned_session: &AttributedPointCloud,
    prev_cov: Option<&CoverageGrid>,
    curr_cov: Option<&CoverageGrid>,
    config: &PipelineConfig,
    session_id: &str,
) -> Result<MergeOutput> {
    if cleaned_session.is_empty() {
        return Err(Error::InvalidInput("cleaned session map is empty".into()));
    }
    let session = AttributedPointCloud::new(
        cleaned_session
            .points
            .iter()
            .map(|p| AttributedPoint::new(quantize(&p.position), p.eps_l, p.eps_g))
            .collect(),
        cleaned_session.frame_id.clone(),
    );
    let classification =
        classify_points(prev_map, &session, prev_cov, curr_cov, config.nn_radius)?;

    let gammas_of = |side: &[(PointCategory, Option<usize>)], cloud: &AttributedPointCloud, cat| {
        let members: Vec<usize> = side
            .iter()
            .enumerate()
            .filter(|(_, (c, _))| *c == cat)
            .map(|(i, _)| i)
            .collect();
        let positions: Vec<Point3> = members.iter().map(|&i| cloud.points[i].position).collect();
        let gammas = objectness(&positions, config.density_radius, config.density_saturation);
        members.into_iter().zip(gammas).collect::<HashMap<usize, f64>>()
    };
    let deleted_gamma = gammas_of(&classification.prev, prev_map, PointCategory::Deleted);
    let emerged_gamma = gammas_of(&classification.session, &session, PointCategory::Emerged);

    let mut points = Vec::with_capacity(prev_map.len() + session.len());
    let mut records = Vec::new();
    for (i, (p, (category, matched))) in prev_map.points.iter().zip(&classification.prev).enumerate() {
        let mut out = *p;
        let gamma = match category {
            PointCategory::Coexisting => {
                let eps_l = session.points[matched.expect("coexisting points are matched")].eps_l;
                out.eps_g = bayes_update_global(p.eps_g, eps_l);
                out.eps_l = eps_l;
                0.0
            }
            PointCategory::Deleted => {
                let gamma = deleted_gamma[&i];
                out.eps_g = update_deleted(p.eps_g, gamma);
                gamma
            }
            _ => 0.0,
        };
        if *category == PointCategory::Deleted || out.eps_g != p.eps_g {
            records.push(DeltaRecord::new(p.position, *category, p.eps_g, out.eps_g, gamma));
        }
        points.push(out);
    }
    for (i, (p, (category, _))) in session.points.iter().zip(&classification.session).enumerate() {
        let (eps_g, gamma) = match category {
            PointCategory::Emerged => {
                let gamma = emerged_gamma[&i];
                (update_emerged(p.eps_l, gamma, config.k_uncertainty), gamma)
            }
            PointCategory::NewlyExplored => (clamp_finite(p.eps_l), 0.0),
            _ => continue,
        };
        records.push(DeltaRecord::new(p.position, *category, EPS_INIT, eps_g, gamma));
        points.push(AttributedPoint::new(p.position, p.eps_l, eps_g));
    }
    let mut map = AttributedPointCloud::new(points, prev_map.frame_id.clone());
    if config.compact {
        map = voxel_downsample(&map, config.voxel_size);
    }
    Ok(MergeOutput {
        map,
        delta: DeltaMap {
            session_id: session_id.to_owned(),
            config_hash: config.hash(),
            records,
        },
        classification,
    })
}

fn position_key(p: &Point3) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
}

/// Applies a delta map forward to the map it was computed from.
pub fn replay_delta(prev_map: &AttributedPointCloud, delta: &DeltaMap, config: &PipelineConfig) -> Result<AttributedPointCloud> {
    let mut slots: HashMap<[u64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in prev_map.points.iter().enumerate().rev() {
        slots.entry(position_key(&p.position)).or_default().push(i);
    }
    let mut points = prev_map.points.clone();
    let mut appended = Vec::new();
    for r in &delta.records {
        if r.category.is_prev_side() {
            let i = slots
                .get_mut(&position_key(&r.position))
                .and_then(|v| v.pop())
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "delta record at ({}, {}, {}) has no matching map point",
                        r.position.x, r.position.y, r.position.z
                    ))
                })?;
            points[i].eps_g = r.eps_g_after;
        } else {
            appended.push(AttributedPoint::new(r.position, r.eps_g_after, r.eps_g_after));
        }
    }
    points.extend(appended);
    let mut map = AttributedPointCloud::new(points, prev_map.frame_id.clone());
    if config.compact {
        map = voxel_downsample(&map, config.voxel_size);
    }
    Ok(map)
}

/// Inverse of [`replay_delta`]: restores previous ε_g and drops appended points.
///
/// Exact only when compaction merged no cells during the forward update.
pub fn rollback_delta(new_map: &AttributedPointCloud, delta: &DeltaMap) -> Result<AttributedPointCloud> {
    let mut slots: HashMap<[u64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in new_map.points.iter().enumerate().rev() {
        slots.entry(position_key(&p.position)).or_default().push(i);
    }
    let mut keep = vec![true; new_map.len()];
    let mut points = new_map.points.clone();
    for r in &delta.records {
        let i = slots
            .get_mut(&position_key(&r.position))
            .and_then(|v| v.pop())
            .ok_or_else(|| Error::InvalidInput("delta record has no matching map point".into()))?;
        if r.category.is_prev_side() {
            points[i].eps_g = r.eps_g_before;
        } else {
            keep[i] = false;
        }
    }
    let points = points
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect();
    Ok(AttributedPointCloud::new(points, new_map.frame_id.clone()))
}

/// Points with `ε_g < τ_g`.
pub fn extract_static_map(map: &AttributedPointCloud, tau_g: f64) -> AttributedPointCloud {
    AttributedPointCloud::new(
        map.points.iter().filter(|p| p.eps_g < tau_g).copied().collect(),
        map.frame_id.clone(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapCell {
    pub cell: CellKey,
    pub count: usize,
    pub value: f64,
}

/// Per-cell count of records with `|Δε_g| > floor` over all delta maps,
/// normalized by the busiest cell. Cells are sorted by key.
pub fn export_heatmap(deltas: &[DeltaMap], cell: f64, floor: f64) -> Result<Vec<HeatmapCell>> {
    if deltas.is_empty() {
        return Err(Error::InvalidInput("heatmap needs at least one delta map".into()));
    }
    if !(cell > 0.0) {
        return Err(Error::InvalidInput("heatmap cell must be positive".into()));
    }
    let mut counts: BTreeMap<CellKey, usize> = BTreeMap::new();
    for d in deltas {
        for r in &d.records {
            let key = cell_of(&r.position, cell);
            let slot = counts.entry(key).or_insert(0);
            if r.delta.abs() > floor {
                *slot += 1;
            }
        }
    }
    let max = counts.values().copied().max().unwrap_or(0);
    Ok(counts
        .into_iter()
        .map(|(cell, count)| HeatmapCell {
            cell,
            count,
            value: if max == 0 { 0.0 } else { count as f64 / max as f64 },
        })
        .collect())
}
