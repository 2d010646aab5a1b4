//! End-to-end orchestration: the base map from a first session, then
//! align → clean → merge for every later session.

use crate::alignment::{rank_loop_candidates, select_seed, zipper_align, AlignedSession, LoopCandidate};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::model::{validate_session, AttributedPoint, AttributedPointCloud, Pose, Scan, Session};
use crate::removal::{clean_session, CleanedSession};
use crate::spatial::CoverageGrid;
use crate::update::{merge_and_update, quantize, Classification, DeltaMap};

/// Everything carried from one session to the next.
#[derive(Clone, Debug)]
pub struct LifelongMap {
    pub map: AttributedPointCloud,
    /// Session ids merged so far, oldest first.
    pub lineage: Vec<String>,
    pub config_hash: u64,
    /// Union of every merged session's observed region.
    pub coverage: CoverageGrid,
    /// Scans of the most recent session with their map-frame poses, used to seed loop detection.
    pub anchors: Vec<(Scan, Pose)>,
}

/// Rounds positions to the archive's 32-bit precision so delta records match
/// archived points bit for bit.
pub fn to_archive_precision(cloud: &AttributedPointCloud) -> AttributedPointCloud {
    AttributedPointCloud::new(
        cloud
            .points
            .iter()
            .map(|p| AttributedPoint::new(quantize(&p.position), p.eps_l, p.eps_g))
            .collect(),
        cloud.frame_id.clone(),
    )
}

fn checked_session(session: &Session, config: &PipelineConfig) -> Result<()> {
    config.validate()?;
    validate_session(session, config).into_result()
}

fn anchors_of(session: &Session, poses: &[Pose]) -> Vec<(Scan, Pose)> {
    session.scans.iter().cloned().zip(poses.iter().copied()).collect()
}

#[derive(Clone, Debug)]
pub struct InitOutput {
    pub map: LifelongMap,
    pub cleaned: CleanedSession,
}

/// Base case: the first session defines the map frame and `ε_g = ε_l`.
pub fn init_map(session: &Session, session_id: &str, config: &PipelineConfig) -> Result<InitOutput> {
    checked_session(session, config)?;
    let cleaned = clean_session(&session.scans, &session.poses, &session.frame_id, config);
    if cleaned.cleaned.is_empty() {
        return Err(Error::InvalidInput("every point of the first session was removed".into()));
    }
    let base = AttributedPointCloud::new(
        cleaned
            .cleaned
            .points
            .iter()
            .map(|p| AttributedPoint::new(p.position, p.eps_l, p.eps_l))
            .collect(),
        session.frame_id.clone(),
    );
    let map = LifelongMap {
        map: to_archive_precision(&base),
        lineage: vec![session_id.to_owned()],
        config_hash: config.hash(),
        coverage: cleaned.coverage.clone(),
        anchors: anchors_of(session, &session.poses),
    };
    Ok(InitOutput { map, cleaned })
}

/// Descriptor candidates verified by registration before the zipper starts.
pub const SEED_CANDIDATES: usize = 8;

/// How the new session is placed relative to the map before refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Seed {
    /// Search the map's anchor scans with the polar descriptor, then verify
    /// the best few candidates by registration.
    Detect,
    /// Use a user-supplied local-to-map transform, anchored at scan 0.
    Manual(Pose),
}

#[derive(Clone, Debug)]
pub struct UpdateOutput {
    pub map: LifelongMap,
    pub delta: DeltaMap,
    pub seed: LoopCandidate,
    pub aligned: AlignedSession,
    pub cleaned: CleanedSession,
    pub classification: Classification,
}

/// Recursive case: alignment, then dynamic removal, then the map update.
pub fn update_map(
    prev: &LifelongMap,
    session: &Session,
    session_id: &str,
    config: &PipelineConfig,
    seed: Seed,
) -> Result<UpdateOutput> {
    checked_session(session, config)?;
    if prev.coverage.cell_size() != config.coverage_cell {
        return Err(Error::InvalidInput(format!(
            "map coverage cell {} differs from configured {}",
            prev.coverage.cell_size(),
            config.coverage_cell
        )));
    }
    let seed = match seed {
        Seed::Detect => {
            let ranked = rank_loop_candidates(&prev.anchors, session, config.max_range)?;
            select_seed(&prev.map, session, &ranked, config.loop_gate, SEED_CANDIDATES, config)?
        }
        Seed::Manual(transform) => LoopCandidate {
            map_scan_index: 0,
            session_scan_index: 0,
            initial_transform: transform,
            descriptor_distance: 0.0,
        },
    };
    let aligned = zipper_align(&prev.map, session, &seed, config)?;
    let cleaned = clean_session(&session.scans, &aligned.refined_poses, &prev.map.frame_id, config);
    let merged = merge_and_update(
        &prev.map,
        &cleaned.cleaned,
        Some(&prev.coverage),
        Some(&cleaned.coverage),
        config,
        session_id,
    )?;
    let mut coverage = prev.coverage.clone();
    coverage.union_with(&cleaned.coverage);
    let mut lineage = prev.lineage.clone();
    lineage.push(session_id.to_owned());
    let map = LifelongMap {
        map: to_archive_precision(&merged.map),
        lineage,
        config_hash: config.hash(),
        coverage,
        anchors: anchors_of(session, &aligned.refined_poses),
    };
    Ok(UpdateOutput {
        map,
        delta: merged.delta,
        seed,
        aligned,
        cleaned,
        classification: merged.classification,
    })
}
