//! Forward/backward scan-to-map refinement of a session from a loop seed.

use std::fmt::Write as _;

use crate::alignment::gicp::{GicpSettings, PreparedScan, RegistrationResult, RegistrationTarget, Weighting};
use crate::alignment::loop_detect::LoopCandidate;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::model::{AttributedPointCloud, Pose, Session};

const SEED_GATE_SCHEDULE: [f64; 2] = [4.0, 2.0];

/// Outcome of one registration attempt inside the zipper.
#[derive(Clone, Debug, PartialEq)]
pub enum Attempt {
    Registered(RegistrationResult),
    Failed(String),
}

impl Attempt {
    pub fn converged(&self) -> bool {
        matches!(self, Attempt::Registered(r) if r.converged)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanDiagnostic {
    pub scan_index: usize,
    pub forward: Option<Attempt>,
    pub backward: Attempt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignedSession {
    pub session: Session,
    /// Final map-frame pose of every scan.
    pub refined_poses: Vec<Pose>,
    /// Poses after the forward pass (scans before the seed keep `T_init ∘ T_i`).
    pub forward_poses: Vec<Pose>,
    pub diagnostics: Vec<ScanDiagnostic>,
}

impl AlignedSession {
    /// Wraps a session whose poses are already in the map frame.
    pub fn unaligned(session: Session) -> Self {
        let poses = session.poses.clone();
        let diagnostics = Vec::new();
        AlignedSession {
            session,
            refined_poses: poses.clone(),
            forward_poses: poses,
            diagnostics,
        }
    }

    /// One line per registration: scan index, pass, iterations, cost, inlier fraction.
    pub fn diagnostics_log(&self) -> String {
        let mut out = String::new();
        let mut line = |index: usize, pass: &str, attempt: &Attempt| {
            let _ = match attempt {
                Attempt::Registered(r) => writeln!(
                    out,
                    "scan={index} pass={pass} converged={} iterations={} cost={:.6e} inlier_fraction={:.4}",
                    r.converged, r.iterations, r.final_cost, r.inlier_fraction
                ),
                Attempt::Failed(reason) => {
                    writeln!(out, "scan={index} pass={pass} converged=false error=\"{reason}\"")
                }
            };
        };
        for d in &self.diagnostics {
            if let Some(f) = &d.forward {
                line(d.scan_index, "forward", f);
            }
        }
        for d in self.diagnostics.iter().rev() {
            line(d.scan_index, "backward", &d.backward);
        }
        out
    }
}

fn attempt(target: &RegistrationTarget, scan: &Result<PreparedScan>, init: &Pose) -> (Pose, Attempt) {
    let prepared = match scan {
        Ok(p) => p,
        Err(e) => return (*init, Attempt::Failed(e.to_string())),
    };
    match target.register(prepared, init) {
        Ok(r) if r.final_cost.is_finite() => (r.transform, Attempt::Registered(r)),
        Ok(r) => (*init, Attempt::Registered(r)),
        Err(e) => (*init, Attempt::Failed(e.to_string())),
    }
}

/// Coarse-to-fine registration of the seed scan alone. The descriptor only
/// resolves yaw, so the seed can be off by roughly a scan spacing; widening the
/// gate first pulls it into the basin of the regular gate.
fn refine_seed(
    target: &RegistrationTarget,
    scan: &Result<PreparedScan>,
    t_init: &Pose,
    seed_pose: &Pose,
    settings: &GicpSettings,
) -> (Pose, Option<RegistrationResult>) {
    let Ok(scan) = scan else {
        return (*t_init, None);
    };
    let mut pose = t_init.compose(seed_pose);
    for factor in SEED_GATE_SCHEDULE {
        if let Ok(r) = target.register_with_gate(scan, &pose, factor * settings.max_correspondence) {
            pose = r.transform;
        }
    }
    let last = target.register(scan, &pose).ok();
    if let Some(r) = &last {
        pose = r.transform;
    }
    (pose.compose(&seed_pose.inverse()), last)
}

/// Refines up to `limit` candidates that pass `gate` and keeps the one whose
/// seed scan registers with the largest inlier fraction (earlier rank wins ties).
///
/// Guards against self-similar places, where the best descriptor match can be
/// a mirrored or shifted pose.
pub fn select_seed(
    map: &AttributedPointCloud,
    session: &Session,
    candidates: &[LoopCandidate],
    gate: f64,
    limit: usize,
    config: &PipelineConfig,
) -> Result<LoopCandidate> {
    let Some(best) = candidates.first() else {
        return Err(Error::InvalidInput("no loop candidates".into()));
    };
    if !(best.descriptor_distance <= gate) {
        return Err(Error::NoLoopFound {
            best_distance: best.descriptor_distance,
            gate,
        });
    }
    let settings = GicpSettings::from_config(config);
    let target = RegistrationTarget::new(map, Weighting::Ephemerality, settings)?;
    let mut chosen: Option<(f64, LoopCandidate)> = None;
    for c in candidates.iter().filter(|c| c.descriptor_distance <= gate).take(limit) {
        let s = c.session_scan_index;
        let scan = PreparedScan::new(&session.scans[s].points, &settings);
        let (t_init, result) = refine_seed(&target, &scan, &c.initial_transform, &session.poses[s], &settings);
        let score = result.map_or(-1.0, |r| r.inlier_fraction);
        if chosen.as_ref().is_none_or(|(best, _)| score > *best) {
            let mut refined = c.clone();
            refined.initial_transform = t_init;
            chosen = Some((score, refined));
        }
    }
    Ok(chosen.expect("at least the best candidate passes the gate").1)
}

/// Aligns `session` onto `map` from the seed pair.
///
/// Forward pass, i = s..N: register from `C ∘ T_init ∘ T_i`, where `C`
/// accumulates every earlier forward correction. Backward pass, i = N..1:
/// register from `B ∘ F_i`, where `F_i` is the forward pose (or
/// `T_init ∘ T_i` below the seed) and `B` accumulates backward corrections.
pub fn zipper_align(
    map: &AttributedPointCloud,
    session: &Session,
    seed: &LoopCandidate,
    config: &PipelineConfig,
) -> Result<AlignedSession> {
    let n = session.len();
    let s = seed.session_scan_index;
    if n == 0 || s >= n || session.poses.len() != n {
        return Err(Error::InvalidInput(format!(
            "seed scan index {s} invalid for a session of {n} scans"
        )));
    }
    let settings = GicpSettings::from_config(config);
    let target = RegistrationTarget::new(map, Weighting::Ephemerality, settings)?;
    let prepared: Vec<Result<PreparedScan>> = session
        .scans
        .iter()
        .map(|scan| PreparedScan::new(&scan.points, &settings))
        .collect();
    let (t_init, _) = refine_seed(&target, &prepared[s], &seed.initial_transform, &session.poses[s], &settings);

    let mut forward_attempts: Vec<Option<Attempt>> = vec![None; n];
    let mut forward_poses: Vec<Pose> = session.poses.iter().map(|t| t_init.compose(t)).collect();
    let mut correction = Pose::identity();
    for i in s..n {
        let nominal = t_init.compose(&session.poses[i]);
        let init = correction.compose(&nominal);
        let (refined, outcome) = attempt(&target, &prepared[i], &init);
        // Re-derived from the nominal pose rather than chained, so rounding in
        // the rotation cannot compound from scan to scan.
        correction = refined.compose(&nominal.inverse()).renormalized();
        forward_poses[i] = refined;
        forward_attempts[i] = Some(outcome);
    }

    let mut refined_poses = forward_poses.clone();
    let mut backward_attempts: Vec<Option<Attempt>> = vec![None; n];
    let mut correction = Pose::identity();
    for i in (0..n).rev() {
        let init = correction.compose(&forward_poses[i]);
        let (refined, outcome) = attempt(&target, &prepared[i], &init);
        correction = refined.compose(&forward_poses[i].inverse()).renormalized();
        refined_poses[i] = refined;
        backward_attempts[i] = Some(outcome);
    }

    let diagnostics: Vec<ScanDiagnostic> = (0..n)
        .map(|i| ScanDiagnostic {
            scan_index: i,
            forward: forward_attempts[i].take(),
            backward: backward_attempts[i].take().expect("every scan visited backward"),
        })
        .collect();
    let aligned = AlignedSession {
        session: session.clone(),
        refined_poses,
        forward_poses,
        diagnostics,
    };
    let failed = aligned
        .diagnostics
        .iter()
        .filter(|d| !d.backward.converged())
        .count();
    if failed as f64 > config.max_failed_fraction * n as f64 {
        return Err(Error::AlignmentFailed {
            failed,
            total: n,
            diagnostics: aligned.diagnostics_log().lines().map(str::to_owned).collect(),
        });
    }
    Ok(aligned)
}
