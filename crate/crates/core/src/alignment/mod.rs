//! Session-to-map alignment: loop seeding, weighted GICP and the forward/backward zipper.

pub mod gicp;
pub mod loop_detect;
pub mod zipper;

pub use gicp::{
    unweighted_gicp, weighted_gicp, GicpSettings, PreparedScan, RegistrationResult,
    RegistrationTarget, Weighting,
};
pub use loop_detect::{detect_loop, rank_loop_candidates, LoopCandidate, PolarDescriptor};
pub use zipper::{select_seed, zipper_align, AlignedSession, Attempt, ScanDiagnostic};
