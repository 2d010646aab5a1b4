//! Recursive binary Bayes fusion shared by the local and global ephemerality updates.

use crate::model::clamp_finite;

/// Posterior of a binary belief `prior` after evidence `evidence`, without clamping.
#[inline]
pub fn fuse_unclamped(prior: f64, evidence: f64) -> f64 {
    let num = evidence * prior;
    num / (num + (1.0 - evidence) * (1.0 - prior))
}

/// [`fuse_unclamped`] followed by the ephemerality saturation clamp.
#[inline]
pub fn fuse(prior: f64, evidence: f64) -> f64 {
    clamp_finite(fuse_unclamped(prior, evidence))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neutral_evidence_is_a_fixed_point() {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert_eq!(fuse_unclamped(p, 0.5), p);
        }
    }

    #[test]
    fn fusion_is_symmetric_in_its_arguments() {
        assert_eq!(fuse_unclamped(0.3, 0.8), fuse_unclamped(0.8, 0.3));
    }
}
