//! Fixtures shared by the benchmarks.

use resonance_core::PotentialSpec;

/// Bump of height 1 on `[0, 0.6]` followed by a well of depth 3 on `(0.6, 2]`.
pub fn bump_well() -> PotentialSpec {
    PotentialSpec::piecewise_constant(vec![0.0, 0.6, 2.0], vec![1.0, -3.0])
        .expect("valid fixture")
        .with_bump_width(0.6)
        .expect("valid bump width")
}
