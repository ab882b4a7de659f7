#![allow(dead_code)]

use rand::Rng;
use resonance_core::PotentialSpec;

/// Piecewise-constant potential on `[0, b]` with at most `max_segments`
/// segments and values in `[-vmax, vmax]`.
pub fn random_pc<R: Rng>(rng: &mut R, b: f64, max_segments: usize, vmax: f64) -> PotentialSpec {
    let n = rng.gen_range(1..=max_segments);
    let mut breaks: Vec<f64> = (0..n - 1)
        .map(|_| rng.gen_range(0.05 * b..0.95 * b))
        .collect();
    breaks.push(0.0);
    breaks.push(b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let values = (0..breaks.len() - 1)
        .map(|_| rng.gen_range(-vmax..vmax))
        .collect();
    PotentialSpec::piecewise_constant(breaks, values).unwrap()
}

pub fn bump_well() -> PotentialSpec {
    PotentialSpec::piecewise_constant(vec![0.0, 0.6, 2.0], vec![1.0, -3.0])
        .unwrap()
        .with_bump_width(0.6)
        .unwrap()
}
