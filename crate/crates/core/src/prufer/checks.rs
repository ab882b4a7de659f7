//! Runtime checks of the growth bound and cone invariance for `P(h) + k^2`.

use super::{integrate_phase_trace, PhasePoint, PhaseProblem, PruferError};

/// Values of the normalised comparison Wronskians below this count as zero.
const ZERO_WRONSKIAN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    /// `sup |V + k^2|` over the trace span.
    pub bound_m: f64,
    pub pairs_checked: usize,
    /// Smallest `(1 + M)|x1 - x0|/(2h) - |log L(x1) - log L(x0)|` over all pairs.
    pub worst_margin: f64,
    pub worst_pair: (f64, f64),
}

impl GrowthReport {
    pub fn passes(&self, slack: f64) -> bool {
        self.worst_margin >= -slack
    }
}

/// Checks `L(x1) <= exp((1 + M)|x1 - x0| / (2h)) L(x0)` for every ordered pair
/// of trace points, with `M = sup |V + k^2|`.
pub fn check_growth_bound(
    problem: &PhaseProblem,
    trace: &[PhasePoint],
) -> Result<GrowthReport, PruferError> {
    let k2 = problem.k * problem.k;
    let (lo, hi) = trace
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
            (l.min(p.x), h.max(p.x))
        });
    let bound_m = if trace.len() < 2 || lo >= hi {
        0.0
    } else {
        let (vmin, vmax) = problem
            .potential
            .bounds_on(lo.max(0.0), hi.min(problem.potential.support_right()))?;
        (vmin + k2).abs().max((vmax + k2).abs())
    };
    let rate = (1.0 + bound_m) / (2.0 * problem.h);

    let mut report = GrowthReport {
        bound_m,
        pairs_checked: 0,
        worst_margin: f64::INFINITY,
        worst_pair: (f64::NAN, f64::NAN),
    };
    for (i, a) in trace.iter().enumerate() {
        for b in &trace[i..] {
            let margin = rate * (b.x - a.x).abs() - (b.log_length - a.log_length).abs();
            report.pairs_checked += 1;
            if margin < report.worst_margin {
                report.worst_margin = margin;
                report.worst_pair = (a.x, b.x);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeReport {
    /// `sqrt(inf V + k^2)` and `sqrt(sup V + k^2)` on the interval.
    pub a_eff: f64,
    pub b_eff: f64,
    pub points: usize,
    /// Smallest relative step change of `W_+ = W(u, e^{b x/h})`.
    pub worst_w_plus: f64,
    /// Smallest relative step change of `W_- = W(e^{-a x/h}, u)`.
    pub worst_w_minus: f64,
    /// Smallest `cos θ - 1/sqrt(1 + b^2)`, i.e. `(u - L/sqrt(1+b^2)) / L`.
    pub worst_cone: f64,
}

impl ConeReport {
    pub fn worst_margin(&self) -> f64 {
        self.worst_w_plus
            .min(self.worst_w_minus)
            .min(self.worst_cone)
    }

    pub fn passes(&self, slack: f64) -> bool {
        self.worst_margin() >= -slack
    }
}

/// Relative change of `W = exp(lin) * w` between consecutive points, where `w`
/// is the angular factor. Zero Wronskians only need to stay nonnegative.
/// `noise` is the absolute resolution of `w`; a decrease within it is not
/// counted, since near a fixed point `w` is pure cancellation.
fn wronskian_step(w_prev: f64, w_next: f64, dlin: f64, noise: f64) -> f64 {
    if w_prev.abs() <= ZERO_WRONSKIAN {
        return w_next.min(0.0);
    }
    (w_next * dlin.exp() - w_prev + noise) / w_prev
}

/// Absolute resolution of `c cos θ ± sin θ` given the per-step angle error.
fn angular_noise(c: f64, theta: f64, tol: f64) -> f64 {
    (1.0 + c) * (tol + 8.0 * f64::EPSILON * (1.0 + theta.abs()))
}

/// Integrates from `start` (at `x0`) to `x1` and verifies that the comparison
/// Wronskians `W_+`, `W_-` never decrease and that `u >= L / sqrt(1 + b^2)`.
pub fn check_cone_invariance(
    problem: &PhaseProblem,
    x0: f64,
    x1: f64,
    start: &PhasePoint,
) -> Result<ConeReport, PruferError> {
    if !(x0 < x1) || (start.x - x0).abs() > 1e-12 * (1.0 + x0.abs()) {
        return Err(PruferError::Hypothesis(format!(
            "need x0 < x1 and start at x0 (x0 = {x0}, x1 = {x1}, start.x = {})",
            start.x
        )));
    }
    let k2 = problem.k * problem.k;
    let (vmin, vmax) = problem.potential.bounds_on(x0, x1)?;
    if vmin + k2 <= 0.0 {
        return Err(PruferError::Hypothesis(format!(
            "inf V + k^2 = {} is not positive on [{x0}, {x1}]",
            vmin + k2
        )));
    }
    let a = (vmin + k2).sqrt();
    let b = (vmax + k2).sqrt();
    let w_plus = |t: f64| b * t.cos() - t.sin();
    let w_minus = |t: f64| a * t.cos() + t.sin();
    if w_plus(start.theta) < -ZERO_WRONSKIAN || w_minus(start.theta) < -ZERO_WRONSKIAN {
        return Err(PruferError::Hypothesis(format!(
            "start angle {} is outside the cone (W+ ~ {:.3e}, W- ~ {:.3e})",
            start.theta,
            w_plus(start.theta),
            w_minus(start.theta)
        )));
    }

    let trace = integrate_phase_trace(problem, start, x1)?;
    let cone_floor = 1.0 / (1.0 + b * b).sqrt();
    let mut report = ConeReport {
        a_eff: a,
        b_eff: b,
        points: trace.len(),
        worst_w_plus: f64::INFINITY,
        worst_w_minus: f64::INFINITY,
        worst_cone: f64::INFINITY,
    };
    for p in &trace {
        report.worst_cone = report.worst_cone.min(p.theta.cos() - cone_floor);
    }
    for w in trace.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let dx = q.x - p.x;
        let dlog = q.log_length - p.log_length;
        report.worst_w_plus = report.worst_w_plus.min(wronskian_step(
            w_plus(p.theta),
            w_plus(q.theta),
            b * dx / problem.h + dlog,
            angular_noise(b, q.theta, problem.tol),
        ));
        report.worst_w_minus = report.worst_w_minus.min(wronskian_step(
            w_minus(p.theta),
            w_minus(q.theta),
            -a * dx / problem.h + dlog,
            angular_noise(a, q.theta, problem.tol),
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use crate::prufer::integrate_phase_trace;
    use std::f64::consts::PI;

    #[test]
    fn growth_bound_free_exponential() {
        // growth rate k/h against (1 + k^2)/(2h): margin (k - 1)^2/(2h) per unit length
        let zero = PotentialSpec::zero(2.0).unwrap();
        let p = PhaseProblem::new(&zero, 1.0, 0.5, 1e-12).unwrap();
        let trace = integrate_phase_trace(&p, &PhasePoint::start(0.0, 1f64.atan()), 2.0).unwrap();
        let r = check_growth_bound(&p, &trace).unwrap();
        assert!(r.passes(1e-9), "{r:?}");
        assert!(r.worst_margin.abs() < 1e-8);
        let single = check_growth_bound(&p, &trace[..1]).unwrap();
        assert_eq!(single.worst_margin, 0.0);
    }

    #[test]
    fn growth_bound_step_potential() {
        let v = PotentialSpec::piecewise_constant(vec![0.0, 0.7, 1.3, 2.0], vec![4.0, -5.0, 1.0])
            .unwrap();
        let p = PhaseProblem::new(&v, 1.5, 0.1, 1e-10).unwrap();
        let trace = integrate_phase_trace(&p, &PhasePoint::start(0.0, 0.2), 2.0).unwrap();
        let r = check_growth_bound(&p, &trace).unwrap();
        assert!(r.passes(1e-9), "{r:?}");
        assert_eq!(r.bound_m, 6.25);
    }

    #[test]
    fn cone_invariance_neumann_start() {
        let v = PotentialSpec::piecewise_constant(vec![0.0, 0.5, 1.0], vec![1.0, -3.0]).unwrap();
        let p = PhaseProblem::new(&v, 1.0, 0.1, 1e-10).unwrap();
        let r = check_cone_invariance(&p, 0.0, 0.5, &PhasePoint::start(0.0, 0.0)).unwrap();
        assert_eq!(r.a_eff, 2f64.sqrt());
        assert!(r.passes(1e-9), "{r:?}");
    }

    #[test]
    fn cone_boundary_rays_are_invariant() {
        let v = PotentialSpec::piecewise_constant(vec![0.0, 0.5, 1.0], vec![1.0, -3.0]).unwrap();
        let p = PhaseProblem::new(&v, 1.0, 0.1, 1e-10).unwrap();
        let a = 2f64.sqrt();
        // e^{a x/h}: W_+ vanishes identically (a = b here)
        let r = check_cone_invariance(&p, 0.0, 0.5, &PhasePoint::start(0.0, a.atan())).unwrap();
        assert!(r.passes(1e-9), "{r:?}");
        // e^{-a x/h}: W_- vanishes identically
        let r = check_cone_invariance(&p, 0.0, 0.5, &PhasePoint::start(0.0, -a.atan())).unwrap();
        assert!(r.passes(1e-9), "{r:?}");
    }

    #[test]
    fn cone_check_near_attracting_ray() {
        // θ → atan b, so w_+ ~ e^{-2bx/h} ~ 1e-10 and is dominated by rounding
        let v = PotentialSpec::piecewise_constant(vec![0.0, 2.0], vec![3.0]).unwrap();
        let p = PhaseProblem::new(&v, 1.0, 0.25, 1e-12).unwrap();
        let r = check_cone_invariance(&p, 0.0, 1.4, &PhasePoint::start(0.0, 0.0)).unwrap();
        assert!(r.passes(1e-9), "{r:?}");
    }

    #[test]
    fn cone_hypothesis_failures() {
        let v = PotentialSpec::piecewise_constant(vec![0.0, 0.5, 1.0], vec![1.0, -3.0]).unwrap();
        let p = PhaseProblem::new(&v, 1.0, 0.1, 1e-10).unwrap();
        assert!(matches!(
            check_cone_invariance(&p, 0.0, 0.5, &PhasePoint::start(0.0, PI)),
            Err(PruferError::Hypothesis(_))
        ));
        // inf V + k^2 = -2 on [0, 1]
        assert!(matches!(
            check_cone_invariance(&p, 0.0, 1.0, &PhasePoint::start(0.0, 0.0)),
            Err(PruferError::Hypothesis(_))
        ));
    }
}
