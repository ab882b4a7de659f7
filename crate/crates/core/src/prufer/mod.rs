//! Prüfer (polar) form of `(-h^2 d^2/dx^2 + V + k^2) u = 0`.
//!
//! The solution vector `(u, h u_x)` is tracked as a lifted angle `theta`, a
//! log-length `log L` and the scaled mass `J = (integral of u^2) / L^2`.
//! Working in log scale keeps `L ~ exp(kx/h)` representable for small `h`,
//! and `J` gives `d theta / dk` without forming `L^2` separately.

mod checks;
mod integrator;
mod oracle;

pub use checks::{check_cone_invariance, check_growth_bound, ConeReport, GrowthReport};
pub use integrator::{integrate_phase, integrate_phase_trace};
pub use oracle::{propagate_oracle, transfer_matrix_constant};

use crate::potential::{PotentialError, PotentialSpec};
use thiserror::Error;

/// Default local error tolerance of the phase integrator.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PruferError {
    #[error("invalid phase problem: {0}")]
    InvalidProblem(String),
    #[error("position {x} outside the domain [0, {b}]")]
    OutOfDomain { x: f64, b: f64 },
    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },
    #[error("phase points at different positions ({a} vs {b})")]
    MismatchedPositions { a: f64, b: f64 },
    #[error("transfer-matrix oracle needs a piecewise-constant potential")]
    NotPiecewiseConstant,
    #[error("lemma hypothesis not met: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// State of a real solution in Prüfer variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    /// Lifted polar angle of `(u, h u_x)`; never reduced mod 2π.
    pub theta: f64,
    pub log_length: f64,
    /// `J(x) = |integral of u^2 from the start to x| / L(x)^2`.
    pub mass_scaled: f64,
}

impl PhasePoint {
    /// Unit-length start at `x` with angle `theta`.
    pub fn start(x: f64, theta: f64) -> Self {
        Self {
            x,
            theta,
            log_length: 0.0,
            mass_scaled: 0.0,
        }
    }

    /// `(u, h u_x)`; overflows for very large `log_length`.
    pub fn solution_vector(&self) -> (f64, f64) {
        let l = self.log_length.exp();
        (l * self.theta.cos(), l * self.theta.sin())
    }
}

/// `(P(h) + k^2) u = 0` for a given potential, with integrator tolerance.
#[derive(Debug, Clone, Copy)]
pub struct PhaseProblem<'a> {
    pub potential: &'a PotentialSpec,
    pub k: f64,
    pub h: f64,
    pub tol: f64,
}

impl<'a> PhaseProblem<'a> {
    pub fn new(
        potential: &'a PotentialSpec,
        k: f64,
        h: f64,
        tol: f64,
    ) -> Result<Self, PruferError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(PruferError::InvalidProblem(format!(
                "k must be positive, got {k}"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(PruferError::InvalidProblem(format!(
                "h must be positive, got {h}"
            )));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(PruferError::InvalidProblem(format!(
                "tol must be positive, got {tol}"
            )));
        }
        Ok(Self {
            potential,
            k,
            h,
            tol,
        })
    }

    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..*self }
    }

    pub(crate) fn check_position(&self, x: f64) -> Result<(), PruferError> {
        let b = self.potential.support_right();
        let slack = 1e-12 * b;
        if x < -slack || x > b + slack || !x.is_finite() {
            return Err(PruferError::OutOfDomain { x, b });
        }
        Ok(())
    }
}

/// Right-hand side of the phase system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRates {
    pub dtheta: f64,
    pub dlog_length: f64,
    pub dmass: f64,
}

#[inline]
pub(crate) fn rates(v_plus_k2: f64, h: f64, theta: f64, mass: f64, orientation: f64) -> PhaseRates {
    let (s, c) = theta.sin_cos();
    let dtheta = (v_plus_k2 * c * c - s * s) / h;
    let dlog_length = (1.0 + v_plus_k2) * s * c / h;
    PhaseRates {
        dtheta,
        dlog_length,
        dmass: orientation * c * c - 2.0 * mass * dlog_length,
    }
}

/// Derivatives in `x` of `(theta, log L, J)` for forward integration.
pub fn phase_rhs(problem: &PhaseProblem, x: f64, theta: f64, mass_scaled: f64) -> PhaseRates {
    let q = problem.potential.evaluate(x) + problem.k * problem.k;
    rates(q, problem.h, theta, mass_scaled, 1.0)
}

/// `sin(theta_b - theta_a)`: the Wronskian `W(u_a, u_b)` divided by `L_a L_b`.
pub fn scaled_wronskian(a: &PhasePoint, b: &PhasePoint) -> Result<f64, PruferError> {
    if (a.x - b.x).abs() > 1e-12 * (1.0 + a.x.abs()) {
        return Err(PruferError::MismatchedPositions { a: a.x, b: b.x });
    }
    Ok((b.theta - a.theta).sin())
}

/// `d theta / dk` at `x_target` for start data independent of `k`:
/// `2k/h` times the signed mass integral over `L^2`.
pub fn dtheta_dk(
    problem: &PhaseProblem,
    start: &PhasePoint,
    x_target: f64,
) -> Result<f64, PruferError> {
    let start = PhasePoint {
        mass_scaled: 0.0,
        ..*start
    };
    let end = integrate_phase(problem, &start, x_target)?;
    let orientation = if x_target >= start.x { 1.0 } else { -1.0 };
    Ok(orientation * 2.0 * problem.k * end.mass_scaled / problem.h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rhs_fixed_points() {
        let zero = PotentialSpec::zero(1.0).unwrap();
        for k in [0.3, 1.0, 2.5] {
            let p = PhaseProblem::new(&zero, k, 0.7, 1e-10).unwrap();
            assert!(phase_rhs(&p, 0.4, k.atan(), 0.0).dtheta.abs() < 1e-15);
            assert!(phase_rhs(&p, 0.4, -k.atan(), 0.0).dtheta.abs() < 1e-15);
        }
        let v0 = PotentialSpec::piecewise_constant(vec![0.0, 1.0], vec![3.0]).unwrap();
        let k = 1.0_f64;
        let mu = (k * k + 3.0).sqrt();
        let p = PhaseProblem::new(&v0, k, 0.2, 1e-10).unwrap();
        assert!(phase_rhs(&p, 0.5, mu.atan(), 0.0).dtheta.abs() < 1e-14);
    }

    #[test]
    fn rhs_matches_cartesian_derivative() {
        // theta' = (u w' - w u')/L^2 with h u' = w, h w' = q u
        let zero = PotentialSpec::zero(1.0).unwrap();
        let p = PhaseProblem::new(&zero, 1.3, 0.5, 1e-10).unwrap();
        let theta = 0.9_f64;
        let (u, w) = (theta.cos(), theta.sin());
        let q = 1.3 * 1.3;
        let (du, dw) = (w / 0.5, q * u / 0.5);
        let r = phase_rhs(&p, 0.2, theta, 0.25);
        assert_relative_eq!(r.dtheta, u * dw - w * du, epsilon = 1e-14);
        assert_relative_eq!(r.dlog_length, u * du + w * dw, epsilon = 1e-14);
        assert_relative_eq!(r.dmass, u * u - 2.0 * 0.25 * r.dlog_length, epsilon = 1e-14);
    }

    #[test]
    fn scaled_wronskian_examples() {
        let a = PhasePoint::start(0.3, 0.1);
        assert_eq!(scaled_wronskian(&a, &a).unwrap(), 0.0);
        let b = PhasePoint::start(0.3, 0.1 + std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(scaled_wronskian(&a, &b).unwrap(), 1.0, epsilon = 1e-15);
        let c = PhasePoint::start(0.3, 0.7);
        assert_relative_eq!(
            scaled_wronskian(&a, &c).unwrap(),
            0.564_642_473_395_035_4,
            epsilon = 1e-15
        );
        assert!(matches!(
            scaled_wronskian(&a, &PhasePoint::start(0.4, 0.7)),
            Err(PruferError::MismatchedPositions { .. })
        ));
    }

    #[test]
    fn dtheta_dk_closed_form() {
        let zero = PotentialSpec::zero(1.0).unwrap();
        let p = PhaseProblem::new(&zero, 1.0, 1.0, 1e-12).unwrap();
        let start = PhasePoint::start(0.0, 0.0);
        assert_eq!(dtheta_dk(&p, &start, 0.0).unwrap(), 0.0);
        // u = cosh x: integral of cosh^2 on [0,1] = (1 + sinh 1 cosh 1)/2
        let (c, s) = (1f64.cosh(), 1f64.sinh());
        let expected = 2.0 * (0.5 * (1.0 + s * c)) / (c * c + s * s);
        assert_relative_eq!(
            dtheta_dk(&p, &start, 1.0).unwrap(),
            expected,
            max_relative = 1e-10
        );
    }

    #[test]
    fn invalid_problem_rejected() {
        let zero = PotentialSpec::zero(1.0).unwrap();
        assert!(PhaseProblem::new(&zero, 0.0, 1.0, 1e-10).is_err());
        assert!(PhaseProblem::new(&zero, 1.0, -1.0, 1e-10).is_err());
        assert!(PhaseProblem::new(&zero, 1.0, 1.0, 0.0).is_err());
    }
}
