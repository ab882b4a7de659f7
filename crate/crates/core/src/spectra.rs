//! Shooting for Neumann eigenvalues, bound states and antibound states.
//!
//! Each spectral object is a zero, modulo `2π`, of the lifted mismatch
//! `F(k) = 2 (Θ_left(k) - Θ_right(k))` where the angles are those of the
//! left solution (integrated forward from `0`) and the right solution
//! (integrated backward from `B`) at the matching point. Roots are located
//! on the lifted function with an explicit winding integer `m`.

use crate::potential::PotentialSpec;
use crate::prufer::{integrate_phase, PhasePoint, PhaseProblem, PruferError, DEFAULT_TOL};
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use thiserror::Error;

/// Default absolute bisection tolerance in `k`.
pub const DEFAULT_K_TOL: f64 = 1e-11;
/// Upper bound on mismatch evaluations spent on grid refinement per search.
const REFINE_BUDGET: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error(transparent)]
    Prufer(#[from] PruferError),
    #[error("invalid band [{lo}, {hi}]")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("matching point {x} outside [0, {b}]")]
    InvalidMatch { x: f64, b: f64 },
    #[error("{0:?} is not a right boundary condition")]
    NotRightBoundary(BoundaryKind),
    #[error("grid refinement budget exceeded on [{lo}, {hi}]")]
    RefinementBudget { lo: f64, hi: f64 },
}

/// Boundary conditions and the initial Prüfer angles they impose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    /// `u_x(0) = 0`.
    NeumannLeft,
    /// `u(0) = 0`.
    DirichletLeft,
    /// `h u_x = k u` at `0`: bound states.
    OutgoingPlus,
    /// `h u_x = -k u` at `0`: antibound states.
    OutgoingMinus,
    /// `u_x(B) = 0`.
    NeumannRight,
    /// `u(B) = 0`.
    DirichletRight,
}

impl BoundaryKind {
    pub fn is_left(self) -> bool {
        matches!(
            self,
            Self::NeumannLeft | Self::DirichletLeft | Self::OutgoingPlus | Self::OutgoingMinus
        )
    }

    pub fn initial_angle(self, k: f64) -> f64 {
        match self {
            Self::NeumannLeft | Self::NeumannRight => 0.0,
            Self::DirichletLeft | Self::DirichletRight => FRAC_PI_2,
            Self::OutgoingPlus => k.atan(),
            Self::OutgoingMinus => -k.atan(),
        }
    }

    /// `d/dk` of the initial angle.
    fn initial_angle_dk(self, k: f64) -> f64 {
        match self {
            Self::OutgoingPlus => 1.0 / (1.0 + k * k),
            Self::OutgoingMinus => -1.0 / (1.0 + k * k),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateKind {
    NeumannEigenvalue,
    Bound,
    Antibound,
}

impl StateKind {
    pub const ALL: [StateKind; 3] = [Self::NeumannEigenvalue, Self::Bound, Self::Antibound];

    pub fn left_boundary(self) -> BoundaryKind {
        match self {
            Self::NeumannEigenvalue => BoundaryKind::NeumannLeft,
            Self::Bound => BoundaryKind::OutgoingPlus,
            Self::Antibound => BoundaryKind::OutgoingMinus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NeumannEigenvalue => "neumann",
            Self::Bound => "bound",
            Self::Antibound => "antibound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A located spectral object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRecord {
    pub kind: StateKind,
    pub k: f64,
    pub h: f64,
    /// Branch `m` with `F(k) = 2πm`.
    pub winding: i64,
    /// `|F(k) - 2πm|` at the reported `k`.
    pub residual: f64,
    /// `dF/dk` at the reported `k`.
    pub dmismatch_dk: f64,
}

/// `F(k)` together with its `k`-derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchSample {
    pub k: f64,
    pub value: f64,
    pub slope: f64,
}

/// Shooting configuration for one `(V, h)` pair.
#[derive(Debug, Clone, Copy)]
pub struct Shooter<'a> {
    potential: &'a PotentialSpec,
    h: f64,
    right: BoundaryKind,
    x_match: f64,
    tol: f64,
}

/// `A` when the potential carries a bump width, otherwise `B/2`.
pub fn default_match_point(p: &PotentialSpec) -> f64 {
    p.bump_width().unwrap_or(0.5 * p.support_right())
}

impl<'a> Shooter<'a> {
    /// Neumann condition at `B`, default matching point and integrator tolerance.
    pub fn new(potential: &'a PotentialSpec, h: f64) -> Result<Self, SpectraError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(PruferError::InvalidProblem(format!("h must be positive, got {h}")).into());
        }
        Ok(Self {
            potential,
            h,
            right: BoundaryKind::NeumannRight,
            x_match: default_match_point(potential),
            tol: DEFAULT_TOL,
        })
    }

    pub fn right_boundary(mut self, bc: BoundaryKind) -> Result<Self, SpectraError> {
        if bc.is_left() {
            return Err(SpectraError::NotRightBoundary(bc));
        }
        self.right = bc;
        Ok(self)
    }

    pub fn match_point(mut self, x: f64) -> Result<Self, SpectraError> {
        let b = self.potential.support_right();
        if !(0.0..=b).contains(&x) {
            return Err(SpectraError::InvalidMatch { x, b });
        }
        self.x_match = x;
        Ok(self)
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x_match(&self) -> f64 {
        self.x_match
    }

    pub fn potential(&self) -> &PotentialSpec {
        self.potential
    }

    fn problem(&self, k: f64) -> Result<PhaseProblem<'a>, PruferError> {
        PhaseProblem::new(self.potential, k, self.h, self.tol)
    }

    /// Solution with boundary condition `bc` evaluated at `x`.
    pub fn theta_at(&self, k: f64, bc: BoundaryKind, x: f64) -> Result<PhasePoint, SpectraError> {
        let problem = self.problem(k)?;
        let x_start = if bc.is_left() {
            0.0
        } else {
            self.potential.support_right()
        };
        let start = PhasePoint::start(x_start, bc.initial_angle(k));
        Ok(integrate_phase(&problem, &start, x)?)
    }

    /// `d Θ / dk` for a solution that reached `end` from its boundary.
    fn angle_dk(&self, k: f64, bc: BoundaryKind, end: &PhasePoint) -> f64 {
        let orientation = if bc.is_left() { 1.0 } else { -1.0 };
        bc.initial_angle_dk(k) * (-2.0 * end.log_length).exp()
            + orientation * 2.0 * k * end.mass_scaled / self.h
    }

    /// `F(k) = 2 (Θ_left - Θ_right)` at the matching point, with `dF/dk`.
    pub fn sample(&self, kind: StateKind, k: f64) -> Result<MismatchSample, SpectraError> {
        let left_bc = kind.left_boundary();
        let left = self.theta_at(k, left_bc, self.x_match)?;
        let right = self.theta_at(k, self.right, self.x_match)?;
        Ok(MismatchSample {
            k,
            value: 2.0 * (left.theta - right.theta),
            slope: 2.0 * (self.angle_dk(k, left_bc, &left) - self.angle_dk(k, self.right, &right)),
        })
    }

    pub fn mismatch(&self, kind: StateKind, k: f64) -> Result<f64, SpectraError> {
        Ok(self.sample(kind, k)?.value)
    }

    /// `2 (Θ_0'(k) - Θ_1'(k))`.
    pub fn mismatch_slope(&self, k: f64) -> Result<f64, SpectraError> {
        Ok(self.sample(StateKind::NeumannEigenvalue, k)?.slope)
    }

    /// `max_± |2 (Θ_0 - Θ_±)|` at `x = a`, reduced to `(-π, π]`.
    pub fn angle_closeness(&self, k: f64, a: f64) -> Result<f64, SpectraError> {
        let t0 = self.theta_at(k, BoundaryKind::NeumannLeft, a)?.theta;
        let mut worst: f64 = 0.0;
        for bc in [BoundaryKind::OutgoingPlus, BoundaryKind::OutgoingMinus] {
            let t = self.theta_at(k, bc, a)?.theta;
            worst = worst.max(reduce_angle(2.0 * (t0 - t)).abs());
        }
        Ok(worst)
    }

    /// Every `k` in `[k_lo, k_hi]` where `F ≡ 0 (mod 2π)`, sorted.
    pub fn find_states(
        &self,
        kind: StateKind,
        k_lo: f64,
        k_hi: f64,
        grid_n: usize,
        k_tol: f64,
    ) -> Result<Vec<StateRecord>, SpectraError> {
        if !(k_lo > 0.0 && k_lo < k_hi && k_hi.is_finite()) || grid_n < 2 {
            return Err(SpectraError::InvalidBand { lo: k_lo, hi: k_hi });
        }
        let grid: Vec<f64> = (0..grid_n)
            .map(|i| {
                if i + 1 == grid_n {
                    k_hi
                } else {
                    k_lo + (k_hi - k_lo) * i as f64 / (grid_n - 1) as f64
                }
            })
            .collect();
        let values = grid
            .par_iter()
            .map(|&k| self.mismatch(kind, k))
            .collect::<Result<Vec<f64>, _>>()?;

        let brackets = grid
            .windows(2)
            .zip(values.windows(2))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(ks, fs)| {
                let mut out = Vec::new();
                let mut budget = REFINE_BUDGET;
                self.refine(kind, (ks[0], fs[0]), (ks[1], fs[1]), &mut out, &mut budget)?;
                Ok(out)
            })
            .collect::<Result<Vec<Vec<_>>, SpectraError>>()?;

        let mut records = brackets
            .into_par_iter()
            .flatten()
            .map(|(a, b)| self.roots_in(kind, a, b, k_tol))
            .collect::<Result<Vec<Vec<StateRecord>>, SpectraError>>()?
            .into_iter()
            .flatten()
            .collect::<Vec<_>>();

        records.sort_by(|a, b| a.k.total_cmp(&b.k));
        records.dedup_by(|b, a| b.winding == a.winding && (b.k - a.k).abs() <= 10.0 * k_tol);
        Ok(records)
    }

    /// Splits `[a, b]` until consecutive samples of `F` differ by less than π/2
    /// or the bracket is one ulp wide.
    fn refine(
        &self,
        kind: StateKind,
        a: (f64, f64),
        b: (f64, f64),
        out: &mut Vec<((f64, f64), (f64, f64))>,
        budget: &mut usize,
    ) -> Result<(), SpectraError> {
        if (b.1 - a.1).abs() < FRAC_PI_2 {
            out.push((a, b));
            return Ok(());
        }
        let mid = 0.5 * (a.0 + b.0);
        if mid <= a.0 || mid >= b.0 {
            // F winds faster than k can resolve: keep the one-ulp bracket
            out.push((a, b));
            return Ok(());
        }
        if *budget == 0 {
            return Err(SpectraError::RefinementBudget { lo: a.0, hi: b.0 });
        }
        *budget -= 1;
        let m = (mid, self.mismatch(kind, mid)?);
        self.refine(kind, a, m, out, budget)?;
        self.refine(kind, m, b, out, budget)
    }

    /// Bisection for each level `2πm` crossed between the bracket ends.
    fn roots_in(
        &self,
        kind: StateKind,
        a: (f64, f64),
        b: (f64, f64),
        k_tol: f64,
    ) -> Result<Vec<StateRecord>, SpectraError> {
        let lo = a.1.min(b.1);
        let hi = a.1.max(b.1);
        let first = (lo / TAU).ceil() as i64;
        let last = (hi / TAU).floor() as i64;
        let mut out = Vec::new();
        for m in first..=last {
            let level = TAU * m as f64;
            let (mut ka, mut ga) = (a.0, a.1 - level);
            let (mut kb, gb) = (b.0, b.1 - level);
            let k = if ga == 0.0 {
                ka
            } else if gb == 0.0 {
                kb
            } else {
                while kb - ka > k_tol {
                    let mid = 0.5 * (ka + kb);
                    if mid <= ka || mid >= kb {
                        break;
                    }
                    let gm = self.mismatch(kind, mid)? - level;
                    if gm == 0.0 {
                        ka = mid;
                        kb = mid;
                        break;
                    }
                    if (gm > 0.0) == (ga > 0.0) {
                        ka = mid;
                        ga = gm;
                    } else {
                        kb = mid;
                    }
                }
                0.5 * (ka + kb)
            };
            let s = self.sample(kind, k)?;
            out.push(StateRecord {
                kind,
                k,
                h: self.h,
                winding: m,
                residual: (s.value - level).abs(),
                dmismatch_dk: s.slope,
            });
        }
        Ok(out)
    }
}

/// Representative of `a` modulo `2π` in `(-π, π]`.
pub fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Free-function form of [`Shooter::theta_at`].
pub fn theta_at(
    p: &PotentialSpec,
    k: f64,
    h: f64,
    bc: BoundaryKind,
    x_match: f64,
    tol: f64,
) -> Result<PhasePoint, SpectraError> {
    Shooter::new(p, h)?.tolerance(tol).theta_at(k, bc, x_match)
}
