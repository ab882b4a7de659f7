//! Dormand–Prince 5(4) stepping of the phase system, split at breakpoints.

use super::{rates, PhasePoint, PhaseProblem, PruferError};
use crate::potential::Piece;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MAX_GROWTH: f64 = 5.0;
const MIN_SHRINK: f64 = 0.2;

type State = [f64; 3];

struct Segment {
    piece: Piece,
    k2: f64,
    h: f64,
    orientation: f64,
}

impl Segment {
    #[inline]
    fn eval(&self, x: f64, y: &State) -> State {
        let r = rates(
            self.piece.evaluate(x) + self.k2,
            self.h,
            y[0],
            y[2],
            self.orientation,
        );
        [r.dtheta, r.dlog_length, r.dmass]
    }
}

#[inline]
fn axpy(y: &State, terms: &[(f64, &State)], dx: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..3 {
            out[i] += dx * c * k[i];
        }
    }
    out
}

/// Integrates from `start.x` to `x_target` (either direction), returning the end point.
pub fn integrate_phase(
    problem: &PhaseProblem,
    start: &PhasePoint,
    x_target: f64,
) -> Result<PhasePoint, PruferError> {
    run(problem, start, x_target, None)
}

/// Same as [`integrate_phase`] but returns every accepted step, starting with `start`.
pub fn integrate_phase_trace(
    problem: &PhaseProblem,
    start: &PhasePoint,
    x_target: f64,
) -> Result<Vec<PhasePoint>, PruferError> {
    let mut trace = vec![*start];
    run(problem, start, x_target, Some(&mut trace))?;
    Ok(trace)
}

fn run(
    problem: &PhaseProblem,
    start: &PhasePoint,
    x_target: f64,
    mut trace: Option<&mut Vec<PhasePoint>>,
) -> Result<PhasePoint, PruferError> {
    problem.check_position(start.x)?;
    problem.check_position(x_target)?;
    if x_target == start.x {
        return Ok(*start);
    }
    let dir = if x_target > start.x { 1.0 } else { -1.0 };
    let (lo, hi) = if dir > 0.0 {
        (start.x, x_target)
    } else {
        (x_target, start.x)
    };

    let mut nodes: Vec<f64> = problem
        .potential
        .breakpoints()
        .into_iter()
        .filter(|&b| b > lo && b < hi)
        .collect();
    if dir < 0.0 {
        nodes.reverse();
    }
    nodes.push(x_target);

    let k2 = problem.k * problem.k;
    let mut y: State = [start.theta, start.log_length, start.mass_scaled];
    let mut x = start.x;
    let mut step = f64::NAN;

    for &x_end in &nodes {
        let piece = problem.potential.piece_between(x, x_end);
        let (vlo, vhi) = piece.bounds(x.min(x_end), x.max(x_end));
        let sup_v = vlo.abs().max(vhi.abs());
        // keeps |Δθ| per step below π/2
        let max_step = problem.h * std::f64::consts::PI / (2.0 * (1.0 + sup_v + k2));
        if !step.is_finite() {
            step = max_step;
        }
        let seg = Segment {
            piece,
            k2,
            h: problem.h,
            orientation: dir,
        };
        integrate_segment(
            &seg,
            problem.tol,
            &mut x,
            x_end,
            &mut y,
            &mut step,
            max_step,
            dir,
            &mut trace,
        )?;
    }

    Ok(PhasePoint {
        x: x_target,
        theta: y[0],
        log_length: y[1],
        mass_scaled: y[2],
    })
}

#[allow(clippy::too_many_arguments)]
fn integrate_segment(
    seg: &Segment,
    tol: f64,
    x: &mut f64,
    x_end: f64,
    y: &mut State,
    step: &mut f64,
    max_step: f64,
    dir: f64,
    trace: &mut Option<&mut Vec<PhasePoint>>,
) -> Result<(), PruferError> {
    let min_step = 1e-14 * (1.0 + x_end.abs());
    let mut k1 = seg.eval(*x, y);
    loop {
        let remaining = (x_end - *x) * dir;
        if remaining <= 0.0 {
            return Ok(());
        }
        let mut dx_abs = step.min(max_step);
        let last = dx_abs >= remaining;
        if last {
            dx_abs = remaining;
        }
        let dx = dir * dx_abs;

        let k2 = seg.eval(*x + C2 * dx, &axpy(y, &[(A21, &k1)], dx));
        let k3 = seg.eval(*x + C3 * dx, &axpy(y, &[(A31, &k1), (A32, &k2)], dx));
        let k4 = seg.eval(
            *x + C4 * dx,
            &axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], dx),
        );
        let k5 = seg.eval(
            *x + C5 * dx,
            &axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], dx),
        );
        let x_new = if last { x_end } else { *x + dx };
        let k6 = seg.eval(
            x_new,
            &axpy(
                y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                dx,
            ),
        );
        let y_new = axpy(
            y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            dx,
        );
        let k7 = seg.eval(x_new, &y_new);

        let mut err: f64 = 0.0;
        for i in 0..3 {
            let e =
                dx * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            // theta and log L are additive; only J gets a relative scale.
            let scale = if i == 2 {
                tol * (1.0 + y[i].abs().max(y_new[i].abs()))
            } else {
                tol
            };
            err = err.max(e.abs() / scale);
        }
        if !err.is_finite() {
            err = f64::INFINITY;
        }

        let factor = if err == 0.0 {
            MAX_GROWTH
        } else {
            (SAFETY * err.powf(-0.2)).clamp(MIN_SHRINK, MAX_GROWTH)
        };

        if err <= 1.0 {
            *x = x_new;
            *y = y_new;
            k1 = k7;
            if let Some(t) = trace.as_deref_mut() {
                t.push(PhasePoint {
                    x: *x,
                    theta: y[0],
                    log_length: y[1],
                    mass_scaled: y[2],
                });
            }
            if !last {
                *step = (dx_abs * factor).min(max_step);
            }
        } else {
            *step = dx_abs * factor.min(1.0);
            if *step < min_step {
                return Err(PruferError::StepUnderflow { x: *x });
            }
        }
    }
}
