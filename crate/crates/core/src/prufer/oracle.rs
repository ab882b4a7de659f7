//! Exact propagation for piecewise-constant potentials by chaining 2x2
//! transfer matrices. Independent of the Runge–Kutta path; used as its oracle.

use super::{PhasePoint, PruferError};
use crate::potential::{Piece, PotentialSpec};
use std::f64::consts::PI;

/// Below this `|k^2 + V0|` a segment is propagated as the free linear solution.
const FLAT_THRESHOLD: f64 = 1e-24;
/// Segments are cut so that `sqrt|k^2 + V0| * |dx| / h` stays below this.
const MAX_EXPONENT: f64 = 2.0;

/// `M` with `(u, h u_x)(x + dx) = M (u, h u_x)(x)` for constant `V0`.
pub fn transfer_matrix_constant(v0: f64, k: f64, h: f64, dx: f64) -> [[f64; 2]; 2] {
    let q = k * k + v0;
    if q.abs() < FLAT_THRESHOLD {
        return [[1.0, dx / h], [0.0, 1.0]];
    }
    let rate = q.abs().sqrt();
    let x = rate * dx / h;
    if q > 0.0 {
        let (c, s) = (x.cosh(), x.sinh());
        [[c, s / rate], [rate * s, c]]
    } else {
        let (s, c) = x.sin_cos();
        [[c, s / rate], [-rate * s, c]]
    }
}

/// `sinh(y) - y` without cancellation near zero.
fn sinh_minus_id(y: f64) -> f64 {
    if y.abs() < 0.5 {
        let y2 = y * y;
        y * y2 / 6.0
            * (1.0 + y2 / 20.0 * (1.0 + y2 / 42.0 * (1.0 + y2 / 72.0 * (1.0 + y2 / 110.0))))
    } else {
        y.sinh() - y
    }
}

/// `y - sin(y)` without cancellation near zero.
fn id_minus_sin(y: f64) -> f64 {
    if y.abs() < 0.5 {
        let y2 = y * y;
        y * y2 / 6.0
            * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0 * (1.0 - y2 / 72.0 * (1.0 - y2 / 110.0))))
    } else {
        y - y.sin()
    }
}

/// Signed `integral_0^dx u(s)^2 ds` for the solution with data `(v1, v2)` at `s = 0`.
fn mass_integral(q: f64, h: f64, dx: f64, v1: f64, v2: f64) -> f64 {
    if q.abs() < FLAT_THRESHOLD {
        return v1 * v1 * dx + v1 * v2 * dx * dx / h + v2 * v2 * dx * dx * dx / (3.0 * h * h);
    }
    let rate = q.abs().sqrt();
    let t = rate / h;
    let x = t * dx;
    let b = v2 / rate;
    if q > 0.0 {
        // u = v1 cosh(ts) + b sinh(ts)
        let cc = dx + sinh_minus_id(2.0 * x) / (4.0 * t);
        let ss = sinh_minus_id(2.0 * x) / (4.0 * t);
        let cs = x.sinh().powi(2) / (2.0 * t);
        v1 * v1 * cc + 2.0 * v1 * b * cs + b * b * ss
    } else {
        // u = v1 cos(ts) + b sin(ts)
        let cc = dx - id_minus_sin(2.0 * x) / (4.0 * t);
        let ss = id_minus_sin(2.0 * x) / (4.0 * t);
        let cs = x.sin().powi(2) / (2.0 * t);
        v1 * v1 * cc + 2.0 * v1 * b * cs + b * b * ss
    }
}

fn wrap_pi(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Angle of `(u, w/omega)` as a continuous function of the Prüfer angle.
fn rotation_angle(theta: f64, omega: f64) -> f64 {
    let n = (theta / PI).round();
    let r = theta - n * PI;
    n * PI + (r.tan() / omega).atan()
}

fn prufer_angle(psi: f64, omega: f64) -> f64 {
    let n = (psi / PI).round();
    let r = psi - n * PI;
    n * PI + (omega * r.tan()).atan()
}

fn step_constant(point: &PhasePoint, v0: f64, k: f64, h: f64, dx: f64) -> PhasePoint {
    let (v2, v1) = point.theta.sin_cos();
    let m = transfer_matrix_constant(v0, k, h, dx);
    let u = m[0][0] * v1 + m[0][1] * v2;
    let w = m[1][0] * v1 + m[1][1] * v2;
    let growth = u.hypot(w);
    let q = k * k + v0;

    let theta = if q <= -FLAT_THRESHOLD {
        // uniform rotation of (u, w/omega) by -omega dx / h
        let omega = (-q).sqrt();
        prufer_angle(rotation_angle(point.theta, omega) - omega * dx / h, omega)
    } else {
        // no fixed point is crossed, so the lift moves by less than π
        point.theta + wrap_pi(w.atan2(u) - point.theta)
    };

    let mass = mass_integral(q, h, dx, v1, v2).abs();
    PhasePoint {
        x: point.x + dx,
        theta,
        log_length: point.log_length + growth.ln(),
        mass_scaled: (point.mass_scaled + mass) / (growth * growth),
    }
}

/// Propagates `start` to `x_target` through a piecewise-constant potential
/// exactly (up to rounding), renormalising after every sub-segment.
pub fn propagate_oracle(
    p: &PotentialSpec,
    k: f64,
    h: f64,
    start: &PhasePoint,
    x_target: f64,
) -> Result<PhasePoint, PruferError> {
    if !p.is_piecewise_constant() {
        return Err(PruferError::NotPiecewiseConstant);
    }
    let b = p.support_right();
    for x in [start.x, x_target] {
        if !(x >= -1e-12 * b && x <= b * (1.0 + 1e-12)) {
            return Err(PruferError::OutOfDomain { x, b });
        }
    }
    let (lo, hi) = (start.x.min(x_target), start.x.max(x_target));
    let mut nodes: Vec<f64> = p
        .breakpoints()
        .into_iter()
        .filter(|&x| x > lo && x < hi)
        .collect();
    if x_target < start.x {
        nodes.reverse();
    }
    nodes.push(x_target);

    let mut point = *start;
    for &x_end in &nodes {
        let v0 = match p.piece_between(point.x, x_end) {
            Piece::Constant(v) => v,
            Piece::Cubic { .. } => return Err(PruferError::NotPiecewiseConstant),
        };
        let q = k * k + v0;
        let span = x_end - point.x;
        let pieces = ((q.abs().sqrt() * span.abs() / h) / MAX_EXPONENT)
            .ceil()
            .max(1.0) as usize;
        let x0 = point.x;
        for i in 1..=pieces {
            let xi = if i == pieces {
                x_end
            } else {
                x0 + span * i as f64 / pieces as f64
            };
            point = step_constant(&point, v0, k, h, xi - point.x);
            point.x = xi;
        }
    }
    Ok(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn close(a: [[f64; 2]; 2], b: [[f64; 2]; 2], eps: f64) {
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).abs() < eps, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn transfer_matrix_examples() {
        close(
            transfer_matrix_constant(3.0, 2.0, 0.1, 0.0),
            [[1.0, 0.0], [0.0, 1.0]],
            1e-300,
        );
        // mu = 1, dx/h = 1
        close(
            transfer_matrix_constant(0.0, 1.0, 0.5, 0.5),
            [[1.543081, 1.175201], [1.175201, 1.543081]],
            1e-6,
        );
        // omega = 1, dx/h = π
        close(
            transfer_matrix_constant(-2.0, 1.0, 1.0, PI),
            [[-1.0, 0.0], [0.0, -1.0]],
            1e-15,
        );
        close(
            transfer_matrix_constant(-1.0, 1.0, 2.0, 0.5),
            [[1.0, 0.25], [0.0, 1.0]],
            1e-300,
        );
    }

    #[test]
    fn transfer_matrix_has_unit_determinant() {
        for (v0, k, h, dx) in [
            (2.0, 1.0, 0.3, 0.7),
            (-5.0, 0.5, 0.1, 0.4),
            (-1.0, 1.0, 1.0, 1.0),
        ] {
            let m = transfer_matrix_constant(v0, k, h, dx);
            assert_relative_eq!(m[0][0] * m[1][1] - m[0][1] * m[1][0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn angle_maps_are_inverse_and_monotone() {
        for omega in [0.1, 1.0, 3.7] {
            let mut prev = f64::NEG_INFINITY;
            for i in -400..=400 {
                let theta = i as f64 * 0.0271;
                let psi = rotation_angle(theta, omega);
                assert!(psi > prev);
                prev = psi;
                assert!((prufer_angle(psi, omega) - theta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mass_integral_matches_quadrature() {
        for &(q, h, dx, v1, v2) in &[
            (2.0, 0.3, 0.4, 0.6, -0.8),
            (-3.0, 0.2, 0.5, 1.0, 0.0),
            (0.0, 0.5, 0.7, 0.3, 0.9),
            (1.0, 1.0, -0.6, 0.8, 0.6),
            (1e-6, 1.0, 0.2, 0.0, 1.0),
        ] {
            let n = 20000;
            let mut acc = 0.0;
            for i in 0..n {
                // Simpson on [0, dx]
                for (wt, s) in [
                    (1.0, i as f64),
                    (4.0, i as f64 + 0.5),
                    (1.0, i as f64 + 1.0),
                ] {
                    let x = dx * s / n as f64;
                    let t = transfer_matrix_constant(q - 1.0, 1.0, h, x);
                    let u = t[0][0] * v1 + t[0][1] * v2;
                    acc += wt * u * u * dx / n as f64 / 6.0;
                }
            }
            assert_relative_eq!(mass_integral(q, h, dx, v1, v2), acc, max_relative = 1e-9);
        }
    }

    #[test]
    fn single_segment_matches_matrix() {
        let p = PotentialSpec::piecewise_constant(vec![0.0, 1.0], vec![0.5]).unwrap();
        let (k, h) = (1.2, 0.4);
        let theta0 = 0.3_f64;
        let end = propagate_oracle(&p, k, h, &PhasePoint::start(0.0, theta0), 1.0).unwrap();
        let m = transfer_matrix_constant(0.5, k, h, 1.0);
        let (s, c) = theta0.sin_cos();
        let u = m[0][0] * c + m[0][1] * s;
        let w = m[1][0] * c + m[1][1] * s;
        assert_relative_eq!(end.log_length, u.hypot(w).ln(), epsilon = 1e-12);
        assert!((wrap_pi(end.theta - w.atan2(u))).abs() < 1e-12);
    }

    #[test]
    fn elliptic_winding_counts_turns() {
        // V0 = -k^2 - omega^2: theta decreases by exactly π per half period
        let (k, h, omega) = (1.0_f64, 0.1, 2.0_f64);
        let v0 = -k * k - omega * omega;
        let len = 5.0 * PI * h / omega;
        let p = PotentialSpec::piecewise_constant(vec![0.0, len], vec![v0]).unwrap();
        let end = propagate_oracle(&p, k, h, &PhasePoint::start(0.0, 0.0), len).unwrap();
        assert_relative_eq!(end.theta, -5.0 * PI, epsilon = 1e-12);
        assert!(end.log_length.abs() < 1e-12);
    }

    #[test]
    fn rejects_splines() {
        let p = PotentialSpec::spline(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            propagate_oracle(&p, 1.0, 1.0, &PhasePoint::start(0.0, 0.0), 1.0),
            Err(PruferError::NotPiecewiseConstant)
        );
    }
}
