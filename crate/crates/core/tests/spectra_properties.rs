mod common;

use resonance_core::spectra::{BoundaryKind, Shooter, StateKind, StateRecord};
use resonance_core::PotentialSpec;

const K_TOL: f64 = 1e-11;

fn all_states(sh: &Shooter, lo: f64, hi: f64, grid_n: usize) -> Vec<StateRecord> {
    StateKind::ALL
        .into_iter()
        .flat_map(|kind| sh.find_states(kind, lo, hi, grid_n, K_TOL).unwrap())
        .collect()
}

fn assert_disjoint(states: &[StateRecord]) {
    for a in states {
        for b in states {
            if a.kind != b.kind {
                assert!(
                    (a.k - b.k).abs() > 10.0 * K_TOL,
                    "{a:?} coincides with {b:?}"
                );
            }
        }
    }
}

#[test]
fn kinds_are_disjoint() {
    let p = common::bump_well();
    for bc in [BoundaryKind::NeumannRight, BoundaryKind::DirichletRight] {
        for h in [0.5, 0.25, 1.0 / 6.0] {
            let sh = Shooter::new(&p, h).unwrap().right_boundary(bc).unwrap();
            let states = all_states(&sh, 0.3, 2.5, 64);
            assert!(!states.is_empty());
            assert!(states.iter().all(|s| s.residual < 1e-6), "{states:?}");
            assert_disjoint(&states);
        }
    }
}

#[test]
fn counts_stable_under_grid_doubling() {
    let p = common::bump_well();
    for bc in [BoundaryKind::NeumannRight, BoundaryKind::DirichletRight] {
        for h in [0.5, 0.2, 0.1] {
            let sh = Shooter::new(&p, h).unwrap().right_boundary(bc).unwrap();
            for kind in StateKind::ALL {
                let coarse = sh.find_states(kind, 0.3, 2.5, 16, K_TOL).unwrap();
                let fine = sh.find_states(kind, 0.3, 2.5, 32, K_TOL).unwrap();
                assert_eq!(coarse.len(), fine.len(), "{kind} h={h}");
                for (a, b) in coarse.iter().zip(&fine) {
                    assert!((a.k - b.k).abs() <= 10.0 * K_TOL);
                    assert_eq!(a.winding, b.winding);
                }
            }
        }
    }
}

#[test]
fn neumann_roots_are_increasing_crossings_under_bump() {
    let p = common::bump_well();
    assert!(p.check_bump(0.6).unwrap().holds);
    for h in [0.5, 0.25, 0.125] {
        let sh = Shooter::new(&p, h).unwrap();
        for s in sh
            .find_states(StateKind::NeumannEigenvalue, 0.3, 2.5, 32, K_TOL)
            .unwrap()
        {
            assert!(s.dmismatch_dk > 0.0, "{s:?}");
        }
    }
}

#[test]
fn positive_potential_has_no_bound_or_antibound_states() {
    let p = PotentialSpec::piecewise_constant(vec![0.0, 1.0], vec![1.0]).unwrap();
    let sh = Shooter::new(&p, 0.05).unwrap();
    assert!(sh
        .find_states(StateKind::Bound, 0.5, 3.0, 64, K_TOL)
        .unwrap()
        .is_empty());
    assert!(sh
        .find_states(StateKind::Antibound, 0.5, 3.0, 64, K_TOL)
        .unwrap()
        .is_empty());
}

#[test]
fn angle_closeness_decays_exponentially() {
    let p = PotentialSpec::piecewise_constant(vec![0.0, 1.0], vec![1.0])
        .unwrap()
        .with_bump_width(1.0)
        .unwrap();
    let big = Shooter::new(&p, 10.0)
        .unwrap()
        .angle_closeness(1.0, 1.0)
        .unwrap();
    assert!(big > 0.1, "{big}");

    let hs = [1.0, 0.5, 0.25, 0.125];
    let values: Vec<f64> = hs
        .iter()
        .map(|&h| {
            Shooter::new(&p, h)
                .unwrap()
                .tolerance(1e-13)
                .angle_closeness(1.0, 1.0)
                .unwrap()
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    // log-linear slope against 1/h
    let xs: Vec<f64> = hs.iter().map(|h| 1.0 / h).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(slope < 0.0, "{slope}");
}

#[test]
fn mismatch_slope_bounded_below_uniformly() {
    let p = PotentialSpec::piecewise_constant(vec![0.0, 1.0], vec![1.0]).unwrap();
    let slopes: Vec<f64> = [0.5, 0.25, 0.125]
        .iter()
        .map(|&h| Shooter::new(&p, h).unwrap().mismatch_slope(1.0).unwrap())
        .collect();
    assert!(slopes.iter().all(|&s| s >= 0.5 * slopes[0]), "{slopes:?}");
}

#[test]
fn states_invariant_under_matching_point() {
    let p = common::bump_well();
    let b = p.support_right();
    for h in [0.25, 0.125] {
        let base = Shooter::new(&p, h).unwrap().tolerance(1e-12);
        let reference = all_states(&base.match_point(0.6).unwrap(), 0.3, 2.5, 64);
        for xm in [b / 2.0, b / 4.0] {
            let moved = all_states(&base.match_point(xm).unwrap(), 0.3, 2.5, 64);
            assert_eq!(moved.len(), reference.len(), "xm = {xm}");
            for (a, c) in reference.iter().zip(&moved) {
                assert_eq!(a.kind, c.kind);
                assert!(
                    (a.k - c.k).abs() <= 10.0 * K_TOL,
                    "xm = {xm}: {a:?} vs {c:?}"
                );
            }
        }
    }
}
