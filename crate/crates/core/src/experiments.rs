//! h-sweeps, pairing of Neumann eigenvalues with bound/antibound states,
//! exponential decay fits, interlacing checks and the Prüfer lemma suite.

use crate::potential::{PotentialError, PotentialSpec, WholeLinePotential};
use crate::potential::{FIGURE_KNOTS, FIGURE_LEFT_VALUES, FIGURE_RIGHT_VALUES};
use crate::prufer::{
    check_cone_invariance, check_growth_bound, dtheta_dk, integrate_phase, integrate_phase_trace,
    PhasePoint, PhaseProblem, PruferError,
};
use crate::spectra::{BoundaryKind, Shooter, SpectraError, StateKind, StateRecord, DEFAULT_K_TOL};
use rayon::prelude::*;
use thiserror::Error;

/// Gaps at or below this are treated as numerically zero and left out of fits.
pub const GAP_FLOOR: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "decay fit needs at least 3 usable points, got {usable} ({dropped} at the numerical floor)"
    )]
    TooFewPoints { usable: usize, dropped: usize },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub potential: PotentialSpec,
    pub right_bc: BoundaryKind,
    pub band: (f64, f64),
    /// Descending.
    pub h_values: Vec<f64>,
    /// `None` picks the default matching point.
    pub x_match: Option<f64>,
    pub grid_n: usize,
    pub tol: f64,
    pub k_tol: f64,
}

impl SweepConfig {
    pub fn new(potential: PotentialSpec, band: (f64, f64), h_values: Vec<f64>) -> Self {
        Self {
            potential,
            right_bc: BoundaryKind::NeumannRight,
            band,
            h_values,
            x_match: None,
            grid_n: 64,
            tol: crate::prufer::DEFAULT_TOL,
            k_tol: DEFAULT_K_TOL,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        let (lo, hi) = self.band;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad(format!("band: need 0 < c_k < C_k, got [{lo}, {hi}]"));
        }
        if self.h_values.is_empty() {
            return bad("h: empty list".into());
        }
        if self.h_values.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return bad("h: values must be positive".into());
        }
        if self.h_values.windows(2).any(|w| w[1] >= w[0]) {
            return bad("h: values must be strictly descending".into());
        }
        if self.right_bc.is_left() {
            return bad(format!("right_bc: {:?} is a left condition", self.right_bc));
        }
        if let Some(x) = self.x_match {
            if !(0.0..=self.potential.support_right()).contains(&x) {
                return bad(format!(
                    "x_match: {x} outside [0, {}]",
                    self.potential.support_right()
                ));
            }
        }
        if self.grid_n < 2 {
            return bad("grid_n: need at least 2".into());
        }
        if !(self.tol > 0.0) || !(self.k_tol > 0.0) {
            return bad("tol: tolerances must be positive".into());
        }
        Ok(())
    }

    fn shooter(&self, h: f64) -> Result<Shooter<'_>, SpectraError> {
        let sh = Shooter::new(&self.potential, h)?
            .right_boundary(self.right_bc)?
            .tolerance(self.tol);
        match self.x_match {
            Some(x) => sh.match_point(x),
            None => Ok(sh),
        }
    }

    /// All three kinds of state at one `h`, sorted by `(kind, k)`.
    pub fn states_at(&self, h: f64) -> Result<Vec<StateRecord>, SpectraError> {
        let sh = self.shooter(h)?;
        let mut out = Vec::new();
        for kind in StateKind::ALL {
            out.extend(sh.find_states(kind, self.band.0, self.band.1, self.grid_n, self.k_tol)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub states: Vec<StateRecord>,
    /// Set when the search at this `h` failed; `states` is then empty.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn k_values(&self, kind: StateKind) -> Vec<f64> {
        self.states
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| s.k)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTable {
    pub right_bc: BoundaryKind,
    /// In the order of the configured (descending) `h` values.
    pub rows: Vec<SweepRow>,
}

impl StateTable {
    pub fn records(&self) -> impl Iterator<Item = &StateRecord> {
        self.rows.iter().flat_map(|r| r.states.iter())
    }

    pub fn failures(&self) -> impl Iterator<Item = (f64, &str)> {
        self.rows
            .iter()
            .filter_map(|r| r.error.as_deref().map(|e| (r.h, e)))
    }
}

/// Runs every `h` (concurrently); failures are recorded per row.
pub fn h_sweep(config: &SweepConfig) -> Result<StateTable, ExperimentError> {
    config.validate()?;
    let rows = config
        .h_values
        .par_iter()
        .map(|&h| match config.states_at(h) {
            Ok(states) => SweepRow {
                h,
                states,
                error: None,
            },
            Err(e) => SweepRow {
                h,
                states: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(StateTable {
        right_bc: config.right_bc,
        rows,
    })
}

/// A Neumann eigenvalue with its nearest bound and antibound partners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub neumann: f64,
    pub bound: Option<f64>,
    pub antibound: Option<f64>,
}

impl Pair {
    pub fn gap_bound(&self) -> Option<f64> {
        self.bound.map(|k| (k - self.neumann).abs())
    }

    pub fn gap_antibound(&self) -> Option<f64> {
        self.antibound.map(|k| (k - self.neumann).abs())
    }

    pub fn is_complete(&self) -> bool {
        self.bound.is_some() && self.antibound.is_some()
    }

    /// Larger of the two gaps; `None` unless both partners exist.
    pub fn max_gap(&self) -> Option<f64> {
        Some(self.gap_bound()?.max(self.gap_antibound()?))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairingReport {
    pub pairs: Vec<Pair>,
    /// States in the shrunk band left without a partner.
    pub unpaired: Vec<(StateKind, f64)>,
}

impl PairingReport {
    pub fn all_complete(&self) -> bool {
        self.pairs.iter().all(Pair::is_complete)
    }

    pub fn max_gap(&self) -> Option<f64> {
        self.pairs.iter().filter_map(Pair::max_gap).reduce(f64::max)
    }
}

/// Injective nearest-neighbour assignment from `sources` into `targets`;
/// conflicts go to the smaller gap.
fn nearest_assignment(sources: &[f64], targets: &[f64]) -> Vec<Option<usize>> {
    let mut edges: Vec<(f64, usize, usize)> = sources
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| {
            targets
                .iter()
                .enumerate()
                .map(|(j, &t)| ((t - s).abs(), j))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(gap, j)| (gap, i, j))
        })
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut taken = vec![false; targets.len()];
    let mut out = vec![None; sources.len()];
    for (_, i, j) in edges {
        if !taken[j] {
            taken[j] = true;
            out[i] = Some(j);
        }
    }
    out
}

/// Pairs each Neumann eigenvalue of the band shrunk by `margin` at both ends.
pub fn pair_states(
    neumann: &[f64],
    bound: &[f64],
    antibound: &[f64],
    band: (f64, f64),
    margin: f64,
) -> PairingReport {
    let inside = |k: f64| k >= band.0 + margin && k <= band.1 - margin;
    let sources: Vec<f64> = neumann.iter().copied().filter(|&k| inside(k)).collect();
    let to_bound = nearest_assignment(&sources, bound);
    let to_anti = nearest_assignment(&sources, antibound);

    let pairs: Vec<Pair> = sources
        .iter()
        .enumerate()
        .map(|(i, &k)| Pair {
            neumann: k,
            bound: to_bound[i].map(|j| bound[j]),
            antibound: to_anti[i].map(|j| antibound[j]),
        })
        .collect();

    let mut unpaired = Vec::new();
    for p in &pairs {
        if !p.is_complete() {
            unpaired.push((StateKind::NeumannEigenvalue, p.neumann));
        }
    }
    for (kind, list, assigned) in [
        (StateKind::Bound, bound, &to_bound),
        (StateKind::Antibound, antibound, &to_anti),
    ] {
        for (j, &k) in list.iter().enumerate() {
            if inside(k) && !assigned.contains(&Some(j)) {
                unpaired.push((kind, k));
            }
        }
    }
    PairingReport { pairs, unpaired }
}

/// Least-squares fit `log gap ≈ logC - δ/h`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecayFit {
    pub delta_hat: f64,
    #[serde(rename = "logC_hat")]
    pub log_c_hat: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Points dropped at the numerical floor.
    pub n_dropped: usize,
}

pub fn gap_decay_fit(gaps: &[(f64, f64)]) -> Result<DecayFit, ExperimentError> {
    let usable: Vec<(f64, f64)> = gaps
        .iter()
        .filter(|(h, g)| *h > 0.0 && *g > GAP_FLOOR && g.is_finite())
        .map(|&(h, g)| (1.0 / h, g.ln()))
        .collect();
    let dropped = gaps.len() - usable.len();
    if usable.len() < 3 {
        return Err(ExperimentError::TooFewPoints {
            usable: usable.len(),
            dropped,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::InvalidConfig(
            "decay fit needs distinct h values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = usable
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        delta_hat: -slope,
        log_c_hat: intercept,
        r_squared,
        n_points: usable.len(),
        n_dropped: dropped,
    })
}

/// Consecutive bound states `(k1, k2)` not separated by an antibound state.
///
/// Each antibound state serves at most one interval, and one lying within
/// `resolution` of an endpoint counts as inside. With `resolution = 0` this
/// is the strict test.
pub fn interlacing_check(bound: &[f64], antibound: &[f64], resolution: f64) -> Vec<(f64, f64)> {
    let mut next = 0;
    let mut violations = Vec::new();
    for w in bound.windows(2) {
        let inside_lo = |a: f64| {
            if resolution > 0.0 {
                a >= w[0] - resolution
            } else {
                a > w[0]
            }
        };
        let inside_hi = |a: f64| {
            if resolution > 0.0 {
                a <= w[1] + resolution
            } else {
                a < w[1]
            }
        };
        while next < antibound.len() && !inside_lo(antibound[next]) {
            next += 1;
        }
        if next < antibound.len() && inside_hi(antibound[next]) {
            next += 1;
        } else {
            violations.push((w[0], w[1]));
        }
    }
    violations
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayStudy {
    /// `(h, pairing)` in sweep order.
    pub pairings: Vec<(f64, PairingReport)>,
    /// `(h, largest gap over complete pairs)`.
    pub envelope: Vec<(f64, f64)>,
    pub fit: Result<DecayFit, ExperimentError>,
    /// Largest `h` from which every smaller `h` pairs all Neumann eigenvalues.
    pub pairing_from_h: Option<f64>,
}

impl DecayStudy {
    /// True when the envelope decreases strictly over the last `n` values.
    pub fn eventually_decreasing(&self, n: usize) -> bool {
        if self.envelope.len() < n {
            return false;
        }
        let tail = &self.envelope[self.envelope.len() - n..];
        tail.windows(2).all(|w| w[1].1 < w[0].1)
    }

    /// States in the shrunk band farther than `factor * C e^{-δ/h}` from
    /// their Neumann partner, or with none at all.
    pub fn envelope_outliers(&self, factor: f64) -> Vec<(f64, StateKind, f64)> {
        let Ok(fit) = &self.fit else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (h, rep) in &self.pairings {
            let limit = factor * (fit.log_c_hat - fit.delta_hat / h).exp();
            for p in &rep.pairs {
                for (kind, gap) in [
                    (StateKind::Bound, p.gap_bound()),
                    (StateKind::Antibound, p.gap_antibound()),
                ] {
                    if let Some(g) = gap {
                        if g > limit {
                            let k = if kind == StateKind::Bound {
                                p.bound
                            } else {
                                p.antibound
                            };
                            out.push((*h, kind, k.unwrap_or(f64::NAN)));
                        }
                    }
                }
            }
            for &(kind, k) in &rep.unpaired {
                if kind != StateKind::NeumannEigenvalue {
                    out.push((*h, kind, k));
                }
            }
        }
        out
    }
}

/// Pairs every row of `table` and fits the per-`h` largest gap.
pub fn decay_study(table: &StateTable, band: (f64, f64), margin: f64) -> DecayStudy {
    let pairings: Vec<(f64, PairingReport)> = table
        .rows
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| {
            let rep = pair_states(
                &r.k_values(StateKind::NeumannEigenvalue),
                &r.k_values(StateKind::Bound),
                &r.k_values(StateKind::Antibound),
                band,
                margin,
            );
            (r.h, rep)
        })
        .collect();
    let envelope: Vec<(f64, f64)> = pairings
        .iter()
        .filter_map(|(h, rep)| rep.max_gap().map(|g| (*h, g)))
        .collect();
    let mut pairing_from_h = None;
    for (h, rep) in pairings.iter().rev() {
        if rep.pairs.is_empty() || !rep.all_complete() {
            break;
        }
        pairing_from_h = Some(*h);
    }
    DecayStudy {
        fit: gap_decay_fit(&envelope),
        pairings,
        envelope,
        pairing_from_h,
    }
}

/// Band margin used for pairing assertions: a twentieth of the band width.
pub fn default_margin(band: (f64, f64)) -> f64 {
    (band.1 - band.0) / 20.0
}

/// The two even whole-line spline potentials of the figure, reduced to
/// `[0, 2]`: `(left, right)`. Only the right one satisfies the bump condition.
pub fn figure1_potentials() -> Result<(PotentialSpec, PotentialSpec), PotentialError> {
    let left = WholeLinePotential::spline(&FIGURE_KNOTS, &FIGURE_LEFT_VALUES)?.even_halfline()?;
    let right = WholeLinePotential::spline(&FIGURE_KNOTS, &FIGURE_RIGHT_VALUES)?.even_halfline()?;
    Ok((left, right))
}

/// Sweeps with Neumann and Dirichlet conditions at the symmetry centre; the
/// union is the set of states of the even whole-line potential.
pub fn whole_line_sweep(config: &SweepConfig) -> Result<[StateTable; 2], ExperimentError> {
    let mut neumann = config.clone();
    neumann.right_bc = BoundaryKind::NeumannRight;
    let mut dirichlet = config.clone();
    dirichlet.right_bc = BoundaryKind::DirichletRight;
    Ok([h_sweep(&neumann)?, h_sweep(&dirichlet)?])
}

/// Per bound state, the distance to the nearest antibound state of the same
/// run; `None` when the run has no antibound states.
pub fn nearest_antibound_gaps(row: &SweepRow) -> Vec<(f64, Option<f64>)> {
    let anti = row.k_values(StateKind::Antibound);
    row.k_values(StateKind::Bound)
        .into_iter()
        .map(|k| {
            let gap = anti.iter().map(|a| (a - k).abs()).reduce(f64::min);
            (k, gap)
        })
        .collect()
}

/// Median of the nearest bound/antibound gaps per `h`, over both runs.
pub fn figure_gap_profile(tables: &[StateTable]) -> Vec<(f64, Option<f64>)> {
    let Some(first) = tables.first() else {
        return Vec::new();
    };
    first
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut gaps: Vec<f64> = tables
                .iter()
                .filter_map(|t| t.rows.get(i))
                .flat_map(nearest_antibound_gaps)
                .filter_map(|(_, g)| g)
                .collect();
            gaps.sort_by(f64::total_cmp);
            let median = if gaps.is_empty() {
                None
            } else if gaps.len() % 2 == 1 {
                Some(gaps[gaps.len() / 2])
            } else {
                Some(0.5 * (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2]))
            };
            (row.h, median)
        })
        .collect()
}

/// Pass thresholds for [`lemma_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaThresholds {
    pub wronskian_drift: f64,
    pub dtheta_dk_relative: f64,
    pub margin_slack: f64,
    pub fd_step: f64,
    /// Wronskian checks are skipped once `|sin Δθ|` falls below this.
    pub min_conditioning: f64,
}

impl Default for LemmaThresholds {
    fn default() -> Self {
        Self {
            wronskian_drift: 1e-7,
            dtheta_dk_relative: 1e-5,
            margin_slack: 1e-9,
            fd_step: 1e-5,
            min_conditioning: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSummary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Largest error for drift/derivative checks, smallest margin for the
    /// cone and growth checks.
    pub worst: f64,
}

impl CheckSummary {
    fn new(worst: f64) -> Self {
        Self {
            passed: 0,
            failed: 0,
            skipped: 0,
            worst,
        }
    }

    fn record(&mut self, ok: bool) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub wronskian: CheckSummary,
    pub cone: CheckSummary,
    pub growth: CheckSummary,
    pub dtheta_dk: CheckSummary,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        [self.wronskian, self.cone, self.growth, self.dtheta_dk]
            .iter()
            .all(|c| c.failed == 0)
    }
}

/// Largest relative change of `W = L_a L_b sin(θ_b - θ_a)` over `n` equally
/// spaced points of `[0, B]` for the solutions started at angles `a`, `b`
/// at `x = 0`, together with the smallest `|sin(θ_b - θ_a)|` seen.
pub fn wronskian_drift(
    problem: &PhaseProblem,
    a: f64,
    b: f64,
    n: usize,
) -> Result<(f64, f64), PruferError> {
    let big_b = problem.potential.support_right();
    let mut pa = PhasePoint::start(0.0, a);
    let mut pb = PhasePoint::start(0.0, b);
    let log_w0 = (b - a).sin().abs().ln();
    let mut drift: f64 = 0.0;
    let mut conditioning = (b - a).sin().abs();
    for i in 1..=n.max(1) {
        let x = big_b * i as f64 / n.max(1) as f64;
        pa = integrate_phase(problem, &pa, x)?;
        pb = integrate_phase(problem, &pb, x)?;
        let s = (pb.theta - pa.theta).sin();
        conditioning = conditioning.min(s.abs());
        let log_w = pa.log_length + pb.log_length + s.abs().ln();
        drift = drift.max((log_w - log_w0).exp_m1().abs());
    }
    Ok((drift, conditioning))
}

/// Relative difference between the analytic `dθ/dk` and a central
/// difference with step `eps`, for a `k`-independent start at `x = 0`.
pub fn dtheta_dk_error(
    problem: &PhaseProblem,
    theta0: f64,
    x_target: f64,
    eps: f64,
) -> Result<f64, PruferError> {
    let start = PhasePoint::start(0.0, theta0);
    let analytic = dtheta_dk(problem, &start, x_target)?;
    let up = integrate_phase(&problem.with_k(problem.k + eps), &start, x_target)?.theta;
    let down = integrate_phase(&problem.with_k(problem.k - eps), &start, x_target)?.theta;
    let fd = (up - down) / (2.0 * eps);
    Ok((analytic - fd).abs() / fd.abs().max(analytic.abs()).max(1e-300))
}

/// Runs the Wronskian, cone, growth and `dθ/dk` checks over a `(k, h)` grid.
/// `cone_fraction` is the `t` of the interval `[0, tA]` used for the cone
/// check, with `A` the bump width (or the first breakpoint after `0`).
pub fn lemma_suite(
    p: &PotentialSpec,
    k_samples: &[f64],
    h_samples: &[f64],
    tol: f64,
    cone_fraction: f64,
    thresholds: &LemmaThresholds,
) -> Result<LemmaReport, PruferError> {
    let grid: Vec<(f64, f64)> = k_samples
        .iter()
        .flat_map(|&k| h_samples.iter().map(move |&h| (k, h)))
        .collect();
    let results = grid
        .par_iter()
        .map(|&(k, h)| lemma_point(p, k, h, tol, cone_fraction, thresholds))
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = LemmaReport {
        wronskian: CheckSummary::new(0.0),
        cone: CheckSummary::new(f64::INFINITY),
        growth: CheckSummary::new(f64::INFINITY),
        dtheta_dk: CheckSummary::new(0.0),
    };
    for r in results {
        match r.wronskian {
            Some(d) => {
                report.wronskian.record(d <= thresholds.wronskian_drift);
                report.wronskian.worst = report.wronskian.worst.max(d);
            }
            None => report.wronskian.skipped += 1,
        }
        report.cone.skipped += r.cone_skipped;
        for m in r.cone {
            report.cone.record(m >= -thresholds.margin_slack);
            report.cone.worst = report.cone.worst.min(m);
        }
        for m in r.growth {
            report.growth.record(m >= -thresholds.margin_slack);
            report.growth.worst = report.growth.worst.min(m);
        }
        report
            .dtheta_dk
            .record(r.dtheta_dk <= thresholds.dtheta_dk_relative);
        report.dtheta_dk.worst = report.dtheta_dk.worst.max(r.dtheta_dk);
    }
    Ok(report)
}

struct PointResult {
    wronskian: Option<f64>,
    cone: Vec<f64>,
    cone_skipped: usize,
    growth: Vec<f64>,
    dtheta_dk: f64,
}

fn lemma_point(
    p: &PotentialSpec,
    k: f64,
    h: f64,
    tol: f64,
    cone_fraction: f64,
    th: &LemmaThresholds,
) -> Result<PointResult, PruferError> {
    use std::f64::consts::FRAC_PI_2;
    let problem = PhaseProblem::new(p, k, h, tol)?;
    let big_b = p.support_right();

    let (drift, conditioning) = wronskian_drift(&problem, 0.0, FRAC_PI_2, 16)?;
    let wronskian = (conditioning >= th.min_conditioning).then_some(drift);

    let a = p
        .bump_width()
        .or_else(|| p.breakpoints().into_iter().find(|&x| x > 0.0))
        .unwrap_or(big_b);
    let x1 = (cone_fraction * a).min(big_b);
    let mut cone = Vec::new();
    let mut cone_skipped = 0;
    if x1 > 0.0 {
        let (vmin, vmax) = p.bounds_on(0.0, x1)?;
        let (ae2, be2) = (vmin + k * k, vmax + k * k);
        let starts: Vec<f64> = if ae2 > 0.0 {
            vec![0.0, be2.sqrt().atan(), -ae2.sqrt().atan()]
        } else {
            vec![0.0]
        };
        for theta in starts {
            match check_cone_invariance(&problem, 0.0, x1, &PhasePoint::start(0.0, theta)) {
                Ok(r) => cone.push(r.worst_margin()),
                Err(PruferError::Hypothesis(_)) => cone_skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }

    let mut growth = Vec::new();
    for theta in [0.0, FRAC_PI_2] {
        let trace = integrate_phase_trace(&problem, &PhasePoint::start(0.0, theta), big_b)?;
        growth.push(check_growth_bound(&problem, &trace)?.worst_margin);
    }

    let dtheta_dk = dtheta_dk_error(&problem, 0.0, big_b, th.fd_step)?;
    Ok(PointResult {
        wronskian,
        cone,
        cone_skipped,
        growth,
        dtheta_dk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairing_examples() {
        let r = pair_states(&[1.0], &[1.001], &[0.999], (0.5, 1.5), 0.0);
        assert_eq!(r.pairs.len(), 1);
        assert_relative_eq!(r.pairs[0].gap_bound().unwrap(), 0.001, epsilon = 1e-12);
        assert_relative_eq!(r.pairs[0].gap_antibound().unwrap(), 0.001, epsilon = 1e-12);
        assert!(r.unpaired.is_empty());

        let r = pair_states(&[], &[1.5], &[], (1.0, 2.0), 0.0);
        assert_eq!(r.unpaired, vec![(StateKind::Bound, 1.5)]);

        // two eigenvalues competing for one bound state
        let r = pair_states(&[1.0, 1.1], &[1.06], &[0.99, 1.09], (0.5, 1.5), 0.0);
        assert_eq!(r.pairs[1].bound, Some(1.06));
        assert_eq!(r.pairs[0].bound, None);
        assert_eq!(r.unpaired, vec![(StateKind::NeumannEigenvalue, 1.0)]);
    }

    #[test]
    fn pairing_respects_margin() {
        let r = pair_states(
            &[0.52, 1.0],
            &[0.521, 1.001],
            &[0.519, 0.999],
            (0.5, 1.5),
            0.05,
        );
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].neumann, 1.0);
        assert!(r.unpaired.is_empty());
    }

    #[test]
    fn decay_fit_examples() {
        let gaps: Vec<(f64, f64)> = [1.0_f64, 0.5, 0.25]
            .iter()
            .map(|&h| (h, 3.0 * (-2.0 / h).exp()))
            .collect();
        let f = gap_decay_fit(&gaps).unwrap();
        assert!((f.delta_hat - 2.0).abs() < 1e-12);
        assert!((f.log_c_hat - 3f64.ln()).abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);

        let f = gap_decay_fit(&[(1.0, 0.1), (0.5, 0.1), (0.25, 0.1)]).unwrap();
        assert!(f.delta_hat.abs() < 1e-12);

        let err = gap_decay_fit(&[(1.0, 0.1), (0.5, 1e-14), (0.25, 0.0)]).unwrap_err();
        assert_eq!(
            err,
            ExperimentError::TooFewPoints {
                usable: 1,
                dropped: 2
            }
        );
    }

    #[test]
    fn interlacing_examples() {
        assert!(interlacing_check(&[1.0, 2.0], &[1.5], 0.0).is_empty());
        assert_eq!(interlacing_check(&[1.0, 2.0], &[], 0.0), vec![(1.0, 2.0)]);
        assert!(interlacing_check(&[1.0], &[], 0.0).is_empty());
        // endpoints do not count
        assert_eq!(interlacing_check(&[1.0, 2.0], &[1.0, 2.0], 0.0).len(), 1);
        assert_eq!(
            interlacing_check(&[1.0, 2.0, 3.0], &[1.5], 0.0),
            vec![(2.0, 3.0)]
        );
        // unresolved coincidences count once each
        let b = [1.0, 2.0, 3.0];
        assert!(interlacing_check(&b, &[1.0, 2.0 + 1e-12], 1e-10).is_empty());
        assert_eq!(interlacing_check(&b, &[2.0], 1e-10), vec![(2.0, 3.0)]);
        assert_eq!(
            interlacing_check(&b, &[1.0, 2.0], 0.0),
            vec![(1.0, 2.0), (2.0, 3.0)]
        );
    }

    #[test]
    fn sweep_config_validation() {
        let z = PotentialSpec::zero(1.0).unwrap();
        let ok = SweepConfig::new(z.clone(), (0.5, 3.0), vec![1.0, 0.5]);
        assert!(ok.validate().is_ok());
        for bad in [
            SweepConfig::new(z.clone(), (3.0, 0.5), vec![1.0]),
            SweepConfig::new(z.clone(), (0.5, 3.0), vec![0.5, 1.0]),
            SweepConfig::new(z.clone(), (0.5, 3.0), vec![]),
            SweepConfig {
                right_bc: BoundaryKind::NeumannLeft,
                ..ok.clone()
            },
        ] {
            assert!(matches!(
                bad.validate(),
                Err(ExperimentError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn zero_potential_sweep_is_empty() {
        let z = PotentialSpec::zero(1.0).unwrap();
        let t = h_sweep(&SweepConfig::new(z, (0.5, 3.0), vec![1.0, 0.5, 0.25])).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.records().count(), 0);
        assert_eq!(t.failures().count(), 0);
    }

    #[test]
    fn zero_potential_lemma_suite_passes() {
        let z = PotentialSpec::zero(1.0).unwrap();
        let r = lemma_suite(
            &z,
            &[0.5, 1.0, 2.0],
            &[1.0, 0.5],
            1e-12,
            1.0,
            &LemmaThresholds::default(),
        )
        .unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.cone.passed, 18);
    }

    #[test]
    fn figure_potentials_bump() {
        let (left, right) = figure1_potentials().unwrap();
        assert_eq!(right.support_right(), 2.0);
        assert!(right.check_bump(0.3).unwrap().holds);
        assert!(!left.check_bump(0.3).unwrap().holds);
    }
}
