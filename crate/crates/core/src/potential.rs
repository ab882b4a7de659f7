//! Compactly supported potentials on the half-line domain `[0, B]`.
//!
//! A [`PotentialSpec`] is a [`Profile`] (zero, piecewise constant or a natural
//! cubic spline) restricted to `[0, B]`. Values at discontinuities are the
//! limit from the right. The integrators never evaluate a potential through
//! [`PotentialSpec::evaluate`] directly; they ask for the smooth [`Piece`]
//! between two consecutive breakpoints so that no step straddles a kink.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("invalid potential: {0}")]
    Invalid(String),
    #[error("invalid interval [{x0}, {x1}]")]
    InvalidInterval { x0: f64, x1: f64 },
    #[error("potential is not even: max |V(x) - V(-x)| = {defect:e} at x = {at}")]
    Asymmetric { defect: f64, at: f64 },
}

/// Natural cubic spline stored by knots, knot values and second derivatives
/// (moments). Keeping the moments rather than refitting makes restriction and
/// reflection exact.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    moments: Vec<f64>,
}

impl NaturalSpline {
    /// Fits the natural spline (zero second derivative at both end knots).
    pub fn fit(knots: &[f64], values: &[f64]) -> Result<Self, PotentialError> {
        let n = knots.len();
        if n != values.len() {
            return Err(PotentialError::Invalid(format!(
                "spline has {} knots but {} values",
                n,
                values.len()
            )));
        }
        if n < 2 {
            return Err(PotentialError::Invalid(
                "spline needs at least two knots".into(),
            ));
        }
        check_ascending(knots, "spline knots")?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PotentialError::Invalid(
                "spline values must be finite".into(),
            ));
        }

        // Tridiagonal system for the interior moments, Thomas algorithm.
        let mut moments = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for j in 0..m {
                let i = j + 1;
                let d0 = knots[i] - knots[i - 1];
                let d1 = knots[i + 1] - knots[i];
                diag[j] = 2.0 * (d0 + d1);
                upper[j] = d1;
                rhs[j] =
                    6.0 * ((values[i + 1] - values[i]) / d1 - (values[i] - values[i - 1]) / d0);
            }
            for j in 1..m {
                let lower = knots[j + 1] - knots[j];
                let w = lower / diag[j - 1];
                diag[j] -= w * upper[j - 1];
                rhs[j] -= w * rhs[j - 1];
            }
            moments[m] = rhs[m - 1] / diag[m - 1];
            for j in (0..m - 1).rev() {
                moments[j + 1] = (rhs[j] - upper[j] * moments[j + 2]) / diag[j];
            }
        }
        Ok(Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            moments,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    fn piece(&self, i: usize) -> Piece {
        let d = self.knots[i + 1] - self.knots[i];
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        Piece::Cubic {
            x0: self.knots[i],
            coeffs: [
                y0,
                (y1 - y0) / d - d * (2.0 * m0 + m1) / 6.0,
                m0 / 2.0,
                (m1 - m0) / (6.0 * d),
            ],
        }
    }

    /// Index of the piece containing `x` (right-continuous), if inside the knot range.
    fn piece_index(&self, x: f64) -> Option<usize> {
        let n = self.knots.len();
        if x < self.knots[0] || x >= self.knots[n - 1] {
            return None;
        }
        let upper = self.knots.partition_point(|&k| k <= x);
        Some(upper - 1)
    }

    fn evaluate(&self, x: f64) -> f64 {
        match self.piece_index(x) {
            Some(i) => self.piece(i).evaluate(x),
            None => 0.0,
        }
    }

    /// Inserts a knot at `x` without changing the function.
    fn split_at(&self, x: f64) -> Self {
        let Some(i) = self.piece_index(x) else {
            return self.clone();
        };
        if self.knots[i] == x {
            return self.clone();
        }
        let t = (x - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        let moment = self.moments[i] + t * (self.moments[i + 1] - self.moments[i]);
        let mut out = self.clone();
        out.knots.insert(i + 1, x);
        out.values.insert(i + 1, self.piece(i).evaluate(x));
        out.moments.insert(i + 1, moment);
        out
    }
}

/// The shape of a potential, independent of the computational domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    /// `values[i]` holds on `[breaks[i], breaks[i + 1])`.
    PiecewiseConstant {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    CubicSpline(NaturalSpline),
}

impl Profile {
    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, PotentialError> {
        if breaks.len() != values.len() + 1 {
            return Err(PotentialError::Invalid(format!(
                "{} segment values need {} breakpoints, got {}",
                values.len(),
                values.len() + 1,
                breaks.len()
            )));
        }
        if values.is_empty() {
            return Err(PotentialError::Invalid(
                "piecewise-constant potential needs a segment".into(),
            ));
        }
        check_ascending(&breaks, "breakpoints")?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PotentialError::Invalid(
                "segment values must be finite".into(),
            ));
        }
        Ok(Profile::PiecewiseConstant { breaks, values })
    }

    pub fn spline(knots: &[f64], values: &[f64]) -> Result<Self, PotentialError> {
        Ok(Profile::CubicSpline(NaturalSpline::fit(knots, values)?))
    }

    /// Value on the natural support of the profile (no domain clipping).
    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::PiecewiseConstant { breaks, values } => {
                if x < breaks[0] || x >= breaks[breaks.len() - 1] {
                    0.0
                } else {
                    values[breaks.partition_point(|&b| b <= x) - 1]
                }
            }
            Profile::CubicSpline(s) => s.evaluate(x),
        }
    }

    fn nodes(&self) -> &[f64] {
        match self {
            Profile::Zero => &[],
            Profile::PiecewiseConstant { breaks, .. } => breaks,
            Profile::CubicSpline(s) => s.knots(),
        }
    }

    /// The smooth piece valid on the open interval `(x_lo, x_hi)`, which must
    /// not contain a node.
    fn piece_between(&self, x_lo: f64, x_hi: f64) -> Piece {
        let mid = 0.5 * (x_lo + x_hi);
        match self {
            Profile::Zero => Piece::Constant(0.0),
            Profile::PiecewiseConstant { .. } => Piece::Constant(self.evaluate(mid)),
            Profile::CubicSpline(s) => match s.piece_index(mid) {
                Some(i) => s.piece(i),
                None => Piece::Constant(0.0),
            },
        }
    }
}

/// Smooth restriction of a potential to one interval between breakpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Constant(f64),
    /// `V(x) = c0 + c1 t + c2 t^2 + c3 t^3` with `t = x - x0`.
    Cubic {
        x0: f64,
        coeffs: [f64; 4],
    },
}

impl Piece {
    #[inline]
    pub fn evaluate(&self, x: f64) -> f64 {
        match *self {
            Piece::Constant(v) => v,
            Piece::Cubic {
                x0,
                coeffs: [c0, c1, c2, c3],
            } => {
                let t = x - x0;
                c0 + t * (c1 + t * (c2 + t * c3))
            }
        }
    }

    /// Exact (inf, sup) on `[a, b]`, from the endpoints and the real roots of
    /// the derivative quadratic.
    pub fn bounds(&self, a: f64, b: f64) -> (f64, f64) {
        match *self {
            Piece::Constant(v) => (v, v),
            Piece::Cubic {
                x0,
                coeffs: [_, c1, c2, c3],
            } => {
                let mut lo = self.evaluate(a).min(self.evaluate(b));
                let mut hi = self.evaluate(a).max(self.evaluate(b));
                for t in quadratic_roots(3.0 * c3, 2.0 * c2, c1) {
                    let x = x0 + t;
                    if x > a && x < b {
                        let v = self.evaluate(x);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                (lo, hi)
            }
        }
    }
}

/// Real roots of `a t^2 + b t + c`, degenerating gracefully to the linear case.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    // Numerically stable pair.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

fn check_ascending(xs: &[f64], what: &str) -> Result<(), PotentialError> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(PotentialError::Invalid(format!("{what} must be finite")));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PotentialError::Invalid(format!(
            "{what} must be strictly ascending"
        )));
    }
    Ok(())
}

/// Result of the positivity test `V > 0` on `(0, A]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpCheck {
    pub holds: bool,
    /// Infimum of `V` over `[eps, A]`.
    pub margin: f64,
}

/// A real potential supported in `[0, B]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    profile: Profile,
    support_right: f64,
    bump_width: Option<f64>,
}

impl PotentialSpec {
    pub fn new(profile: Profile, support_right: f64) -> Result<Self, PotentialError> {
        if !(support_right.is_finite() && support_right > 0.0) {
            return Err(PotentialError::Invalid(format!(
                "support endpoint B must be positive, got {support_right}"
            )));
        }
        let nodes = profile.nodes();
        if let (Some(&first), Some(&last)) = (nodes.first(), nodes.last()) {
            if first < 0.0 || last > support_right {
                return Err(PotentialError::Invalid(format!(
                    "nodes [{first}, {last}] leave the half-line support [0, {support_right}]"
                )));
            }
        }
        Ok(Self {
            profile,
            support_right,
            bump_width: None,
        })
    }

    pub fn zero(support_right: f64) -> Result<Self, PotentialError> {
        Self::new(Profile::Zero, support_right)
    }

    /// Piecewise-constant potential on `[breaks[0], breaks[last]]`, with `B = breaks[last]`.
    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, PotentialError> {
        let b = breaks.last().copied().unwrap_or(0.0);
        Self::new(Profile::piecewise_constant(breaks, values)?, b)
    }

    /// Natural spline through the knots, with `B = knots[last]`.
    pub fn spline(knots: &[f64], values: &[f64]) -> Result<Self, PotentialError> {
        let b = knots.last().copied().unwrap_or(0.0);
        Self::new(Profile::spline(knots, values)?, b)
    }

    pub fn with_bump_width(mut self, a: f64) -> Result<Self, PotentialError> {
        if !(a > 0.0 && a <= self.support_right) {
            return Err(PotentialError::Invalid(format!(
                "bump width A = {a} must lie in (0, {}]",
                self.support_right
            )));
        }
        self.bump_width = Some(a);
        Ok(self)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn support_right(&self) -> f64 {
        self.support_right
    }

    pub fn bump_width(&self) -> Option<f64> {
        self.bump_width
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(
            self.profile,
            Profile::Zero | Profile::PiecewiseConstant { .. }
        )
    }

    /// `V(x)`; zero outside `[0, B]`, right limit at discontinuities.
    pub fn evaluate(&self, x: f64) -> f64 {
        if !(0.0..self.support_right).contains(&x) {
            return 0.0;
        }
        self.profile.evaluate(x)
    }

    /// Sorted, duplicate-free points of `[0, B]` where `V` may fail to be smooth,
    /// always including `0` and `B`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(self.profile.nodes().len() + 2);
        pts.push(0.0);
        pts.extend(
            self.profile
                .nodes()
                .iter()
                .copied()
                .filter(|&x| x > 0.0 && x < self.support_right),
        );
        pts.push(self.support_right);
        pts
    }

    /// The smooth piece of `V` on `(x_lo, x_hi)`, an interval inside one
    /// breakpoint cell.
    pub fn piece_between(&self, x_lo: f64, x_hi: f64) -> Piece {
        let (a, b) = if x_lo <= x_hi {
            (x_lo, x_hi)
        } else {
            (x_hi, x_lo)
        };
        if b <= 0.0 || a >= self.support_right {
            return Piece::Constant(0.0);
        }
        self.profile.piece_between(a, b)
    }

    /// Rigorous `(inf, sup)` of `V` on `[x0, x1]`, ignoring values attained only
    /// at isolated points.
    pub fn bounds_on(&self, x0: f64, x1: f64) -> Result<(f64, f64), PotentialError> {
        if !(x0 >= 0.0 && x0 < x1 && x1 <= self.support_right) {
            return Err(PotentialError::InvalidInterval { x0, x1 });
        }
        let pts = self.breakpoints();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for w in pts.windows(2) {
            let a = w[0].max(x0);
            let b = w[1].min(x1);
            if a >= b {
                continue;
            }
            let (l, h) = self.piece_between(w[0], w[1]).bounds(a, b);
            lo = lo.min(l);
            hi = hi.max(h);
        }
        Ok((lo, hi))
    }

    /// `(inf, sup)` over the whole support.
    pub fn global_bounds(&self) -> (f64, f64) {
        self.bounds_on(0.0, self.support_right)
            .expect("support interval is valid by construction")
    }

    /// Tests `V > 0` on `[eps, A]` with `eps = 1e-3 A`.
    pub fn check_bump(&self, a: f64) -> Result<BumpCheck, PotentialError> {
        if !(a > 0.0 && a <= self.support_right) {
            return Err(PotentialError::InvalidInterval { x0: 0.0, x1: a });
        }
        let (margin, _) = self.bounds_on(1e-3 * a, a)?;
        Ok(BumpCheck {
            holds: margin > 0.0,
            margin,
        })
    }
}

/// A potential on the whole line, supported in `[left, right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WholeLinePotential {
    profile: Profile,
    left: f64,
    right: f64,
}

/// Sampling tolerance for the evenness test, relative to `1 + max |V|`.
pub const EVEN_TOLERANCE: f64 = 1e-9;

impl WholeLinePotential {
    pub fn new(profile: Profile, left: f64, right: f64) -> Result<Self, PotentialError> {
        if !(left < right) {
            return Err(PotentialError::InvalidInterval {
                x0: left,
                x1: right,
            });
        }
        Ok(Self {
            profile,
            left,
            right,
        })
    }

    /// Support taken from the profile's outermost nodes.
    pub fn from_profile(profile: Profile) -> Result<Self, PotentialError> {
        let nodes = profile.nodes();
        match (nodes.first(), nodes.last()) {
            (Some(&l), Some(&r)) => Self::new(profile, l, r),
            _ => Err(PotentialError::Invalid(
                "zero profile needs an explicit support".into(),
            )),
        }
    }

    pub fn spline(knots: &[f64], values: &[f64]) -> Result<Self, PotentialError> {
        Self::from_profile(Profile::spline(knots, values)?)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        if x < self.left || x > self.right {
            return 0.0;
        }
        self.profile.evaluate(x)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn support(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    /// Mirror image `x -> -x`.
    pub fn reflected(&self) -> Self {
        let profile = match &self.profile {
            Profile::Zero => Profile::Zero,
            Profile::PiecewiseConstant { breaks, values } => Profile::PiecewiseConstant {
                breaks: breaks.iter().rev().map(|b| -b).collect(),
                values: values.iter().rev().copied().collect(),
            },
            Profile::CubicSpline(s) => Profile::CubicSpline(NaturalSpline {
                knots: s.knots.iter().rev().map(|k| -k).collect(),
                values: s.values.iter().rev().copied().collect(),
                moments: s.moments.iter().rev().copied().collect(),
            }),
        };
        Self {
            profile,
            left: -self.right,
            right: -self.left,
        }
    }

    /// Largest `|V(x) - V(-x)|` over a uniform sample of the support, with its location.
    pub fn asymmetry(&self) -> (f64, f64) {
        const SAMPLES: usize = 4001;
        let r = self.left.abs().max(self.right.abs());
        let mut worst = (0.0, 0.0);
        for i in 0..SAMPLES {
            // Offset from the grid so right-limit conventions at mirrored
            // breakpoints do not register as defects.
            let x = r * (i as f64 + 0.5) / SAMPLES as f64;
            let d = (self.evaluate(x) - self.evaluate(-x)).abs();
            if d > worst.0 {
                worst = (d, x);
            }
        }
        worst
    }

    /// Half-line restriction of an even potential: `x_half = B - |x_whole|`, so
    /// the support edge lands at `0` and the symmetry centre at `B`.
    pub fn even_halfline(&self) -> Result<PotentialSpec, PotentialError> {
        let b = self.right;
        let scale = 1.0 + self.max_abs_sample();
        if (self.left + b).abs() > EVEN_TOLERANCE * b.max(1.0) {
            return Err(PotentialError::Asymmetric {
                defect: f64::INFINITY,
                at: self.left,
            });
        }
        let (defect, at) = self.asymmetry();
        if defect > EVEN_TOLERANCE * scale {
            return Err(PotentialError::Asymmetric { defect, at });
        }
        let profile = match &self.profile {
            Profile::Zero => Profile::Zero,
            Profile::PiecewiseConstant { breaks, .. } => {
                let edges: Vec<f64> = std::iter::once(0.0)
                    .chain(breaks.iter().copied().filter(|&x| x > 0.0 && x < b))
                    .chain(std::iter::once(b))
                    .collect();
                // walk x_whole from b down to 0
                let mut hb = vec![0.0];
                let mut hv = Vec::new();
                for w in edges.windows(2).rev() {
                    hv.push(self.profile.evaluate(0.5 * (w[0] + w[1])));
                    hb.push(b - w[0]);
                }
                Profile::PiecewiseConstant {
                    breaks: hb,
                    values: hv,
                }
            }
            Profile::CubicSpline(s) => {
                let split = s.split_at(0.0);
                let keep: Vec<usize> = (0..split.knots.len())
                    .filter(|&i| split.knots[i] >= 0.0 && split.knots[i] <= b)
                    .collect();
                let pick = |v: &[f64]| keep.iter().rev().map(|&i| v[i]).collect::<Vec<_>>();
                Profile::CubicSpline(NaturalSpline {
                    knots: keep.iter().rev().map(|&i| b - split.knots[i]).collect(),
                    values: pick(&split.values),
                    moments: pick(&split.moments),
                })
            }
        };
        PotentialSpec::new(profile, b)
    }

    /// Plain restriction to `[0, right]` without reflection.
    pub fn restrict_positive(&self) -> Result<PotentialSpec, PotentialError> {
        let profile = match &self.profile {
            Profile::Zero => Profile::Zero,
            Profile::PiecewiseConstant { breaks, values } => {
                let mut hb = Vec::new();
                let mut hv = Vec::new();
                for (i, w) in breaks.windows(2).enumerate() {
                    if w[1] <= 0.0 {
                        continue;
                    }
                    if hb.is_empty() {
                        hb.push(w[0].max(0.0));
                    }
                    hb.push(w[1]);
                    hv.push(values[i]);
                }
                if hv.is_empty() {
                    Profile::Zero
                } else {
                    Profile::PiecewiseConstant {
                        breaks: hb,
                        values: hv,
                    }
                }
            }
            Profile::CubicSpline(s) => {
                let split = s.split_at(0.0);
                let keep: Vec<usize> = (0..split.knots.len())
                    .filter(|&i| split.knots[i] >= 0.0)
                    .collect();
                let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
                Profile::CubicSpline(NaturalSpline {
                    knots: pick(&split.knots),
                    values: pick(&split.values),
                    moments: pick(&split.moments),
                })
            }
        };
        PotentialSpec::new(profile, self.right)
    }

    fn max_abs_sample(&self) -> f64 {
        (0..=1000)
            .map(|i| self.left + (self.right - self.left) * i as f64 / 1000.0)
            .map(|x| self.evaluate(x).abs())
            .fold(0.0, f64::max)
    }
}

/// Knots of the two whole-line spline potentials used for the comparison
/// figure (left: no positive bump at the support edge; right: positive bump).
pub const FIGURE_KNOTS: [f64; 7] = [-2.0, -1.5, -1.0, 0.0, 1.0, 1.5, 2.0];
pub const FIGURE_LEFT_VALUES: [f64; 7] = [0.0, -0.4, -1.0, -0.2, -1.0, -0.4, 0.0];
pub const FIGURE_RIGHT_VALUES: [f64; 7] = [0.0, 0.2, -1.0, -0.2, -1.0, 0.2, 0.0];
