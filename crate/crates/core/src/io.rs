//! Run configuration, CSV tables, `fit.json` and SVG scatter plots.

use crate::experiments::{DecayFit, PairingReport, SweepConfig};
use crate::potential::{PotentialError, PotentialSpec, WholeLinePotential};
use crate::spectra::{BoundaryKind, StateKind, StateRecord, DEFAULT_K_TOL};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: &'static str, message: impl Into<String>) -> IoError {
    IoError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PotentialConfig {
    #[serde(rename = "zero")]
    Zero {
        support_right: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bump_width: Option<f64>,
    },
    #[serde(rename = "pc")]
    PiecewiseConstant {
        breaks: Vec<f64>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bump_width: Option<f64>,
    },
    /// With `even = true` the knots describe an even whole-line potential,
    /// reduced to the half-line with its support edge at `0`.
    #[serde(rename = "spline")]
    Spline {
        knots: Vec<f64>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        even: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bump_width: Option<f64>,
    },
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialSpec, PotentialError> {
        let (p, a) = match self {
            Self::Zero {
                support_right,
                bump_width,
            } => (PotentialSpec::zero(*support_right)?, bump_width),
            Self::PiecewiseConstant {
                breaks,
                values,
                bump_width,
            } => (
                PotentialSpec::piecewise_constant(breaks.clone(), values.clone())?,
                bump_width,
            ),
            Self::Spline {
                knots,
                values,
                even,
                bump_width,
            } => {
                let p = if *even {
                    WholeLinePotential::spline(knots, values)?.even_halfline()?
                } else {
                    PotentialSpec::spline(knots, values)?
                };
                (p, bump_width)
            }
        };
        match a {
            Some(a) => p.with_bump_width(*a),
            None => Ok(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RightBc {
    #[default]
    Neumann,
    Dirichlet,
}

impl RightBc {
    pub fn boundary(self) -> BoundaryKind {
        match self {
            Self::Neumann => BoundaryKind::NeumannRight,
            Self::Dirichlet => BoundaryKind::DirichletRight,
        }
    }
}

fn default_grid_n() -> usize {
    64
}

fn default_tol() -> f64 {
    crate::prufer::DEFAULT_TOL
}

fn default_k_tol() -> f64 {
    DEFAULT_K_TOL
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    #[serde(default)]
    pub right_bc: RightBc,
    pub band: [f64; 2],
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_match: Option<f64>,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_k_tol")]
    pub k_tol: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Pairing margin at each band edge; defaults to a twentieth of the band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    /// `k` samples for `lemmas`; defaults to the band ends and midpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma_k: Option<Vec<f64>>,
    /// `t` in the cone-check interval `[0, tA]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_fraction: Option<f64>,
    /// Coincidence resolution for `interlace`; defaults to `10 * k_tol`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
}

impl RunConfig {
    /// Minimal configuration; the other fields take their defaults.
    pub fn new(potential: PotentialConfig, band: [f64; 2], h: Vec<f64>) -> Self {
        Self {
            potential,
            right_bc: RightBc::Neumann,
            band,
            h,
            x_match: None,
            grid_n: default_grid_n(),
            tol: default_tol(),
            k_tol: default_k_tol(),
            out_dir: default_out_dir(),
            margin: None,
            lemma_k: None,
            cone_fraction: None,
            resolution: None,
        }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        let [lo, hi] = self.band;
        if !(positive(lo) && lo < hi && hi.is_finite()) {
            return Err(invalid(
                "band",
                format!("need 0 < c_k < C_k, got [{lo}, {hi}]"),
            ));
        }
        if self.h.is_empty() || !self.h.iter().all(|&h| positive(h)) {
            return Err(invalid("h", "need a nonempty list of positive values"));
        }
        if self.h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("h", "values must be strictly descending"));
        }
        if self.grid_n < 2 {
            return Err(invalid("grid_n", "need at least 2"));
        }
        if !positive(self.tol) {
            return Err(invalid("tol", "must be positive"));
        }
        if !positive(self.k_tol) {
            return Err(invalid("k_tol", "must be positive"));
        }
        let p = self
            .potential
            .build()
            .map_err(|e| invalid("potential", e.to_string()))?;
        if let Some(x) = self.x_match {
            if !(0.0..=p.support_right()).contains(&x) {
                return Err(invalid(
                    "x_match",
                    format!("{x} outside [0, {}]", p.support_right()),
                ));
            }
        }
        if let Some(m) = self.margin {
            if !(m >= 0.0 && 2.0 * m < hi - lo) {
                return Err(invalid(
                    "margin",
                    "must be nonnegative and less than half the band",
                ));
            }
        }
        if let Some(ks) = &self.lemma_k {
            if ks.is_empty() || !ks.iter().all(|&k| positive(k)) {
                return Err(invalid(
                    "lemma_k",
                    "need a nonempty list of positive values",
                ));
            }
        }
        if let Some(t) = self.cone_fraction {
            if !(positive(t) && t <= 1.0) {
                return Err(invalid("cone_fraction", "must lie in (0, 1]"));
            }
        }
        if let Some(r) = self.resolution {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(invalid("resolution", "must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn band(&self) -> (f64, f64) {
        (self.band[0], self.band[1])
    }

    pub fn margin(&self) -> f64 {
        self.margin
            .unwrap_or_else(|| crate::experiments::default_margin(self.band()))
    }

    pub fn resolution(&self) -> f64 {
        self.resolution.unwrap_or(10.0 * self.k_tol)
    }

    pub fn lemma_k(&self) -> Vec<f64> {
        self.lemma_k.clone().unwrap_or_else(|| {
            vec![
                self.band[0],
                0.5 * (self.band[0] + self.band[1]),
                self.band[1],
            ]
        })
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, IoError> {
        let mut cfg = SweepConfig::new(self.potential.build()?, self.band(), self.h.clone());
        cfg.right_bc = self.right_bc.boundary();
        cfg.x_match = self.x_match;
        cfg.grid_n = self.grid_n;
        cfg.tol = self.tol;
        cfg.k_tol = self.k_tol;
        Ok(cfg)
    }

    /// Canonical JSON form; [`parse_config_str`] inverts it.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, IoError> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// 15 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.14e}")
}

pub const STATES_HEADER: [&str; 7] = [
    "h",
    "inv_h",
    "kind",
    "k",
    "winding",
    "residual",
    "dmismatch_dk",
];

/// Sorted by `h` descending, then kind, then `k`.
pub fn sorted_states(rows: &[StateRecord]) -> Vec<StateRecord> {
    let mut v = rows.to_vec();
    v.sort_by(|a, b| {
        b.h.total_cmp(&a.h)
            .then(a.kind.as_str().cmp(b.kind.as_str()))
            .then(a.k.total_cmp(&b.k))
    });
    v
}

pub fn write_states_csv<W: std::io::Write>(out: W, rows: &[StateRecord]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATES_HEADER)?;
    for r in sorted_states(rows) {
        w.write_record([
            fmt_real(r.h),
            fmt_real(1.0 / r.h),
            r.kind.as_str().to_string(),
            fmt_real(r.k),
            r.winding.to_string(),
            fmt_real(r.residual),
            fmt_real(r.dmismatch_dk),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_states_csv(path: &Path, rows: &[StateRecord]) -> Result<(), IoError> {
    write_states_csv(std::fs::File::create(path)?, rows)
}

pub fn read_states_csv<R: std::io::Read>(input: R) -> Result<Vec<StateRecord>, IoError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(STATES_HEADER) {
        return Err(invalid(
            "header",
            format!("expected {}", STATES_HEADER.join(",")),
        ));
    }
    let num =
        |s: &str, field: &'static str| s.parse::<f64>().map_err(|e| invalid(field, e.to_string()));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(StateRecord {
            h: num(&rec[0], "h")?,
            kind: StateKind::parse(&rec[2]).ok_or_else(|| invalid("kind", rec[2].to_string()))?,
            k: num(&rec[3], "k")?,
            winding: rec[4]
                .parse()
                .map_err(|e: std::num::ParseIntError| invalid("winding", e.to_string()))?,
            residual: num(&rec[5], "residual")?,
            dmismatch_dk: num(&rec[6], "dmismatch_dk")?,
        });
    }
    Ok(out)
}

pub fn emit_pairs_csv(path: &Path, pairings: &[(f64, PairingReport)]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "h",
        "inv_h",
        "neumann",
        "bound",
        "antibound",
        "gap_bound",
        "gap_antibound",
    ])?;
    let opt = |x: Option<f64>| x.map(fmt_real).unwrap_or_default();
    for (h, rep) in pairings {
        for p in &rep.pairs {
            w.write_record([
                fmt_real(*h),
                fmt_real(1.0 / h),
                fmt_real(p.neumann),
                opt(p.bound),
                opt(p.antibound),
                opt(p.gap_bound()),
                opt(p.gap_antibound()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_fit_json(path: &Path, fit: &DecayFit) -> Result<(), IoError> {
    std::fs::write(path, serde_json::to_string_pretty(fit)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub marker_size: f64,
    pub title: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 480.0,
            margin: 56.0,
            marker_size: 4.0,
            title: String::new(),
        }
    }
}

/// Data-to-pixel map of a scatter plot over `[0, x_max] x [0, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x_max: f64,
    pub y_max: f64,
    width: f64,
    height: f64,
    margin: f64,
}

impl Frame {
    pub fn fit(rows: &[StateRecord], style: &PlotStyle) -> Self {
        let x_max = rows.iter().map(|r| 1.0 / r.h).fold(0.0, f64::max);
        let y_max = rows.iter().map(|r| r.k).fold(0.0, f64::max);
        Self {
            x_max: nice_ceil(x_max),
            y_max: nice_ceil(y_max),
            width: style.width,
            height: style.height,
            margin: style.margin,
        }
    }

    pub fn to_px(&self, inv_h: f64, k: f64) -> (f64, f64) {
        let w = self.width - 2.0 * self.margin;
        let h = self.height - 2.0 * self.margin;
        (
            self.margin + w * inv_h / self.x_max,
            self.height - self.margin - h * k / self.y_max,
        )
    }
}

/// Smallest of `{1, 2, 5} x 10^n` at or above `x` (`1` for empty data).
fn nice_ceil(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    let p = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * p)
        .find(|&v| v >= x * (1.0 - 1e-12))
        .unwrap_or(10.0 * p)
}

/// Squares for bound states, circles for antibound states, diamonds for
/// Neumann eigenvalues; axes `1/h` and `k`.
pub fn render_scatter_svg(rows: &[StateRecord], style: &PlotStyle) -> String {
    let f = Frame::fit(rows, style);
    let (w, h, m) = (style.width, style.height, style.margin);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if !style.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
            w / 2.0,
            m / 2.0,
            xml_escape(&style.title)
        );
    }
    let (x0, y0) = f.to_px(0.0, 0.0);
    let (x1, y1) = f.to_px(f.x_max, f.y_max);
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
    );
    let _ = writeln!(s, r#"<g class="ticks" font-size="11">"#);
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let (tx, _) = f.to_px(t * f.x_max, 0.0);
        let (_, ty) = f.to_px(0.0, t * f.y_max);
        let _ = writeln!(
            s,
            r#"<text x="{tx}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{ty}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            y0 + 16.0,
            tick_label(t * f.x_max),
            x0 - 6.0,
            tick_label(t * f.y_max)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">1/h</text>"#,
        (x0 + x1) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">k</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let r = style.marker_size;
    let _ = writeln!(s, r#"<g class="markers">"#);
    for row in sorted_states(rows) {
        let inv_h = 1.0 / row.h;
        let (cx, cy) = f.to_px(inv_h, row.k);
        let data = format!(
            r#"data-inv-h="{}" data-k="{}""#,
            fmt_real(inv_h),
            fmt_real(row.k)
        );
        let _ = match row.kind {
            StateKind::Bound => writeln!(
                s,
                r#"<rect class="marker bound" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="navy" {data}/>"#,
                cx - r,
                cy - r,
                2.0 * r,
                2.0 * r
            ),
            StateKind::Antibound => writeln!(
                s,
                r#"<circle class="marker antibound" cx="{cx}" cy="{cy}" r="{r}" fill="none" stroke="firebrick" {data}/>"#
            ),
            StateKind::NeumannEigenvalue => writeln!(
                s,
                r#"<path class="marker neumann" d="M {cx} {} L {} {cy} L {cx} {} L {} {cy} Z" fill="none" stroke="gray" {data}/>"#,
                cy - r,
                cx + r,
                cy + r,
                cx - r
            ),
        };
    }
    let _ = writeln!(s, "</g>\n</svg>");
    s
}

pub fn emit_scatter_svg(
    path: &Path,
    rows: &[StateRecord],
    style: &PlotStyle,
) -> Result<(), IoError> {
    std::fs::write(path, render_scatter_svg(rows, style))?;
    Ok(())
}

fn tick_label(x: f64) -> String {
    let s = format!("{x:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
