use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use resonance_core::experiments::{
    decay_study, figure1_potentials, figure_gap_profile, h_sweep, interlacing_check, lemma_suite,
    whole_line_sweep, CheckSummary, ExperimentError, LemmaThresholds, StateTable, SweepConfig,
};
use resonance_core::io::{
    emit_fit_json, emit_pairs_csv, emit_scatter_svg, emit_states_csv, fmt_real, parse_config,
    read_states_csv, IoError, PlotStyle, RunConfig,
};
use resonance_core::spectra::{StateKind, StateRecord};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "resonance-lab",
    version,
    about = "Bound and antibound states by Prüfer shooting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate all three kinds of state for each h.
    States(Common),
    /// h-sweep with pairing and exponential gap fit.
    Sweep(Common),
    /// Check that antibound states separate consecutive bound states.
    Interlace(Common),
    /// Wronskian, cone, growth and dθ/dk checks over a (k, h) grid.
    Lemmas(Common),
    /// Both built-in even spline potentials, Neumann and Dirichlet runs merged.
    Figure1(FigureArgs),
    /// Render a states CSV as an SVG scatter plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    /// Comma-separated h values, descending.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    h: Option<Vec<f64>>,
    /// Band as `lo,hi`.
    #[arg(long, value_parser = parse_band, allow_hyphen_values = true)]
    band: Option<(f64, f64)>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FigureArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value_t = 64)]
    grid_n: usize,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "")]
    title: String,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(_) | IoError::Csv(_) => Failure::Numerical(e.into()),
            _ => Failure::Validation(e.into()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidConfig(_) | ExperimentError::Potential(_) => {
                Failure::Validation(e.into())
            }
            _ => Failure::Numerical(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let result = match cli.command {
        Command::States(c) => load(&c).and_then(|cfg| cmd_states(&cfg)),
        Command::Sweep(c) => load(&c).and_then(|cfg| cmd_sweep(&cfg)),
        Command::Interlace(c) => load(&c).and_then(|cfg| cmd_interlace(&cfg)),
        Command::Lemmas(c) => load(&c).and_then(|cfg| cmd_lemmas(&cfg)),
        Command::Figure1(a) => cmd_figure1(&a),
        Command::Plot(a) => cmd_plot(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(format!("expected `lo,hi`, got {s:?}"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("RESONANCE_LAB_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            anyhow!("RESONANCE_LAB_THREADS must be a positive integer, got {v:?}")
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn load(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = parse_config(&c.config)?;
    apply(&mut cfg, &c.overrides);
    cfg.validate()?;
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, o: &Overrides) {
    if let Some(h) = &o.h {
        cfg.h = h.clone();
    }
    if let Some(b) = &o.band {
        cfg.band = [b.0, b.1];
    }
    if let Some(out) = &o.out {
        cfg.out_dir = out.clone();
    }
}

fn out_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run_sweep(cfg: &RunConfig) -> Result<(SweepConfig, StateTable), Failure> {
    let sweep = cfg.sweep_config()?;
    let table = h_sweep(&sweep)?;
    Ok((sweep, table))
}

/// Fails with exit code 3 after all outputs are written if any `h` failed.
fn report_failures(table: &StateTable) -> Outcome {
    let failed: Vec<String> = table
        .failures()
        .map(|(h, e)| format!("h = {h}: {e}"))
        .collect();
    for f in &failed {
        eprintln!("warning: {f}");
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(anyhow!(
            "{} of {} h values failed",
            failed.len(),
            table.rows.len()
        )))
    }
}

fn print_counts(table: &StateTable) {
    println!(
        "{:>12} {:>8} {:>8} {:>10}",
        "h", "neumann", "bound", "antibound"
    );
    for r in &table.rows {
        println!(
            "{:>12.6} {:>8} {:>8} {:>10}",
            r.h,
            r.k_values(StateKind::NeumannEigenvalue).len(),
            r.k_values(StateKind::Bound).len(),
            r.k_values(StateKind::Antibound).len()
        );
    }
}

fn cmd_states(cfg: &RunConfig) -> Outcome {
    let (_, table) = run_sweep(cfg)?;
    out_dir(&cfg.out_dir)?;
    let records: Vec<StateRecord> = table.records().copied().collect();
    emit_states_csv(&cfg.out_dir.join("states.csv"), &records)?;
    print_counts(&table);
    report_failures(&table)
}

fn cmd_sweep(cfg: &RunConfig) -> Outcome {
    let (_, table) = run_sweep(cfg)?;
    out_dir(&cfg.out_dir)?;
    let records: Vec<StateRecord> = table.records().copied().collect();
    emit_states_csv(&cfg.out_dir.join("states.csv"), &records)?;
    emit_scatter_svg(
        &cfg.out_dir.join("scatter.svg"),
        &records,
        &PlotStyle::default(),
    )?;

    let study = decay_study(&table, cfg.band(), cfg.margin());
    emit_pairs_csv(&cfg.out_dir.join("pairs.csv"), &study.pairings)?;
    print_counts(&table);
    for (h, rep) in &study.pairings {
        let max_gap = rep.max_gap().map(fmt_real).unwrap_or_else(|| "-".into());
        println!(
            "h = {h:.6}: {} pairs, complete = {}, unpaired = {}, max gap = {max_gap}",
            rep.pairs.len(),
            rep.all_complete(),
            rep.unpaired.len()
        );
    }
    match study.pairing_from_h {
        Some(h) => println!("all Neumann eigenvalues paired for h <= {h}"),
        None => println!("pairing incomplete at the smallest h"),
    }
    report_failures(&table)?;
    let fit = study.fit.map_err(Failure::from)?;
    emit_fit_json(&cfg.out_dir.join("fit.json"), &fit)?;
    println!(
        "fit: delta_hat = {:.6}, logC_hat = {:.6}, R^2 = {:.6} ({} points, {} at floor)",
        fit.delta_hat, fit.log_c_hat, fit.r_squared, fit.n_points, fit.n_dropped
    );
    Ok(())
}

fn cmd_interlace(cfg: &RunConfig) -> Outcome {
    let (_, table) = run_sweep(cfg)?;
    out_dir(&cfg.out_dir)?;
    let records: Vec<StateRecord> = table.records().copied().collect();
    emit_states_csv(&cfg.out_dir.join("states.csv"), &records)?;
    let resolution = cfg.resolution();
    let mut lines = vec!["h,k1,k2".to_string()];
    let mut total = 0;
    for r in &table.rows {
        let v = interlacing_check(
            &r.k_values(StateKind::Bound),
            &r.k_values(StateKind::Antibound),
            resolution,
        );
        println!(
            "h = {:.6}: {} bound, {} antibound, {} violations",
            r.h,
            r.k_values(StateKind::Bound).len(),
            r.k_values(StateKind::Antibound).len(),
            v.len()
        );
        total += v.len();
        lines.extend(
            v.iter()
                .map(|(a, b)| format!("{},{},{}", fmt_real(r.h), fmt_real(*a), fmt_real(*b))),
        );
    }
    std::fs::write(cfg.out_dir.join("interlace.csv"), lines.join("\n") + "\n")
        .context("writing interlace.csv")?;
    println!("total violations: {total} (resolution {resolution:e})");
    report_failures(&table)
}

fn summary_json(c: &CheckSummary) -> serde_json::Value {
    serde_json::json!({"passed": c.passed, "failed": c.failed, "skipped": c.skipped, "worst": c.worst})
}

fn cmd_lemmas(cfg: &RunConfig) -> Outcome {
    let p = cfg
        .potential
        .build()
        .map_err(|e| Failure::Validation(e.into()))?;
    let th = LemmaThresholds::default();
    let report = lemma_suite(
        &p,
        &cfg.lemma_k(),
        &cfg.h,
        cfg.tol,
        cfg.cone_fraction.unwrap_or(1.0),
        &th,
    )
    .map_err(|e| Failure::Numerical(e.into()))?;
    out_dir(&cfg.out_dir)?;
    let json = serde_json::json!({
        "wronskian": summary_json(&report.wronskian),
        "cone": summary_json(&report.cone),
        "growth": summary_json(&report.growth),
        "dtheta_dk": summary_json(&report.dtheta_dk),
        "all_pass": report.all_pass(),
    });
    std::fs::write(
        cfg.out_dir.join("lemmas.json"),
        serde_json::to_string_pretty(&json).context("encoding")?,
    )
    .context("writing lemmas.json")?;
    for (name, c) in [
        ("wronskian", &report.wronskian),
        ("cone", &report.cone),
        ("growth", &report.growth),
        ("dtheta_dk", &report.dtheta_dk),
    ] {
        println!(
            "{name:>10}: {} passed, {} failed, {} skipped, worst {:e}",
            c.passed, c.failed, c.skipped, c.worst
        );
    }
    println!("all pass: {}", report.all_pass());
    Ok(())
}

fn cmd_figure1(args: &FigureArgs) -> Outcome {
    let band = args.overrides.band.unwrap_or((0.05, 1.0));
    let h_values = args
        .overrides
        .h
        .clone()
        .unwrap_or_else(|| (1..=10).map(|i| 1.0 / (2 * i) as f64).collect());
    let out = args
        .overrides
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"));
    out_dir(&out)?;

    let (left, right) = figure1_potentials().map_err(|e| Failure::Validation(e.into()))?;
    let mut profiles = Vec::new();
    for (name, p) in [("left", left), ("right", right)] {
        let mut cfg = SweepConfig::new(p, band, h_values.clone());
        cfg.grid_n = args.grid_n;
        let tables = whole_line_sweep(&cfg)?;
        let records: Vec<StateRecord> = tables.iter().flat_map(|t| t.records().copied()).collect();
        emit_states_csv(&out.join(format!("figure1_{name}_states.csv")), &records)?;
        let style = PlotStyle {
            title: format!("{name} potential: bound (squares) and antibound (circles)"),
            ..PlotStyle::default()
        };
        let shown: Vec<StateRecord> = records
            .iter()
            .copied()
            .filter(|r| r.kind != StateKind::NeumannEigenvalue)
            .collect();
        emit_scatter_svg(&out.join(format!("figure1_{name}.svg")), &shown, &style)?;
        for t in &tables {
            report_failures(t)?;
        }
        profiles.push(figure_gap_profile(&tables));
    }

    let cell = |g: Option<f64>| g.map(fmt_real).unwrap_or_default();
    let mut lines = vec!["h,inv_h,left_median_gap,right_median_gap".to_string()];
    println!(
        "{:>8} {:>22} {:>22}",
        "1/h", "left median gap", "right median gap"
    );
    for (l, r) in profiles[0].iter().zip(&profiles[1]) {
        lines.push(format!(
            "{},{},{},{}",
            fmt_real(l.0),
            fmt_real(1.0 / l.0),
            cell(l.1),
            cell(r.1)
        ));
        println!("{:>8.3} {:>22} {:>22}", 1.0 / l.0, cell(l.1), cell(r.1));
    }
    std::fs::write(out.join("figure1_gaps.csv"), lines.join("\n") + "\n")
        .context("writing figure1_gaps.csv")?;
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Outcome {
    let file = std::fs::File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))
        .map_err(Failure::Validation)?;
    let rows = read_states_csv(file)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        out_dir(parent)?;
    }
    let style = PlotStyle {
        title: args.title.clone(),
        ..PlotStyle::default()
    };
    emit_scatter_svg(&args.out, &rows, &style)?;
    println!("{} markers written to {}", rows.len(), args.out.display());
    Ok(())
}
