//! Command-line front end: reads a potential from JSON and runs one
//! computation, writing CSV (or JSON for kernel samples).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hillwave::bloch::bloch_pair;
use hillwave::floquet::discriminant;
use hillwave::kernel::{decay_report, stationary_targets, KernelEvaluator, KernelOptions, XySample};
use hillwave::potential::PeriodicPotential;
use hillwave::quasimomentum::{ChartOptions, QuasimomentumChart};
use hillwave::spectrum::BandStructure;
use hillwave::transform::{evolve, Gaussian, TransformOptions};
use hillwave::HillError;
use serde::Serialize;

pub mod grid;
mod verify;

use grid::Grid;

#[derive(Debug, Parser)]
#[command(name = "hillwave", version, about = "Band structure, Bloch transform and Schrodinger kernel of periodic potentials")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "HILLWAVE_THREADS")]
    pub threads: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct PotentialArg {
    /// JSON file `{"cosine": [a0, a1, ...], "sine": [b0, b1, ...]}`.
    #[arg(long)]
    pub potential: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band edges (in `w = sqrt(E - E_0)` and in energy) and gap data.
    Spectrum {
        #[command(flatten)]
        pot: PotentialArg,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Discriminant `D(w)` and its first three derivatives.
    Discriminant {
        #[command(flatten)]
        pot: PotentialArg,
        /// Grid of `w` values, `a:b:N`.
        #[arg(long, default_value = "0:20:201")]
        w: Grid,
    },
    /// Band functions `E(k)` and derivatives on a uniform grid per band.
    Bands {
        #[command(flatten)]
        pot: PotentialArg,
        #[arg(long, default_value_t = 6)]
        bands: usize,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Bloch waves and normalised periodic factors at one `w`.
    Bloch {
        #[command(flatten)]
        pot: PotentialArg,
        #[arg(long)]
        w: f64,
        /// Points per period.
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// `e^{itH} f` for a Gaussian `f`, via the Bloch transform.
    Evolve {
        #[command(flatten)]
        pot: PotentialArg,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        center: f64,
        #[arg(long, default_value_t = 0.5)]
        width: f64,
        #[arg(long, default_value_t = 0.0)]
        momentum: f64,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        x_min: f64,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        x_max: f64,
        #[arg(long, default_value_t = 12)]
        bands: usize,
    },
    /// One kernel value `K(t, x, y)` as JSON.
    Kernel {
        #[command(flatten)]
        pot: PotentialArg,
        #[arg(long)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[arg(long, default_value_t = 12)]
        bands: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// `sup |K|` over sample points against `max(t^{-1/2}, t^{-1/3})`.
    Decay {
        #[command(flatten)]
        pot: PotentialArg,
        /// Times, e.g. `1:64:log16`.
        #[arg(long, default_value = "1:64:log16")]
        t: Grid,
        #[arg(long, default_value_t = 12)]
        bands: usize,
        /// Bands whose inflection and edge velocities are sampled.
        #[arg(long, default_value_t = 4)]
        target_bands: usize,
    },
    /// Identity and invariant checks with a pass/fail table.
    Verify {
        #[command(flatten)]
        pot: PotentialArg,
        #[arg(long, default_value_t = 12)]
        bands: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit code 2.
    Validation(String),
    /// Numerical failure or failed checks: exit code 1.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<HillError> for CliError {
    fn from(e: HillError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Numerical(format!("output: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Numerical(format!("output: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hillwave: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn load_potential(path: &Path) -> CliResult<PeriodicPotential> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let p: PeriodicPotential =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    p.validate()?;
    Ok(p)
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn positive_count(name: &str, n: usize) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::Validation(format!("--{name} must be at least 1")));
    }
    Ok(())
}

fn finite(name: &str, v: f64) -> CliResult<()> {
    if !v.is_finite() {
        return Err(CliError::Validation(format!("--{name} must be finite, got {v}")));
    }
    Ok(())
}

struct Setup {
    bs: BandStructure<f64>,
    chart: QuasimomentumChart,
}

fn setup(pot: &PeriodicPotential, bands: usize) -> CliResult<Setup> {
    positive_count("bands", bands)?;
    let bs = BandStructure::compute(pot, bands + 1, None)?;
    let chart = QuasimomentumChart::build(&bs, bands, ChartOptions::default())?;
    Ok(Setup { bs, chart })
}

fn csv_writer(out: Box<dyn Write>, header: &[&str]) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn record(w: &mut csv::Writer<Box<dyn Write>>, vals: &[f64]) -> CliResult<()> {
    w.write_record(vals.iter().map(|v| fmt_f64(*v)))?;
    Ok(())
}

#[derive(Serialize)]
struct KernelJson {
    t: f64,
    x: f64,
    y: f64,
    value_re: f64,
    value_im: f64,
    per_band: Vec<hillwave::kernel::BandContribution>,
    tail_model_re: f64,
    tail_model_im: f64,
    tail_bound: f64,
    error: f64,
    converged: bool,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        positive_count("threads", n)?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out: Box<dyn Write> = match &cli.output {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout())),
    };
    match &cli.command {
        Command::Spectrum { pot, n_max, tol } => {
            positive_count("n-max", *n_max)?;
            if let Some(t) = tol {
                if !(*t > 0.0) {
                    return Err(CliError::Validation("--tol must be positive".into()));
                }
            }
            let p = load_potential(&pot.potential)?;
            let bs = BandStructure::<f64>::compute(&p, *n_max, *tol)?;
            let mut w = csv_writer(out, &["band", "w_lo", "w_hi", "energy_lo", "energy_hi", "gap_after", "gap_height"])?;
            for n in 0..*n_max {
                let (lo, hi) = bs.band(n)?;
                let g = bs.gap(n + 1);
                let mut row = vec![n.to_string()];
                row.extend(
                    [lo, hi, lo * lo + bs.e0, hi * hi + bs.e0, g.length, g.height]
                        .iter()
                        .map(|v| fmt_f64(*v)),
                );
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        Command::Discriminant { pot, w: grid } => {
            let p = load_potential(&pot.potential)?;
            if grid.lo < 0.0 {
                return Err(CliError::Validation("w must be non-negative".into()));
            }
            let shifted = BandStructure::<f64>::compute(&p, 1, None)?.potential;
            let mut w = csv_writer(out, &["w", "d", "d_prime", "d_second", "d_third"])?;
            for x in grid.points() {
                let d = discriminant(&shifted, x)?;
                record(&mut w, &[d.w, d.d, d.d_prime, d.d_second, d.d_third])?;
            }
            w.flush()?;
        }
        Command::Bands { pot, bands, samples } => {
            positive_count("samples", *samples)?;
            let p = load_potential(&pot.potential)?;
            let s = setup(&p, *bands)?;
            let mut w = csv_writer(out, &["band", "k", "w", "energy", "e_dot", "e_ddot", "e_dddot"])?;
            for n in 0..*bands {
                let b = s.chart.band(n);
                for j in 0..*samples {
                    let k = b.k_lo + (b.k_hi - b.k_lo) * (j as f64 + 0.5) / *samples as f64;
                    let mut row = vec![n.to_string()];
                    row.extend(
                        [k, s.chart.w(k)?, s.chart.energy(k)?, s.chart.e_dot(k)?, s.chart.e_ddot(k)?, s.chart.e_dddot(k)?]
                            .iter()
                            .map(|v| fmt_f64(*v)),
                    );
                    w.write_record(&row)?;
                }
            }
            w.flush()?;
        }
        Command::Bloch { pot, w: wv, grid } => {
            finite("w", *wv)?;
            positive_count("grid", *grid)?;
            let p = load_potential(&pot.potential)?;
            // enough gaps to cover w
            let n_max = ((wv.abs() / std::f64::consts::PI).ceil() as usize + 2).max(2);
            let bs = BandStructure::<f64>::compute(&p, n_max, None)?;
            let xs: Vec<f64> = (0..*grid).map(|i| i as f64 / *grid as f64).collect();
            let ev = bloch_pair(&bs, *wv, &xs)?;
            let mut w = csv_writer(
                out,
                &["x", "re_plus", "im_plus", "re_minus", "im_minus", "re_m0_plus", "im_m0_plus", "re_m0_minus", "im_m0_minus"],
            )?;
            for i in 0..xs.len() {
                let (a, b, c, d) = (ev.bloch_plus[i], ev.bloch_minus[i], ev.m0_plus[i], ev.m0_minus[i]);
                record(&mut w, &[xs[i], a.re, a.im, b.re, b.im, c.re, c.im, d.re, d.im])?;
            }
            w.flush()?;
            eprintln!(
                "band {} k {} N^2 {}",
                ev.band,
                fmt_f64(ev.k),
                ev.n_squared.map_or("undefined".into(), fmt_f64)
            );
        }
        Command::Evolve {
            pot,
            t,
            center,
            width,
            momentum,
            x_min,
            x_max,
            bands,
        } => {
            for (n, v) in [("t", t), ("center", center), ("width", width), ("momentum", momentum), ("x-min", x_min), ("x-max", x_max)] {
                finite(n, *v)?;
            }
            if !(*width > 0.0) || *t < 0.0 || x_max <= x_min {
                return Err(CliError::Validation("need width > 0, t >= 0 and x-max > x-min".into()));
            }
            let p = load_potential(&pot.potential)?;
            let s = setup(&p, *bands)?;
            let g = Gaussian {
                center: *center,
                width: *width,
                amplitude: 1.0,
                momentum: *momentum,
            };
            let opts = TransformOptions {
                n_bands: *bands,
                ..Default::default()
            };
            let ev = evolve(&s.bs, &s.chart, &g, *t, *x_min, *x_max, opts)?;
            let mut w = csv_writer(out, &["x", "re", "im", "abs"])?;
            for (x, u) in ev.x.iter().zip(&ev.u) {
                record(&mut w, &[*x, u.re, u.im, u.norm()])?;
            }
            w.flush()?;
        }
        Command::Kernel { pot, t, x, y, bands, tol } => {
            for (n, v) in [("t", t), ("x", x), ("y", y), ("tol", tol)] {
                finite(n, *v)?;
            }
            if !(*t > 0.0) || !(*tol > 0.0) {
                return Err(CliError::Validation("t and tol must be positive".into()));
            }
            let p = load_potential(&pot.potential)?;
            let s = setup(&p, *bands)?;
            let opts = KernelOptions {
                n_bands: *bands,
                tol: *tol,
                ..Default::default()
            };
            let ev = KernelEvaluator::new(&s.bs, &s.chart, opts)?;
            let k = ev.kernel(*t, *x, *y)?;
            let json = KernelJson {
                t: k.t,
                x: k.x,
                y: k.y,
                value_re: k.value.re,
                value_im: k.value.im,
                per_band: k.per_band,
                tail_model_re: k.tail_model.re,
                tail_model_im: k.tail_model.im,
                tail_bound: k.tail_bound,
                error: k.error,
                converged: k.converged,
            };
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &json).map_err(|e| CliError::Numerical(e.to_string()))?;
            writeln!(out)?;
            out.flush()?;
        }
        Command::Decay {
            pot,
            t,
            bands,
            target_bands,
        } => {
            if !(t.lo > 0.0) {
                return Err(CliError::Validation("times must be positive".into()));
            }
            let p = load_potential(&pot.potential)?;
            let s = setup(&p, *bands)?;
            let ev = KernelEvaluator::new(
                &s.bs,
                &s.chart,
                KernelOptions {
                    n_bands: *bands,
                    ..Default::default()
                },
            )?;
            let samples = decay_samples(&s.chart, *target_bands);
            let r = decay_report(&ev, &t.points(), &samples)?;
            let mut w = csv_writer(out, &["t", "sup_abs", "ratio"])?;
            for i in 0..r.t_grid.len() {
                record(&mut w, &[r.t_grid[i], r.sup_abs[i], r.ratio[i]])?;
            }
            w.flush()?;
            eprintln!("fitted C {} slope {}", fmt_f64(r.fitted_c), fmt_f64(r.slope));
        }
        Command::Verify { pot, bands, seed } => {
            let p = load_potential(&pot.potential)?;
            let rows = verify::run(&p, *bands, *seed)?;
            let mut w = csv_writer(out, &["check", "residual", "tolerance", "status"])?;
            let mut failed = Vec::new();
            for r in &rows {
                let status = if r.pass { "PASS" } else { "FAIL" };
                w.write_record([r.name.clone(), fmt_f64(r.residual), fmt_f64(r.tolerance), status.to_string()])?;
                if !r.pass {
                    failed.push(r.name.clone());
                }
            }
            w.flush()?;
            if !failed.is_empty() {
                return Err(CliError::Numerical(format!("failed checks: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

/// Fixed points plus the stationary-point velocities of the first bands.
pub fn decay_samples(chart: &QuasimomentumChart, target_bands: usize) -> Vec<XySample> {
    let mut s = vec![
        XySample::Fixed { x: 0.0, y: 0.0 },
        XySample::Fixed { x: 0.5, y: 0.0 },
        XySample::Fixed { x: 0.25, y: -0.25 },
    ];
    s.extend(stationary_targets(chart, target_bands).into_iter().map(|v| XySample::Velocity { v, y: 0.0 }));
    s
}
