//! `jtcsim`: scenario-driven simulation of the train shunting impedance of
//! an occupied jointless track circuit, with CSV output for every sweep.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on numerical
//! failures.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use jtc_core::analysis::{
    capacitor_fault_delta, impedance_profile, position_grid, read_trace, steady_value,
    structural_importance, sweep_ballast, sweep_rail_impedance, sweep_wheel_resistance,
    tcr_comparison, SweepSeries,
};
use jtc_core::elements::CapacitorFault;
use jtc_core::error::Error;
use jtc_core::jtc::solve_shunting_point;
use jtc_core::nodal::{nodal_oracle, NodalOptions};
use jtc_core::scenario::{load_scenario, JtcScenario, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "jtcsim",
    about = "Train shunting impedance of an occupied jointless track circuit",
    version
)]
struct Cli {
    /// Scenario configuration file (TOML). Without it the built-in default
    /// scenario is used and reported on stderr.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write CSV here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shunting impedance against head position.
    Profile {
        /// Head-position step, meters.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Reader-amplitude comparison: full train against the first-wheel
    /// simplification, optionally scored against a measured trace.
    Tcr {
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        /// Two-column measured trace (position_m amplitude_v).
        #[arg(long)]
        measured: Option<PathBuf>,
    },
    /// Steady impedance against a uniform wheel-set resistance, with
    /// reciprocal-law fits.
    SweepWheel {
        #[arg(long, default_value_t = 0.01)]
        r_min: f64,
        #[arg(long, default_value_t = 1.0)]
        r_max: f64,
        #[arg(long, default_value_t = 0.01)]
        r_step: f64,
        #[arg(long, default_value_t = 1.0)]
        profile_step: f64,
    },
    /// Difference profile of one capacitor fault against the healthy
    /// scenario.
    CapFault {
        /// Capacitor number, 1-based from the receiving end.
        #[arg(long)]
        cap_index: usize,
        #[arg(long, value_enum)]
        fault: FaultArg,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Steady impedance against ballast resistance.
    SweepBallast {
        #[arg(long, default_value_t = 1.0)]
        rb_min: f64,
        #[arg(long, default_value_t = 20.0)]
        rb_max: f64,
        #[arg(long, default_value_t = 1.0)]
        rb_step: f64,
        #[arg(long, default_value_t = 1.0)]
        profile_step: f64,
    },
    /// Steady impedance against the rail series impedance scaled around
    /// its nominal value, with linear and quadratic fits.
    SweepRail {
        /// Half-width of the scale range around 1.0.
        #[arg(long, default_value_t = 0.20)]
        span: f64,
        /// Scale step.
        #[arg(long, default_value_t = 0.01)]
        step_frac: f64,
        #[arg(long, default_value_t = 1.0)]
        profile_step: f64,
    },
    /// Structural importance of each wheel set.
    Importance {
        /// Resistance of the abnormal wheel set, ohm.
        #[arg(long, default_value_t = 1.0)]
        abnormal_ohm: f64,
        #[arg(long, default_value_t = 1.0)]
        profile_step: f64,
    },
    /// Cascade solver against the independent nodal oracle; prints the
    /// worst relative impedance error.
    Validate {
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Oracle segment length, meters.
        #[arg(long, default_value_t = 0.25)]
        seg_len: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    /// Lead breakage (open circuit).
    Break,
    /// Capacitance degraded to half.
    Half,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::TraceFormat(_)
        | Error::NonPositive { .. }
        | Error::NonPositiveBallast(_)
        | Error::WrongKind { .. }
        | Error::ZeroImpedance
        | Error::OutOfSection { .. }
        | Error::EmptyTrain => 1,
        Error::SingularMatrix { .. }
        | Error::SingularSystem { .. }
        | Error::DegenerateModes { .. }
        | Error::FitDiverged(_)
        | Error::EmptyAfterExclusion
        | Error::DegenerateVariance => 2,
    }
}

/// Fixed 12-significant-digit formatting so identical runs emit identical
/// bytes.
fn sig(x: f64) -> String {
    format!("{x:.11e}")
}

struct Output {
    target: Box<dyn Write>,
}

impl Output {
    fn open(path: &Option<PathBuf>) -> Result<Self, Error> {
        let target: Box<dyn Write> = match path {
            Some(p) => Box::new(
                std::fs::File::create(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            ),
            None => Box::new(std::io::stdout().lock()),
        };
        Ok(Output { target })
    }

    fn row(&mut self, cells: &[String]) -> Result<(), Error> {
        writeln!(self.target, "{}", cells.join(","))
            .map_err(|e| Error::Config(format!("write failed: {e}")))
    }

    fn header(&mut self, cols: &[&str]) -> Result<(), Error> {
        writeln!(self.target, "{}", cols.join(","))
            .map_err(|e| Error::Config(format!("write failed: {e}")))
    }
}

fn warn_gaps(series: &SweepSeries) -> Result<(), Error> {
    for (x, msg) in &series.gaps {
        eprintln!("warn: {} = {}: {}", series.parameter, x, msg);
    }
    if series.samples.is_empty() {
        let detail = match series.gaps.first() {
            Some((x, msg)) => format!(
                "every point failed; first at {} = {x}: {msg}",
                series.parameter
            ),
            None => "sweep produced no points".into(),
        };
        return Err(Error::SingularSystem { detail });
    }
    Ok(())
}

fn load(config: &Option<PathBuf>) -> Result<JtcScenario, Error> {
    let (scenario, notices) = match config {
        Some(path) => load_scenario(path)?,
        None => {
            eprintln!("note: no --config given; using the built-in default scenario");
            ScenarioConfig::default_config().build()?
        }
    };
    for n in notices {
        eprintln!("note: {n}");
    }
    Ok(scenario)
}

fn run(cli: Cli) -> Result<(), Error> {
    let s = load(&cli.config)?;
    let mut out = Output::open(&cli.out)?;

    match cli.command {
        Command::Profile { step } => {
            let p = impedance_profile(&s, step)?;
            warn_gaps(&p)?;
            out.header(&["x_f_m", "re_zf_ohm", "im_zf_ohm"])?;
            for &(x, z) in &p.samples {
                out.row(&[sig(x), sig(z.re), sig(z.im)])?;
            }
        }
        Command::Tcr { step, measured } => {
            let trace = measured.as_deref().map(read_trace).transpose()?;
            let cmp = tcr_comparison(&s, trace.as_ref(), step)?;
            warn_gaps(&cmp.a_zf)?;
            warn_gaps(&cmp.a_rwh)?;
            out.header(&["x_f_m", "a_zf_v", "a_rwh_v"])?;
            for (&(x, a), &(_, b)) in cmp.a_zf.samples.iter().zip(&cmp.a_rwh.samples) {
                out.row(&[sig(x), sig(a.re), sig(b.re)])?;
            }
            if let (Some(gz), Some(gr)) = (cmp.gof_zf, cmp.gof_rwh) {
                eprintln!(
                    "gof full-train: sse={:.6} r_square={:.6} rmse={:.6}",
                    gz.sse, gz.r_square, gz.rmse
                );
                eprintln!(
                    "gof first-wheel: sse={:.6} r_square={:.6} rmse={:.6}",
                    gr.sse, gr.r_square, gr.rmse
                );
            }
        }
        Command::SweepWheel {
            r_min,
            r_max,
            r_step,
            profile_step,
        } => {
            let sw = sweep_wheel_resistance(&s, r_min, r_max, r_step, profile_step)?;
            warn_gaps(&sw.series)?;
            out.header(&["r_ws_ohm", "steady_re_ohm", "steady_im_ohm"])?;
            for &(r, z) in &sw.series.samples {
                out.row(&[sig(r), sig(z.re), sig(z.im)])?;
            }
            eprintln!(
                "fit re: 1/(a + b/r), a={:.6} b={:.6} r_square={:.6}",
                sw.fit_re.params[0], sw.fit_re.params[1], sw.fit_re.gof.r_square
            );
            eprintln!(
                "fit im: 1/(c + d/r), c={:.6} d={:.6} r_square={:.6}",
                sw.fit_im.params[0], sw.fit_im.params[1], sw.fit_im.gof.r_square
            );
        }
        Command::CapFault {
            cap_index,
            fault,
            step,
        } => {
            if cap_index == 0 || cap_index > s.capacitors.len() {
                return Err(Error::Config(format!(
                    "--cap-index must be 1..={}, got {cap_index}",
                    s.capacitors.len()
                )));
            }
            let fault = match fault {
                FaultArg::Break => CapacitorFault::LineBreakage,
                FaultArg::Half => CapacitorFault::DegradedHalf,
            };
            let d = capacitor_fault_delta(&s, cap_index - 1, Some(fault), step)?;
            warn_gaps(&d)?;
            out.header(&["x_f_m", "d_re_ohm", "d_im_ohm"])?;
            for &(x, z) in &d.samples {
                out.row(&[sig(x), sig(z.re), sig(z.im)])?;
            }
        }
        Command::SweepBallast {
            rb_min,
            rb_max,
            rb_step,
            profile_step,
        } => {
            let sb = sweep_ballast(&s, rb_min, rb_max, rb_step, profile_step)?;
            warn_gaps(&sb.series)?;
            out.header(&["r_b_ohm_km", "steady_re_ohm", "steady_im_ohm"])?;
            for &(rb, z) in &sb.series.samples {
                out.row(&[sig(rb), sig(z.re), sig(z.im)])?;
            }
        }
        Command::SweepRail {
            span,
            step_frac,
            profile_step,
        } => {
            let sr = sweep_rail_impedance(&s, span, step_frac, profile_step)?;
            warn_gaps(&sr.series)?;
            out.header(&["z_scale", "steady_re_ohm", "steady_im_ohm"])?;
            for &(k, z) in &sr.series.samples {
                out.row(&[sig(k), sig(z.re), sig(z.im)])?;
            }
            eprintln!(
                "fit re: a*x + b, a={:.6} b={:.6} r_square={:.6}",
                sr.fit_re.params[0], sr.fit_re.params[1], sr.fit_re.gof.r_square
            );
            eprintln!(
                "fit im: c*x^2 + d*x + e, c={:.6} d={:.6} e={:.6} r_square={:.6}",
                sr.fit_im.params[0], sr.fit_im.params[1], sr.fit_im.params[2],
                sr.fit_im.gof.r_square
            );
            eprintln!(
                "im minimum at scale {:.6} (value {:.6})",
                sr.im_minimum.0, sr.im_minimum.1
            );
        }
        Command::Importance {
            abnormal_ohm,
            profile_step,
        } => {
            let imp = structural_importance(&s, abnormal_ohm, profile_step, 30.0)?;
            out.header(&["wheel_index", "p_re", "p_im"])?;
            for i in 0..imp.p_re.len() {
                out.row(&[(i + 1).to_string(), sig(imp.p_re[i]), sig(imp.p_im[i])])?;
            }
        }
        Command::Validate { points, seg_len } => {
            if points == 0 {
                return Err(Error::Config("--points must be positive".into()));
            }
            let grid = position_grid(s.length_m, s.length_m / (points as f64 + 0.5));
            let opts = NodalOptions { seg_len_m: seg_len };
            out.header(&["x_f_m", "rel_zf_err"])?;
            let mut worst = 0.0f64;
            for &x in grid.iter().take(points) {
                let a = solve_shunting_point(&s, x)?;
                let b = nodal_oracle(&s, x, &opts)?;
                let rel = (a.z_f - b.z_f).norm() / b.z_f.norm();
                worst = worst.max(rel);
                out.row(&[sig(x), sig(rel)])?;
            }
            eprintln!("max relative z_f error vs nodal oracle: {worst:.3e}");
            // Also report the steady value as a convenience diagnostic.
            if let Ok(p) = impedance_profile(&s, 1.0) {
                if let Ok(z) = steady_value(&p, &s, 30.0) {
                    eprintln!("steady z_f = {:.6} + {:.6}j ohm", z.re, z.im);
                }
            }
            if worst >= 1e-4 {
                return Err(Error::SingularSystem {
                    detail: format!("oracle disagreement {worst:.3e} exceeds 1e-4"),
                });
            }
        }
    }
    Ok(())
}

fn main() {
    // JTC_THREADS caps sweep parallelism.
    if let Ok(v) = std::env::var("JTC_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    // Usage errors are configuration errors (exit 1); clap's default
    // would exit 2, which is reserved for numerical failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
