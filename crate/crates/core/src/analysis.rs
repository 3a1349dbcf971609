//! Influence analyses over the shunting impedance: position profiles,
//! steady-value extraction, parameter sweeps with regression fits, fault
//! difference studies, wheel-set structural importance, and the comparison
//! of reader-amplitude models against a measured trace.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::elements::{capacitor_fault, CapacitorFault};
use crate::error::{Error, Result};
use crate::fit::{
    fit_linear, fit_quadratic, fit_reciprocal, gof_with_params, quadratic_minimum, FitResult, Gof,
};
use crate::jtc::{solve_shunting_point, tcr_amplitude};
use crate::mat::C64;
use crate::railline::ballast_to_params;
use crate::scenario::JtcScenario;

/// Ordered samples of a complex quantity against one swept parameter.
/// Points where the solver failed are recorded as gaps instead of samples.
#[derive(Debug, Clone)]
pub struct SweepSeries {
    pub parameter: String,
    pub unit: String,
    pub samples: Vec<(f64, C64)>,
    pub gaps: Vec<(f64, String)>,
}

impl SweepSeries {
    pub fn abscissae(&self) -> Vec<f64> {
        self.samples.iter().map(|&(x, _)| x).collect()
    }

    pub fn re(&self) -> Vec<f64> {
        self.samples.iter().map(|&(_, z)| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.samples.iter().map(|&(_, z)| z.im).collect()
    }
}

fn sweep_over<F>(parameter: &str, unit: &str, points: &[f64], eval: F) -> SweepSeries
where
    F: Fn(f64) -> Result<C64> + Sync,
{
    let results: Vec<(f64, Result<C64>)> = points
        .par_iter()
        .map(|&x| (x, eval(x)))
        .collect();
    let mut samples = Vec::with_capacity(points.len());
    let mut gaps = Vec::new();
    for (x, r) in results {
        match r {
            Ok(z) => samples.push((x, z)),
            Err(e) => gaps.push((x, e.to_string())),
        }
    }
    SweepSeries {
        parameter: parameter.to_string(),
        unit: unit.to_string(),
        samples,
        gaps,
    }
}

/// Grid of shunting-point positions: `step, 2*step, ...` up to the section
/// length inclusive.
pub fn position_grid(length_m: f64, step_m: f64) -> Vec<f64> {
    let n = (length_m / step_m).floor() as usize;
    let mut grid: Vec<f64> = (1..=n).map(|k| k as f64 * step_m).collect();
    match grid.last() {
        Some(&last) if length_m - last > 1e-9 => grid.push(length_m),
        None if length_m > 0.0 => grid.push(length_m),
        _ => {}
    }
    grid
}

/// Shunting impedance sampled over the admissible head positions.
pub fn impedance_profile(s: &JtcScenario, step_m: f64) -> Result<SweepSeries> {
    if !(step_m > 0.0) {
        return Err(Error::NonPositive {
            name: "profile step",
            value: step_m,
        });
    }
    if s.train.is_empty() {
        return Err(Error::EmptyTrain);
    }
    let grid = position_grid(s.length_m, step_m);
    Ok(sweep_over("x_f", "m", &grid, |x| {
        solve_shunting_point(s, x).map(|sol| sol.z_f)
    }))
}

/// Default exclusion radius around capacitors for steady-value extraction,
/// meters: the fault influence range plus margin.
pub const STEADY_EXCLUSION_M: f64 = 30.0;

/// Overall steady value of a position profile: the componentwise median of
/// all samples that lie outside every capacitor influence zone (from the
/// capacitor position to `exclusion_radius` on its sending side) and more
/// than one tuning length away from both section ends.
pub fn steady_value(
    series: &SweepSeries,
    s: &JtcScenario,
    exclusion_radius_m: f64,
) -> Result<C64> {
    let caps = s.capacitor_positions();
    let lo = s.tuning_len_m;
    let hi = s.length_m - s.tuning_len_m;
    let kept: Vec<C64> = series
        .samples
        .iter()
        .filter(|&&(x, _)| {
            x > lo
                && x < hi
                && caps
                    .iter()
                    .all(|&c| !(x >= c && x <= c + exclusion_radius_m))
        })
        .map(|&(_, z)| z)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyAfterExclusion);
    }
    Ok(Complex64::new(
        median(kept.iter().map(|z| z.re)),
        median(kept.iter().map(|z| z.im)),
    ))
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Steady shunting impedance of a scenario: profile plus exclusion median.
pub fn steady_impedance(s: &JtcScenario, profile_step_m: f64, radius_m: f64) -> Result<C64> {
    let profile = impedance_profile(s, profile_step_m)?;
    steady_value(&profile, s, radius_m)
}

/// Wheel-resistance sweep with reciprocal-law fits of the steady real and
/// imaginary parts.
#[derive(Debug, Clone)]
pub struct WheelSweep {
    pub series: SweepSeries,
    pub fit_re: FitResult,
    pub fit_im: FitResult,
}

pub fn sweep_wheel_resistance(
    s: &JtcScenario,
    r_lo_ohm: f64,
    r_hi_ohm: f64,
    r_step_ohm: f64,
    profile_step_m: f64,
) -> Result<WheelSweep> {
    if !(r_lo_ohm > 0.0 && r_hi_ohm >= r_lo_ohm && r_step_ohm > 0.0) {
        return Err(Error::NonPositive {
            name: "wheel resistance range",
            value: r_lo_ohm.min(r_step_ohm),
        });
    }
    let n = ((r_hi_ohm - r_lo_ohm) / r_step_ohm).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| r_lo_ohm + k as f64 * r_step_ohm).collect();
    let series = sweep_over("r_ws", "ohm", &grid, |r| {
        let train = s.train.with_uniform_resistance(Complex64::new(r, 0.0))?;
        steady_impedance(&s.with_train(train), profile_step_m, STEADY_EXCLUSION_M)
    });
    if series.samples.len() < 3 {
        return Err(Error::FitDiverged(format!(
            "only {} usable sweep points",
            series.samples.len()
        )));
    }
    let xs = series.abscissae();
    let fit_re = fit_reciprocal(&xs, &series.re())?;
    let fit_im = fit_reciprocal(&xs, &series.im())?;
    Ok(WheelSweep {
        series,
        fit_re,
        fit_im,
    })
}

/// Difference profile `z_f(fault) - z_f(normal)` for one capacitor fault.
/// `fault = None` compares the scenario against itself and yields an
/// identically zero series.
pub fn capacitor_fault_delta(
    s: &JtcScenario,
    cap_index: usize,
    fault: Option<CapacitorFault>,
    step_m: f64,
) -> Result<SweepSeries> {
    if cap_index >= s.capacitors.len() {
        return Err(Error::Config(format!(
            "capacitor index {cap_index} out of range ({} capacitors)",
            s.capacitors.len()
        )));
    }
    let faulted = match fault {
        Some(f) => s.with_capacitor(cap_index, capacitor_fault(&s.capacitors[cap_index], f)?)?,
        None => s.clone(),
    };
    let normal = impedance_profile(s, step_m)?;
    let broken = impedance_profile(&faulted, step_m)?;
    let mut samples = Vec::with_capacity(normal.samples.len());
    let mut gaps = normal.gaps.clone();
    gaps.extend(broken.gaps.iter().cloned());
    let lookup: std::collections::HashMap<u64, C64> = broken
        .samples
        .iter()
        .map(|&(x, z)| (x.to_bits(), z))
        .collect();
    for &(x, z0) in &normal.samples {
        if let Some(&zf) = lookup.get(&x.to_bits()) {
            samples.push((x, zf - z0));
        }
    }
    Ok(SweepSeries {
        parameter: "x_f".into(),
        unit: "m".into(),
        samples,
        gaps,
    })
}

/// Ballast-resistance sweep of the steady impedance.
#[derive(Debug, Clone)]
pub struct BallastSweep {
    pub series: SweepSeries,
}

pub fn sweep_ballast(
    s: &JtcScenario,
    rb_lo: f64,
    rb_hi: f64,
    rb_step: f64,
    profile_step_m: f64,
) -> Result<BallastSweep> {
    if !(rb_lo > 0.0 && rb_hi >= rb_lo && rb_step > 0.0) {
        return Err(Error::NonPositiveBallast(rb_lo.min(rb_step)));
    }
    let n = ((rb_hi - rb_lo) / rb_step).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| rb_lo + k as f64 * rb_step).collect();
    let series = sweep_over("r_b", "ohm*km", &grid, |rb| {
        let rail = ballast_to_params(rb, &s.rail)?;
        let mut variant = s.with_rail(rail)?;
        variant.ballast_ohm_km = rb;
        steady_impedance(&variant, profile_step_m, STEADY_EXCLUSION_M)
    });
    Ok(BallastSweep { series })
}

/// Rail-impedance sweep: the series impedance matrix scaled around its
/// nominal value, with a linear fit of the steady real part and a quadratic
/// fit (plus vertex) of the steady imaginary part. Abscissae are the
/// dimensionless scale factors.
#[derive(Debug, Clone)]
pub struct RailSweep {
    pub series: SweepSeries,
    pub fit_re: FitResult,
    pub fit_im: FitResult,
    /// Vertex of the fitted quadratic: (scale, steady imaginary part).
    pub im_minimum: (f64, f64),
}

pub fn sweep_rail_impedance(
    s: &JtcScenario,
    span_frac: f64,
    step_frac: f64,
    profile_step_m: f64,
) -> Result<RailSweep> {
    if !(span_frac > 0.0 && step_frac > 0.0 && span_frac < 1.0) {
        return Err(Error::NonPositive {
            name: "rail sweep range",
            value: span_frac.min(step_frac),
        });
    }
    let n = (span_frac / step_frac).round() as i64;
    let grid: Vec<f64> = (-n..=n).map(|k| 1.0 + k as f64 * step_frac).collect();
    let series = sweep_over("z_r", "x nominal", &grid, |scale| {
        let k = Complex64::new(scale, 0.0);
        let rail = crate::railline::RailUnitParams::new(
            s.rail.z11 * k,
            s.rail.z22 * k,
            s.rail.z12 * k,
            s.rail.g11,
            s.rail.g22,
            s.rail.g12,
            s.rail.frequency_hz,
        )?;
        steady_impedance(&s.with_rail(rail)?, profile_step_m, STEADY_EXCLUSION_M)
    });
    if series.samples.len() < 5 {
        return Err(Error::FitDiverged(format!(
            "only {} usable sweep points",
            series.samples.len()
        )));
    }
    let xs = series.abscissae();
    let fit_re = fit_linear(&xs, &series.re())?;
    let fit_im = fit_quadratic(&xs, &series.im())?;
    let im_minimum = quadratic_minimum(fit_im.params[0], fit_im.params[1], fit_im.params[2]);
    Ok(RailSweep {
        series,
        fit_re,
        fit_im,
        im_minimum,
    })
}

/// Structural importance of each wheel set: the normalized sensitivity of
/// the steady impedance to that wheel set alone turning abnormal.
#[derive(Debug, Clone)]
pub struct ImportanceResult {
    pub delta_re: Vec<f64>,
    pub p_re: Vec<f64>,
    pub delta_im: Vec<f64>,
    pub p_im: Vec<f64>,
}

pub fn structural_importance(
    s: &JtcScenario,
    abnormal_ohm: f64,
    profile_step_m: f64,
    radius_m: f64,
) -> Result<ImportanceResult> {
    if !(abnormal_ohm > 0.0) {
        return Err(Error::NonPositive {
            name: "abnormal wheel resistance",
            value: abnormal_ohm,
        });
    }
    if s.train.is_empty() {
        return Err(Error::EmptyTrain);
    }
    let z0 = steady_impedance(s, profile_step_m, radius_m)?;
    let n = s.train.len();
    let per_wheel: Vec<Result<C64>> = (0..n)
        .map(|i| {
            let train = s
                .train
                .with_wheel_resistance(i, Complex64::new(abnormal_ohm, 0.0))?;
            steady_impedance(&s.with_train(train), profile_step_m, radius_m)
        })
        .collect();
    let mut delta_re = Vec::with_capacity(n);
    let mut delta_im = Vec::with_capacity(n);
    for r in per_wheel {
        let zi = r?;
        delta_re.push((zi.re - z0.re).abs() / z0.re);
        delta_im.push((zi.im - z0.im).abs() / z0.im);
    }
    let normalize = |d: &[f64]| -> Vec<f64> {
        let max = d.iter().cloned().fold(0.0f64, f64::max);
        if max > 0.0 {
            d.iter().map(|v| v / max).collect()
        } else {
            vec![0.0; d.len()]
        }
    };
    Ok(ImportanceResult {
        p_re: normalize(&delta_re),
        p_im: normalize(&delta_im),
        delta_re,
        delta_im,
    })
}

/// A measured reader-amplitude trace: (position m, amplitude V) rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub points: Vec<(f64, f64)>,
}

/// Parse a two-column numeric text trace. Lines starting with `#` are
/// comments; one optional header line of column names is tolerated;
/// separators are whitespace or commas.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut points = Vec::new();
    let mut header_allowance = 1;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() < 2 {
            return Err(Error::TraceFormat(format!(
                "line {}: expected two numeric columns, got {:?}",
                lineno + 1,
                line
            )));
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => points.push((x, y)),
            _ if points.is_empty() && header_allowance > 0 => {
                header_allowance -= 1;
            }
            _ => {
                return Err(Error::TraceFormat(format!(
                    "line {}: non-numeric data {:?}",
                    lineno + 1,
                    line
                )));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::TraceFormat("no data rows".into()));
    }
    Ok(Trace { points })
}

pub fn read_trace(path: &std::path::Path) -> Result<Trace> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::TraceFormat(format!("{}: {e}", path.display())))?;
    parse_trace(&text)
}

/// Reader-amplitude comparison: the full-train model against the
/// first-wheel-only simplification, plus goodness of fit of each against a
/// measured trace when one is supplied.
#[derive(Debug, Clone)]
pub struct TcrComparison {
    pub a_zf: SweepSeries,
    pub a_rwh: SweepSeries,
    pub gof_zf: Option<Gof>,
    pub gof_rwh: Option<Gof>,
}

fn amplitude_series(s: &JtcScenario, name: &str, grid: &[f64]) -> SweepSeries {
    sweep_over(name, "m", grid, |x| {
        let sol = solve_shunting_point(s, x)?;
        tcr_amplitude(&sol, s.tcr_gain_antenna, s.tcr_gain_cable)
            .map(|a| Complex64::new(a, 0.0))
    })
}

pub fn tcr_comparison(
    s: &JtcScenario,
    measured: Option<&Trace>,
    step_m: f64,
) -> Result<TcrComparison> {
    if s.train.is_empty() {
        return Err(Error::EmptyTrain);
    }
    let grid = position_grid(s.length_m, step_m);
    let simplified = s.with_train(s.train.first_wheel_only()?);
    let a_zf = amplitude_series(s, "x_f", &grid);
    let a_rwh = amplitude_series(&simplified, "x_f", &grid);

    let (gof_zf, gof_rwh) = match measured {
        Some(trace) => {
            let xs: Vec<f64> = trace.points.iter().map(|&(x, _)| x).collect();
            let ys: Vec<f64> = trace.points.iter().map(|&(_, y)| y).collect();
            let at = |scn: &JtcScenario| -> Result<Vec<f64>> {
                xs.iter()
                    .map(|&x| {
                        let sol = solve_shunting_point(scn, x)?;
                        tcr_amplitude(&sol, scn.tcr_gain_antenna, scn.tcr_gain_cable)
                    })
                    .collect()
            };
            let model_zf = at(s)?;
            let model_rwh = at(&simplified)?;
            (
                Some(gof_with_params(&ys, &model_zf, 0)?),
                Some(gof_with_params(&ys, &model_rwh, 0)?),
            )
        }
        None => (None, None),
    };
    Ok(TcrComparison {
        a_zf,
        a_rwh,
        gof_zf,
        gof_rwh,
    })
}
