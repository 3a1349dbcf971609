//! Python bindings: a `Scenario` class wrapping the section description
//! with methods for the shunting-impedance solve, the nodal cross-check,
//! profiles, sweeps and the structural-importance ranking.
//!
//! Build with `cargo build -p jtc-python --release` and load the produced
//! `libpyjtc.so` as the module `pyjtc` (see `python/smoke_test.py`), or
//! build a wheel with maturin.

use jtc_core::analysis::{
    impedance_profile, steady_impedance, structural_importance, sweep_wheel_resistance,
    tcr_comparison,
};
use jtc_core::error::Error;
use jtc_core::jtc::{solve_shunting_point, tcr_amplitude};
use jtc_core::nodal::{nodal_oracle, NodalOptions};
use jtc_core::scenario::{JtcScenario, ScenarioConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::TraceFormat(_)
        | Error::NonPositive { .. }
        | Error::NonPositiveBallast(_)
        | Error::WrongKind { .. }
        | Error::OutOfSection { .. }
        | Error::EmptyTrain => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Full section description: geometry, rail parameters, capacitors,
/// tuning-area equivalents, source and train formation.
#[pyclass(module = "pyjtc")]
struct Scenario {
    inner: JtcScenario,
}

#[pymethods]
impl Scenario {
    /// The built-in default scenario (789 m, 2300 Hz, nine 46 uF
    /// capacitors, 6 ohm*km ballast, 8-car formation at 0.15 ohm).
    #[new]
    fn new() -> Self {
        Scenario {
            inner: JtcScenario::default_scenario(),
        }
    }

    /// Parse a scenario from a TOML configuration string.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let (inner, _notices) = ScenarioConfig::from_toml(text)
            .and_then(|c| c.build())
            .map_err(to_py_err)?;
        Ok(Scenario { inner })
    }

    /// Load a scenario from a TOML configuration file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let (inner, _notices) =
            jtc_core::scenario::load_scenario(std::path::Path::new(path)).map_err(to_py_err)?;
        Ok(Scenario { inner })
    }

    /// Serialize the scenario with every key explicit.
    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn length_m(&self) -> f64 {
        self.inner.length_m
    }

    #[getter]
    fn carrier_hz(&self) -> f64 {
        self.inner.carrier_hz
    }

    #[getter]
    fn capacitor_positions_m(&self) -> Vec<f64> {
        self.inner.capacitor_positions()
    }

    #[getter]
    fn wheel_count(&self) -> usize {
        self.inner.train.len()
    }

    /// Train shunting impedance at head position `x_f` (meters from the
    /// receiving-end boundary), as `(re, im)` ohm.
    fn zf(&self, x_f_m: f64) -> PyResult<(f64, f64)> {
        let sol = solve_shunting_point(&self.inner, x_f_m).map_err(to_py_err)?;
        Ok((sol.z_f.re, sol.z_f.im))
    }

    /// Same quantity from the independent lumped nodal oracle.
    #[pyo3(signature = (x_f_m, seg_len_m=0.25))]
    fn zf_nodal(&self, x_f_m: f64, seg_len_m: f64) -> PyResult<(f64, f64)> {
        let sol = nodal_oracle(&self.inner, x_f_m, &NodalOptions { seg_len_m })
            .map_err(to_py_err)?;
        Ok((sol.z_f.re, sol.z_f.im))
    }

    /// Reader-amplitude implied by the solved state at `x_f`.
    fn tcr_amplitude(&self, x_f_m: f64) -> PyResult<f64> {
        let sol = solve_shunting_point(&self.inner, x_f_m).map_err(to_py_err)?;
        tcr_amplitude(&sol, self.inner.tcr_gain_antenna, self.inner.tcr_gain_cable)
            .map_err(to_py_err)
    }

    /// `(x_f, re, im)` rows over the admissible head positions.
    #[pyo3(signature = (step_m=1.0))]
    fn profile(&self, step_m: f64) -> PyResult<Vec<(f64, f64, f64)>> {
        let p = impedance_profile(&self.inner, step_m).map_err(to_py_err)?;
        Ok(p.samples.iter().map(|&(x, z)| (x, z.re, z.im)).collect())
    }

    /// Exclusion-median steady impedance as `(re, im)`.
    #[pyo3(signature = (step_m=1.0, exclusion_m=30.0))]
    fn steady(&self, step_m: f64, exclusion_m: f64) -> PyResult<(f64, f64)> {
        let z = steady_impedance(&self.inner, step_m, exclusion_m).map_err(to_py_err)?;
        Ok((z.re, z.im))
    }

    /// Normalized structural importance per wheel set: `(p_re, p_im)`
    /// rows, head first.
    #[pyo3(signature = (abnormal_ohm=1.0, profile_step_m=1.0))]
    fn importance(&self, abnormal_ohm: f64, profile_step_m: f64) -> PyResult<Vec<(f64, f64)>> {
        let imp = structural_importance(&self.inner, abnormal_ohm, profile_step_m, 30.0)
            .map_err(to_py_err)?;
        Ok(imp.p_re.into_iter().zip(imp.p_im).collect())
    }

    /// Full-train and first-wheel-only reader amplitudes: `(x_f, a_zf,
    /// a_rwh)` rows.
    #[pyo3(signature = (step_m=1.0))]
    fn tcr(&self, step_m: f64) -> PyResult<Vec<(f64, f64, f64)>> {
        let cmp = tcr_comparison(&self.inner, None, step_m).map_err(to_py_err)?;
        Ok(cmp
            .a_zf
            .samples
            .iter()
            .zip(&cmp.a_rwh.samples)
            .map(|(&(x, a), &(_, b))| (x, a.re, b.re))
            .collect())
    }

    /// Steady impedance against a uniform wheel resistance, with the
    /// reciprocal-law fit parameters: returns `(rows, (a, b, r2_re),
    /// (c, d, r2_im))` where rows are `(r_ws, re, im)`.
    #[pyo3(signature = (r_min=0.01, r_max=1.0, r_step=0.01, profile_step_m=2.0))]
    #[allow(clippy::type_complexity)]
    fn wheel_sweep(
        &self,
        r_min: f64,
        r_max: f64,
        r_step: f64,
        profile_step_m: f64,
    ) -> PyResult<(Vec<(f64, f64, f64)>, (f64, f64, f64), (f64, f64, f64))> {
        let sw = sweep_wheel_resistance(&self.inner, r_min, r_max, r_step, profile_step_m)
            .map_err(to_py_err)?;
        let rows = sw
            .series
            .samples
            .iter()
            .map(|&(r, z)| (r, z.re, z.im))
            .collect();
        Ok((
            rows,
            (sw.fit_re.params[0], sw.fit_re.params[1], sw.fit_re.gof.r_square),
            (sw.fit_im.params[0], sw.fit_im.params[1], sw.fit_im.gof.r_square),
        ))
    }

    /// Worst relative disagreement between the cascade solver and the
    /// nodal oracle over `points` head positions.
    #[pyo3(signature = (points=10, seg_len_m=0.5))]
    fn validate(&self, points: usize, seg_len_m: f64) -> PyResult<f64> {
        if points == 0 {
            return Err(PyValueError::new_err("points must be positive"));
        }
        let opts = NodalOptions { seg_len_m };
        let mut worst = 0.0f64;
        for k in 1..=points {
            let x = self.inner.length_m * k as f64 / (points as f64 + 0.5);
            let a = solve_shunting_point(&self.inner, x).map_err(to_py_err)?;
            let b = nodal_oracle(&self.inner, x, &opts).map_err(to_py_err)?;
            worst = worst.max((a.z_f - b.z_f).norm() / b.z_f.norm());
        }
        Ok(worst)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(length_m={}, carrier_hz={}, capacitors={}, wheels={})",
            self.inner.length_m,
            self.inner.carrier_hz,
            self.inner.capacitors.len(),
            self.inner.train.len()
        )
    }
}

#[pymodule]
fn pyjtc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    Ok(())
}
