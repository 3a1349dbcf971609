//! Regression models and goodness-of-fit statistics for the sweep
//! analyses: reciprocal-law fits for the wheel-resistance sweeps, linear
//! and quadratic fits for the rail-impedance sweeps.

use crate::error::{Error, Result};

/// Goodness-of-fit triple. `SSE` is the sum of squared residuals, `R²` is
/// `1 - SSE/SST` about the observation mean, and `RMSE` follows the
/// curve-fitting convention `sqrt(SSE / (n - p))` with `p` the number of
/// fitted parameters (`p = 0` for a model-free comparison of two series).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gof {
    pub sse: f64,
    pub r_square: f64,
    pub rmse: f64,
}

/// Model families used by the sweep analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// `y = 1 / (a + b/x)`, parameters `[a, b]`.
    Reciprocal,
    /// `y = a x + b`, parameters `[a, b]`.
    Linear,
    /// `y = c x^2 + d x + e`, parameters `[c, d, e]`.
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    pub gof: Gof,
}

impl FitResult {
    pub fn eval(&self, x: f64) -> f64 {
        eval_model(self.model, &self.params, x)
    }
}

pub fn eval_model(model: FitModel, params: &[f64], x: f64) -> f64 {
    match model {
        FitModel::Reciprocal => 1.0 / (params[0] + params[1] / x),
        FitModel::Linear => params[0] * x + params[1],
        FitModel::Quadratic => params[0] * x * x + params[1] * x + params[2],
    }
}

/// Model-free goodness of fit between observations `y` and predictions
/// `y_hat` (`p = 0` degrees-of-freedom convention).
pub fn goodness_of_fit(y: &[f64], y_hat: &[f64]) -> Result<Gof> {
    gof_with_params(y, y_hat, 0)
}

pub fn gof_with_params(y: &[f64], y_hat: &[f64], n_params: usize) -> Result<Gof> {
    if y.len() != y_hat.len() || y.len() < 2 {
        return Err(Error::Config(format!(
            "goodness of fit needs two equal-length series of at least 2 points, got {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    let n = y.len();
    let sse: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if sst == 0.0 {
        // A perfect fit of a constant series is still well defined.
        if sse == 0.0 {
            return Ok(Gof {
                sse: 0.0,
                r_square: 1.0,
                rmse: 0.0,
            });
        }
        return Err(Error::DegenerateVariance);
    }
    let dof = n.saturating_sub(n_params).max(1);
    Ok(Gof {
        sse,
        r_square: 1.0 - sse / sst,
        rmse: (sse / dof as f64).sqrt(),
    })
}

/// Ordinary least squares for `y = a x + b`.
pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<FitResult> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(Error::FitDiverged("need at least 2 points".into()));
    }
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::FitDiverged("degenerate abscissae".into()));
    }
    let a = (n * sxy - sx * sy) / det;
    let b = (sy * sxx - sx * sxy) / det;
    let y_hat: Vec<f64> = x.iter().map(|&v| a * v + b).collect();
    Ok(FitResult {
        model: FitModel::Linear,
        params: vec![a, b],
        gof: gof_with_params(y, &y_hat, 2)?,
    })
}

/// Ordinary least squares for `y = c x^2 + d x + e` via the 3x3 normal
/// equations.
pub fn fit_quadratic(x: &[f64], y: &[f64]) -> Result<FitResult> {
    assert_eq!(x.len(), y.len());
    if x.len() < 3 {
        return Err(Error::FitDiverged("need at least 3 points".into()));
    }
    let mut s = [0.0f64; 5];
    for &v in x {
        let mut p = 1.0;
        for sk in s.iter_mut() {
            *sk += p;
            p *= v;
        }
    }
    let mut t = [0.0f64; 3];
    for (&v, &w) in x.iter().zip(y) {
        t[0] += w;
        t[1] += w * v;
        t[2] += w * v * v;
    }
    // Normal matrix over (e, d, c) ordering by powers, then reorder.
    let mut a = [
        [s[0], s[1], s[2], t[0]],
        [s[1], s[2], s[3], t[1]],
        [s[2], s[3], s[4], t[2]],
    ];
    for k in 0..3 {
        let mut pk = k;
        for i in k + 1..3 {
            if a[i][k].abs() > a[pk][k].abs() {
                pk = i;
            }
        }
        a.swap(k, pk);
        if a[k][k].abs() < 1e-300 {
            return Err(Error::FitDiverged("degenerate normal equations".into()));
        }
        for i in k + 1..3 {
            let f = a[i][k] / a[k][k];
            for j in k..4 {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    let mut coef = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut acc = a[i][3];
        for j in i + 1..3 {
            acc -= a[i][j] * coef[j];
        }
        coef[i] = acc / a[i][i];
    }
    let (e, d, c) = (coef[0], coef[1], coef[2]);
    let y_hat: Vec<f64> = x.iter().map(|&v| c * v * v + d * v + e).collect();
    Ok(FitResult {
        model: FitModel::Quadratic,
        params: vec![c, d, e],
        gof: gof_with_params(y, &y_hat, 3)?,
    })
}

/// Fit `y = 1 / (a + b/x)` by damped Gauss-Newton, started from the exact
/// linearization `1/y = a + b * (1/x)`. The linearization is exact on
/// noiseless data, so refinement only matters in the noisy case.
pub fn fit_reciprocal(x: &[f64], y: &[f64]) -> Result<FitResult> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return Err(Error::FitDiverged("need at least 2 points".into()));
    }
    if x.contains(&0.0) || y.contains(&0.0) {
        return Err(Error::FitDiverged(
            "reciprocal model undefined at zero abscissa or observation".into(),
        ));
    }
    let inv_x: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
    let inv_y: Vec<f64> = y.iter().map(|v| 1.0 / v).collect();
    let lin = fit_linear(&inv_x, &inv_y)?;
    let mut a = lin.params[1];
    let mut b = lin.params[0];

    let sse_of = |a: f64, b: f64| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&xv, &yv)| {
                let m = 1.0 / (a + b / xv);
                (m - yv) * (m - yv)
            })
            .sum()
    };
    let mut sse = sse_of(a, b);
    for _ in 0..50 {
        // Gauss-Newton normal equations for residuals r_i = model - y_i.
        let mut jtj = [[0.0f64; 2]; 2];
        let mut jtr = [0.0f64; 2];
        for (&xv, &yv) in x.iter().zip(y) {
            let den = a + b / xv;
            if den.abs() < 1e-300 {
                return Err(Error::FitDiverged("model denominator collapsed".into()));
            }
            let m = 1.0 / den;
            let r = m - yv;
            let da = -m * m;
            let db = -m * m / xv;
            jtj[0][0] += da * da;
            jtj[0][1] += da * db;
            jtj[1][1] += db * db;
            jtr[0] += da * r;
            jtr[1] += db * r;
        }
        jtj[1][0] = jtj[0][1];
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = -(jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let step_b = -(jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        // Damp until the step improves the objective.
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..25 {
            let (na, nb) = (a + lambda * step_a, b + lambda * step_b);
            let ns = sse_of(na, nb);
            if ns.is_finite() && ns <= sse {
                let rel = (lambda * step_a).abs().max((lambda * step_b).abs())
                    / a.abs().max(b.abs()).max(1e-300);
                a = na;
                b = nb;
                let done = ns >= sse * (1.0 - 1e-15) || rel < 1e-13;
                sse = ns;
                improved = true;
                if done {
                    let y_hat: Vec<f64> =
                        x.iter().map(|&v| 1.0 / (a + b / v)).collect();
                    return Ok(FitResult {
                        model: FitModel::Reciprocal,
                        params: vec![a, b],
                        gof: gof_with_params(y, &y_hat, 2)?,
                    });
                }
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::FitDiverged("non-finite parameters".into()));
    }
    let y_hat: Vec<f64> = x.iter().map(|&v| 1.0 / (a + b / v)).collect();
    Ok(FitResult {
        model: FitModel::Reciprocal,
        params: vec![a, b],
        gof: gof_with_params(y, &y_hat, 2)?,
    })
}

/// Vertex of an upward parabola `y = c x^2 + d x + e`:
/// `(-d/(2c), e - d^2/(4c))`.
pub fn quadratic_minimum(c: f64, d: f64, e: f64) -> (f64, f64) {
    (-d / (2.0 * c), e - d * d / (4.0 * c))
}
