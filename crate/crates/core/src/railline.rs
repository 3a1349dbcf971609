//! Rail-line model: per-unit-length parameters, the eigen-solution of the
//! two-rail telegrapher system, the closed-form chain matrix of a line
//! span, and an independent lumped-element oracle.
//!
//! The two rails plus ground form a three-conductor line. With `U = (U1, U2)`
//! the rail-to-ground voltages and `I = (I1, I2)` the rail currents in the
//! transmission direction, the distributed model is
//!
//! ```text
//! dU/dx = Zt * I        Zt = [[-z11, -z12], [-z12, -z22]]
//! dI/dx = Gt * U        Gt = [[-g11-g12, g12], [g12, -g22-g12]]
//! ```
//!
//! per kilometer. Diagonalizing `Zt*Gt` yields two propagation modes; the
//! span chain matrix follows in closed form from the mode solution.
//!
//! All lengths in this module are kilometers; callers working in meters
//! convert at the boundary.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estn::Estn;
use crate::mat::{eig2, Mat2, C64, ZERO};

/// Per-unit-length parameters of the two-rail-plus-ground line.
///
/// `z11`/`z22` are rail self impedances and `z12` the mutual impedance, all
/// ohm/km. `g11`/`g22` are rail-to-ground leakage admittances and `g12` the
/// rail-to-rail leakage admittance, siemens/km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RailUnitParams {
    pub z11: C64,
    pub z22: C64,
    pub z12: C64,
    pub g11: C64,
    pub g22: C64,
    pub g12: C64,
    pub frequency_hz: f64,
}

impl RailUnitParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        z11: C64,
        z22: C64,
        z12: C64,
        g11: C64,
        g22: C64,
        g12: C64,
        frequency_hz: f64,
    ) -> Result<Self> {
        let p = RailUnitParams {
            z11,
            z22,
            z12,
            g11,
            g22,
            g12,
            frequency_hz,
        };
        p.validate()?;
        Ok(p)
    }

    /// Symmetric line: both rails share one self impedance and one ground
    /// leakage, exactly.
    pub fn symmetric(z_self: C64, z_mutual: C64, g_ground: C64, g_rail: C64, f_hz: f64) -> Result<Self> {
        Self::new(z_self, z_self, z_mutual, g_ground, g_ground, g_rail, f_hz)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.z11, self.z22, self.z12, self.g11, self.g22, self.g12]
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite());
        if !finite || !self.frequency_hz.is_finite() {
            return Err(Error::Config("rail parameters must be finite".into()));
        }
        for (name, v) in [
            ("Re(z11)", self.z11.re),
            ("Re(z22)", self.z22.re),
            ("Re(g11)", self.g11.re),
            ("Re(g22)", self.g22.re),
            ("Re(g12)", self.g12.re),
        ] {
            if v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Series impedance matrix `Zt`, ohm/km (entries negated by the sign
    /// convention of the transmission direction).
    pub fn series_matrix(&self) -> Mat2 {
        Mat2([[-self.z11, -self.z12], [-self.z12, -self.z22]])
    }

    /// Shunt admittance matrix `Gt`, S/km.
    pub fn shunt_matrix(&self) -> Mat2 {
        Mat2([
            [-self.g11 - self.g12, self.g12],
            [self.g12, -self.g22 - self.g12],
        ])
    }

    pub fn is_symmetric(&self) -> bool {
        self.z11 == self.z22 && self.g11 == self.g22
    }
}

/// Relative eigenvalue separation under which the two propagation modes are
/// treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

/// Eigen-solution of the telegrapher system for one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct LineEigen {
    /// Eigenvalues of `Zt*Gt`, 1/km^2.
    pub lambda1: C64,
    pub lambda2: C64,
    /// Columns are the corresponding eigenvectors.
    pub h: Mat2,
    /// Series impedance matrix the modes were derived from.
    pub zt: Mat2,
    /// Both rails identical: cascades over this line are
    /// rail-exchange-symmetric and are kept that way bit-exactly.
    pub symmetric: bool,
}

/// Diagonalize `Zt*Gt`. Coincident eigenvalues (a fully symmetric decoupled
/// line) are rejected: real rail lines are coupled, so degeneracy indicates
/// a configuration mistake, and the lumped oracle remains available for the
/// pathological case.
pub fn line_eigen(p: &RailUnitParams) -> Result<LineEigen> {
    p.validate()?;
    let zt = p.series_matrix();
    let gt = p.shunt_matrix();
    let a = zt.mul(&gt);
    let (l1, v1, l2, v2) = eig2(&a);
    let scale = l1.norm().max(l2.norm());
    let separation = (l1 - l2).norm();
    if scale == 0.0 || separation < DEGENERACY_THRESHOLD * scale {
        return Err(Error::DegenerateModes {
            separation: if scale > 0.0 { separation / scale } else { 0.0 },
        });
    }
    Ok(LineEigen {
        lambda1: l1,
        lambda2: l2,
        h: Mat2([[v1[0], v2[0]], [v1[1], v2[1]]]),
        zt,
        symmetric: p.is_symmetric(),
    })
}

/// Chain matrix of a uniform line span of length `l_km`.
///
/// Built from the mode solution: with `s_k = sqrt(lambda_k)`,
/// `D1 = diag(cosh(s_k l))`, `D2 = diag(sinh(s_k l))`, `D3 = diag(s_k)`,
/// the forward map from the input cross-section to the output one is
///
/// ```text
/// M(l) = [ H D1 H^-1          H D2 D3^-1 H^-1 Zt        ]
///        [ Zt^-1 H D3 D2 H^-1 Zt^-1 H D3 D1 D3^-1 H^-1 Zt ]
/// ```
///
/// and the chain matrix (output state to input state) is its inverse. The
/// result is branch-independent in `sqrt(lambda)` and satisfies the
/// semigroup property in `l`.
pub fn rail_estn(e: &LineEigen, l_km: f64) -> Result<Estn> {
    if l_km < 0.0 {
        return Err(Error::NonPositive {
            name: "span length",
            value: l_km,
        });
    }
    if l_km == 0.0 {
        return Ok(Estn::identity());
    }
    let s1 = e.lambda1.sqrt();
    let s2 = e.lambda2.sqrt();
    let d1 = Mat2::diag((s1 * l_km).cosh(), (s2 * l_km).cosh());
    let d2 = Mat2::diag((s1 * l_km).sinh(), (s2 * l_km).sinh());
    let d3 = Mat2::diag(s1, s2);
    let d3_inv = Mat2::diag(1.0 / s1, 1.0 / s2);
    let h_inv = e.h.inverse()?;
    let zt_inv = e.zt.inverse()?;

    let uu = e.h.mul(&d1).mul(&h_inv);
    let ui = e.h.mul(&d2).mul(&d3_inv).mul(&h_inv).mul(&e.zt);
    let iu = zt_inv.mul(&e.h).mul(&d3).mul(&d2).mul(&h_inv);
    let ii = zt_inv
        .mul(&e.h)
        .mul(&d3)
        .mul(&d1)
        .mul(&d3_inv)
        .mul(&h_inv)
        .mul(&e.zt);

    let forward = Estn::from_blocks(&uu, &ui, &iu, &ii);
    let (n, _rcond) = forward.invert()?;
    Ok(if e.symmetric {
        n.symmetrize_rail_pairs()
    } else {
        n
    })
}

/// Independent verification oracle: the same span built as a cascade of
/// `n_seg` lumped pi sections, each constructed element by element from the
/// unit-length circuit (series `z*dx` on each rail with mutual coupling,
/// shunt `g*dx` to ground and between the rails, split half-and-half across
/// the section ends). No eigen machinery is involved; convergence to
/// `rail_estn` is second order in the segment length.
pub fn lumped_pi_oracle(p: &RailUnitParams, l_km: f64, n_seg: usize) -> Result<Estn> {
    if n_seg < 1 {
        return Err(Error::NonPositive {
            name: "segment count",
            value: n_seg as f64,
        });
    }
    if l_km < 0.0 {
        return Err(Error::NonPositive {
            name: "span length",
            value: l_km,
        });
    }
    if l_km == 0.0 {
        return Ok(Estn::identity());
    }
    let dx = l_km / n_seg as f64;

    // Series branch impedances over dx, straight from the circuit sketch.
    let zs11 = p.z11 * dx;
    let zs22 = p.z22 * dx;
    let zs12 = p.z12 * dx;
    // Half shunts at each end of the section: ground leakage per rail plus
    // the rail-to-rail leakage.
    let yg1 = p.g11 * (dx / 2.0);
    let yg2 = p.g22 * (dx / 2.0);
    let yr = p.g12 * (dx / 2.0);

    // Chain matrix of one pi section, assembled as half-shunt, series,
    // half-shunt. For the chain orientation (output state to input state)
    // the series step restores the voltage drop and the shunt step restores
    // the branch currents drawn at the output side.
    let shunt_step = {
        let mut m = Estn::identity();
        let mut t = *m.entries();
        t[2][0] += yg1 + yr;
        t[2][1] += -yr;
        t[3][0] += -yr;
        t[3][1] += yg2 + yr;
        m = Estn::from_entries(t);
        m
    };
    let series_step = {
        let mut t = *Estn::identity().entries();
        t[0][2] += zs11;
        t[0][3] += zs12;
        t[1][2] += zs12;
        t[1][3] += zs22;
        Estn::from_entries(t)
    };
    let seg = shunt_step.compose(&series_step).compose(&shunt_step);

    let mut total = Estn::identity();
    for _ in 0..n_seg {
        total = total.compose(&seg);
    }
    Ok(total)
}

/// Reinterpret the leakage admittances for a given ballast resistance.
///
/// Ballast resistance is read as the per-kilometer rail-to-rail leakage
/// resistance: the result has `g12 = 1/r_b` exactly, and the ground
/// leakages are rescaled by the same factor so the configured
/// ground-to-rail leakage split is preserved.
pub fn ballast_to_params(r_b_ohm_km: f64, base: &RailUnitParams) -> Result<RailUnitParams> {
    if !(r_b_ohm_km > 0.0) {
        return Err(Error::NonPositiveBallast(r_b_ohm_km));
    }
    if base.g12 == ZERO {
        return Err(Error::Config(
            "base parameters have zero rail-to-rail leakage; ballast mapping undefined".into(),
        ));
    }
    let target = Complex64::new(1.0 / r_b_ohm_km, 0.0);
    let k = target / base.g12;
    RailUnitParams::new(
        base.z11,
        base.z22,
        base.z12,
        base.g11 * k,
        base.g22 * k,
        base.g12 * k,
        base.frequency_hz,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estn::relative_deviation;

    fn c(re: f64, im: f64) -> C64 {
        Complex64::new(re, im)
    }

    fn sample_params() -> RailUnitParams {
        RailUnitParams::new(
            c(1.15, 10.65),
            c(1.15, 10.65),
            c(0.10, 0.70),
            c(1.0 / 60.0, 0.0),
            c(1.0 / 60.0, 0.0),
            c(1.0 / 6.0, 0.0),
            2300.0,
        )
        .unwrap()
    }

    #[test]
    fn eigen_of_decoupled_asymmetric_line_is_diagonal() {
        let p = RailUnitParams::new(
            c(1.0, 8.0),
            c(2.0, 12.0),
            ZERO,
            c(0.02, 0.0),
            c(0.05, 0.0),
            ZERO,
            2300.0,
        )
        .unwrap();
        let e = line_eigen(&p).unwrap();
        let want1 = c(1.0, 8.0) * c(0.02, 0.0);
        let want2 = c(2.0, 12.0) * c(0.05, 0.0);
        let got = [e.lambda1, e.lambda2];
        assert!(
            got.iter().any(|l| (l - want1).norm() < 1e-12 * want1.norm())
                && got.iter().any(|l| (l - want2).norm() < 1e-12 * want2.norm())
        );
        // Eigenvectors reduce to the coordinate axes up to column scaling
        // and ordering.
        let h = e.h.0;
        let col = |j: usize| [h[0][j].norm(), h[1][j].norm()];
        let (c0, c1) = (col(0), col(1));
        let axis_like = |v: [f64; 2]| (v[0] > 0.99 && v[1] < 1e-9) || (v[1] > 0.99 && v[0] < 1e-9);
        assert!(axis_like(c0) && axis_like(c1));
        assert!((c0[0] > 0.5) != (c1[0] > 0.5), "columns must span both axes");
    }

    #[test]
    fn eigen_of_symmetric_line_gives_common_and_differential_modes() {
        let p = sample_params();
        let e = line_eigen(&p).unwrap();
        // Eigenvectors are proportional to (1, 1) and (1, -1).
        let h = e.h.0;
        let col_ratio = |j: usize| h[1][j] / h[0][j];
        let ratios = [col_ratio(0), col_ratio(1)];
        assert!(ratios.iter().any(|r| (r - c(1.0, 0.0)).norm() < 1e-9));
        assert!(ratios.iter().any(|r| (r + c(1.0, 0.0)).norm() < 1e-9));
    }

    #[test]
    fn eigen_rejects_fully_degenerate_line() {
        let p = RailUnitParams::new(
            c(1.0, 8.0),
            c(1.0, 8.0),
            ZERO,
            c(0.05, 0.0),
            c(0.05, 0.0),
            ZERO,
            2300.0,
        )
        .unwrap();
        assert!(matches!(
            line_eigen(&p),
            Err(Error::DegenerateModes { .. })
        ));
    }

    #[test]
    fn eigen_reconstruction() {
        let p = sample_params();
        let e = line_eigen(&p).unwrap();
        let a = p.series_matrix().mul(&p.shunt_matrix());
        let rebuilt = e
            .h
            .mul(&Mat2::diag(e.lambda1, e.lambda2))
            .mul(&e.h.inverse().unwrap());
        let scale = a.norm_one();
        for i in 0..2 {
            for j in 0..2 {
                assert!((rebuilt.0[i][j] - a.0[i][j]).norm() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn zero_length_span_is_identity() {
        let e = line_eigen(&sample_params()).unwrap();
        assert_eq!(rail_estn(&e, 0.0).unwrap(), Estn::identity());
    }

    #[test]
    fn span_semigroup_property() {
        let e = line_eigen(&sample_params()).unwrap();
        for (l1, l2) in [(0.1, 0.2), (0.35, 0.05), (0.5, 0.5)] {
            let a = rail_estn(&e, l1).unwrap();
            let b = rail_estn(&e, l2).unwrap();
            let ab = a.compose(&b);
            let whole = rail_estn(&e, l1 + l2).unwrap();
            assert!(relative_deviation(&ab, &whole, 1e-12) < 1e-9);
        }
    }

    #[test]
    fn span_matches_lumped_oracle() {
        let p = sample_params();
        let e = line_eigen(&p).unwrap();
        for l in [0.1, 0.5, 1.0] {
            let exact = rail_estn(&e, l).unwrap();
            let lumped = lumped_pi_oracle(&p, l, 10_000).unwrap();
            let dev = relative_deviation(&exact, &lumped, 1e-9);
            assert!(dev < 1e-4, "l = {l}: deviation {dev}");
        }
    }

    #[test]
    fn oracle_second_order_convergence() {
        let p = sample_params();
        let e = line_eigen(&p).unwrap();
        let exact = rail_estn(&e, 0.789).unwrap();
        let dev_coarse = relative_deviation(&exact, &lumped_pi_oracle(&p, 0.789, 1000).unwrap(), 1e-9);
        let dev_fine = relative_deviation(&exact, &lumped_pi_oracle(&p, 0.789, 2000).unwrap(), 1e-9);
        let ratio = dev_coarse / dev_fine;
        assert!(
            (2.8..6.0).contains(&ratio),
            "expected ~4x error reduction, got {ratio} ({dev_coarse} -> {dev_fine})"
        );
    }

    #[test]
    fn oracle_decouples_without_mutual_terms() {
        let p = RailUnitParams::new(
            c(1.0, 8.0),
            c(2.0, 12.0),
            ZERO,
            c(0.02, 0.0),
            c(0.05, 0.0),
            ZERO,
            2300.0,
        )
        .unwrap();
        let n = lumped_pi_oracle(&p, 0.4, 100).unwrap();
        // No entry may couple rail 1 quantities (indices 0, 2) with rail 2
        // quantities (indices 1, 3).
        for (i, j) in [(0, 1), (0, 3), (2, 1), (2, 3), (1, 0), (1, 2), (3, 0), (3, 2)] {
            assert!(n.entry(i, j).norm() < 1e-15, "entry ({i},{j}) nonzero");
        }
    }

    #[test]
    fn oracle_single_segment_short_span_near_identity() {
        // A single short segment deviates from the identity by O(l).
        let p = sample_params();
        let id = Estn::identity();
        let abs_dev = |l: f64| -> f64 {
            let n = lumped_pi_oracle(&p, l, 1).unwrap();
            let mut worst = 0.0f64;
            for i in 0..4 {
                for j in 0..4 {
                    worst = worst.max((n.entry(i, j) - id.entry(i, j)).norm());
                }
            }
            worst
        };
        let d3 = abs_dev(1e-3);
        let d5 = abs_dev(1e-5);
        assert!(d5 < 1e-3);
        assert!(d3 / d5 > 50.0, "deviation must shrink linearly: {d3} vs {d5}");
    }

    #[test]
    fn ballast_rescaling_is_reciprocal() {
        let base = sample_params();
        let at6 = ballast_to_params(6.0, &base).unwrap();
        let at3 = ballast_to_params(3.0, &base).unwrap();
        assert!((at3.g12 - at6.g12 * 2.0).norm() < 1e-15);
        assert!((at3.g11 - at6.g11 * 2.0).norm() < 1e-15);
        assert!((at3.g22 - at6.g22 * 2.0).norm() < 1e-15);
        assert!((at6.g12 - c(1.0 / 6.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn huge_ballast_approaches_leakage_free_line() {
        let base = sample_params();
        let dry = ballast_to_params(1e6, &base).unwrap();
        assert!(dry.g12.norm() < 1.1e-6);
        assert!(dry.g11.norm() < 1.1e-7);
        // The span matrix approaches the leakage-free one.
        let e_dry = line_eigen(&dry).unwrap();
        let n_dry = rail_estn(&e_dry, 0.5).unwrap();
        let lossless = RailUnitParams::new(
            base.z11,
            base.z22,
            base.z12,
            c(1e-12, 0.0),
            c(1e-12, 0.0),
            c(1e-11, 0.0),
            base.frequency_hz,
        )
        .unwrap();
        let e_free = line_eigen(&lossless).unwrap();
        let n_free = rail_estn(&e_free, 0.5).unwrap();
        // Residual leakage entries of order g*l are negligible against the
        // matrix scale; compare the surviving structure.
        assert!(relative_deviation(&n_dry, &n_free, 1e-5) < 1e-4);
    }

    #[test]
    fn nonpositive_ballast_rejected() {
        let base = sample_params();
        assert!(matches!(
            ballast_to_params(0.0, &base),
            Err(Error::NonPositiveBallast(_))
        ));
        assert!(matches!(
            ballast_to_params(-2.0, &base),
            Err(Error::NonPositiveBallast(_))
        ));
    }

    #[test]
    fn matched_line_input_impedance_decreases_with_rail_leakage() {
        // Differential-mode input impedance of a long span, observed through
        // the chain matrix with the far end open. More rail-to-rail leakage
        // means a lower mode impedance.
        let mut last = f64::INFINITY;
        for g12 in [1.0 / 12.0, 1.0 / 8.0, 1.0 / 6.0, 1.0 / 4.0, 1.0 / 2.0] {
            let p = RailUnitParams::symmetric(
                c(1.15, 10.65),
                c(0.10, 0.70),
                c(0.015, 0.0),
                c(g12, 0.0),
                2300.0,
            )
            .unwrap();
            let e = line_eigen(&p).unwrap();
            let n = rail_estn(&e, 4.0).unwrap();
            let out = crate::estn::PortState::new(c(1.0, 0.0), c(-1.0, 0.0), ZERO, ZERO);
            let inp = n.apply(&out);
            let z = (inp.diff_voltage() / inp.diff_current()).norm();
            assert!(z < last, "impedance failed to decrease at g12 = {g12}");
            last = z;
        }
    }
}
