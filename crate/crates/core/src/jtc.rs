//! Assembly of the occupied section and the shunting-point solve.
//!
//! The cascade runs from the sending-end boundary constraint, through the
//! sending tuning area, the wheel-free main track before the shunting
//! point, the train-occupied main track after it, the receiving tuning
//! area, and the receiving-end boundary constraint. The unknown port state
//! at the shunting point (the first wheel set) is recovered from the
//! stacked linear system of all boundary and chain constraints, and the
//! train shunting impedance is the differential voltage over the
//! differential current there:
//!
//! ```text
//! z_f = (U_f1 - U_f2) / ((I_f1 - I_f2) / 2)
//! ```

use crate::elements::shunt_estn;
use crate::error::{Error, Result};
use crate::estn::{Estn, PortState};
use crate::mat::{qr_least_squares, CMat, C64, ONE, ZERO};
use crate::railline::{line_eigen, rail_estn, LineEigen};
use crate::scenario::JtcScenario;
use crate::train::{compose_on_line, in_section_wheels, partition_units, rail_wheel_estn, RailWheelUnit};

/// Solved port state at the shunting point.
#[derive(Debug, Clone, Copy)]
pub struct ShuntingSolution {
    pub x_f_m: f64,
    /// (U_f1, U_f2, I_f1, I_f2) on the sending side of the first wheel set.
    pub state: PortState,
    /// Train shunting impedance, ohm.
    pub z_f: C64,
    /// Worst reciprocal condition estimate encountered while assembling and
    /// solving.
    pub condition_report: f64,
}

/// Which formulation recovers the shunting-point state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Stack the primitive boundary and chain constraints over the port
    /// states at the shunting point and both tuning-area terminations, and
    /// solve the 12x12 system in the least-squares sense with a residual
    /// check. No chain inverses are formed.
    #[default]
    Stacked,
    /// Textbook elimination: invert the tuning and occupied-track chains
    /// and collapse everything onto the 4-vector at the shunting point.
    /// Kept as a cross-check for the stacked path.
    ChainedInverse,
}

/// Receiving tuning area: its chain matrix (half span, air-core coil, half
/// span) and the 2x4 termination constraint enforced at its outer end
/// (differential voltage dropped over the outer tuning unit, zero net rail
/// current).
pub fn receiving_tuning(s: &JtcScenario) -> Result<(Estn, CMat)> {
    let e = line_eigen(&s.rail)?;
    receiving_tuning_with(s, &e)
}

fn receiving_tuning_with(s: &JtcScenario, e: &LineEigen) -> Result<(Estn, CMat)> {
    let half = rail_estn(e, s.tuning_len_m * 0.5e-3)?;
    let n_rt = compose_on_line(&compose_on_line(&half, &shunt_estn(s.z_sva)?, e), &half, e);
    Ok((n_rt, termination_constraint(s.z_rz)))
}

fn termination_constraint(z: C64) -> CMat {
    CMat::from_rows(&[
        vec![ONE, -ONE, -z * 0.5, z * 0.5],
        vec![ZERO, ZERO, ONE, ONE],
    ])
}

/// Sending-end boundary: the tuning-area chain, the two 4x4 coefficient
/// matrices of the source node equations (one applying to the main-track
/// side state, one to the tuning-area side state), the termination
/// constraint at the outer end, and the source vector.
#[derive(Debug, Clone)]
pub struct SendingBoundary {
    pub tuning: Estn,
    /// Coefficients of the main-track-side port state in the source node
    /// equations.
    pub main_side: CMat,
    /// Coefficients of the tuning-area-side port state in the same
    /// equations.
    pub tuning_side: CMat,
    /// Termination constraint at the outer end of the sending tuning area.
    pub termination: CMat,
    /// Right-hand side of the source node equations.
    pub source: [C64; 4],
}

pub fn sending_tuning(s: &JtcScenario) -> Result<SendingBoundary> {
    let e = line_eigen(&s.rail)?;
    sending_tuning_with(s, &e)
}

fn sending_tuning_with(s: &JtcScenario, e: &LineEigen) -> Result<SendingBoundary> {
    let half = rail_estn(e, s.tuning_len_m * 0.5e-3)?;
    let tuning = compose_on_line(&compose_on_line(&half, &shunt_estn(s.z_sva)?, e), &half, e);
    let ze2 = s.z_es * 0.5;
    // Voltage continuity across the source node, zero net rail current,
    // and the EMF equation of the Thevenin source across the rails.
    let main_side = CMat::from_rows(&[
        vec![ONE, ZERO, ZERO, ZERO],
        vec![ZERO, ONE, ZERO, ZERO],
        vec![ZERO, ZERO, ONE, ONE],
        vec![ONE, -ONE, ze2, -ze2],
    ]);
    let tuning_side = CMat::from_rows(&[
        vec![-ONE, ZERO, ZERO, ZERO],
        vec![ZERO, -ONE, ZERO, ZERO],
        vec![ZERO, ZERO, ONE, ONE],
        vec![ZERO, ZERO, ze2, -ze2],
    ]);
    Ok(SendingBoundary {
        tuning,
        main_side,
        tuning_side,
        termination: termination_constraint(s.z_rs),
        source: [ZERO, ZERO, ZERO, s.u_es],
    })
}

fn check_in_section(s: &JtcScenario, x_f_m: f64) -> Result<()> {
    if !(x_f_m > 0.0 && x_f_m <= s.length_m) {
        return Err(Error::OutOfSection {
            position: x_f_m,
            length: s.length_m,
        });
    }
    Ok(())
}

/// Chain matrix of the main track from the shunting point to the
/// receiving-end boundary: the occupied remainder of the unit containing
/// `x_f`, then capacitor and rail-wheel-unit factors down to the boundary.
/// A capacitor exactly at `x_f` composes on the receiving side of the wheel
/// shunt.
pub fn after_network(s: &JtcScenario, x_f_m: f64) -> Result<Estn> {
    let e = line_eigen(&s.rail)?;
    after_network_with(s, &e, x_f_m)
}

fn after_network_with(s: &JtcScenario, e: &LineEigen, x_f_m: f64) -> Result<Estn> {
    check_in_section(s, x_f_m)?;
    let wheels = in_section_wheels(&s.train, x_f_m, s.length_m);
    let fixed = s.fixed_points();
    let units = partition_units(&wheels, &fixed);
    // Locate the unit containing x_f (the head wheel's unit under the same
    // tie-break as the partition).
    let k = unit_index_of(&fixed, x_f_m);
    let head_unit = RailWheelUnit {
        x_start_m: units[k].x_start_m,
        x_end_m: x_f_m,
        wheels: units[k].wheels.clone(),
    };
    let mut n = rail_wheel_estn(&head_unit, e)?;
    for i in (0..k).rev() {
        // Capacitor index i sits at fixed[i + 1], between units i+1 and i.
        n = compose_on_line(&n, &s.capacitors[i].estn()?, e);
        n = compose_on_line(&n, &rail_wheel_estn(&units[i], e)?, e);
    }
    Ok(n)
}

fn unit_index_of(fixed: &[f64], x: f64) -> usize {
    let last = fixed.len() - 2;
    for (k, pair) in fixed.windows(2).enumerate() {
        if x >= pair[0] && (x < pair[1] || k == last) {
            return k;
        }
    }
    last
}

/// Chain matrix of the wheel-free main track from the sending-end boundary
/// down to the shunting point.
pub fn before_network(s: &JtcScenario, x_f_m: f64) -> Result<Estn> {
    let e = line_eigen(&s.rail)?;
    before_network_with(s, &e, x_f_m)
}

fn before_network_with(s: &JtcScenario, e: &LineEigen, x_f_m: f64) -> Result<Estn> {
    check_in_section(s, x_f_m)?;
    let mut n = Estn::identity();
    let mut cursor = s.length_m;
    for cap in s.capacitors.iter().rev() {
        let pos = cap.position.expect("validated capacitor has a position");
        if pos <= x_f_m {
            break;
        }
        let gap = cursor - pos;
        if gap > 0.0 {
            n = compose_on_line(&n, &rail_estn(e, gap * 1e-3)?, e);
        }
        n = compose_on_line(&n, &cap.estn()?, e);
        cursor = pos;
    }
    if cursor - x_f_m > 0.0 {
        n = compose_on_line(&n, &rail_estn(e, (cursor - x_f_m) * 1e-3)?, e);
    }
    Ok(n)
}

/// Solve for the port state at the shunting point with the default
/// (stacked) formulation. The head of the train is placed so the first
/// wheel set sits exactly at `x_f`.
pub fn solve_shunting_point(s: &JtcScenario, x_f_m: f64) -> Result<ShuntingSolution> {
    solve_shunting_point_with(s, x_f_m, SolveMethod::Stacked)
}

pub fn solve_shunting_point_with(
    s: &JtcScenario,
    x_f_m: f64,
    method: SolveMethod,
) -> Result<ShuntingSolution> {
    check_in_section(s, x_f_m)?;
    if s.train.is_empty() {
        return Err(Error::EmptyTrain);
    }
    let e = line_eigen(&s.rail)?;
    let n_af = after_network_with(s, &e, x_f_m)?;
    let n_bf = before_network_with(s, &e, x_f_m)?;
    let (n_rt, rcv_term) = receiving_tuning_with(s, &e)?;
    let snd = sending_tuning_with(s, &e)?;
    let receiver_shunt = shunt_estn(s.z_rm)?;

    // The network is linear in the EMF, so solve once with a unit source
    // and scale the state afterward. The impedance is a ratio and does not
    // depend on the source at all; a zero-EMF scenario simply keeps the
    // unit-source state.
    let (state, solver_rcond) = match method {
        SolveMethod::Stacked => {
            // Receiving-side chain collapsed without inverses: the
            // shunting-point state equals this matrix applied to the
            // termination state.
            let m_recv =
                compose_on_line(&compose_on_line(&n_af, &receiver_shunt, &e), &n_rt, &e);
            solve_stacked(&m_recv, &rcv_term, &snd, &n_bf, ONE)?
        }
        SolveMethod::ChainedInverse => {
            solve_chained(&n_af, &receiver_shunt, &n_rt, &rcv_term, &snd, &n_bf, ONE)?
        }
    };

    let den = state.diff_current();
    if den.norm() < 1e-300 {
        return Err(Error::SingularSystem {
            detail: "zero differential current at the shunting point".into(),
        });
    }
    let z_f = state.diff_voltage() / den;

    let scale = if s.u_es == ZERO { ONE } else { s.u_es };
    let state = PortState::new(
        state.u1 * scale,
        state.u2 * scale,
        state.i1 * scale,
        state.i2 * scale,
    );

    Ok(ShuntingSolution {
        x_f_m,
        state,
        z_f,
        condition_report: solver_rcond,
    })
}

/// Unknowns: the port state at the shunting point, at the receiving
/// termination, and at the sending termination (12 complex scalars).
/// Constraints: the receiving chain relation, the receiving termination
/// pair, the four source node equations with the before-network and the
/// sending tuning chain substituted, and the sending termination pair.
fn solve_stacked(
    m_recv: &Estn,
    rcv_term: &CMat,
    snd: &SendingBoundary,
    n_bf: &Estn,
    u_src: C64,
) -> Result<(PortState, f64)> {
    let mut a = CMat::zeros(12, 12);
    let mut b = vec![ZERO; 12];

    // Rows 0-3: X - M_recv * R = 0.
    a.set_block(0, 0, &CMat::identity(4));
    let mut neg_m = m_recv.to_cmat();
    for i in 0..4 {
        for j in 0..4 {
            neg_m[(i, j)] = -neg_m[(i, j)];
        }
    }
    a.set_block(0, 4, &neg_m);

    // Rows 4-5: receiving termination on R.
    a.set_block(4, 4, rcv_term);

    // Rows 6-9: source node equations,
    // main_side * N_bf * X + tuning_side * N_st * S = source.
    a.set_block(6, 0, &snd.main_side.mul(&n_bf.to_cmat()));
    a.set_block(6, 8, &snd.tuning_side.mul(&snd.tuning.to_cmat()));
    b[9] = u_src;

    // Rows 10-11: sending termination on S.
    a.set_block(10, 8, &snd.termination);

    // The occupied chain grows exponentially with the wheel count, so the
    // raw blocks span many orders of magnitude. Equilibrate rows and
    // columns before factorizing; the scalings are undone on the solution.
    let mut row_scale = [1.0f64; 12];
    for i in 0..12 {
        let m = (0..12).map(|j| a[(i, j)].norm()).fold(0.0f64, f64::max);
        if m > 0.0 {
            row_scale[i] = 1.0 / m;
            for j in 0..12 {
                a[(i, j)] *= row_scale[i];
            }
            b[i] *= row_scale[i];
        }
    }
    let mut col_scale = [1.0f64; 12];
    for j in 0..12 {
        let m = (0..12).map(|i| a[(i, j)].norm()).fold(0.0f64, f64::max);
        if m > 0.0 {
            col_scale[j] = 1.0 / m;
            for i in 0..12 {
                a[(i, j)] *= col_scale[j];
            }
        }
    }

    let (mut y, resid, rcond) = qr_least_squares(&a, &b)?;
    if resid > 1e-8 {
        return Err(Error::SingularSystem {
            detail: format!("stacked system residual {resid:.3e}"),
        });
    }
    // The occupied chain makes the system genuinely ill-conditioned (the
    // termination state is many orders below the shunting-point state), so
    // a single factorization loses digits. The system is consistent, so
    // iterative refinement with compensated residuals recovers them.
    let mut last_rnorm = f64::INFINITY;
    for _ in 0..4 {
        let r = crate::mat::residual_compensated(&a, &y, &b);
        let rnorm = r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if rnorm == 0.0 || rnorm >= last_rnorm {
            break;
        }
        last_rnorm = rnorm;
        let Ok((delta, _, _)) = qr_least_squares(&a, &r) else {
            break;
        };
        for (yi, di) in y.iter_mut().zip(&delta) {
            *yi += di;
        }
    }
    Ok((
        PortState::new(
            y[0] * col_scale[0],
            y[1] * col_scale[1],
            y[2] * col_scale[2],
            y[3] * col_scale[3],
        ),
        rcond,
    ))
}

/// The explicit-inverse formulation: both boundary pairs are pulled back
/// onto the shunting-point state through inverted chains, giving a 4x4
/// system.
#[allow(clippy::too_many_arguments)]
fn solve_chained(
    n_af: &Estn,
    receiver_shunt: &Estn,
    n_rt: &Estn,
    rcv_term: &CMat,
    snd: &SendingBoundary,
    n_bf: &Estn,
    u_src: C64,
) -> Result<(PortState, f64)> {
    let mut worst = f64::INFINITY;
    let mut inv = |n: &Estn| -> Result<CMat> {
        let (i, rc) = n.invert()?;
        worst = worst.min(rc);
        Ok(i.to_cmat())
    };
    let af_inv = inv(n_af)?;
    let rm_inv = inv(receiver_shunt)?;
    let rt_inv = inv(n_rt)?;
    let st_inv = inv(&snd.tuning)?;
    let (n3_inv, rc3) = snd.tuning_side.lu_inverse()?;
    worst = worst.min(rc3);

    // Receiving rows: termination applied to the termination state pulled
    // back from X.
    let bot = rcv_term.mul(&rt_inv).mul(&rm_inv).mul(&af_inv);
    // Sending rows: termination applied to the outer sending state,
    // expressed through the source node equations.
    let chain = snd
        .termination
        .mul(&st_inv)
        .mul(&n3_inv);
    let top = chain.mul(&snd.main_side).mul(&n_bf.to_cmat());
    let rhs_top = {
        let v = chain.mul_vec(&[ZERO, ZERO, ZERO, u_src]);
        [v[0], v[1]]
    };

    let mut a = CMat::zeros(4, 4);
    let mut b = vec![ZERO; 4];
    for j in 0..4 {
        a[(0, j)] = top[(0, j)];
        a[(1, j)] = top[(1, j)];
        a[(2, j)] = bot[(0, j)];
        a[(3, j)] = bot[(1, j)];
    }
    b[0] = rhs_top[0];
    b[1] = rhs_top[1];

    let (x, resid, rcond) = qr_least_squares(&a, &b)?;
    worst = worst.min(rcond);
    if resid > 1e-6 {
        return Err(Error::SingularSystem {
            detail: format!("chained system residual {resid:.3e}"),
        });
    }
    Ok((PortState::new(x[0], x[1], x[2], x[3]), worst))
}

/// Amplitude of the on-board reader's induced voltage implied by a solved
/// shunting state: `|a1 a2 (U_f1 - U_f2) / z_f|`, algebraically equal to
/// `|a1 a2 (I_f1 - I_f2) / 2|`.
pub fn tcr_amplitude(sol: &ShuntingSolution, a1: f64, a2: f64) -> Result<f64> {
    if sol.z_f == ZERO {
        return Err(Error::ZeroImpedance);
    }
    Ok((sol.state.diff_voltage() / sol.z_f).norm() * (a1 * a2).abs())
}
