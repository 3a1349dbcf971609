//! Whole-system verification oracle built on lumped nodal analysis.
//!
//! Every rail span (tuning areas included) is discretized into short pi
//! sections, every shunt device is stamped into a complex node-admittance
//! system together with the Norton equivalent of the source, and the block
//! tridiagonal system is solved directly. No chain-matrix machinery is
//! involved anywhere, which makes this an independent check of the cascade
//! path. Convergence toward the exact model is second order in the segment
//! length.
//!
//! The extended axis runs from `-tuning_len` (outer end of the receiving
//! tuning area) through `[0, length]` (main track) to `length + tuning_len`
//! (outer end of the sending tuning area).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estn::PortState;
use crate::jtc::ShuntingSolution;
use crate::mat::{Mat2, C64, ZERO};
use crate::scenario::JtcScenario;
use crate::train::in_section_wheels;

/// Discretization options for the oracle.
#[derive(Debug, Clone, Copy)]
pub struct NodalOptions {
    /// Target segment length, meters.
    pub seg_len_m: f64,
}

impl Default for NodalOptions {
    fn default() -> Self {
        NodalOptions { seg_len_m: 0.25 }
    }
}

/// Solved node voltages plus enough per-segment data to recover port
/// currents at any cross-section.
pub struct NodalField {
    /// Cross-section coordinates on the extended axis, ascending.
    positions_m: Vec<f64>,
    /// Rail-to-ground voltages per cross-section.
    voltages: Vec<[C64; 2]>,
    /// Series admittance of segment i (between cross-sections i and i+1).
    seg_series_y: Vec<Mat2>,
    /// Half-shunt stamped at each end of segment i.
    seg_half_shunt: Vec<Mat2>,
    /// Worst reciprocal condition estimate among the elimination pivots.
    pub pivot_rcond: f64,
}

impl NodalField {
    pub fn node_at(&self, pos_m: f64) -> Option<usize> {
        self.positions_m
            .iter()
            .position(|&p| (p - pos_m).abs() < 1e-6)
    }

    pub fn voltage(&self, node: usize) -> [C64; 2] {
        self.voltages[node]
    }

    /// Rail currents arriving at a cross-section from the sending side
    /// (larger coordinate), i.e. the currents in the transmission
    /// direction just before the cross-section. The half-shunt of the
    /// adjacent pi section is backed out so this matches the port-current
    /// convention of the chain model.
    pub fn current_from_sending_side(&self, node: usize) -> [C64; 2] {
        assert!(node + 1 < self.positions_m.len(), "no segment above node");
        let u_here = self.voltages[node];
        let u_up = self.voltages[node + 1];
        let y = &self.seg_series_y[node];
        let gh = &self.seg_half_shunt[node];
        let du = [u_up[0] - u_here[0], u_up[1] - u_here[1]];
        let series = y.mul_vec(du);
        let leak = gh.mul_vec(u_here);
        [series[0] - leak[0], series[1] - leak[1]]
    }

    /// Rail currents leaving a cross-section toward the receiving side
    /// (smaller coordinate), in the transmission direction.
    pub fn current_to_receiving_side(&self, node: usize) -> [C64; 2] {
        assert!(node > 0, "no segment below node");
        let u_here = self.voltages[node];
        let u_down = self.voltages[node - 1];
        let y = &self.seg_series_y[node - 1];
        let gh = &self.seg_half_shunt[node - 1];
        let du = [u_here[0] - u_down[0], u_here[1] - u_down[1]];
        let series = y.mul_vec(du);
        let leak = gh.mul_vec(u_here);
        [series[0] + leak[0], series[1] + leak[1]]
    }
}

fn shunt_stamp(z: C64) -> Result<Mat2> {
    if z == ZERO {
        return Err(Error::ZeroImpedance);
    }
    let y = Complex64::new(1.0, 0.0) / z;
    Ok(Mat2([[y, -y], [-y, y]]))
}

/// Discretize and solve the whole section. `head_m` places the train (first
/// wheel set at that coordinate); `None` solves the unoccupied section.
pub fn nodal_field(s: &JtcScenario, head_m: Option<f64>, opts: &NodalOptions) -> Result<NodalField> {
    s.validate()?;
    if !(opts.seg_len_m > 0.0) {
        return Err(Error::NonPositive {
            name: "segment length",
            value: opts.seg_len_m,
        });
    }
    let lt = s.tuning_len_m;
    let len = s.length_m;

    // Feature cross-sections: ends and midpoints of both tuning areas, the
    // main-track boundaries, all capacitors, all in-section wheels, and the
    // shunting point itself.
    let mut features = vec![-lt, -lt * 0.5, 0.0, len, len + lt * 0.5, len + lt];
    features.extend(s.capacitor_positions());
    let wheels = match head_m {
        Some(h) => {
            if !(h > 0.0 && h <= len) {
                return Err(Error::OutOfSection {
                    position: h,
                    length: len,
                });
            }
            features.push(h);
            in_section_wheels(&s.train, h, len)
        }
        None => Vec::new(),
    };
    for &(pos, _) in &wheels {
        features.push(pos);
    }
    features.sort_by(f64::total_cmp);
    features.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    // Mesh: subdivide each feature-to-feature span.
    let mut positions = Vec::new();
    positions.push(features[0]);
    for pair in features.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let nseg = ((b - a) / opts.seg_len_m).ceil().max(1.0) as usize;
        for k in 1..=nseg {
            positions.push(a + (b - a) * k as f64 / nseg as f64);
        }
    }
    let n = positions.len();

    // Per-segment series and shunt blocks from the per-km parameters.
    let p = &s.rail;
    let mut seg_series_y = Vec::with_capacity(n - 1);
    let mut seg_half_shunt = Vec::with_capacity(n - 1);
    let mut diag = vec![Mat2::zero(); n];
    let mut upper = vec![Mat2::zero(); n - 1];
    let mut rhs = vec![[ZERO; 2]; n];

    for i in 0..n - 1 {
        let dx_km = (positions[i + 1] - positions[i]) * 1e-3;
        let zb = Mat2([[p.z11, p.z12], [p.z12, p.z22]]).scale(Complex64::new(dx_km, 0.0));
        let yb = zb.inverse()?;
        let gh = Mat2([
            [p.g11 + p.g12, -p.g12],
            [-p.g12, p.g22 + p.g12],
        ])
        .scale(Complex64::new(dx_km * 0.5, 0.0));
        diag[i] = diag[i].add(&yb).add(&gh);
        diag[i + 1] = diag[i + 1].add(&yb).add(&gh);
        upper[i] = upper[i].sub(&yb);
        seg_series_y.push(yb);
        seg_half_shunt.push(gh);
    }

    // Device stamps.
    let node_of = |pos: f64| -> usize {
        positions
            .iter()
            .position(|&p| (p - pos).abs() < 1e-9)
            .expect("feature position is a mesh node")
    };
    let mut stamp = |pos: f64, z: C64| -> Result<()> {
        let k = node_of(pos);
        diag[k] = diag[k].add(&shunt_stamp(z)?);
        Ok(())
    };
    stamp(-lt, s.z_rz)?;
    stamp(-lt * 0.5, s.z_sva)?;
    stamp(0.0, s.z_rm)?;
    for cap in &s.capacitors {
        stamp(cap.position.expect("validated"), cap.z)?;
    }
    for &(pos, r) in &wheels {
        stamp(pos, r)?;
    }
    stamp(len + lt * 0.5, s.z_sva)?;
    stamp(len + lt, s.z_rs)?;

    // Thevenin source across the rails at the sending boundary, stamped as
    // its Norton equivalent.
    let u_src = if s.u_es == ZERO {
        Complex64::new(1.0, 0.0)
    } else {
        s.u_es
    };
    let src_node = node_of(len);
    diag[src_node] = diag[src_node].add(&shunt_stamp(s.z_es)?);
    let inj = u_src / s.z_es;
    rhs[src_node][0] += inj;
    rhs[src_node][1] -= inj;

    // Block-tridiagonal elimination. The matrix is complex symmetric, so
    // the sub-diagonal block equals the (symmetric) super-diagonal block.
    let mut pivot_rcond: f64 = f64::INFINITY;
    let mut d = vec![Mat2::zero(); n];
    let mut r = rhs.clone();
    d[0] = diag[0];
    for i in 1..n {
        let prev_inv = d[i - 1].inverse().map_err(|_| Error::SingularSystem {
            detail: format!("singular pivot block at node {}", i - 1),
        })?;
        pivot_rcond = pivot_rcond.min(d[i - 1].rcond());
        let m = upper[i - 1].mul(&prev_inv);
        d[i] = diag[i].sub(&m.mul(&upper[i - 1]));
        let mr = m.mul_vec(r[i - 1]);
        r[i][0] -= mr[0];
        r[i][1] -= mr[1];
    }
    pivot_rcond = pivot_rcond.min(d[n - 1].rcond());
    let mut x = vec![[ZERO; 2]; n];
    let last_inv = d[n - 1].inverse().map_err(|_| Error::SingularSystem {
        detail: "singular pivot block at the last node".into(),
    })?;
    x[n - 1] = last_inv.mul_vec(r[n - 1]);
    for i in (0..n - 1).rev() {
        let coupled = upper[i].mul_vec(x[i + 1]);
        let rr = [r[i][0] - coupled[0], r[i][1] - coupled[1]];
        let inv = d[i].inverse().map_err(|_| Error::SingularSystem {
            detail: format!("singular pivot block at node {i}"),
        })?;
        x[i] = inv.mul_vec(rr);
    }

    Ok(NodalField {
        positions_m: positions,
        voltages: x,
        seg_series_y,
        seg_half_shunt,
        pivot_rcond,
    })
}

/// Shunting-point solution computed entirely by nodal analysis: same
/// outputs as the cascade solver, none of its machinery.
pub fn nodal_oracle(s: &JtcScenario, x_f_m: f64, opts: &NodalOptions) -> Result<ShuntingSolution> {
    if s.train.is_empty() {
        return Err(Error::EmptyTrain);
    }
    let field = nodal_field(s, Some(x_f_m), opts)?;
    let node = field
        .node_at(x_f_m)
        .expect("shunting point is a mesh node");
    let [u1, u2] = field.voltage(node);
    let [i1, i2] = field.current_from_sending_side(node);
    let state = PortState::new(u1, u2, i1, i2);
    let den = state.diff_current();
    if den.norm() < 1e-300 {
        return Err(Error::SingularSystem {
            detail: "zero differential current at the shunting point".into(),
        });
    }
    Ok(ShuntingSolution {
        x_f_m,
        state,
        z_f: state.diff_voltage() / den,
        condition_report: field.pivot_rcond,
    })
}
