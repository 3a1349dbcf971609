//! Equivalent six-terminal network (ESTN) chain matrices.
//!
//! An ESTN is a 4x4 complex matrix relating the port state on its input side
//! (toward the signal source) to the port state on its output side (toward
//! the receiver):
//!
//! ```text
//! [U1_in, U2_in, I1_in, I2_in]^T = N * [U1_out, U2_out, I1_out, I2_out]^T
//! ```
//!
//! Entries carry mixed units by block: the upper-left and lower-right 2x2
//! blocks are dimensionless (V/V resp. A/A), the upper-right block is in ohm
//! and the lower-left block in siemens. The type does not track units at
//! runtime; constructors document which convention each block uses.
//! Cascading networks is plain matrix multiplication, input-side factor on
//! the left.

use crate::error::Result;
use crate::mat::{CMat, Mat2, C64, ONE, ZERO};

/// Port state at one rail cross-section: rail-to-ground voltages and rail
/// currents, both rails measured in the transmission direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortState {
    pub u1: C64,
    pub u2: C64,
    pub i1: C64,
    pub i2: C64,
}

impl PortState {
    pub fn new(u1: C64, u2: C64, i1: C64, i2: C64) -> Self {
        PortState { u1, u2, i1, i2 }
    }

    pub fn as_array(&self) -> [C64; 4] {
        [self.u1, self.u2, self.i1, self.i2]
    }

    pub fn from_array(v: [C64; 4]) -> Self {
        PortState {
            u1: v[0],
            u2: v[1],
            i1: v[2],
            i2: v[3],
        }
    }

    /// Rail-to-rail voltage.
    pub fn diff_voltage(&self) -> C64 {
        self.u1 - self.u2
    }

    /// Differential loop current `(i1 - i2) / 2`.
    pub fn diff_current(&self) -> C64 {
        (self.i1 - self.i2) * 0.5
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// 4x4 complex chain matrix of a six-terminal network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estn {
    m: [[C64; 4]; 4],
}

impl Estn {
    pub fn identity() -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = ONE;
        }
        Estn { m }
    }

    pub fn from_entries(m: [[C64; 4]; 4]) -> Self {
        Estn { m }
    }

    /// Assemble from 2x2 blocks `[[uu, ui], [iu, ii]]` where `uu` is
    /// voltage-to-voltage (dimensionless), `ui` voltage-per-current (ohm),
    /// `iu` current-per-voltage (siemens) and `ii` dimensionless.
    pub fn from_blocks(uu: &Mat2, ui: &Mat2, iu: &Mat2, ii: &Mat2) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = uu.0[i][j];
                m[i][j + 2] = ui.0[i][j];
                m[i + 2][j] = iu.0[i][j];
                m[i + 2][j + 2] = ii.0[i][j];
            }
        }
        Estn { m }
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[row][col]
    }

    pub fn entries(&self) -> &[[C64; 4]; 4] {
        &self.m
    }

    pub fn is_finite(&self) -> bool {
        self.m
            .iter()
            .flatten()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Matrix product `self * rhs`: `self` is the factor on the input
    /// (source) side of the cascade.
    pub fn compose(&self, rhs: &Estn) -> Estn {
        let mut out = [[ZERO; 4]; 4];
        for i in 0..4 {
            for k in 0..4 {
                let aik = self.m[i][k];
                if aik == ZERO {
                    continue;
                }
                for j in 0..4 {
                    out[i][j] += aik * rhs.m[k][j];
                }
            }
        }
        Estn { m: out }
    }

    /// Map an output-side port state to the input-side state.
    pub fn apply(&self, s: &PortState) -> PortState {
        let v = s.as_array();
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (j, vj) in v.iter().enumerate() {
                acc += self.m[i][j] * vj;
            }
            *o = acc;
        }
        PortState::from_array(out)
    }

    /// Inverse chain matrix via partial-pivoted LU, with the reciprocal
    /// condition estimate of the factorization. Chained inverses silently
    /// losing digits would corrupt the shunting impedance, hence the
    /// explicit estimate.
    pub fn invert(&self) -> Result<(Estn, f64)> {
        let (inv, rcond) = self.to_cmat().lu_inverse()?;
        Ok((Estn::from_cmat(&inv), rcond))
    }

    pub fn determinant(&self) -> C64 {
        // Cofactor expansion over the first row; fine at this size.
        let m = &self.m;
        let minor = |r: [usize; 3], c: [usize; 3]| -> C64 {
            m[r[0]][c[0]] * (m[r[1]][c[1]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[1]])
                - m[r[0]][c[1]] * (m[r[1]][c[0]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[0]])
                + m[r[0]][c[2]] * (m[r[1]][c[0]] * m[r[2]][c[1]] - m[r[1]][c[1]] * m[r[2]][c[0]])
        };
        m[0][0] * minor([1, 2, 3], [1, 2, 3]) - m[0][1] * minor([1, 2, 3], [0, 2, 3])
            + m[0][2] * minor([1, 2, 3], [0, 1, 3])
            - m[0][3] * minor([1, 2, 3], [0, 1, 2])
    }

    pub fn to_cmat(&self) -> CMat {
        let mut c = CMat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                c[(i, j)] = self.m[i][j];
            }
        }
        c
    }

    pub fn from_cmat(c: &CMat) -> Estn {
        assert_eq!((c.nrows(), c.ncols()), (4, 4));
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = c[(i, j)];
            }
        }
        Estn { m }
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Project onto the rail-exchange-symmetric structure: every 2x2 block
    /// becomes persymmetric (`[[p, q], [q, p]]`).
    ///
    /// A line with identical rails cannot couple the common and
    /// differential rail modes, so every physical chain matrix over such a
    /// line has this structure exactly. Rounding in long cascades injects
    /// spurious mode mixing that the occupied chain then amplifies by its
    /// full attenuation ratio; re-imposing the known structure after each
    /// product keeps the modes decoupled to the last bit.
    pub fn symmetrize_rail_pairs(&self) -> Estn {
        let mut out = [[ZERO; 4]; 4];
        let swap = [1usize, 0, 3, 2];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (self.m[i][j] + self.m[swap[i]][swap[j]]) * 0.5;
            }
        }
        Estn { m: out }
    }
}

/// Entrywise relative deviation between two chain matrices, normalized by
/// the larger of the two entry magnitudes and ignoring entries negligible
/// against the matrix scale.
pub fn relative_deviation(a: &Estn, b: &Estn, negligible: f64) -> f64 {
    let scale = a.max_abs_entry().max(b.max_abs_entry());
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let ea = a.entry(i, j);
            let eb = b.entry(i, j);
            let mag = ea.norm().max(eb.norm());
            if mag <= negligible * scale {
                continue;
            }
            worst = worst.max((ea - eb).norm() / mag);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::shunt_estn;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> C64 {
        Complex64::new(re, im)
    }

    fn random_estn(seed: &mut u64) -> Estn {
        // xorshift; plenty for well-scaled random test matrices
        let mut next = || {
            *seed ^= *seed << 13;
            *seed ^= *seed >> 7;
            *seed ^= *seed << 17;
            (*seed as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let mut m = [[ZERO; 4]; 4];
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v = c(next(), next());
            }
        }
        Estn::from_entries(m)
    }

    #[test]
    fn identity_is_exact() {
        let id = Estn::identity();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { ONE } else { ZERO };
                assert_eq!(id.entry(i, j), expect);
            }
        }
    }

    #[test]
    fn compose_with_identity_is_noop() {
        let mut seed = 0x9E3779B97F4A7C15u64;
        let n = random_estn(&mut seed);
        let left = Estn::identity().compose(&n);
        let right = n.compose(&Estn::identity());
        assert_eq!(left, n);
        assert_eq!(right, n);
    }

    #[test]
    fn compose_is_associative() {
        let mut seed = 42u64;
        for _ in 0..50 {
            let a = random_estn(&mut seed);
            let b = random_estn(&mut seed);
            let d = random_estn(&mut seed);
            let lhs = a.compose(&b).compose(&d);
            let rhs = a.compose(&b.compose(&d));
            let dev = relative_deviation(&lhs, &rhs, 1e-10);
            assert!(dev < 1e-12, "associativity violated: {dev}");
        }
    }

    #[test]
    fn shunt_compose_is_parallel_impedance() {
        let z1 = c(1.3, -0.4);
        let z2 = c(0.2, 2.0);
        let lhs = shunt_estn(z1).unwrap().compose(&shunt_estn(z2).unwrap());
        let zp = z1 * z2 / (z1 + z2);
        let rhs = shunt_estn(zp).unwrap();
        assert!(relative_deviation(&lhs, &rhs, 0.0) < 1e-12);
    }

    #[test]
    fn invert_identity() {
        let (inv, rcond) = Estn::identity().invert().unwrap();
        assert_eq!(inv, Estn::identity());
        assert!((rcond - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invert_zeros_is_singular() {
        let z = Estn::from_entries([[ZERO; 4]; 4]);
        assert!(z.invert().is_err());
    }

    #[test]
    fn invert_round_trip() {
        let mut seed = 7u64;
        let mut tried = 0;
        while tried < 30 {
            let n = random_estn(&mut seed);
            let Ok((inv, rcond)) = n.invert() else {
                continue;
            };
            if rcond < 1e-6 {
                continue;
            }
            tried += 1;
            let prod = n.compose(&inv);
            assert!(relative_deviation(&prod, &Estn::identity(), 1e-9) < 1e-9);
            // Round trip through apply as well.
            let s = PortState::new(c(1.0, 0.5), c(-0.3, 0.2), c(0.8, -1.0), c(0.1, 0.9));
            let back = inv.apply(&n.apply(&s));
            for (got, want) in back.as_array().iter().zip(s.as_array()) {
                assert!((got - want).norm() < 1e-9 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn apply_identity_is_noop() {
        let s = PortState::new(c(2.0, 0.0), c(1.0, -1.0), c(0.5, 0.5), c(-0.2, 0.0));
        assert_eq!(Estn::identity().apply(&s), s);
    }

    #[test]
    fn equal_rail_voltages_pass_through_shunt() {
        let n = shunt_estn(c(0.7, -1.2)).unwrap();
        let u = c(3.0, 1.0);
        let s = PortState::new(u, u, c(0.4, 0.0), c(-0.1, 0.2));
        let out = n.apply(&s);
        assert_eq!(out, s);
    }

    #[test]
    fn determinant_of_identity() {
        assert!((Estn::identity().determinant() - ONE).norm() < 1e-15);
    }
}
