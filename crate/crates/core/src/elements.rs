//! Lumped shunt equipment connected across the rails: compensation
//! capacitors, the air-core coil, tuning-unit equivalents and train wheel
//! sets. Each is a single complex impedance between the two rails and maps
//! to a chain matrix with identity diagonal blocks and a rank-one
//! lower-left admittance block.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estn::Estn;
use crate::mat::{C64, ONE, ZERO};

/// Open-circuit sentinel magnitude. Six-plus orders above any network
/// impedance in scope, so the element vanishes to working precision while
/// the chain matrix stays uniform.
pub const OPEN_CIRCUIT_OHM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShuntKind {
    Capacitor,
    Sva,
    TuningEquivalent,
    WheelSet,
}

impl ShuntKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShuntKind::Capacitor => "capacitor",
            ShuntKind::Sva => "air-core coil",
            ShuntKind::TuningEquivalent => "tuning equivalent",
            ShuntKind::WheelSet => "wheel set",
        }
    }
}

/// A rail-to-rail element at a fixed position along the section. Train wheel
/// sets are positioned by the formation rather than by this struct, so their
/// `position` is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuntElement {
    pub kind: ShuntKind,
    /// Equivalent impedance at the carrier frequency, ohm.
    pub z: C64,
    /// Meters along the section, `None` for wheel sets.
    pub position: Option<f64>,
}

impl ShuntElement {
    pub fn new(kind: ShuntKind, z: C64, position: Option<f64>) -> Result<Self> {
        if !(z.re.is_finite() && z.im.is_finite()) || z == ZERO {
            return Err(Error::ZeroImpedance);
        }
        if kind == ShuntKind::Capacitor && !(z.re == 0.0 && z.im < 0.0) {
            return Err(Error::Config(format!(
                "capacitor impedance must be purely capacitive, got {z}"
            )));
        }
        Ok(ShuntElement { kind, z, position })
    }

    /// Compensation capacitor from its capacitance and the carrier frequency.
    pub fn capacitor(c_farad: f64, f_hz: f64, position_m: f64) -> Result<Self> {
        let z = capacitor_impedance(c_farad, f_hz)?;
        ShuntElement::new(ShuntKind::Capacitor, z, Some(position_m))
    }

    pub fn estn(&self) -> Result<Estn> {
        shunt_estn(self.z)
    }
}

/// Capacitor fault modes studied in the influence analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacitorFault {
    /// Lead breakage: the capacitor is disconnected (open circuit).
    LineBreakage,
    /// Capacitance degraded to half its nominal value.
    DegradedHalf,
}

/// Chain matrix of a rail-to-rail shunt of impedance `z`.
///
/// Diagonal blocks are identity; the lower-left block is
/// `(1/z) * [[1, -1], [-1, 1]]` siemens: the input-side current of rail 1
/// exceeds its output-side current by the shunt current `(U1 - U2)/z`, and
/// rail 2 by the opposite amount. A dead short (`z = 0`) has no chain-matrix
/// representation and is rejected; wheel resistances in scope are strictly
/// positive.
pub fn shunt_estn(z: C64) -> Result<Estn> {
    if z == ZERO {
        return Err(Error::ZeroImpedance);
    }
    let y = ONE / z;
    let mut m = [[ZERO; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m[2][0] = y;
    m[2][1] = -y;
    m[3][0] = -y;
    m[3][1] = y;
    Ok(Estn::from_entries(m))
}

/// Reactance of an ideal capacitor: `1 / (j 2 pi f c)`.
pub fn capacitor_impedance(c_farad: f64, f_hz: f64) -> Result<C64> {
    if c_farad <= 0.0 {
        return Err(Error::NonPositive {
            name: "capacitance",
            value: c_farad,
        });
    }
    if f_hz <= 0.0 {
        return Err(Error::NonPositive {
            name: "frequency",
            value: f_hz,
        });
    }
    Ok(Complex64::new(0.0, -1.0 / (2.0 * std::f64::consts::PI * f_hz * c_farad)))
}

/// Apply a fault to a compensation capacitor. Breakage maps to the
/// open-circuit sentinel and is idempotent; degradation by half doubles the
/// reactance (half the capacitance at the same frequency).
pub fn capacitor_fault(elem: &ShuntElement, fault: CapacitorFault) -> Result<ShuntElement> {
    if elem.kind != ShuntKind::Capacitor {
        return Err(Error::WrongKind {
            expected: "capacitor",
            got: elem.kind.name(),
        });
    }
    let z = match fault {
        CapacitorFault::LineBreakage => Complex64::new(0.0, -OPEN_CIRCUIT_OHM),
        CapacitorFault::DegradedHalf => elem.z * 2.0,
    };
    Ok(ShuntElement {
        kind: ShuntKind::Capacitor,
        z,
        position: elem.position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estn::PortState;

    fn c(re: f64, im: f64) -> C64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unit_shunt_block_is_exact() {
        let n = shunt_estn(ONE).unwrap();
        assert_eq!(n.entry(2, 0), ONE);
        assert_eq!(n.entry(2, 1), -ONE);
        assert_eq!(n.entry(3, 0), -ONE);
        assert_eq!(n.entry(3, 1), ONE);
        for i in 0..4 {
            assert_eq!(n.entry(i, i), ONE);
        }
        assert_eq!(n.entry(0, 2), ZERO);
        assert_eq!(n.entry(1, 3), ZERO);
    }

    #[test]
    fn open_circuit_is_identity_to_working_precision() {
        let n = shunt_estn(c(0.0, -OPEN_CIRCUIT_OHM)).unwrap();
        let id = Estn::identity();
        for i in 0..4 {
            for j in 0..4 {
                assert!((n.entry(i, j) - id.entry(i, j)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_impedance_rejected() {
        assert!(matches!(shunt_estn(ZERO), Err(Error::ZeroImpedance)));
    }

    #[test]
    fn shunt_is_unimodular() {
        for z in [c(1.0, 0.0), c(0.15, 0.0), c(0.0, -1.5), c(3.0, 4.0)] {
            let det = shunt_estn(z).unwrap().determinant();
            assert!((det - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn shunt_kirchhoff_balance() {
        // The shunt current leaves rail 1 and returns on rail 2:
        // i1_in - i1_out = -(i2_in - i2_out) = (u1 - u2)/z.
        let mut seed = 0xABCDEFu64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            let z = c(next() + 2.0, next());
            let n = shunt_estn(z).unwrap();
            let out = PortState::new(
                c(next(), next()),
                c(next(), next()),
                c(next(), next()),
                c(next(), next()),
            );
            let inp = n.apply(&out);
            let d1 = inp.i1 - out.i1;
            let d2 = inp.i2 - out.i2;
            let shunt = (inp.u1 - inp.u2) / z;
            let scale = shunt.norm().max(1e-30);
            assert!((d1 + d2).norm() < 1e-12 * scale);
            assert!((d1 - shunt).norm() < 1e-12 * scale);
            assert!(((d1 - d2) * 0.5 - shunt).norm() < 1e-12 * scale);
            // Voltages pass through unchanged.
            assert_eq!(inp.u1, out.u1);
            assert_eq!(inp.u2, out.u2);
        }
    }

    #[test]
    fn capacitor_impedance_reference_value() {
        let z = capacitor_impedance(46e-6, 2300.0).unwrap();
        assert!(z.re == 0.0);
        assert!((z.im - (-1.5043)).abs() < 1e-4);
    }

    #[test]
    fn halving_capacitance_doubles_impedance() {
        let z46 = capacitor_impedance(46e-6, 2300.0).unwrap();
        let z23 = capacitor_impedance(23e-6, 2300.0).unwrap();
        assert!((z23 - z46 * 2.0).norm() < 1e-12 * z46.norm());
    }

    #[test]
    fn nonpositive_capacitance_rejected() {
        assert!(capacitor_impedance(0.0, 2300.0).is_err());
        assert!(capacitor_impedance(46e-6, 0.0).is_err());
        assert!(capacitor_impedance(-1e-6, 2300.0).is_err());
    }

    #[test]
    fn fault_degraded_half() {
        let cap = ShuntElement::capacitor(46e-6, 2300.0, 100.0).unwrap();
        let half = capacitor_fault(&cap, CapacitorFault::DegradedHalf).unwrap();
        assert!((half.z - c(0.0, -3.0086)).norm() < 2e-4);
    }

    #[test]
    fn fault_breakage_idempotent_and_open() {
        let cap = ShuntElement::capacitor(46e-6, 2300.0, 100.0).unwrap();
        let broken = capacitor_fault(&cap, CapacitorFault::LineBreakage).unwrap();
        assert_eq!(broken.z, c(0.0, -OPEN_CIRCUIT_OHM));
        let twice = capacitor_fault(&broken, CapacitorFault::LineBreakage).unwrap();
        assert_eq!(twice.z, broken.z);
        // Broken capacitor's chain matrix is the identity to 1e-12.
        let n = broken.estn().unwrap();
        let id = Estn::identity();
        for i in 0..4 {
            for j in 0..4 {
                assert!((n.entry(i, j) - id.entry(i, j)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn fault_on_wheel_set_rejected() {
        let wheel = ShuntElement::new(ShuntKind::WheelSet, c(0.15, 0.0), None).unwrap();
        assert!(matches!(
            capacitor_fault(&wheel, CapacitorFault::LineBreakage),
            Err(Error::WrongKind { .. })
        ));
    }

    #[test]
    fn capacitor_constructor_enforces_sign() {
        assert!(ShuntElement::new(ShuntKind::Capacitor, c(0.1, -1.0), Some(1.0)).is_err());
        assert!(ShuntElement::new(ShuntKind::Capacitor, c(0.0, 1.0), Some(1.0)).is_err());
        assert!(ShuntElement::new(ShuntKind::Capacitor, c(0.0, -1.0), Some(1.0)).is_ok());
    }
}
