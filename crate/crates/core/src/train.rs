//! Train formation geometry and rail-wheel units.
//!
//! Positions along the main track are meters with the receiving-end boundary
//! at 0 and the sending-end boundary at the section length; the train head
//! (first wheel set) leads toward the sending end and the rest of the
//! formation trails behind it toward the receiving end.

use crate::elements::shunt_estn;
use crate::error::{Error, Result};
use crate::estn::Estn;
use crate::mat::C64;
use crate::railline::{rail_estn, LineEigen};

/// Geometry and electrical state of the whole train.
///
/// `axle_offsets_m[i]` is the distance of wheel set `i` behind the first
/// wheel set (ascending, first entry 0); `wheel_resistance[i]` the shunt
/// resistance of that wheel set. An empty formation is a valid "no train"
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainFormation {
    axle_offsets_m: Vec<f64>,
    wheel_resistance: Vec<C64>,
}

impl TrainFormation {
    pub fn new(axle_offsets_m: Vec<f64>, wheel_resistance: Vec<C64>) -> Result<Self> {
        if axle_offsets_m.len() != wheel_resistance.len() {
            return Err(Error::Config(format!(
                "axle offset count {} does not match wheel resistance count {}",
                axle_offsets_m.len(),
                wheel_resistance.len()
            )));
        }
        if let Some(&first) = axle_offsets_m.first() {
            if first != 0.0 {
                return Err(Error::Config(
                    "first axle offset must be 0 (the head wheel set)".into(),
                ));
            }
        }
        for w in axle_offsets_m.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config(format!(
                    "axle offsets must be strictly increasing, got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        for r in &wheel_resistance {
            if !(r.re > 0.0) {
                return Err(Error::Config(format!(
                    "wheel resistance must have positive real part, got {r}"
                )));
            }
        }
        Ok(TrainFormation {
            axle_offsets_m,
            wheel_resistance,
        })
    }

    /// No train on the section.
    pub fn empty() -> Self {
        TrainFormation {
            axle_offsets_m: Vec::new(),
            wheel_resistance: Vec::new(),
        }
    }

    /// Placeholder 8-car EMU geometry: 25 m car pitch, bogie centers
    /// 17.5 m apart within a car, 2.5 m axle spacing within a bogie, four
    /// axles per car, 0.15 ohm per wheel set. Illustrative defaults, not
    /// manufacturer data.
    pub fn default_emu8() -> Self {
        Self::emu(8, 0.15)
    }

    /// EMU formation with the placeholder car geometry and a uniform wheel
    /// resistance.
    pub fn emu(cars: usize, wheel_ohm: f64) -> Self {
        let mut offsets = Vec::with_capacity(cars * 4);
        for car in 0..cars {
            let base = car as f64 * 25.0;
            for local in [0.0, 2.5, 17.5, 20.0] {
                offsets.push(base + local);
            }
        }
        let n = offsets.len();
        TrainFormation::new(offsets, vec![C64::new(wheel_ohm, 0.0); n])
            .expect("builtin geometry is valid")
    }

    pub fn len(&self) -> usize {
        self.axle_offsets_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axle_offsets_m.is_empty()
    }

    pub fn axle_offsets_m(&self) -> &[f64] {
        &self.axle_offsets_m
    }

    pub fn wheel_resistance(&self) -> &[C64] {
        &self.wheel_resistance
    }

    /// Same formation with every wheel set at resistance `r`.
    pub fn with_uniform_resistance(&self, r: C64) -> Result<Self> {
        TrainFormation::new(self.axle_offsets_m.clone(), vec![r; self.len()])
    }

    /// Same formation with wheel set `index` replaced by resistance `r`.
    pub fn with_wheel_resistance(&self, index: usize, r: C64) -> Result<Self> {
        if index >= self.len() {
            return Err(Error::Config(format!(
                "wheel index {index} out of range (train has {} wheel sets)",
                self.len()
            )));
        }
        let mut res = self.wheel_resistance.clone();
        res[index] = r;
        TrainFormation::new(self.axle_offsets_m.clone(), res)
    }

    /// Truncate to the first wheel set only.
    pub fn first_wheel_only(&self) -> Result<Self> {
        if self.is_empty() {
            return Err(Error::EmptyTrain);
        }
        TrainFormation::new(vec![0.0], vec![self.wheel_resistance[0]])
    }
}

/// Position of one wheel set for a given head position; wheels pushed
/// outside the section stay listed but flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelPosition {
    pub wheel_index: usize,
    pub position_m: f64,
    pub in_section: bool,
}

/// Place every wheel set for the head (first wheel set) at `head_m`:
/// wheel `i` sits at `head_m - axle_offsets[i]`.
pub fn wheel_positions(f: &TrainFormation, head_m: f64, section_len_m: f64) -> Vec<WheelPosition> {
    f.axle_offsets_m
        .iter()
        .enumerate()
        .map(|(i, off)| {
            let position_m = head_m - off;
            WheelPosition {
                wheel_index: i,
                position_m,
                in_section: (0.0..=section_len_m).contains(&position_m),
            }
        })
        .collect()
}

/// In-section wheels as (position, resistance), ordered head first
/// (descending position).
pub fn in_section_wheels(f: &TrainFormation, head_m: f64, section_len_m: f64) -> Vec<(f64, C64)> {
    wheel_positions(f, head_m, section_len_m)
        .into_iter()
        .filter(|w| w.in_section)
        .map(|w| (w.position_m, f.wheel_resistance[w.wheel_index]))
        .collect()
}

/// The stretch of rail between two adjacent fixed parallel elements,
/// together with the wheel sets currently inside it. `x_start` is the
/// receiving-side boundary, `x_end` the sending-side one; `wheels` are
/// ordered head first (descending position).
#[derive(Debug, Clone, PartialEq)]
pub struct RailWheelUnit {
    pub x_start_m: f64,
    pub x_end_m: f64,
    pub wheels: Vec<(f64, C64)>,
}

impl RailWheelUnit {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_end_m >= self.x_start_m) {
            return Err(Error::Config(format!(
                "unit boundaries out of order: [{}, {}]",
                self.x_start_m, self.x_end_m
            )));
        }
        let mut prev = f64::INFINITY;
        for &(pos, _) in &self.wheels {
            if pos < self.x_start_m || pos > self.x_end_m {
                return Err(Error::Config(format!(
                    "wheel at {pos} m outside unit [{}, {}]",
                    self.x_start_m, self.x_end_m
                )));
            }
            if pos > prev {
                return Err(Error::Config(
                    "unit wheels must be ordered head first".into(),
                ));
            }
            prev = pos;
        }
        Ok(())
    }
}

/// Split the section at the fixed element positions and assign every wheel
/// to exactly one unit. `fixed_points_m` must be sorted ascending and
/// include the section boundaries. A wheel exactly on a fixed point goes to
/// the sending-side unit, so its shunt composes before the fixed element in
/// the cascade.
pub fn partition_units(wheels: &[(f64, C64)], fixed_points_m: &[f64]) -> Vec<RailWheelUnit> {
    let mut units = Vec::new();
    if fixed_points_m.len() < 2 {
        return units;
    }
    let last = fixed_points_m.len() - 2;
    for (k, pair) in fixed_points_m.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let mut inside: Vec<(f64, C64)> = wheels
            .iter()
            .copied()
            .filter(|&(pos, _)| {
                if k == last {
                    pos >= a && pos <= b
                } else {
                    pos >= a && pos < b
                }
            })
            .collect();
        inside.sort_by(|x, y| y.0.total_cmp(&x.0));
        units.push(RailWheelUnit {
            x_start_m: a,
            x_end_m: b,
            wheels: inside,
        });
    }
    units
}

/// Chain matrix of one rail-wheel unit: alternate rail spans over the
/// inter-wheel gaps with wheel shunts, walking from the sending boundary to
/// the receiving boundary. With no wheels this is just the rail span of the
/// whole unit.
pub fn rail_wheel_estn(unit: &RailWheelUnit, e: &LineEigen) -> Result<Estn> {
    unit.validate()?;
    let mut n = Estn::identity();
    let mut cursor = unit.x_end_m;
    for &(pos, r) in &unit.wheels {
        let gap_m = cursor - pos;
        if gap_m > 0.0 {
            n = compose_on_line(&n, &rail_estn(e, gap_m * 1e-3)?, e);
        }
        n = compose_on_line(&n, &shunt_estn(r)?, e);
        cursor = pos;
    }
    let tail_m = cursor - unit.x_start_m;
    if tail_m > 0.0 {
        n = compose_on_line(&n, &rail_estn(e, tail_m * 1e-3)?, e);
    }
    Ok(n)
}

/// Cascade product that re-imposes the rail-exchange symmetry of a
/// symmetric line, so rounding cannot leak between the rail modes.
pub fn compose_on_line(a: &Estn, b: &Estn, e: &LineEigen) -> Estn {
    let n = a.compose(b);
    if e.symmetric {
        n.symmetrize_rail_pairs()
    } else {
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estn::relative_deviation;
    use crate::mat::ZERO;
    use crate::railline::{line_eigen, RailUnitParams};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> C64 {
        Complex64::new(re, im)
    }

    fn eigen() -> LineEigen {
        let p = RailUnitParams::symmetric(
            c(1.15, 10.65),
            c(0.10, 0.70),
            c(1.0 / 60.0, 0.0),
            c(1.0 / 6.0, 0.0),
            2300.0,
        )
        .unwrap();
        line_eigen(&p).unwrap()
    }

    #[test]
    fn wheel_positions_arithmetic() {
        let f = TrainFormation::new(vec![0.0, 2.5], vec![c(0.15, 0.0); 2]).unwrap();
        let pos = wheel_positions(&f, 789.0, 789.0);
        assert_eq!(pos[0].position_m, 789.0);
        assert_eq!(pos[1].position_m, 786.5);
        assert!(pos.iter().all(|w| w.in_section));
    }

    #[test]
    fn head_at_receiving_end_keeps_only_first_wheel() {
        let f = TrainFormation::default_emu8();
        let pos = wheel_positions(&f, 0.0, 789.0);
        let inside: Vec<_> = pos.iter().filter(|w| w.in_section).collect();
        assert_eq!(inside.len(), 1);
        assert_eq!(inside[0].wheel_index, 0);
    }

    #[test]
    fn default_formation_fits_at_full_occupancy() {
        let f = TrainFormation::default_emu8();
        assert_eq!(f.len(), 32);
        let inside = in_section_wheels(&f, 789.0, 789.0);
        assert_eq!(inside.len(), 32);
        // Ordered head first.
        assert!(inside.windows(2).all(|w| w[0].0 > w[1].0));
    }

    #[test]
    fn formation_validation() {
        assert!(TrainFormation::new(vec![1.0, 2.0], vec![c(0.15, 0.0); 2]).is_err());
        assert!(TrainFormation::new(vec![0.0, 0.0], vec![c(0.15, 0.0); 2]).is_err());
        assert!(TrainFormation::new(vec![0.0, 2.0], vec![c(0.15, 0.0); 1]).is_err());
        assert!(TrainFormation::new(vec![0.0], vec![c(0.0, 0.5)]).is_err());
        assert!(TrainFormation::new(vec![0.0], vec![c(0.15, 0.0)]).is_ok());
    }

    #[test]
    fn partition_with_no_wheels_yields_empty_units() {
        let units = partition_units(&[], &[0.0, 100.0, 200.0]);
        assert_eq!(units.len(), 2);
        assert!(units.iter().all(|u| u.wheels.is_empty()));
    }

    #[test]
    fn single_wheel_lands_in_one_unit() {
        let wheels = vec![(150.0, c(0.15, 0.0))];
        let units = partition_units(&wheels, &[0.0, 100.0, 200.0, 300.0]);
        let counts: Vec<usize> = units.iter().map(|u| u.wheels.len()).collect();
        assert_eq!(counts, vec![0, 1, 0]);
    }

    #[test]
    fn wheel_on_fixed_point_goes_to_sending_side_unit() {
        let wheels = vec![(100.0, c(0.15, 0.0))];
        let units = partition_units(&wheels, &[0.0, 100.0, 200.0]);
        assert!(units[0].wheels.is_empty());
        assert_eq!(units[1].wheels.len(), 1);
        assert_eq!(units[1].x_start_m, 100.0);
    }

    #[test]
    fn wheel_conservation_at_random_heads() {
        let f = TrainFormation::default_emu8();
        let fixed: Vec<f64> = std::iter::once(0.0)
            .chain((1..=9).map(|j| 789.0 * j as f64 / 10.0))
            .chain(std::iter::once(789.0))
            .collect();
        let mut seed = 0x1234_5678u64;
        for _ in 0..1000 {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            let head = (seed as f64 / u64::MAX as f64) * 789.0;
            let wheels = in_section_wheels(&f, head, 789.0);
            let units = partition_units(&wheels, &fixed);
            let total: usize = units.iter().map(|u| u.wheels.len()).sum();
            assert_eq!(total, wheels.len(), "head = {head}");
        }
    }

    #[test]
    fn empty_unit_is_plain_rail_span() {
        let e = eigen();
        let unit = RailWheelUnit {
            x_start_m: 0.0,
            x_end_m: 78.9,
            wheels: vec![],
        };
        let n = rail_wheel_estn(&unit, &e).unwrap();
        let plain = rail_estn(&e, 78.9 * 1e-3).unwrap();
        assert!(relative_deviation(&n, &plain, 1e-12) < 1e-12);
    }

    #[test]
    fn open_wheel_vanishes_from_unit() {
        let e = eigen();
        let open = RailWheelUnit {
            x_start_m: 0.0,
            x_end_m: 80.0,
            wheels: vec![(40.0, c(1e12, 0.0))],
        };
        let n = rail_wheel_estn(&open, &e).unwrap();
        let plain = rail_estn(&e, 80.0e-3).unwrap();
        assert!(relative_deviation(&n, &plain, 1e-12) < 1e-10);
    }

    #[test]
    fn split_at_wheel_free_point_composes_to_whole() {
        let e = eigen();
        let whole = RailWheelUnit {
            x_start_m: 0.0,
            x_end_m: 78.9,
            wheels: vec![(60.0, c(0.15, 0.0)), (30.0, c(0.15, 0.0))],
        };
        let sending_part = RailWheelUnit {
            x_start_m: 45.0,
            x_end_m: 78.9,
            wheels: vec![(60.0, c(0.15, 0.0))],
        };
        let receiving_part = RailWheelUnit {
            x_start_m: 0.0,
            x_end_m: 45.0,
            wheels: vec![(30.0, c(0.15, 0.0))],
        };
        let split = rail_wheel_estn(&sending_part, &e)
            .unwrap()
            .compose(&rail_wheel_estn(&receiving_part, &e).unwrap());
        let unsplit = rail_wheel_estn(&whole, &e).unwrap();
        assert!(relative_deviation(&split, &unsplit, 1e-12) < 1e-9);
    }

    #[test]
    fn unit_rejects_misordered_wheels() {
        let unit = RailWheelUnit {
            x_start_m: 0.0,
            x_end_m: 100.0,
            wheels: vec![(30.0, c(0.15, 0.0)), (60.0, c(0.15, 0.0))],
        };
        assert!(unit.validate().is_err());
        let outside = RailWheelUnit {
            x_start_m: 0.0,
            x_end_m: 100.0,
            wheels: vec![(130.0, c(0.15, 0.0))],
        };
        assert!(outside.validate().is_err());
        let _ = ZERO;
    }
}
