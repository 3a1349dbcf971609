//! Full section description: geometry, rail parameters, compensation
//! capacitors, tuning-area equivalents, source and train formation, plus the
//! key-value configuration file that carries it.
//!
//! The shipped defaults reproduce the qualitative behavior of a 789 m
//! audio-frequency track circuit at a 2300 Hz carrier. Rail and tuning-area
//! constants are calibration placeholders chosen for plausible magnitudes,
//! not measured field data; every analysis in this crate is written against
//! properties of the model rather than against these particular numbers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elements::{ShuntElement, ShuntKind};
use crate::error::{Error, Result};
use crate::mat::C64;
use crate::railline::RailUnitParams;
use crate::train::TrainFormation;

/// Everything needed to evaluate the occupied section.
#[derive(Debug, Clone, PartialEq)]
pub struct JtcScenario {
    /// Main-track length, meters. Positions run from 0 at the receiving-end
    /// boundary to `length_m` at the sending-end boundary.
    pub length_m: f64,
    pub carrier_hz: f64,
    /// Per-km line parameters, leakage already reflecting the ballast value.
    pub rail: RailUnitParams,
    /// Rail-to-rail leakage resistance the leakage admittances correspond
    /// to, ohm*km.
    pub ballast_ohm_km: f64,
    /// Compensation capacitors, positions strictly inside (0, length).
    pub capacitors: Vec<ShuntElement>,
    /// Tuning-area length beyond each end of the main track, meters.
    pub tuning_len_m: f64,
    /// Air-core coil equivalent impedance.
    pub z_sva: C64,
    /// Receiving-end outer tuning-unit equivalent (termination of the
    /// receiving tuning area).
    pub z_rz: C64,
    /// Receiving-end inner tuning-unit equivalent (input impedance of the
    /// receiver channel).
    pub z_rm: C64,
    /// Sending-end outer tuning-unit equivalent (termination of the sending
    /// tuning area toward the adjacent section).
    pub z_rs: C64,
    /// Source (Thevenin) impedance of the sending channel.
    pub z_es: C64,
    /// Source EMF, volts.
    pub u_es: C64,
    pub train: TrainFormation,
    /// Antenna and cable amplitude gain constants of the on-board reader.
    pub tcr_gain_antenna: f64,
    pub tcr_gain_cable: f64,
}

/// Evenly spaced positions strictly inside (0, length).
pub fn uniform_capacitor_positions(length_m: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|j| length_m * j as f64 / (count + 1) as f64)
        .collect()
}

/// Fraction of the total leakage attributed to each rail's ground path in
/// the default ballast mapping.
pub const DEFAULT_GROUND_LEAK_FRACTION: f64 = 0.1;

impl JtcScenario {
    /// Shipped default scenario: 789 m, 2300 Hz, nine 46 uF capacitors
    /// evenly spaced, 6 ohm*km ballast, 0.15 ohm wheel sets, 8-car
    /// formation.
    pub fn default_scenario() -> Self {
        ScenarioConfig::default_config()
            .build()
            .expect("builtin defaults are valid")
            .0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0) {
            return Err(Error::Config(format!(
                "section length must be positive, got {}",
                self.length_m
            )));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_hz
            )));
        }
        if !(self.tuning_len_m >= 0.0) {
            return Err(Error::Config("tuning length must be non-negative".into()));
        }
        self.rail.validate()?;
        let mut prev = 0.0;
        for cap in &self.capacitors {
            let Some(pos) = cap.position else {
                return Err(Error::Config("capacitor without a position".into()));
            };
            if !(pos > 0.0 && pos < self.length_m) {
                return Err(Error::Config(format!(
                    "capacitor position {pos} m outside (0, {})",
                    self.length_m
                )));
            }
            if pos <= prev {
                return Err(Error::Config(
                    "capacitor positions must be sorted and distinct".into(),
                ));
            }
            prev = pos;
        }
        Ok(())
    }

    /// Sorted capacitor positions.
    pub fn capacitor_positions(&self) -> Vec<f64> {
        self.capacitors.iter().filter_map(|c| c.position).collect()
    }

    /// Fixed-point list for unit partitioning: both section boundaries plus
    /// every capacitor position.
    pub fn fixed_points(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(self.capacitors.len() + 2);
        pts.push(0.0);
        pts.extend(self.capacitor_positions());
        pts.push(self.length_m);
        pts
    }

    /// Same scenario with one capacitor replaced.
    pub fn with_capacitor(&self, index: usize, cap: ShuntElement) -> Result<Self> {
        if index >= self.capacitors.len() {
            return Err(Error::Config(format!(
                "capacitor index {index} out of range ({} capacitors)",
                self.capacitors.len()
            )));
        }
        let mut out = self.clone();
        out.capacitors[index] = cap;
        out.validate()?;
        Ok(out)
    }

    pub fn with_train(&self, train: TrainFormation) -> Self {
        let mut out = self.clone();
        out.train = train;
        out
    }

    pub fn with_rail(&self, rail: RailUnitParams) -> Result<Self> {
        rail.validate()?;
        let mut out = self.clone();
        out.rail = rail;
        Ok(out)
    }

    /// Serialize to the configuration file format with every key explicit.
    pub fn to_config(&self) -> ScenarioConfig {
        let pair = |c: C64| [c.re, c.im];
        ScenarioConfig {
            length_m: Some(self.length_m),
            carrier_hz: Some(self.carrier_hz),
            ballast_ohm_km: Some(self.ballast_ohm_km),
            ballast_ground_fraction: None,
            rail_z11_ohm_km: Some(pair(self.rail.z11)),
            rail_z22_ohm_km: Some(pair(self.rail.z22)),
            rail_z12_ohm_km: Some(pair(self.rail.z12)),
            rail_g11_s_km: Some(pair(self.rail.g11)),
            rail_g22_s_km: Some(pair(self.rail.g22)),
            rail_g12_s_km: Some(pair(self.rail.g12)),
            capacitor_uf: None,
            capacitor_count: None,
            capacitor_positions_m: Some(self.capacitor_positions()),
            capacitor_impedance_ohm: Some(self.capacitors.iter().map(|c| pair(c.z)).collect()),
            tuning_len_m: Some(self.tuning_len_m),
            z_sva_ohm: Some(pair(self.z_sva)),
            z_rz_ohm: Some(pair(self.z_rz)),
            z_rm_ohm: Some(pair(self.z_rm)),
            z_rs_ohm: Some(pair(self.z_rs)),
            z_es_ohm: Some(pair(self.z_es)),
            u_es_v: Some(pair(self.u_es)),
            axle_offsets_m: Some(self.train.axle_offsets_m().to_vec()),
            wheel_resistance_ohm: Some(self.train.wheel_resistance().iter().map(|r| pair(*r)).collect()),
            tcr_a1: Some(self.tcr_gain_antenna),
            tcr_a2: Some(self.tcr_gain_cable),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_config()).expect("scenario serializes")
    }
}

/// Key-value configuration document. Units are part of the key names;
/// complex values are `[re, im]` pairs. Unknown keys are rejected; missing
/// keys fall back to the shipped defaults, and every fallback is reported
/// in the notice list so silent misconfiguration cannot happen.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ballast_ohm_km: Option<f64>,
    /// Fraction of total leakage assigned to each rail's ground path when
    /// leakage admittances are derived from the ballast value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ballast_ground_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rail_z11_ohm_km: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rail_z22_ohm_km: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rail_z12_ohm_km: Option<[f64; 2]>,
    /// Explicit leakage overrides; when absent these derive from
    /// `ballast_ohm_km` and `ballast_ground_fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rail_g11_s_km: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rail_g22_s_km: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rail_g12_s_km: Option<[f64; 2]>,
    /// Nominal capacitance applied to every capacitor, microfarad.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacitor_uf: Option<f64>,
    /// Number of evenly spaced capacitors when positions are not given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacitor_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacitor_positions_m: Option<Vec<f64>>,
    /// Per-capacitor impedance override, `[re, im]` each; used instead of
    /// `capacitor_uf` when present (the round-trip representation).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacitor_impedance_ohm: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning_len_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_sva_ohm: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_rz_ohm: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_rm_ohm: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_rs_ohm: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_es_ohm: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_es_v: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axle_offsets_m: Option<Vec<f64>>,
    /// One `[re, im]` pair per wheel set; a single pair broadcasts to the
    /// whole formation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wheel_resistance_ohm: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcr_a1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcr_a2: Option<f64>,
}

// Shipped defaults. Rail series values give a loop impedance around
// 2.5 + j21 ohm/km at the carrier; tuning-area equivalents are ohm-scale.
// All are calibration placeholders, not field data.
const DEFAULT_LENGTH_M: f64 = 789.0;
const DEFAULT_CARRIER_HZ: f64 = 2300.0;
const DEFAULT_BALLAST: f64 = 6.0;
const DEFAULT_Z_SELF: [f64; 2] = [1.15, 10.65];
const DEFAULT_Z_MUTUAL: [f64; 2] = [0.10, 0.70];
const DEFAULT_CAP_UF: f64 = 46.0;
const DEFAULT_CAP_COUNT: usize = 9;
const DEFAULT_TUNING_LEN_M: f64 = 29.0;
const DEFAULT_Z_SVA: [f64; 2] = [0.02, 0.85];
const DEFAULT_Z_RZ: [f64; 2] = [0.55, 1.15];
const DEFAULT_Z_RM: [f64; 2] = [1.10, 1.60];
const DEFAULT_Z_RS: [f64; 2] = [0.55, 1.15];
const DEFAULT_Z_ES: [f64; 2] = [0.30, 0.45];
const DEFAULT_U_ES: [f64; 2] = [10.0, 0.0];
const DEFAULT_WHEEL_OHM: f64 = 0.15;
const DEFAULT_TCR_GAIN: f64 = 1.0;

impl ScenarioConfig {
    /// The empty document: every key defaulted.
    pub fn default_config() -> Self {
        ScenarioConfig::default()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolve the document into a scenario. Returns the scenario plus one
    /// notice per defaulted key.
    pub fn build(&self) -> Result<(JtcScenario, Vec<String>)> {
        let mut notices = Vec::new();
        let mut take_f64 = |v: Option<f64>, key: &str, dflt: f64| -> f64 {
            v.unwrap_or_else(|| {
                notices.push(format!("{key} not set; using default {dflt}"));
                dflt
            })
        };
        let length_m = take_f64(self.length_m, "length_m", DEFAULT_LENGTH_M);
        let carrier_hz = take_f64(self.carrier_hz, "carrier_hz", DEFAULT_CARRIER_HZ);
        let ballast_ohm_km = take_f64(self.ballast_ohm_km, "ballast_ohm_km", DEFAULT_BALLAST);
        let ground_fraction = take_f64(
            self.ballast_ground_fraction,
            "ballast_ground_fraction",
            DEFAULT_GROUND_LEAK_FRACTION,
        );
        let tuning_len_m = take_f64(self.tuning_len_m, "tuning_len_m", DEFAULT_TUNING_LEN_M);
        let tcr_a1 = take_f64(self.tcr_a1, "tcr_a1", DEFAULT_TCR_GAIN);
        let tcr_a2 = take_f64(self.tcr_a2, "tcr_a2", DEFAULT_TCR_GAIN);

        let mut take_pair = |v: Option<[f64; 2]>, key: &str, dflt: [f64; 2]| -> C64 {
            let [re, im] = v.unwrap_or_else(|| {
                notices.push(format!("{key} not set; using default [{}, {}]", dflt[0], dflt[1]));
                dflt
            });
            Complex64::new(re, im)
        };
        let z11 = take_pair(self.rail_z11_ohm_km, "rail_z11_ohm_km", DEFAULT_Z_SELF);
        let z22 = take_pair(
            self.rail_z22_ohm_km,
            "rail_z22_ohm_km",
            self.rail_z11_ohm_km.unwrap_or(DEFAULT_Z_SELF),
        );
        let z12 = take_pair(self.rail_z12_ohm_km, "rail_z12_ohm_km", DEFAULT_Z_MUTUAL);
        let z_sva = take_pair(self.z_sva_ohm, "z_sva_ohm", DEFAULT_Z_SVA);
        let z_rz = take_pair(self.z_rz_ohm, "z_rz_ohm", DEFAULT_Z_RZ);
        let z_rm = take_pair(self.z_rm_ohm, "z_rm_ohm", DEFAULT_Z_RM);
        let z_rs = take_pair(self.z_rs_ohm, "z_rs_ohm", DEFAULT_Z_RS);
        let z_es = take_pair(self.z_es_ohm, "z_es_ohm", DEFAULT_Z_ES);
        let u_es = take_pair(self.u_es_v, "u_es_v", DEFAULT_U_ES);

        if !(ballast_ohm_km > 0.0) {
            return Err(Error::NonPositiveBallast(ballast_ohm_km));
        }
        if !(0.0..1.0).contains(&ground_fraction) {
            return Err(Error::Config(format!(
                "ballast_ground_fraction must be in [0, 1), got {ground_fraction}"
            )));
        }

        // Leakage: explicit overrides win, otherwise derive from ballast.
        let derived_g12 = Complex64::new(1.0 / ballast_ohm_km, 0.0);
        let derived_g_ground = Complex64::new(ground_fraction / ballast_ohm_km, 0.0);
        let g11 = match self.rail_g11_s_km {
            Some([re, im]) => Complex64::new(re, im),
            None => {
                notices.push(format!(
                    "rail_g11_s_km not set; derived {:.6} S/km from ballast",
                    derived_g_ground.re
                ));
                derived_g_ground
            }
        };
        let g22 = match self.rail_g22_s_km {
            Some([re, im]) => Complex64::new(re, im),
            None => match self.rail_g11_s_km {
                Some([re, im]) => Complex64::new(re, im),
                None => derived_g_ground,
            },
        };
        let g12 = match self.rail_g12_s_km {
            Some([re, im]) => Complex64::new(re, im),
            None => {
                notices.push(format!(
                    "rail_g12_s_km not set; derived {:.6} S/km from ballast",
                    derived_g12.re
                ));
                derived_g12
            }
        };
        let rail = RailUnitParams::new(z11, z22, z12, g11, g22, g12, carrier_hz)?;

        // Capacitors.
        let positions = match &self.capacitor_positions_m {
            Some(p) => p.clone(),
            None => {
                let count = self.capacitor_count.unwrap_or_else(|| {
                    notices.push(format!(
                        "capacitor_count not set; using default {DEFAULT_CAP_COUNT}"
                    ));
                    DEFAULT_CAP_COUNT
                });
                notices.push(format!(
                    "capacitor_positions_m not set; spacing {count} capacitors evenly"
                ));
                uniform_capacitor_positions(length_m, count)
            }
        };
        let capacitors: Vec<ShuntElement> = match &self.capacitor_impedance_ohm {
            Some(zs) => {
                if zs.len() != positions.len() {
                    return Err(Error::Config(format!(
                        "capacitor_impedance_ohm has {} entries for {} positions",
                        zs.len(),
                        positions.len()
                    )));
                }
                positions
                    .iter()
                    .zip(zs)
                    .map(|(&pos, &[re, im])| {
                        ShuntElement::new(ShuntKind::Capacitor, Complex64::new(re, im), Some(pos))
                    })
                    .collect::<Result<_>>()?
            }
            None => {
                let uf = self.capacitor_uf.unwrap_or_else(|| {
                    notices.push(format!("capacitor_uf not set; using default {DEFAULT_CAP_UF}"));
                    DEFAULT_CAP_UF
                });
                if !(uf > 0.0) {
                    return Err(Error::NonPositive {
                        name: "capacitance",
                        value: uf,
                    });
                }
                positions
                    .iter()
                    .map(|&pos| ShuntElement::capacitor(uf * 1e-6, carrier_hz, pos))
                    .collect::<Result<_>>()?
            }
        };

        // Train.
        let offsets = match &self.axle_offsets_m {
            Some(o) => o.clone(),
            None => {
                notices.push("axle_offsets_m not set; using the 8-car default geometry".into());
                TrainFormation::default_emu8().axle_offsets_m().to_vec()
            }
        };
        let wheel_r: Vec<C64> = match &self.wheel_resistance_ohm {
            Some(list) if list.len() == 1 => {
                vec![Complex64::new(list[0][0], list[0][1]); offsets.len()]
            }
            Some(list) => {
                if list.len() != offsets.len() {
                    return Err(Error::Config(format!(
                        "wheel_resistance_ohm has {} entries for {} axles",
                        list.len(),
                        offsets.len()
                    )));
                }
                list.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
            }
            None => {
                notices.push(format!(
                    "wheel_resistance_ohm not set; using default {DEFAULT_WHEEL_OHM} ohm"
                ));
                vec![Complex64::new(DEFAULT_WHEEL_OHM, 0.0); offsets.len()]
            }
        };
        let train = TrainFormation::new(offsets, wheel_r)?;

        let scenario = JtcScenario {
            length_m,
            carrier_hz,
            rail,
            ballast_ohm_km,
            capacitors,
            tuning_len_m,
            z_sva,
            z_rz,
            z_rm,
            z_rs,
            z_es,
            u_es,
            train,
            tcr_gain_antenna: tcr_a1,
            tcr_gain_cable: tcr_a2,
        };
        scenario.validate()?;
        Ok((scenario, notices))
    }
}

/// Load a scenario from a TOML file.
pub fn load_scenario(path: &std::path::Path) -> Result<(JtcScenario, Vec<String>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_toml(&text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid() {
        let s = JtcScenario::default_scenario();
        assert_eq!(s.length_m, 789.0);
        assert_eq!(s.carrier_hz, 2300.0);
        assert_eq!(s.capacitors.len(), 9);
        assert_eq!(s.train.len(), 32);
        s.validate().unwrap();
        // Capacitor reactance at the carrier.
        assert!((s.capacitors[0].z.im - (-1.5043)).abs() < 1e-3);
        // Leakage derived from 6 ohm*km ballast.
        assert!((s.rail.g12.re - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_positions_are_strictly_inside() {
        let pos = uniform_capacitor_positions(789.0, 9);
        assert_eq!(pos.len(), 9);
        assert!((pos[0] - 78.9).abs() < 1e-12);
        assert!(pos.iter().all(|&p| p > 0.0 && p < 789.0));
        assert!(pos.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ScenarioConfig::from_toml("not_a_real_key = 1\n").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("not_a_real_key"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn defaults_are_reported() {
        let (_, notices) = ScenarioConfig::from_toml("").unwrap().build().unwrap();
        assert!(notices.iter().any(|n| n.contains("length_m")));
        assert!(notices.iter().any(|n| n.contains("wheel_resistance_ohm")));
    }

    #[test]
    fn toml_round_trip_is_semantically_identical() {
        let s = JtcScenario::default_scenario();
        let text = s.to_toml();
        let (back, notices) = ScenarioConfig::from_toml(&text).unwrap().build().unwrap();
        assert_eq!(s, back);
        // A fully explicit document defaults nothing material; the only
        // allowed notice concerns the ground fraction, which the explicit
        // leakage values supersede.
        assert!(notices.iter().all(|n| n.contains("ballast_ground_fraction")));
    }

    #[test]
    fn broadcast_wheel_resistance() {
        let cfg = ScenarioConfig::from_toml("wheel_resistance_ohm = [[0.2, 0.0]]\n").unwrap();
        let (s, _) = cfg.build().unwrap();
        assert!(s
            .train
            .wheel_resistance()
            .iter()
            .all(|r| (*r - Complex64::new(0.2, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn mismatched_lists_rejected() {
        let cfg = ScenarioConfig::from_toml(
            "axle_offsets_m = [0.0, 2.5]\nwheel_resistance_ohm = [[0.15, 0.0], [0.15, 0.0], [0.15, 0.0]]\n",
        )
        .unwrap();
        assert!(cfg.build().is_err());
        let cfg = ScenarioConfig::from_toml(
            "capacitor_positions_m = [100.0, 200.0]\ncapacitor_impedance_ohm = [[0.0, -1.5]]\n",
        )
        .unwrap();
        assert!(cfg.build().is_err());
    }

    #[test]
    fn out_of_section_capacitor_rejected() {
        let cfg =
            ScenarioConfig::from_toml("length_m = 300.0\ncapacitor_positions_m = [100.0, 350.0]\n")
                .unwrap();
        assert!(cfg.build().is_err());
        let cfg = ScenarioConfig::from_toml("ballast_ohm_km = -1.0\n").unwrap();
        assert!(matches!(cfg.build(), Err(Error::NonPositiveBallast(_))));
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let cfg = ScenarioConfig::from_toml("length_m = 500.0\ncapacitor_count = 5\n").unwrap();
        let (s, _) = cfg.build().unwrap();
        assert_eq!(s.length_m, 500.0);
        assert_eq!(s.capacitors.len(), 5);
        assert_eq!(s.carrier_hz, 2300.0);
    }
}
