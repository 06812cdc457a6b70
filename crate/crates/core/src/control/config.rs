use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::limiter::{LimiterConfig, LimiterScheme};
use super::pitch::PitchGains;
use super::virtual_machine::{VicParams, VsmParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControllerMode {
    #[serde(rename = "gfl")]
    Gfl,
    #[serde(rename = "g-mgfm")]
    GMgfm,
    #[serde(rename = "g-sgfm")]
    GSgfm,
    #[serde(rename = "m-mgfm")]
    MMgfm,
    #[serde(rename = "m-sgfm")]
    MSgfm,
}

impl ControllerMode {
    pub const ALL: [ControllerMode; 5] = [
        ControllerMode::Gfl,
        ControllerMode::GMgfm,
        ControllerMode::GSgfm,
        ControllerMode::MMgfm,
        ControllerMode::MSgfm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerMode::Gfl => "gfl",
            ControllerMode::GMgfm => "g-mgfm",
            ControllerMode::GSgfm => "g-sgfm",
            ControllerMode::MMgfm => "m-mgfm",
            ControllerMode::MSgfm => "m-sgfm",
        }
    }

    /// The grid-side converter regulates the DC link.
    pub fn gsc_regulates_dc(self) -> bool {
        matches!(
            self,
            ControllerMode::Gfl | ControllerMode::GMgfm | ControllerMode::GSgfm
        )
    }

    pub fn is_grid_forming(self) -> bool {
        self != ControllerMode::Gfl
    }

    /// Single-loop (direct modulation) grid-forming modes.
    pub fn is_single_loop(self) -> bool {
        matches!(self, ControllerMode::GSgfm | ControllerMode::MSgfm)
    }

    pub fn default_limiter(self) -> LimiterScheme {
        if self.is_single_loop() {
            LimiterScheme::OverloadMitigation
        } else {
            LimiterScheme::CurrentSaturation
        }
    }

    /// Reference VIC gains per mode.
    pub fn default_vic(self) -> VicParams {
        match self {
            ControllerMode::GSgfm => VicParams {
                k_t: 55.04,
                k_j: 0.053,
                k_d: 7.07,
            },
            _ => VicParams {
                k_t: 41.89,
                k_j: 0.029,
                k_d: 3.70,
            },
        }
    }

    /// Reference VSM gains per mode.
    pub fn default_vsm(self) -> VsmParams {
        match self {
            ControllerMode::MSgfm => VsmParams { j: 0.3, d: 2.9 },
            _ => VsmParams { j: 0.608, d: 5.080 },
        }
    }
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        ControllerMode::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| {
                Error::config(
                    "mode",
                    format!("unknown mode `{s}`; expected gfl, g-mgfm, g-sgfm, m-mgfm or m-sgfm"),
                )
            })
    }
}

/// Gains, limits and references for every controller. Mode-specific
/// defaults (VIC/VSM gains, limiter scheme) apply when a field is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub vic: Option<VicParams>,
    pub vsm: Option<VsmParams>,
    pub limiter: LimiterConfig,
    /// Limiter scheme; defaults to current saturation for multi-loop modes
    /// and overload mitigation for single-loop modes.
    pub limiter_scheme: Option<LimiterScheme>,
    pub current_bw_hz: f64,
    /// Capacitor-voltage regulator gains, pu current per pu voltage (and per s).
    pub voltage_kp: f64,
    pub voltage_ki: f64,
    /// Virtual impedance in series with the capacitor-voltage reference, pu.
    pub virtual_r: f64,
    pub virtual_x: f64,
    pub dc_bw_hz: f64,
    pub dc_zeta: f64,
    pub pll_bw_hz: f64,
    /// Low-pass time constant on the voltage feed-forward of the
    /// grid-following current loop, s.
    pub voltage_ff_tau: f64,
    pub pll_zeta: f64,
    /// PLL frequency limit, pu deviation.
    pub pll_omega_limit: f64,
    pub msc_current_bw_hz: f64,
    pub pitch: PitchGains,
    /// Slew limit on the torque reference, pu/s.
    pub torque_rate: f64,
    /// Low-pass time constant of the power feed-forward in the machine-side
    /// DC-voltage loop, s.
    pub power_ff_tau: f64,
    /// AC voltage amplitude reference, pu.
    pub e_ref: f64,
    pub v_dc_ref: f64,
    /// Ramp rate of the DC-voltage reference during energisation, pu/s.
    pub v_dc_ref_rate: f64,
    /// Ramp time of the AC voltage reference after the converter is enabled, s.
    pub soft_start: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            vic: None,
            vsm: None,
            limiter: LimiterConfig::default(),
            limiter_scheme: None,
            current_bw_hz: 150.0,
            voltage_kp: 2.0,
            voltage_ki: 800.0,
            virtual_r: 0.02,
            virtual_x: 0.2,
            dc_bw_hz: 10.0,
            dc_zeta: 0.707,
            pll_bw_hz: 20.0,
            voltage_ff_tau: 0.01,
            pll_zeta: 0.707,
            pll_omega_limit: 0.05,
            msc_current_bw_hz: 150.0,
            pitch: PitchGains::default(),
            torque_rate: 0.1,
            power_ff_tau: 0.02,
            e_ref: 1.0,
            v_dc_ref: 1.0,
            v_dc_ref_rate: 10.0,
            soft_start: 0.1,
        }
    }
}

impl ControllerConfig {
    pub fn vic_for(&self, mode: ControllerMode) -> VicParams {
        self.vic.unwrap_or_else(|| mode.default_vic())
    }

    pub fn vsm_for(&self, mode: ControllerMode) -> VsmParams {
        self.vsm.unwrap_or_else(|| mode.default_vsm())
    }

    pub fn virtual_impedance(&self) -> Complex64 {
        Complex64::new(self.virtual_r, self.virtual_x)
    }

    pub fn scheme_for(&self, mode: ControllerMode) -> LimiterScheme {
        self.limiter_scheme.unwrap_or_else(|| mode.default_limiter())
    }

    /// Time constants of every configured regulator, s.
    pub fn time_constants(&self, mode: ControllerMode) -> Vec<(&'static str, f64)> {
        let tc = |hz: f64| 1.0 / (2.0 * std::f64::consts::PI * hz);
        let mut v = vec![
            ("controller.msc_current_bw_hz", tc(self.msc_current_bw_hz)),
            ("controller.dc_bw_hz", tc(self.dc_bw_hz)),
            ("controller.power_ff_tau", self.power_ff_tau),
        ];
        match mode {
            ControllerMode::Gfl => {
                v.push(("controller.current_bw_hz", tc(self.current_bw_hz)));
                v.push(("controller.pll_bw_hz", tc(self.pll_bw_hz)));
                v.push(("controller.voltage_ff_tau", self.voltage_ff_tau));
            }
            ControllerMode::GMgfm | ControllerMode::MMgfm => {
                v.push(("controller.current_bw_hz", tc(self.current_bw_hz)));
                v.push(("controller.voltage_ki", self.voltage_kp / self.voltage_ki));
            }
            ControllerMode::GSgfm | ControllerMode::MSgfm => {}
        }
        v
    }

    pub fn validate(&self, mode: ControllerMode) -> Result<()> {
        self.vic_for(mode).validate()?;
        self.vsm_for(mode).validate()?;
        self.limiter.validate()?;
        match (self.scheme_for(mode), mode.is_single_loop()) {
            (LimiterScheme::CurrentSaturation, true) => {
                return Err(Error::config(
                    "controller.limiter_scheme",
                    format!("current_saturation needs a multi-loop mode, got {mode}"),
                ))
            }
            (LimiterScheme::OverloadMitigation, false) => {
                return Err(Error::config(
                    "controller.limiter_scheme",
                    format!("overload_mitigation needs a single-loop grid-forming mode, got {mode}"),
                ))
            }
            _ => {}
        }
        let positive = [
            ("controller.current_bw_hz", self.current_bw_hz),
            ("controller.voltage_kp", self.voltage_kp),
            ("controller.voltage_ki", self.voltage_ki),
            ("controller.dc_bw_hz", self.dc_bw_hz),
            ("controller.dc_zeta", self.dc_zeta),
            ("controller.pll_bw_hz", self.pll_bw_hz),
            ("controller.pll_zeta", self.pll_zeta),
            ("controller.voltage_ff_tau", self.voltage_ff_tau),
            ("controller.pll_omega_limit", self.pll_omega_limit),
            ("controller.msc_current_bw_hz", self.msc_current_bw_hz),
            ("controller.torque_rate", self.torque_rate),
            ("controller.power_ff_tau", self.power_ff_tau),
            ("controller.v_dc_ref_rate", self.v_dc_ref_rate),
            ("controller.pitch.kp", self.pitch.kp),
            ("controller.pitch.ki", self.pitch.ki),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.e_ref > 0.5 && self.e_ref < 1.5) {
            return Err(Error::config("controller.e_ref", "must lie in (0.5, 1.5) pu"));
        }
        if !(self.v_dc_ref > 0.5 && self.v_dc_ref < 1.5) {
            return Err(Error::config("controller.v_dc_ref", "must lie in (0.5, 1.5) pu"));
        }
        for (name, v) in [("controller.virtual_r", self.virtual_r), ("controller.virtual_x", self.virtual_x)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.soft_start >= 0.0 && self.soft_start.is_finite()) {
            return Err(Error::config("controller.soft_start", "must be >= 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in ControllerMode::ALL {
            assert_eq!(m.name().parse::<ControllerMode>().unwrap(), m);
            let js = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<ControllerMode>(&js).unwrap(), m);
        }
        assert_eq!("M_SGFM".parse::<ControllerMode>().unwrap(), ControllerMode::MSgfm);
        assert!("vsg".parse::<ControllerMode>().is_err());
    }

    #[test]
    fn limiter_mode_mismatch_is_rejected() {
        let cfg = ControllerConfig {
            limiter_scheme: Some(LimiterScheme::CurrentSaturation),
            ..ControllerConfig::default()
        };
        let err = cfg.validate(ControllerMode::GSgfm).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "controller.limiter_scheme"));
        let cfg = ControllerConfig {
            limiter_scheme: Some(LimiterScheme::OverloadMitigation),
            ..ControllerConfig::default()
        };
        assert!(cfg.validate(ControllerMode::MMgfm).is_err());
        assert!(cfg.validate(ControllerMode::MSgfm).is_ok());
    }

    #[test]
    fn dc_assignment_partition() {
        assert!(ControllerMode::Gfl.gsc_regulates_dc());
        assert!(ControllerMode::GSgfm.gsc_regulates_dc());
        assert!(!ControllerMode::MMgfm.gsc_regulates_dc());
        assert!(!ControllerMode::MSgfm.gsc_regulates_dc());
    }
}
