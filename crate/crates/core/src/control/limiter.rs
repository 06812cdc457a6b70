use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimiterScheme {
    CurrentSaturation,
    OverloadMitigation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverloadParams {
    /// Proportional gain on the power excess.
    pub kp: f64,
    /// Integral gain on the power excess, 1/s.
    pub ki: f64,
    /// Voltage-amplitude reduction per unit of limiter output.
    pub k_e: f64,
    /// Frequency offset per unit of limiter output, rad/s.
    pub k_w: f64,
    /// Recovery time constant once the overload has cleared, s.
    pub tau_recovery: f64,
    /// Smallest allowed amplitude scale.
    pub e_min: f64,
}

impl Default for OverloadParams {
    fn default() -> Self {
        Self {
            kp: 0.2,
            ki: 20.0,
            k_e: 1.0,
            k_w: 5.0,
            tau_recovery: 0.2,
            e_min: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimiterConfig {
    pub scheme: LimiterScheme,
    pub i_max: f64,
    pub p_max: f64,
    pub overload: OverloadParams,
}

impl Default for LimiterConfig {
    fn default() -> Self {
        Self {
            scheme: LimiterScheme::CurrentSaturation,
            i_max: 1.2,
            p_max: 1.2,
            overload: OverloadParams::default(),
        }
    }
}

impl LimiterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_max > 0.1 && self.i_max <= 5.0) {
            return Err(Error::config("controller.limiter.i_max", "must lie in (0.1, 5] pu"));
        }
        if !(self.p_max > 0.1 && self.p_max <= 5.0) {
            return Err(Error::config("controller.limiter.p_max", "must lie in (0.1, 5] pu"));
        }
        let o = &self.overload;
        for (name, v) in [
            ("controller.limiter.overload.kp", o.kp),
            ("controller.limiter.overload.ki", o.ki),
            ("controller.limiter.overload.k_e", o.k_e),
            ("controller.limiter.overload.k_w", o.k_w),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be >= 0"));
            }
        }
        if o.tau_recovery.is_nan() || o.tau_recovery <= 0.0 {
            return Err(Error::config(
                "controller.limiter.overload.tau_recovery",
                "must be > 0",
            ));
        }
        if !(o.e_min > 0.0 && o.e_min < 1.0) {
            return Err(Error::config("controller.limiter.overload.e_min", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Clamp a current reference to `i_max`, preserving its angle. Returns the
/// clamped reference and whether the clamp engaged.
pub fn current_saturation(i_ref: Complex64, i_max: f64) -> (Complex64, bool) {
    let n = i_ref.norm();
    if n > i_max {
        (i_ref * (i_max / n), true)
    } else {
        (i_ref, false)
    }
}

/// Limiter output below which a decaying action is released entirely.
const RELEASE_LEVEL: f64 = 1e-6;

/// Output of the overload mitigation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverloadAction {
    /// Multiplier on the voltage amplitude reference.
    pub e_scale: f64,
    /// Offset added to the converter frequency, rad/s; negative unloads.
    pub omega_offset: f64,
    pub active: bool,
}

/// Power-overload mitigation for single-loop grid-forming control: a PI on
/// the power excess lowers the voltage amplitude and retards the angle.
/// Once the excess clears the angle is left alone and the amplitude action
/// decays with a first-order recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct OverloadMitigation {
    pub p_max: f64,
    pub params: OverloadParams,
    pub state: f64,
}

impl OverloadMitigation {
    pub fn new(cfg: &LimiterConfig) -> Self {
        Self {
            p_max: cfg.p_max,
            params: cfg.overload.clone(),
            state: 0.0,
        }
    }

    pub fn step(&mut self, p_meas: f64, dt: f64) -> OverloadAction {
        let p = &self.params;
        let excess = p_meas - self.p_max;
        let u = if excess > 0.0 {
            self.state += p.ki * excess * dt;
            p.kp * excess + self.state
        } else {
            self.state *= (-dt / p.tau_recovery).exp();
            if self.state < RELEASE_LEVEL {
                self.state = 0.0;
            }
            self.state
        };
        let u = u.max(0.0);
        let retard = if excess > 0.0 { u } else { 0.0 };
        // the amplitude floor also caps the integrator
        let u_cap = (1.0 - p.e_min) / p.k_e.max(f64::MIN_POSITIVE);
        self.state = self.state.min(u_cap);
        OverloadAction {
            e_scale: (1.0 - p.k_e * u).clamp(p.e_min, 1.0),
            omega_offset: -p.k_w * retard,
            active: u > 0.0,
        }
    }
}
