use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Permanent-magnet generator in its rotor dq frame, generator convention
/// (stator currents leave the machine). Currents and voltages are complex
/// `d + j·q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmsgParams {
    pub r_s: f64,
    pub l_d: f64,
    pub l_q: f64,
    pub psi_pm: f64,
    pub pole_pairs: u32,
    /// Stator electrical frequency at rated rotor speed, Hz. Sets the
    /// machine-side per-unit time base.
    pub f_rated: f64,
}

impl Default for PmsgParams {
    fn default() -> Self {
        Self {
            r_s: 0.002,
            l_d: 0.4,
            l_q: 0.4,
            psi_pm: 1.0,
            pole_pairs: 100,
            f_rated: 12.0,
        }
    }
}

impl PmsgParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pmsg.r_s", self.r_s),
            ("pmsg.l_d", self.l_d),
            ("pmsg.l_q", self.l_q),
            ("pmsg.psi_pm", self.psi_pm),
            ("pmsg.f_rated", self.f_rated),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        if self.pole_pairs == 0 {
            return Err(Error::config("pmsg.pole_pairs", "must be >= 1"));
        }
        Ok(())
    }

    pub fn omega_base(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_rated
    }

    /// Electromagnetic torque, pu.
    pub fn torque(&self, i_s: Complex64) -> f64 {
        self.psi_pm * i_s.im + (self.l_d - self.l_q) * i_s.re * i_s.im
    }

    /// Power delivered by the stator into the machine-side converter, pu.
    pub fn terminal_power(&self, v_s: Complex64, i_s: Complex64) -> f64 {
        v_s.re * i_s.re + v_s.im * i_s.im
    }

    /// Time derivative of the stator current for stator voltage `v_s` and
    /// rotor speed `omega_r` (pu).
    pub fn current_derivative(&self, i_s: Complex64, v_s: Complex64, omega_r: f64) -> Complex64 {
        let wb = self.omega_base();
        let did = (-v_s.re - self.r_s * i_s.re + omega_r * self.l_q * i_s.im) * wb / self.l_d;
        let diq = (-v_s.im - self.r_s * i_s.im - omega_r * self.l_d * i_s.re
            + omega_r * self.psi_pm)
            * wb
            / self.l_q;
        Complex64::new(did, diq)
    }

    /// Stator voltage that holds `i_s` constant at speed `omega_r`.
    pub fn steady_voltage(&self, i_s: Complex64, omega_r: f64) -> Complex64 {
        Complex64::new(
            -self.r_s * i_s.re + omega_r * self.l_q * i_s.im,
            -self.r_s * i_s.im - omega_r * self.l_d * i_s.re + omega_r * self.psi_pm,
        )
    }

    /// q-axis current that delivers converter power `p` at speed `omega_r`
    /// with zero d-axis current (smaller root of `w·psi·iq − r·iq² = p`).
    pub fn iq_for_power(&self, p: f64, omega_r: f64) -> f64 {
        let a = self.r_s;
        let b = omega_r * self.psi_pm;
        let disc = (b * b - 4.0 * a * p).max(0.0);
        2.0 * p / (b + disc.sqrt())
    }
}
