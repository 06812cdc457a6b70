//! Angle generators of the grid-forming modes: the DC-voltage driven
//! virtual inertia control and the power driven virtual synchronous machine.
//!
//! Both return the frequency reference `ω* = ω₀ + Δω` with `Δω` in rad/s.
//! The converter phase relative to the nominal synchronous frame is advanced
//! by `−Δω·dt`, which makes a DC-voltage excess or a power deficit advance
//! the converter angle.

use serde::{Deserialize, Serialize};

use super::blocks::FirstOrder;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VicParams {
    #[serde(rename = "k_T")]
    pub k_t: f64,
    #[serde(rename = "k_J")]
    pub k_j: f64,
    #[serde(rename = "k_D")]
    pub k_d: f64,
}

impl VicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_t >= 0.0 && self.k_t.is_finite()) {
            return Err(Error::config("controller.vic.k_T", "must be >= 0"));
        }
        if !(self.k_j > 0.0 && self.k_j.is_finite()) {
            return Err(Error::config("controller.vic.k_J", "must be > 0"));
        }
        if !(self.k_d >= 0.0 && self.k_d.is_finite()) {
            return Err(Error::config("controller.vic.k_D", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VsmParams {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl VsmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.j > 0.0 && self.j.is_finite()) {
            return Err(Error::config("controller.vsm.J", "must be > 0"));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::config("controller.vsm.D", "must be > 0"));
        }
        Ok(())
    }
}

/// Virtual inertia control: `ω* = ω₀ + (s + k_T)/(k_J·s + k_D)·(v*² − v²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VicAngle {
    filter: FirstOrder,
    pub omega0: f64,
    pub phase: f64,
}

impl VicAngle {
    pub fn new(p: &VicParams, omega0: f64, dt: f64) -> Self {
        Self {
            filter: FirstOrder::new(1.0, p.k_t, p.k_j, p.k_d, dt),
            omega0,
            phase: 0.0,
        }
    }

    /// Returns `(ω*, phase)` after one step.
    pub fn step(&mut self, v_dc: f64, v_dc_ref: f64, dt: f64) -> (f64, f64) {
        let dw = self.filter.step(v_dc_ref * v_dc_ref - v_dc * v_dc);
        self.phase -= dw * dt;
        (self.omega0 + dw, self.phase)
    }
}

/// Virtual synchronous machine: `ω* = ω₀ − 1/(J·s + D)·(P* − P)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsmAngle {
    filter: FirstOrder,
    pub omega0: f64,
    pub phase: f64,
}

impl VsmAngle {
    pub fn new(p: &VsmParams, omega0: f64, dt: f64) -> Self {
        Self {
            filter: FirstOrder::new(0.0, 1.0, p.j, p.d, dt),
            omega0,
            phase: 0.0,
        }
    }

    pub fn step(&mut self, p_ref: f64, p_meas: f64, dt: f64) -> (f64, f64) {
        let dw = -self.filter.step(p_ref - p_meas);
        self.phase -= dw * dt;
        (self.omega0 + dw, self.phase)
    }

    /// Current frequency deviation, rad/s.
    pub fn deviation(&self) -> f64 {
        -self.filter.output()
    }
}

impl VicAngle {
    pub fn deviation(&self) -> f64 {
        self.filter.output()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const W0: f64 = 2.0 * std::f64::consts::PI * 60.0;
    const TABLE_G: VicParams = VicParams {
        k_t: 41.89,
        k_j: 0.029,
        k_d: 3.70,
    };
    const TABLE_M: VsmParams = VsmParams { j: 0.608, d: 5.080 };

    #[test]
    fn zero_error_is_bit_exact() {
        let mut v = VicAngle::new(&TABLE_G, W0, 1e-4);
        let mut m = VsmAngle::new(&TABLE_M, W0, 1e-4);
        for _ in 0..1000 {
            assert_eq!(v.step(1.0, 1.0, 1e-4).0, W0);
            assert_eq!(m.step(0.8, 0.8, 1e-4).0, W0);
        }
        assert_eq!(v.phase, 0.0);
        assert_eq!(m.phase, 0.0);
    }

    #[test]
    fn vic_dc_gain() {
        let mut v = VicAngle::new(&TABLE_G, W0, 1e-4);
        let v_dc = (1.0f64 - 0.01).sqrt();
        let mut w = 0.0;
        for _ in 0..20_000 {
            w = v.step(v_dc, 1.0, 1e-4).0;
        }
        assert!((w - W0 - 0.1132).abs() < 1e-3, "{}", w - W0);
        assert_relative_eq!(w - W0, 0.01 * 41.89 / 3.70, max_relative = 1e-9);
    }

    #[test]
    fn vsm_dc_gain_and_time_constant() {
        let dt = 1e-4;
        let mut m = VsmAngle::new(&TABLE_M, W0, dt);
        let tau = 0.608 / 5.080;
        let n = (tau / dt).round() as usize;
        let mut w = 0.0;
        for _ in 0..n {
            w = m.step(0.1, 0.0, dt).0;
        }
        let final_dev = -0.1 / 5.080;
        assert!(((w - W0) / final_dev - (1.0 - (-1.0f64).exp())).abs() < 2e-3);
        for _ in 0..200_000 {
            w = m.step(0.1, 0.0, dt).0;
        }
        assert!((w - W0 + 0.01969).abs() < 1e-3);
        assert_relative_eq!(w - W0, final_dev, max_relative = 1e-9);
    }

    #[test]
    fn vic_impulse_decays_with_filter_pole() {
        let dt = 1e-5;
        let p = VicParams {
            k_t: 0.0,
            k_j: 0.05,
            k_d: 2.0,
        };
        let mut v = VicAngle::new(&p, W0, dt);
        v.step(0.0, 1.0, dt);
        let first = v.step(1.0, 1.0, dt).0 - W0;
        let tau = p.k_j / p.k_d;
        let n = (tau / dt).round() as usize;
        let mut cur = first;
        for _ in 0..n {
            cur = v.step(1.0, 1.0, dt).0 - W0;
        }
        assert!(first.abs() > 0.0);
        assert!((cur / first - (-1.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn phase_moves_against_deviation() {
        let mut v = VicAngle::new(&TABLE_G, W0, 1e-4);
        for _ in 0..100 {
            v.step(1.05, 1.0, 1e-4);
        }
        // DC surplus (v above reference) gives a negative deviation and an advancing phase
        assert!(v.deviation() < 0.0);
        assert!(v.phase > 0.0);
        let mut m = VsmAngle::new(&TABLE_M, W0, 1e-4);
        for _ in 0..100 {
            m.step(1.0, 0.8, 1e-4);
        }
        assert!(m.phase > 0.0);
    }
}
