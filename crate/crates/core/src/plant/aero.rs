//! Rotor aerodynamics: power coefficient surface, aerodynamic torque and the
//! optimal-torque gain used by maximum power point tracking.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Betz limit, 16/27.
pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

/// Rotor and operating-envelope parameters.
///
/// Wind speeds in m/s, pitch in degrees, rated rotor speed in mechanical rad/s.
/// Per-unit rotor speed is relative to `omega_rated`; per-unit torque is
/// relative to `p_rated / omega_rated`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbineParams {
    pub rho: f64,
    pub radius: f64,
    pub cp_max: f64,
    pub lambda_opt: f64,
    pub p_rated: f64,
    /// Rated mechanical rotor speed, rad/s.
    pub omega_rated: f64,
    /// Inertia constant of the rotor + generator, s.
    pub h_inertia: f64,
    pub cut_in: f64,
    pub v_inter: f64,
    pub v_rated: f64,
    pub cut_out: f64,
    /// Minimum rotor speed enforced in region 1.5, pu.
    pub omega_min: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_rate_limit: f64,
}

impl Default for TurbineParams {
    fn default() -> Self {
        let rho = 1.225;
        let radius = 120.0;
        let cp_max = 0.489;
        let lambda_opt = 9.0;
        let p_rated = 15.0e6;
        // Rated wind and speed are placed on the optimal tip-speed ratio so the
        // rated point delivers exactly rated power at zero pitch.
        let v_rated = (p_rated / (0.5 * rho * PI * radius * radius * cp_max)).cbrt();
        let omega_rated = lambda_opt * v_rated / radius;
        Self {
            rho,
            radius,
            cp_max,
            lambda_opt,
            p_rated,
            omega_rated,
            h_inertia: 5.0,
            cut_in: 3.0,
            v_inter: 6.98,
            v_rated,
            cut_out: 25.0,
            omega_min: 0.675,
            beta_min: 0.0,
            beta_max: 45.0,
            beta_rate_limit: 8.0,
        }
    }
}

impl TurbineParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("turbine.rho", self.rho),
            ("turbine.radius", self.radius),
            ("turbine.lambda_opt", self.lambda_opt),
            ("turbine.p_rated", self.p_rated),
            ("turbine.omega_rated", self.omega_rated),
            ("turbine.h_inertia", self.h_inertia),
            ("turbine.beta_rate_limit", self.beta_rate_limit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.cp_max > 0.0 && self.cp_max < BETZ_LIMIT) {
            return Err(Error::config(
                "turbine.cp_max",
                format!("must lie in (0, {BETZ_LIMIT:.4}), got {}", self.cp_max),
            ));
        }
        if !(0.0 <= self.cut_in
            && self.cut_in < self.v_inter
            && self.v_inter < self.v_rated
            && self.v_rated < self.cut_out)
        {
            return Err(Error::config(
                "turbine.cut_in/v_inter/v_rated/cut_out",
                "must satisfy cut_in < v_inter < v_rated < cut_out",
            ));
        }
        if !(self.omega_min > 0.0 && self.omega_min < 1.0) {
            return Err(Error::config("turbine.omega_min", "must lie in (0, 1) pu"));
        }
        if !(self.beta_min < self.beta_max && self.beta_min >= -5.0 && self.beta_max <= 90.0) {
            return Err(Error::config(
                "turbine.beta_min/beta_max",
                "must satisfy -5 <= beta_min < beta_max <= 90 degrees",
            ));
        }
        Ok(())
    }

    /// Swept area, m².
    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    /// Rated torque, N·m.
    pub fn torque_base(&self) -> f64 {
        self.p_rated / self.omega_rated
    }

    /// Power coefficient at tip-speed ratio `lambda` and pitch `beta` (degrees).
    ///
    /// An exponential blade-element fit rescaled so its peak sits exactly at
    /// `(lambda_opt, 0)` with value `cp_max`.
    pub fn cp(&self, lambda: f64, beta: f64) -> f64 {
        let beta = beta.clamp(self.beta_min, self.beta_max);
        let shape = reference_surface();
        let lam = lambda * shape.lambda_peak / self.lambda_opt;
        let cp = self.cp_max / shape.cp_peak * shape.eval(lam, beta);
        cp.clamp(0.0, BETZ_LIMIT)
    }

    /// Aerodynamic torque in pu for wind speed `v_w` (m/s), rotor speed
    /// `omega_r` (pu) and pitch `beta` (degrees).
    pub fn aero_torque(&self, v_w: f64, omega_r: f64, beta: f64) -> f64 {
        if v_w <= 0.0 || omega_r <= 0.0 {
            return 0.0;
        }
        let omega_si = omega_r * self.omega_rated;
        let lambda = omega_si * self.radius / v_w;
        let power = 0.5 * self.rho * self.area() * self.cp(lambda, beta) * v_w.powi(3);
        power / self.p_rated / omega_r
    }

    /// Aerodynamic power in pu.
    pub fn aero_power(&self, v_w: f64, omega_r: f64, beta: f64) -> f64 {
        self.aero_torque(v_w, omega_r, beta) * omega_r
    }

    /// Optimal-torque gain in N·m·s² (torque = gain · omega²).
    pub fn optimal_gain(&self) -> f64 {
        optimal_gain(self.rho, self.radius, self.cp_max, self.lambda_opt)
    }

    /// Optimal-torque gain expressed in pu torque per pu speed squared.
    pub fn optimal_gain_pu(&self) -> f64 {
        self.optimal_gain() * self.omega_rated.powi(2) / self.torque_base()
    }

    /// Rotor speed (pu) that puts the rotor on the optimal tip-speed ratio.
    pub fn optimal_speed(&self, v_w: f64) -> f64 {
        self.lambda_opt * v_w / self.radius / self.omega_rated
    }

    /// Pitch angle at which the aerodynamic torque equals `torque` for the
    /// given wind and speed, found by bisection over `[beta_min, beta_max]`.
    /// Returns `beta_min` when even zero pitch cannot reach `torque`.
    pub fn pitch_for_torque(&self, v_w: f64, omega_r: f64, torque: f64) -> f64 {
        let f = |b: f64| self.aero_torque(v_w, omega_r, b) - torque;
        let (mut lo, mut hi) = (self.beta_min, self.beta_max);
        if f(lo) <= 0.0 {
            return lo;
        }
        if f(hi) >= 0.0 {
            return hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `0.5 · rho · pi · R² · cp_max · (R / lambda_opt)³`.
pub fn optimal_gain(rho: f64, radius: f64, cp_max: f64, lambda_opt: f64) -> f64 {
    0.5 * rho * PI * radius * radius * cp_max * (radius / lambda_opt).powi(3)
}

struct ReferenceSurface {
    lambda_peak: f64,
    cp_peak: f64,
}

impl ReferenceSurface {
    fn eval(&self, lambda: f64, beta: f64) -> f64 {
        let base = lambda - 0.02 * beta;
        if base <= 0.0 {
            return 0.0;
        }
        let inv_li = 1.0 / base - 0.003 / (beta.powi(3) + 1.0);
        let cp = 0.73
            * (151.0 * inv_li - 0.58 * beta - 0.002 * beta.powf(2.14) - 13.2)
            * (-18.4 * inv_li).exp();
        cp.max(0.0)
    }
}

fn reference_surface() -> &'static ReferenceSurface {
    static SURFACE: OnceLock<ReferenceSurface> = OnceLock::new();
    SURFACE.get_or_init(|| {
        let probe = ReferenceSurface {
            lambda_peak: 1.0,
            cp_peak: 1.0,
        };
        // golden-section search for the zero-pitch peak
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (4.0, 14.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        while (b - a).abs() > 1e-13 {
            if probe.eval(c, 0.0) > probe.eval(d, 0.0) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        let lambda_peak = 0.5 * (a + b);
        ReferenceSurface {
            lambda_peak,
            cp_peak: probe.eval(lambda_peak, 0.0),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cp_calibration_point() {
        let p = TurbineParams::default();
        assert_relative_eq!(p.cp(p.lambda_opt, 0.0), p.cp_max, max_relative = 1e-10);
    }

    #[test]
    fn cp_peak_is_at_lambda_opt() {
        let p = TurbineParams::default();
        let best = (1..2000)
            .map(|k| 2.0 + k as f64 * 0.008)
            .map(|l| p.cp(l, 0.0))
            .fold(0.0, f64::max);
        assert!(best <= p.cp_max + 1e-9);
    }

    #[test]
    fn large_pitch_sheds_power() {
        let p = TurbineParams::default();
        assert!(p.cp(p.lambda_opt, 25.0) < 0.1 * p.cp_max);
    }

    #[test]
    fn no_wind_no_torque() {
        let p = TurbineParams::default();
        assert_eq!(p.aero_torque(0.0, 1.0, 0.0), 0.0);
        assert_eq!(p.aero_torque(10.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn rated_point_is_one_pu() {
        let p = TurbineParams::default();
        let t = p.aero_torque(p.v_rated, 1.0, 0.0);
        assert!((t - 1.0).abs() < 0.02, "torque {t}");
        assert!((p.aero_power(p.v_rated, 1.0, 0.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn optimum_torque_matches_gain_law() {
        let p = TurbineParams::default();
        let k = p.optimal_gain_pu();
        let w = p.optimal_speed(10.0);
        assert_relative_eq!(p.aero_torque(10.0, w, 0.0), k * w * w, max_relative = 1e-9);
        // the optimal-speed point maximises power at fixed wind
        let best = (0..400)
            .map(|i| 0.4 + i as f64 * 0.0025)
            .map(|w| p.aero_power(10.0, w, 0.0))
            .fold(0.0, f64::max);
        assert!(best <= p.aero_power(10.0, w, 0.0) + 1e-9);
    }

    #[test]
    fn optimal_gain_values() {
        assert_eq!(optimal_gain(1.225, 120.0, 0.0, 9.0), 0.0);
        // hand calculation: 0.5·1.225·π·14400·0.489·(120/9)^3
        let hand = 0.5 * 1.225 * std::f64::consts::PI * 14400.0 * 0.489 * (120.0f64 / 9.0).powi(3);
        let k = optimal_gain(1.225, 120.0, 0.489, 9.0);
        assert_relative_eq!(k, hand, max_relative = 1e-12);
        assert!((k / 3.21e7 - 1.0).abs() < 1e-3);
        assert_relative_eq!(
            optimal_gain(1.225, 240.0, 0.489, 9.0) / k,
            32.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rated_gain_is_unity_in_pu() {
        let p = TurbineParams::default();
        assert_relative_eq!(p.optimal_gain_pu(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn pitch_inversion() {
        let p = TurbineParams::default();
        let b = p.pitch_for_torque(15.0, 1.0, 1.0);
        assert!(b > 5.0 && b < 30.0);
        assert_relative_eq!(p.aero_torque(15.0, 1.0, b), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn validation_rejects_bad_envelope() {
        let p = TurbineParams {
            cp_max: 0.6,
            ..TurbineParams::default()
        };
        assert!(p.validate().is_err());
        let p = TurbineParams {
            v_inter: 2.0,
            ..TurbineParams::default()
        };
        assert!(p.validate().is_err());
        assert!(TurbineParams::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn cp_respects_betz(lambda in 0.01f64..30.0, beta in -10.0f64..100.0) {
            let p = TurbineParams::default();
            let c = p.cp(lambda, beta);
            prop_assert!((0.0..=BETZ_LIMIT).contains(&c));
        }

        #[test]
        fn cp_non_increasing_in_pitch(lambda in 2.0f64..16.0, b0 in 0.0f64..44.0, db in 0.0f64..10.0) {
            let p = TurbineParams::default();
            let b1 = (b0 + db).min(p.beta_max);
            prop_assert!(p.cp(lambda, b1) <= p.cp(lambda, b0) + 1e-12);
        }
    }
}
