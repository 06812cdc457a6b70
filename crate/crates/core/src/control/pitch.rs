use serde::{Deserialize, Serialize};

use crate::plant::TurbineParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchGains {
    /// Degrees per pu speed error.
    pub kp: f64,
    /// Degrees per pu speed error per second.
    pub ki: f64,
}

impl Default for PitchGains {
    fn default() -> Self {
        Self {
            kp: 150.0,
            ki: 40.0,
        }
    }
}

/// Pitch PI with clamping anti-windup, position clamp and
/// rate limit.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchController {
    pub gains: PitchGains,
    pub beta_min: f64,
    pub beta_max: f64,
    pub rate_limit: f64,
    pub integral: f64,
    pub beta: f64,
}

impl PitchController {
    pub fn new(gains: PitchGains, turbine: &TurbineParams, beta0: f64) -> Self {
        Self {
            gains,
            beta_min: turbine.beta_min,
            beta_max: turbine.beta_max,
            rate_limit: turbine.beta_rate_limit,
            integral: beta0,
            beta: beta0,
        }
    }

    /// Advance by `dt` with speed error `delta_omega` (positive = overspeed).
    pub fn step(&mut self, delta_omega: f64, dt: f64) -> f64 {
        let p = self.gains.kp * delta_omega;
        let candidate = self.integral + self.gains.ki * delta_omega * dt;
        // the integral never carries the output past a position limit
        self.integral = candidate
            .clamp(self.beta_min - p, self.beta_max - p);
        let target = (p + self.integral).clamp(self.beta_min, self.beta_max);
        let d = self.rate_limit * dt;
        self.beta += (target - self.beta).clamp(-d, d);
        self.beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> PitchController {
        PitchController::new(PitchGains::default(), &TurbineParams::default(), 0.0)
    }

    #[test]
    fn zero_error_holds_zero() {
        let mut p = ctl();
        for _ in 0..1000 {
            assert_eq!(p.step(0.0, 1e-3), 0.0);
        }
    }

    #[test]
    fn overspeed_pitches_out_to_clamp() {
        let mut p = ctl();
        let mut prev = p.beta;
        for _ in 0..20000 {
            let b = p.step(0.1, 1e-3);
            assert!(b >= prev);
            prev = b;
        }
        assert_eq!(prev, p.beta_max);
    }

    #[test]
    fn integrator_holds_after_pulse() {
        let mut p = ctl();
        for _ in 0..100 {
            p.step(0.05, 1e-3);
        }
        let mut b = 0.0;
        for _ in 0..5000 {
            b = p.step(0.0, 1e-3);
        }
        // integral of 0.05 over 0.1 s times ki, reached after the rate limit
        let expected = p.gains.ki * 0.05 * 0.1;
        assert!((b - expected).abs() < 1e-9, "{b} vs {expected}");
    }

    #[test]
    fn anti_windup_releases_immediately() {
        let mut p = ctl();
        for _ in 0..100_000 {
            p.step(0.5, 1e-3);
        }
        assert!(p.integral <= p.beta_max);
        let before = p.beta;
        for _ in 0..10 {
            p.step(-0.01, 1e-3);
        }
        assert!(p.beta < before);
    }
}
