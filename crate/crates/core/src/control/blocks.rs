//! Discrete building blocks shared by the controllers. Every continuous
//! transfer function is mapped with the bilinear rule at the control step.

use std::ops::{Add, Mul, Sub};

/// Proportional-integral regulator, integral term by the trapezoidal rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pi<T> {
    pub kp: f64,
    pub ki: f64,
    pub integral: T,
    prev_err: T,
}

impl<T> Pi<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    pub fn new(kp: f64, ki: f64) -> Self {
        Self {
            kp,
            ki,
            integral: T::default(),
            prev_err: T::default(),
        }
    }

    /// Preload the integrator so that zero error reproduces `output`.
    pub fn reset_to(&mut self, output: T) {
        self.integral = output;
        self.prev_err = T::default();
    }

    pub fn step(&mut self, err: T, dt: f64) -> T {
        self.integral = self.integral + (err + self.prev_err) * (0.5 * self.ki * dt);
        self.prev_err = err;
        err * self.kp + self.integral
    }

    /// Output the regulator would give without committing the update.
    pub fn peek(&self, err: T, dt: f64) -> T {
        let integral = self.integral + (err + self.prev_err) * (0.5 * self.ki * dt);
        err * self.kp + integral
    }
}

/// First-order section `(n1·s + n0)/(d1·s + d0)` discretised with the
/// bilinear rule. Zero input from rest gives exactly zero output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrder {
    b0: f64,
    b1: f64,
    a0: f64,
    a1: f64,
    u_prev: f64,
    y_prev: f64,
}

impl FirstOrder {
    pub fn new(n1: f64, n0: f64, d1: f64, d0: f64, dt: f64) -> Self {
        let k = 2.0 / dt;
        Self {
            b0: n1 * k + n0,
            b1: n0 - n1 * k,
            a0: d1 * k + d0,
            a1: d0 - d1 * k,
            u_prev: 0.0,
            y_prev: 0.0,
        }
    }

    /// Low-pass `1/(tau·s + 1)`.
    pub fn low_pass(tau: f64, dt: f64) -> Self {
        Self::new(0.0, 1.0, tau, 1.0, dt)
    }

    /// Set the internal state to the steady state of a constant input.
    pub fn settle(&mut self, u: f64) {
        let gain = (self.b0 + self.b1) / (self.a0 + self.a1);
        self.u_prev = u;
        self.y_prev = gain * u;
    }

    pub fn step(&mut self, u: f64) -> f64 {
        let y = (self.b0 * u + self.b1 * self.u_prev - self.a1 * self.y_prev) / self.a0;
        self.u_prev = u;
        self.y_prev = y;
        y
    }

    pub fn output(&self) -> f64 {
        self.y_prev
    }
}

/// Slew-rate limiter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLimiter {
    pub rate: f64,
    pub value: f64,
}

impl RateLimiter {
    pub fn new(rate: f64, value: f64) -> Self {
        Self { rate, value }
    }

    pub fn step(&mut self, target: f64, dt: f64) -> f64 {
        let d = self.rate * dt;
        self.value += (target - self.value).clamp(-d, d);
        self.value
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn pi_zero_error_holds_output() {
        let mut pi = Pi::<f64>::new(2.0, 10.0);
        pi.reset_to(0.7);
        for _ in 0..100 {
            assert_eq!(pi.step(0.0, 1e-4), 0.7);
        }
    }

    #[test]
    fn pi_integrates_constant_error() {
        let mut pi = Pi::<Complex64>::new(0.0, 4.0);
        let mut y = Complex64::new(0.0, 0.0);
        for _ in 0..1000 {
            y = pi.step(Complex64::new(1.0, -1.0), 1e-3);
        }
        // first sample contributes half a step under the trapezoidal rule
        assert_relative_eq!(y.re, 4.0 * (1.0 - 0.5e-3), max_relative = 1e-12);
        assert_relative_eq!(y.im, -4.0 * (1.0 - 0.5e-3), max_relative = 1e-12);
    }

    #[test]
    fn first_order_dc_gain_and_pole() {
        let dt = 1e-4;
        let mut f = FirstOrder::new(1.0, 3.0, 0.5, 2.0, dt);
        let mut y = 0.0;
        for _ in 0..200_000 {
            y = f.step(1.0);
        }
        assert_relative_eq!(y, 1.5, max_relative = 1e-9);

        let tau = 0.1;
        let mut lp = FirstOrder::low_pass(tau, dt);
        let mut y = 0.0;
        for _ in 0..1000 {
            y = lp.step(1.0);
        }
        assert!((y - (1.0 - (-1.0f64).exp())).abs() < 1e-3);
    }

    #[test]
    fn settle_is_fixed_point() {
        let mut f = FirstOrder::new(1.0, 41.89, 0.029, 3.70, 1e-4);
        f.settle(0.2);
        let y0 = f.output();
        assert_relative_eq!(f.step(0.2), y0, max_relative = 1e-14);
    }

    #[test]
    fn rate_limiter_slews() {
        let mut r = RateLimiter::new(2.0, 0.0);
        for _ in 0..10 {
            r.step(1.0, 0.01);
        }
        assert_relative_eq!(r.value, 0.2, max_relative = 1e-12);
        for _ in 0..100 {
            r.step(1.0, 0.01);
        }
        assert_eq!(r.value, 1.0);
    }
}
