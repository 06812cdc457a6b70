//! Inner voltage and current regulators in a rotating controller frame.

use num_complex::Complex64;

use super::blocks::Pi;
use super::limiter::current_saturation;

/// PI gains for the filter-current loop, placing a first-order closed loop
/// at `bw_hz` by cancelling the filter pole.
pub fn current_loop_gains(bw_hz: f64, l: f64, r: f64, omega_b: f64) -> (f64, f64) {
    let a = 2.0 * std::f64::consts::PI * bw_hz;
    (a * l / omega_b, a * r)
}

/// Filter-current regulator with capacitor-voltage feed-forward and dq
/// decoupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentLoop {
    pub pi: Pi<Complex64>,
    pub l_f: f64,
}

impl CurrentLoop {
    pub fn new(kp: f64, ki: f64, l_f: f64) -> Self {
        Self {
            pi: Pi::new(kp, ki),
            l_f,
        }
    }

    /// Converter voltage command for current reference `i_ref`.
    pub fn step(&mut self, i_ref: Complex64, i_meas: Complex64, v_meas: Complex64, dt: f64) -> Complex64 {
        v_meas + Complex64::new(0.0, self.l_f) * i_meas + self.pi.step(i_ref - i_meas, dt)
    }

    /// Preload so that zero error reproduces converter voltage `e`.
    pub fn settle(&mut self, e: Complex64, i_meas: Complex64, v_meas: Complex64) {
        self.pi
            .reset_to(e - v_meas - Complex64::new(0.0, self.l_f) * i_meas);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOutput {
    pub e: Complex64,
    pub i_ref: Complex64,
    pub saturated: bool,
}

/// Outer capacitor-voltage PI feeding a current-saturated inner current loop.
///
/// The voltage reference is reduced by the drop across a virtual impedance
/// carrying the filter current. The voltage regulator sees the filter
/// capacitor in parallel with the external network, so its gains are set
/// directly rather than placed on the capacitor alone; the load current is
/// not fed forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerCascade {
    pub v_pi: Pi<Complex64>,
    pub current: CurrentLoop,
    pub c_f: f64,
    pub i_max: f64,
    pub z_v: Complex64,
}

impl InnerCascade {
    pub fn new(v_gains: (f64, f64), i_gains: (f64, f64), l_f: f64, c_f: f64, i_max: f64) -> Self {
        Self {
            v_pi: Pi::new(v_gains.0, v_gains.1),
            current: CurrentLoop::new(i_gains.0, i_gains.1, l_f),
            c_f,
            i_max,
            z_v: Complex64::new(0.0, 0.0),
        }
    }

    pub fn with_virtual_impedance(mut self, z_v: Complex64) -> Self {
        self.z_v = z_v;
        self
    }

    pub fn step(
        &mut self,
        v_ref: Complex64,
        v_meas: Complex64,
        i_meas: Complex64,
        dt: f64,
    ) -> CascadeOutput {
        let err = v_ref - self.z_v * i_meas - v_meas;
        let demand = Complex64::new(0.0, self.c_f) * v_meas + self.v_pi.step(err, dt);
        let (i_ref, saturated) = current_saturation(demand, self.i_max);
        let e = self.current.step(i_ref, i_meas, v_meas, dt);
        CascadeOutput { e, i_ref, saturated }
    }

    /// Preload both integrators for a steady operating point.
    pub fn settle(&mut self, e: Complex64, v_meas: Complex64, i_meas: Complex64) {
        self.v_pi
            .reset_to(i_meas - Complex64::new(0.0, self.c_f) * v_meas);
        self.current.settle(e, i_meas, v_meas);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_error_outputs_feed_forward() {
        let mut cl = CurrentLoop::new(1.0, 10.0, 0.15);
        let e = cl.step(c(0.8, 0.1), c(0.8, 0.1), c(1.0, 0.0), 1e-4);
        assert!((e - (c(1.0, 0.0) + c(0.0, 0.15) * c(0.8, 0.1))).norm() < 1e-15);
    }

    #[test]
    fn large_demand_is_clamped() {
        let mut cas = InnerCascade::new((2.0, 0.0), (0.0, 0.0), 0.15, 0.05, 1.2);
        let out = cas.step(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), 1e-4);
        assert!(out.saturated);
        assert!((out.i_ref.norm() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn settle_is_fixed_point() {
        let mut cas = InnerCascade::new((0.03, 4.7), (1.2, 9.0), 0.15, 0.05, 1.2);
        let (e, v, i) = (c(1.02, 0.2), c(1.0, 0.0), c(0.9, -0.05));
        cas.settle(e, v, i);
        let out = cas.step(c(1.0, 0.0), v, i, 1e-4);
        assert!((out.e - e).norm() < 1e-14);
        assert!(!out.saturated);
    }

    #[test]
    fn virtual_impedance_shifts_the_fixed_point() {
        let z = c(0.02, 0.2);
        let mut cas = InnerCascade::new((2.0, 800.0), (1.2, 9.0), 0.15, 0.05, 1.2).with_virtual_impedance(z);
        let (v, i) = (c(0.95, -0.18), c(0.9, -0.05));
        let e = v + c(0.0, 0.15) * i;
        cas.settle(e, v, i);
        let out = cas.step(v + z * i, v, i, 1e-4);
        assert!((out.e - e).norm() < 1e-14);
    }
}
