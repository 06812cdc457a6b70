use num_complex::Complex64;

use super::blocks::wrap_angle;

/// Synchronous-reference-frame PLL.
///
/// `phase` is the PLL angle measured against the nominal synchronous frame,
/// so the absolute angle is `ω₀·t + phase`; `omega` is the estimated
/// frequency in pu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllState {
    pub phase: f64,
    pub omega: f64,
    pub kp: f64,
    pub ki: f64,
    /// Integrator state, rad/s.
    pub integral: f64,
    /// Symmetric frequency limit, pu deviation from nominal.
    pub omega_limit: f64,
    /// Nominal angular frequency, rad/s.
    pub omega0: f64,
}

impl PllState {
    /// Second-order PLL designed for natural frequency `bw_hz` and damping
    /// `zeta` at 1 pu voltage.
    pub fn design(bw_hz: f64, zeta: f64, omega_limit: f64, omega0: f64) -> Self {
        let wn = 2.0 * std::f64::consts::PI * bw_hz;
        Self {
            phase: 0.0,
            omega: 1.0,
            kp: 2.0 * zeta * wn,
            ki: wn * wn,
            integral: 0.0,
            omega_limit,
            omega0,
        }
    }

    /// Absolute angle at time `t`, wrapped.
    pub fn theta(&self, t: f64) -> f64 {
        wrap_angle(self.omega0 * t + self.phase)
    }
}

/// Advance the PLL by `dt` with the measured terminal voltage expressed in
/// the synchronous frame.
pub fn pll_step(v_t: Complex64, state: PllState, dt: f64) -> PllState {
    let v_q = (v_t * Complex64::from_polar(1.0, -state.phase)).im;
    let lim = state.omega_limit * state.omega0;
    let mut integral = state.integral + state.ki * v_q * dt;
    integral = integral.clamp(-lim, lim);
    let dw = (state.kp * v_q + integral).clamp(-lim, lim);
    PllState {
        phase: state.phase + dw * dt,
        omega: 1.0 + dw / state.omega0,
        integral,
        ..state
    }
}
