//! Mode wiring of the turbine controllers and the steady operating point
//! each mode is started from.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::blocks::{FirstOrder, Pi, RateLimiter};
use super::cascade::{current_loop_gains, CurrentLoop, InnerCascade};
use super::config::{ControllerConfig, ControllerMode};
use super::limiter::{current_saturation, OverloadMitigation};
use super::modulation::modulation_wave;
use super::msmc::{msmc, optimal_power_ref, Region};
use super::pitch::PitchController;
use super::pll::{pll_step, PllState};
use super::virtual_machine::{VicAngle, VsmAngle};
use crate::error::{Error, Result};
use crate::plant::{
    ControlCommand, DcLinkState, DrivetrainState, GscCommand, LinearNetwork, Measurements,
    NetworkState, PlantParams, PlantState, Topology,
};

/// Smallest speed used when converting a power reference into a current.
const OMEGA_FLOOR: f64 = 0.1;
/// Voltage step beyond which the filtered feed-forward is bypassed, pu.
const FF_BYPASS: f64 = 0.1;
/// Smallest voltage used when converting a power reference into a current.
const VOLTAGE_FLOOR: f64 = 0.1;

/// Controller-internal signals exposed for recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlTelemetry {
    pub region: Region,
    pub current_limited: bool,
    pub overload_active: bool,
    /// Converter (or PLL) frequency, Hz.
    pub frequency: f64,
    /// Active-power reference of the grid-side converter where one exists.
    pub p_ref: f64,
    pub t_e_ref: f64,
}

#[derive(Debug, Clone)]
enum AngleSource {
    Pll(PllState),
    Vic(VicAngle),
    Vsm(VsmAngle),
}

#[derive(Debug, Clone)]
enum GscLoops {
    Following {
        dc: Pi<f64>,
        current: CurrentLoop,
        /// Low-pass on the voltage feed-forward, d and q axes.
        v_ff: [FirstOrder; 2],
    },
    Cascade(InnerCascade),
    Direct(OverloadMitigation),
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub mode: ControllerMode,
    cfg: ControllerConfig,
    plant: PlantParams,
    dt: f64,
    omega0: f64,
    pitch: PitchController,
    torque: RateLimiter,
    msc_current: Pi<Complex64>,
    msc_dc: Pi<f64>,
    power_ff: FirstOrder,
    angle: AngleSource,
    /// Phase added by the overload mitigation, rad.
    offset_phase: f64,
    gsc: GscLoops,
    v_dc_ref: f64,
    gsc_on_since: Option<f64>,
    msc_was_enabled: bool,
    e_scale: f64,
    telemetry: ControlTelemetry,
}

impl Controller {
    /// Build the controller and preload every state so that `state` is a
    /// fixed point. `state` should come from [`operating_point`] or be
    /// de-energised.
    pub fn new(
        mode: ControllerMode,
        cfg: &ControllerConfig,
        plant: &PlantParams,
        dt: f64,
        state: &PlantState,
        p_ref_plant: f64,
    ) -> Result<Self> {
        cfg.validate(mode)?;
        let omega0 = plant.grid.omega_base();
        let wb = omega0;
        let f = &plant.filter;
        let i_gains = current_loop_gains(cfg.current_bw_hz, f.l_f, f.r_f, wb);
        let v_gains = (cfg.voltage_kp, cfg.voltage_ki);
        let m = &plant.pmsg;
        let (mkp, mki) = current_loop_gains(cfg.msc_current_bw_hz, m.l_d, m.r_s, m.omega_base());
        let wn_dc = 2.0 * PI * cfg.dc_bw_hz;
        let c_dc = plant.dc_link.c_dc;
        // loops act on v_dc² with plant d(v²)/dt = 2(p_in − p_out)/C
        let dc_kp = cfg.dc_zeta * wn_dc * c_dc;
        let dc_ki = wn_dc * wn_dc * c_dc / 2.0;

        let angle = match mode {
            ControllerMode::Gfl => AngleSource::Pll(PllState::design(
                cfg.pll_bw_hz,
                cfg.pll_zeta,
                cfg.pll_omega_limit,
                omega0,
            )),
            ControllerMode::GMgfm | ControllerMode::GSgfm => {
                AngleSource::Vic(VicAngle::new(&cfg.vic_for(mode), omega0, dt))
            }
            ControllerMode::MMgfm | ControllerMode::MSgfm => {
                AngleSource::Vsm(VsmAngle::new(&cfg.vsm_for(mode), omega0, dt))
            }
        };
        let gsc = match mode {
            ControllerMode::Gfl => GscLoops::Following {
                dc: Pi::new(dc_kp, dc_ki),
                current: CurrentLoop::new(i_gains.0, i_gains.1, f.l_f),
                v_ff: [FirstOrder::low_pass(cfg.voltage_ff_tau, dt); 2],
            },
            ControllerMode::GMgfm | ControllerMode::MMgfm => GscLoops::Cascade(InnerCascade::new(
                v_gains,
                i_gains,
                f.l_f,
                f.c_f,
                cfg.limiter.i_max,
            )
            .with_virtual_impedance(cfg.virtual_impedance())),
            ControllerMode::GSgfm | ControllerMode::MSgfm => {
                GscLoops::Direct(OverloadMitigation::new(&cfg.limiter))
            }
        };

        let mut c = Self {
            mode,
            cfg: cfg.clone(),
            plant: plant.clone(),
            dt,
            omega0,
            pitch: PitchController::new(cfg.pitch.clone(), &plant.turbine, state.beta),
            torque: RateLimiter::new(cfg.torque_rate, 0.0),
            msc_current: Pi::new(mkp, mki),
            msc_dc: Pi::new(dc_kp, dc_ki),
            power_ff: FirstOrder::low_pass(cfg.power_ff_tau, dt),
            angle,
            offset_phase: 0.0,
            gsc,
            v_dc_ref: state.dc.v_dc,
            gsc_on_since: None,
            msc_was_enabled: state.msc_enabled,
            e_scale: 1.0,
            telemetry: ControlTelemetry {
                region: Region::Off,
                current_limited: false,
                overload_active: false,
                frequency: plant.grid.f0,
                p_ref: 0.0,
                t_e_ref: 0.0,
            },
        };
        c.settle(state, p_ref_plant);
        Ok(c)
    }

    pub fn telemetry(&self) -> ControlTelemetry {
        self.telemetry
    }

    /// Converter phase against the nominal synchronous frame, rad.
    pub fn phase(&self) -> f64 {
        self.offset_phase
            + match &self.angle {
                AngleSource::Pll(p) => p.phase,
                AngleSource::Vic(v) => v.phase,
                AngleSource::Vsm(v) => v.phase,
            }
    }

    /// Modulating wave of the single-loop modes at absolute time `t`.
    pub fn modulation_abc(&self, t: f64) -> Option<[f64; 3]> {
        if self.mode.is_single_loop() {
            let theta = self.omega0 * t + self.phase() + PI / 2.0;
            Some(modulation_wave(theta, self.cfg.e_ref * self.e_scale))
        } else {
            None
        }
    }

    fn msc_feed_forward(&self, i_s: Complex64, w: f64) -> Complex64 {
        let m = &self.plant.pmsg;
        Complex64::new(w * m.l_q * i_s.im, -w * m.l_d * i_s.re + w * m.psi_pm)
    }

    fn settle(&mut self, s: &PlantState, p_ref_plant: f64) {
        let meas_w = s.drivetrain.omega_r;
        let out = msmc(s.v_w, meas_w, p_ref_plant, &self.plant.turbine);
        self.torque.value = out.t_e_ref;
        if s.msc_enabled {
            let v_s = self.plant.pmsg.steady_voltage(s.i_s, meas_w);
            self.msc_current
                .reset_to(self.msc_feed_forward(s.i_s, meas_w) - v_s);
        }
        let pq = s.net.pcc_power();
        self.power_ff.settle(pq.re);
        let p_msc = self
            .plant
            .pmsg
            .terminal_power(self.plant.pmsg.steady_voltage(s.i_s, meas_w), s.i_s);
        self.msc_dc.reset_to(p_msc - pq.re);

        if !s.topology.converter {
            return;
        }
        self.gsc_on_since = Some(f64::NEG_INFINITY);
        let v = s.net.v_c;
        let i = s.net.i_f;
        let phase = match self.mode {
            ControllerMode::Gfl => v.arg(),
            ControllerMode::GMgfm | ControllerMode::MMgfm => (v + self.cfg.virtual_impedance() * i).arg(),
            ControllerMode::GSgfm | ControllerMode::MSgfm => {
                let e = self.equilibrium_voltage(s);
                e.arg()
            }
        };
        match &mut self.angle {
            AngleSource::Pll(p) => p.phase = phase,
            AngleSource::Vic(a) => a.phase = phase,
            AngleSource::Vsm(a) => a.phase = phase,
        }
        let rot = Complex64::from_polar(1.0, -phase);
        let e = self.equilibrium_voltage(s);
        match &mut self.gsc {
            GscLoops::Following { dc, current, v_ff } => {
                let vp = v * rot;
                let ip = i * rot;
                v_ff[0].settle(vp.re);
                v_ff[1].settle(vp.im);
                dc.reset_to(vp.re * ip.re);
                current.settle(e * rot, ip, vp);
            }
            GscLoops::Cascade(c) => c.settle(e * rot, v * rot, i * rot),
            GscLoops::Direct(_) => {}
        }
    }

    /// Converter voltage that holds the network state `s` steady.
    fn equilibrium_voltage(&self, s: &PlantState) -> Complex64 {
        let f = &self.plant.filter;
        s.net.v_c + Complex64::new(f.r_f, f.l_f) * s.net.i_f
    }

    /// One control step from measurements taken at time `t`.
    pub fn step(
        &mut self,
        t: f64,
        meas: &Measurements,
        topology: Topology,
        msc_enabled: bool,
        p_ref_plant: f64,
    ) -> ControlCommand {
        let dt = self.dt;
        let w = meas.omega_r;

        // machine-side master control and pitch
        let out = msmc(meas.v_w, w, p_ref_plant, &self.plant.turbine);
        let beta = self.pitch.step(out.delta_omega, dt);
        let t_cmd = self.torque.step(out.t_e_ref, dt);
        let p_star = optimal_power_ref(t_cmd, w);

        // DC-voltage reference, ramped while the link energises
        let d = self.cfg.v_dc_ref_rate * dt;
        self.v_dc_ref += (self.cfg.v_dc_ref - self.v_dc_ref).clamp(-d, d);

        // machine-side converter
        if msc_enabled && !self.msc_was_enabled {
            self.msc_current.reset_to(Complex64::new(0.0, 0.0));
            self.msc_dc.reset_to(0.0);
            self.v_dc_ref = meas.v_dc;
        }
        self.msc_was_enabled = msc_enabled;
        let pm = &self.plant.pmsg;
        let i_s_ref = if self.mode.gsc_regulates_dc() {
            Complex64::new(0.0, t_cmd / pm.psi_pm)
        } else {
            let ff = self.power_ff.step(meas.p);
            let err = self.v_dc_ref * self.v_dc_ref - meas.v_dc * meas.v_dc;
            let p_msc = ff + self.msc_dc.step(err, dt);
            Complex64::new(0.0, pm.iq_for_power(p_msc, w.max(OMEGA_FLOOR)))
        };
        let v_s = if msc_enabled {
            self.msc_feed_forward(meas.i_s, w) - self.msc_current.step(i_s_ref - meas.i_s, dt)
        } else {
            Complex64::new(0.0, 0.0)
        };

        // grid-side converter
        let gsc = if topology.converter {
            self.gsc_step(t, meas, p_star)
        } else {
            self.gsc_on_since = None;
            GscCommand::Voltage(Complex64::new(0.0, 0.0))
        };

        self.telemetry.region = out.region;
        self.telemetry.t_e_ref = t_cmd;
        self.telemetry.p_ref = p_star;
        ControlCommand { v_s, gsc, beta }
    }

    fn gsc_step(&mut self, t: f64, meas: &Measurements, p_star: f64) -> GscCommand {
        let dt = self.dt;
        let since = *self.gsc_on_since.get_or_insert(t);
        if since == t {
            // fresh enable: restart the regulators from rest
            match &mut self.gsc {
                GscLoops::Following { dc, current, v_ff } => {
                    dc.reset_to(0.0);
                    current.pi.reset_to(Complex64::new(0.0, 0.0));
                    v_ff.iter_mut().for_each(|f| f.settle(0.0));
                }
                GscLoops::Cascade(c) => {
                    c.v_pi.reset_to(Complex64::new(0.0, 0.0));
                    c.current.pi.reset_to(Complex64::new(0.0, 0.0));
                }
                GscLoops::Direct(o) => o.state = 0.0,
            }
        }
        let ramp = if self.cfg.soft_start > 0.0 {
            ((t - since) / self.cfg.soft_start).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let e_ref = self.cfg.e_ref * ramp;

        let dev = match &mut self.angle {
            AngleSource::Pll(p) => {
                *p = pll_step(meas.v_c, *p, dt);
                (p.omega - 1.0) * self.omega0
            }
            AngleSource::Vic(a) => {
                let (w, _) = a.step(meas.v_dc, self.v_dc_ref, dt);
                -(w - self.omega0)
            }
            AngleSource::Vsm(a) => {
                let (w, _) = a.step(p_star, meas.p, dt);
                -(w - self.omega0)
            }
        };

        let mut limited = false;
        let mut overload = false;
        let mut offset_rate = 0.0;
        let phase_now = self.phase();
        let rot = Complex64::from_polar(1.0, -phase_now);
        let cmd = match &mut self.gsc {
            GscLoops::Following { dc, current, v_ff } => {
                let vp = meas.v_c * rot;
                let ip = meas.i_f * rot;
                let err = meas.v_dc * meas.v_dc - self.v_dc_ref * self.v_dc_ref;
                let p_ref = dc.step(err, dt);
                let demand = Complex64::new(p_ref / vp.re.max(VOLTAGE_FLOOR), 0.0);
                let (i_ref, sat) = current_saturation(demand, self.cfg.limiter.i_max);
                limited = sat;
                let mut vf = Complex64::new(v_ff[0].step(vp.re), v_ff[1].step(vp.im));
                if (vp - vf).norm() > FF_BYPASS {
                    v_ff[0].settle(vp.re);
                    v_ff[1].settle(vp.im);
                    vf = vp;
                }
                let e = current.step(i_ref, ip, vf, dt);
                GscCommand::Voltage(e / rot)
            }
            GscLoops::Cascade(c) => {
                let out = c.step(
                    Complex64::new(e_ref, 0.0),
                    meas.v_c * rot,
                    meas.i_f * rot,
                    dt,
                );
                limited = out.saturated;
                GscCommand::Voltage(out.e / rot)
            }
            GscLoops::Direct(o) => {
                let act = o.step(meas.p, dt);
                overload = act.active;
                offset_rate = act.omega_offset;
                self.e_scale = act.e_scale;
                GscCommand::Modulation(Complex64::from_polar(e_ref * act.e_scale, phase_now))
            }
        };
        self.offset_phase += offset_rate * dt;
        self.telemetry.current_limited = limited;
        self.telemetry.overload_active = overload;
        self.telemetry.frequency = (self.omega0 + dev + offset_rate) / (2.0 * PI);
        cmd
    }
}

/// Where a run starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub state: PlantState,
    pub p_ref_plant: f64,
}

/// Steady operating point of `mode` at wind speed `v_w` with plant power
/// reference `p_ref_plant`, connected to the grid.
pub fn operating_point(
    plant: &PlantParams,
    network: &LinearNetwork,
    mode: ControllerMode,
    cfg: &ControllerConfig,
    v_w: f64,
    p_ref_plant: f64,
) -> Result<OperatingPoint> {
    let tp = &plant.turbine;
    let pm = &plant.pmsg;
    let topo = Topology::GRID;
    let e_ref = cfg.e_ref;
    let z_v = cfg.virtual_impedance();

    // electrical side at speed w: generator torque and network state
    let electrical = |w: f64| -> Result<(f64, NetworkState)> {
        let t_ref = msmc(v_w, w, p_ref_plant, tp).t_e_ref;
        if mode.gsc_regulates_dc() {
            let iq = t_ref / pm.psi_pm;
            let i_s = Complex64::new(0.0, iq);
            let p_msc = pm.terminal_power(pm.steady_voltage(i_s, w), i_s);
            let net = solve_gsc(network, mode, e_ref, z_v, topo, |x, e| {
                (e * x.i_f.conj()).re - p_msc
            })?;
            Ok((t_ref, net))
        } else {
            let p_star = optimal_power_ref(t_ref, w);
            let net = solve_gsc(network, mode, e_ref, z_v, topo, |x, _| x.pcc_power().re - p_star)?;
            let e = net.v_c + plant.filter.impedance() * net.i_f;
            let p_gsc = (e * net.i_f.conj()).re;
            let iq = pm.iq_for_power(p_gsc, w);
            Ok((pm.psi_pm * iq, net))
        }
    };

    let region = msmc(v_w, 1.0, p_ref_plant, tp).region;
    let (w, beta) = match region {
        Region::Rated | Region::Curtail => {
            let (t_e, _) = electrical(1.0)?;
            let beta = tp.pitch_for_torque(v_w, 1.0, t_e);
            if (tp.aero_torque(v_w, 1.0, beta) - t_e).abs() > 1e-6 {
                return Err(Error::config(
                    "scenario.initial",
                    format!("wind {v_w} m/s cannot sustain the requested power at rated speed"),
                ));
            }
            (1.0, beta)
        }
        Region::Mppt | Region::MinSpeed => {
            let g = |w: f64| -> Result<f64> { Ok(tp.aero_torque(v_w, w, 0.0) - electrical(w)?.0) };
            // highest-speed equilibrium: scan down from just above rated speed
            let mut hi = 1.05;
            let mut lo = hi;
            let g_hi = g(hi)?;
            loop {
                lo -= 0.01;
                if lo < tp.omega_min * 0.5 {
                    return Err(Error::config(
                        "scenario.initial",
                        format!("no speed equilibrium at {v_w} m/s"),
                    ));
                }
                if g(lo)? * g_hi <= 0.0 {
                    break;
                }
                hi = lo;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(lo)? * g(mid)? <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            (0.5 * (lo + hi), 0.0)
        }
        Region::Off => {
            return Err(Error::config(
                "scenario.initial",
                format!("wind {v_w} m/s is outside the operating envelope"),
            ))
        }
    };
    let (t_e, net) = electrical(w)?;
    let i_s = Complex64::new(0.0, t_e / pm.psi_pm);
    Ok(OperatingPoint {
        state: PlantState {
            drivetrain: DrivetrainState {
                omega_r: w,
                theta_r: 0.0,
            },
            beta,
            i_s,
            dc: DcLinkState {
                v_dc: cfg.v_dc_ref,
                chopper_on: false,
            },
            net,
            v_w,
            topology: topo,
            fault_extinction: None,
            msc_enabled: true,
        },
        p_ref_plant,
    })
}

/// Solve for the converter voltage that satisfies the power condition
/// `power(x, e) = 0` and the mode's voltage condition.
fn solve_gsc(
    network: &LinearNetwork,
    mode: ControllerMode,
    e_ref: f64,
    z_v: Complex64,
    topo: Topology,
    power: impl Fn(&NetworkState, Complex64) -> f64,
) -> Result<NetworkState> {
    let residual = |e: Complex64| -> Result<[f64; 2]> {
        let x = network.steady_state(e, topo)?;
        let second = match mode {
            ControllerMode::Gfl => (x.v_c * x.i_f.conj()).im,
            ControllerMode::GMgfm | ControllerMode::MMgfm => (x.v_c + z_v * x.i_f).norm() - e_ref,
            ControllerMode::GSgfm | ControllerMode::MSgfm => e.norm() - e_ref,
        };
        Ok([power(&x, e), second])
    };
    let mut e = Complex64::from_polar(1.05, 0.3);
    for _ in 0..100 {
        let r = residual(e)?;
        if r[0].abs() < 1e-13 && r[1].abs() < 1e-13 {
            return network.steady_state(e, topo);
        }
        let h = 1e-7;
        let rx = residual(e + h)?;
        let ry = residual(e + Complex64::new(0.0, h))?;
        let j = [
            [(rx[0] - r[0]) / h, (ry[0] - r[0]) / h],
            [(rx[1] - r[1]) / h, (ry[1] - r[1]) / h],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        let dx = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let dy = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        e -= Complex64::new(dx, dy);
    }
    let r = residual(e)?;
    if r[0].abs() < 1e-9 && r[1].abs() < 1e-9 {
        network.steady_state(e, topo)
    } else {
        Err(Error::config(
            "scenario.initial",
            "no converter operating point satisfies the power and voltage targets",
        ))
    }
}

/// De-energised plant: rotor spinning at rated speed, DC link discharged,
/// converters blocked and the network islanded.
pub fn de_energized(plant: &PlantParams, v_w: f64) -> PlantState {
    let beta = plant.turbine.pitch_for_torque(v_w, 1.0, 0.0);
    PlantState {
        drivetrain: DrivetrainState {
            omega_r: 1.0,
            theta_r: 0.0,
        },
        beta,
        i_s: Complex64::new(0.0, 0.0),
        dc: DcLinkState {
            v_dc: 0.0,
            chopper_on: false,
        },
        net: NetworkState::default(),
        v_w,
        topology: Topology {
            grid: false,
            fault: false,
            load: false,
            converter: false,
        },
        fault_extinction: None,
        msc_enabled: false,
    }
}
