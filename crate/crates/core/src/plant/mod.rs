//! Physical models of the turbine, generator, back-to-back converter and
//! the grid-side network, and the one-step plant integrator.

pub mod aero;
pub mod dclink;
pub mod network;
pub mod pmsg;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use aero::TurbineParams;
pub use dclink::{DcLinkParams, DcLinkState};
pub use network::{
    grid_interface, FaultLocation, FilterParams, GridParams, LinearNetwork, LoadParams,
    NetworkDiscretization, NetworkPhasors, NetworkState, Topology,
};
pub use pmsg::PmsgParams;

/// States whose magnitude beyond this value marks a run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConverterParams {
    /// Largest AC voltage magnitude per unit of DC voltage.
    pub m_max: f64,
}

impl Default for ConverterParams {
    fn default() -> Self {
        Self { m_max: 1.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PlantParams {
    pub turbine: TurbineParams,
    pub pmsg: PmsgParams,
    pub dc_link: DcLinkParams,
    pub converter: ConverterParams,
    pub filter: FilterParams,
    pub grid: GridParams,
    pub load: LoadParams,
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        self.turbine.validate()?;
        self.pmsg.validate()?;
        self.dc_link.validate()?;
        self.filter.validate()?;
        self.grid.validate()?;
        self.load.validate()?;
        if !(self.converter.m_max > 0.5 && self.converter.m_max < 2.0) {
            return Err(Error::config("converter.m_max", "must lie in (0.5, 2)"));
        }
        Ok(())
    }
}

/// Rotor speed and electrical angle of the single-mass drivetrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivetrainState {
    pub omega_r: f64,
    pub theta_r: f64,
}

/// Swing equation of the single-mass drivetrain: 2H dω/dt = T_aero − T_e.
pub fn drivetrain_acceleration(h: f64, t_aero: f64, t_e: f64) -> f64 {
    (t_aero - t_e) / (2.0 * h)
}

/// Complete continuous state of the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub drivetrain: DrivetrainState,
    /// Blade pitch, degrees.
    pub beta: f64,
    /// Stator current (d + jq), generator convention.
    pub i_s: Complex64,
    pub dc: DcLinkState,
    pub net: NetworkState,
    /// Wind speed, m/s.
    pub v_w: f64,
    pub topology: Topology,
    /// Time since the last fault cleared while its remnant is extinguishing, s.
    #[serde(default)]
    pub fault_extinction: Option<f64>,
    pub msc_enabled: bool,
}

impl PlantState {
    /// Name of the first state that is non-finite or beyond the divergence
    /// limit, if any.
    pub fn divergence(&self) -> Option<&'static str> {
        let net = self.net.to_vec();
        let checks: [(&'static str, f64); 6] = [
            ("omega_r", self.drivetrain.omega_r),
            ("beta", self.beta),
            ("i_s", self.i_s.norm()),
            ("v_dc", self.dc.v_dc),
            ("network", net.amax()),
            ("theta_r", self.drivetrain.theta_r.sin()),
        ];
        for (name, v) in checks {
            if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
                return Some(name);
            }
        }
        if net.iter().any(|x| !x.is_finite()) {
            return Some("network");
        }
        None
    }
}

/// Grid-side converter command in the grid frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GscCommand {
    /// Average-model voltage source, limited by the available DC voltage.
    Voltage(Complex64),
    /// Modulation index; the converter voltage is `m · v_dc`.
    Modulation(Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Machine-side converter voltage applied to the stator (rotor frame).
    pub v_s: Complex64,
    pub gsc: GscCommand,
    /// Pitch actuator position, degrees.
    pub beta: f64,
}

/// Quantities available to the controllers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurements {
    pub v_c: Complex64,
    pub i_f: Complex64,
    /// Current leaving the PCC into grid, load and fault.
    pub i_o: Complex64,
    pub v_dc: f64,
    pub omega_r: f64,
    pub i_s: Complex64,
    pub v_w: f64,
    pub p: f64,
    pub q: f64,
}

/// Step-averaged power flows of the last step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepFlows {
    pub p_msc: f64,
    pub p_gsc: f64,
    pub p_chop: f64,
    /// Converter voltage actually applied.
    pub e: Complex64,
    /// Aerodynamic and electromagnetic torque at the start of the step.
    pub t_aero: f64,
    pub t_e: f64,
}

#[derive(Debug, Clone)]
pub struct Plant {
    pub params: PlantParams,
    network: LinearNetwork,
    dt: f64,
}

impl Plant {
    pub fn new(params: PlantParams, dt: f64, method: NetworkDiscretization) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("sim.dt", "must be > 0"));
        }
        let network = LinearNetwork::new(&params.filter, &params.grid, &params.load, dt, method)?;
        Ok(Self {
            params,
            network,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn network(&self) -> &LinearNetwork {
        &self.network
    }

    pub fn measure(&self, s: &PlantState) -> Measurements {
        let i_o = s
            .net
            .outgoing_current(s.topology, self.shunt_conductance(s));
        let pq = s.net.pcc_power();
        Measurements {
            v_c: s.net.v_c,
            i_f: s.net.i_f,
            i_o,
            v_dc: s.dc.v_dc,
            omega_r: s.drivetrain.omega_r,
            i_s: s.i_s,
            v_w: s.v_w,
            p: pq.re,
            q: pq.im,
        }
    }

    fn extinction_stage(s: &PlantState) -> Option<usize> {
        s.fault_extinction.and_then(LinearNetwork::extinction_stage)
    }

    /// Conductance currently shunting the PCC because of a fault.
    pub fn shunt_conductance(&self, s: &PlantState) -> f64 {
        self.network
            .shunt_conductance(s.topology, Self::extinction_stage(s))
    }

    /// Converter voltage realised for a command at DC voltage `v_dc`.
    pub fn converter_voltage(&self, cmd: GscCommand, v_dc: f64) -> Complex64 {
        let m_max = self.params.converter.m_max;
        match cmd {
            GscCommand::Voltage(e) => {
                let cap = m_max * v_dc;
                let n = e.norm();
                if n > cap {
                    e * (cap / n)
                } else {
                    e
                }
            }
            GscCommand::Modulation(m) => {
                let n = m.norm();
                let m = if n > m_max { m * (m_max / n) } else { m };
                m * v_dc
            }
        }
    }

    /// Advance the plant by one step with the command held constant.
    pub fn step(&self, s: &PlantState, cmd: &ControlCommand) -> (PlantState, StepFlows) {
        let dt = self.dt;
        let tp = &self.params.turbine;
        let mp = &self.params.pmsg;

        let e = if s.topology.converter {
            self.converter_voltage(cmd.gsc, s.dc.v_dc)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let stage = Self::extinction_stage(s);
        let net = self
            .network
            .step_extinguishing(&s.net, e, s.topology, stage);
        let p_gsc = (e * net.i_f_integral.conj()).re / dt;

        let beta = cmd.beta.clamp(tp.beta_min, tp.beta_max);
        let v_s = cmd.v_s;
        let msc = s.msc_enabled;
        let h = tp.h_inertia;
        let wbm = mp.omega_base();
        // y = [omega_r, theta_r, i_d, i_q, msc energy]
        let f = |y: &[f64; 5]| -> [f64; 5] {
            let w = y[0].max(0.0);
            let i_s = Complex64::new(y[2], y[3]);
            let t_aero = tp.aero_torque(s.v_w, w, beta);
            let (t_e, di, p) = if msc {
                (
                    mp.torque(i_s),
                    mp.current_derivative(i_s, v_s, w),
                    mp.terminal_power(v_s, i_s),
                )
            } else {
                (0.0, Complex64::new(0.0, 0.0), 0.0)
            };
            [
                drivetrain_acceleration(h, t_aero, t_e),
                wbm * w,
                di.re,
                di.im,
                p,
            ]
        };
        let y0 = [
            s.drivetrain.omega_r,
            s.drivetrain.theta_r,
            s.i_s.re,
            s.i_s.im,
            0.0,
        ];
        let y1 = crate::sim::rk4_step(f, &y0, dt);
        let p_msc = y1[4] / dt;

        let dc0 = s.dc;
        let dc = self.params.dc_link.step(dc0, p_msc, p_gsc, dt);
        let p_chop = if dc0.chopper_on {
            p_msc - p_gsc - self.params.dc_link.c_dc * (dc.v_dc * dc.v_dc - dc0.v_dc * dc0.v_dc)
                / (2.0 * dt)
        } else {
            0.0
        };

        let i_s0 = s.i_s;
        let next = PlantState {
            drivetrain: DrivetrainState {
                omega_r: y1[0].max(0.0),
                theta_r: y1[1].rem_euclid(2.0 * std::f64::consts::PI),
            },
            beta,
            i_s: if msc {
                Complex64::new(y1[2], y1[3])
            } else {
                Complex64::new(0.0, 0.0)
            },
            dc,
            net: net.state,
            v_w: s.v_w,
            topology: s.topology,
            fault_extinction: match (stage, s.fault_extinction) {
                (Some(_), Some(t)) => Some(t + dt),
                _ => None,
            },
            msc_enabled: msc,
        };
        let flows = StepFlows {
            p_msc,
            p_gsc,
            p_chop,
            e,
            t_aero: tp.aero_torque(s.v_w, s.drivetrain.omega_r, beta),
            t_e: if msc { mp.torque(i_s0) } else { 0.0 },
        };
        (next, flows)
    }
}
