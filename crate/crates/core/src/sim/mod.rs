//! Fixed-step simulation of the coupled plant and controller with a
//! scheduled event timeline.

use serde::{Deserialize, Serialize};

use crate::control::{de_energized, dq_to_abc, operating_point, Controller, ControllerConfig, ControllerMode};
use crate::error::{Error, Result};
use crate::plant::{NetworkDiscretization, NetworkState, Plant, PlantParams, PlantState};
use crate::scenarios::{InitialCondition, ScenarioSpec};

/// Classic fourth-order Runge-Kutta step for an autonomous system.
pub fn rk4_step<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], y: &[f64; N], h: f64) -> [f64; N] {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| -> [f64; N] {
        let mut out = *a;
        for i in 0..N {
            out[i] += s * b[i];
        }
        out
    };
    let k1 = f(y);
    let k2 = f(&add(y, &k1, 0.5 * h));
    let k3 = f(&add(y, &k2, 0.5 * h));
    let k4 = f(&add(y, &k3, h));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// RK4 for the machine states, exact zero-order-hold for the linear network.
    #[default]
    Rk4,
    /// Trapezoidal rule for the linear network, explicit RK4 coupling for the rest.
    TrapezoidalLinear,
}

impl Solver {
    pub fn network(self) -> NetworkDiscretization {
        match self {
            Solver::Rk4 => NetworkDiscretization::Exact,
            Solver::TrapezoidalLinear => NetworkDiscretization::Trapezoidal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    /// Overrides the scenario's own end time when set.
    pub t_end: Option<f64>,
    pub record_every: usize,
    pub solver: Solver,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: None,
            record_every: 50,
            solver: Solver::Rk4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, cfg: &ControllerConfig, mode: ControllerMode) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("sim.dt", "must be > 0"));
        }
        if let Some(t_end) = self.t_end {
            if !(t_end >= self.dt && t_end.is_finite()) {
                return Err(Error::config("sim.t_end", "must be >= dt"));
            }
        }
        if self.record_every == 0 {
            return Err(Error::config("sim.record_every", "must be >= 1"));
        }
        for (name, tau) in cfg.time_constants(mode) {
            if tau < 10.0 * self.dt * (1.0 - 1e-9) {
                return Err(Error::config(
                    name,
                    format!(
                        "time constant {tau:.3e} s is shorter than 10·dt = {:.3e} s",
                        10.0 * self.dt
                    ),
                ));
            }
        }
        Ok(())
    }

    /// End time of a run of `scenario`.
    pub fn horizon(&self, scenario: &ScenarioSpec) -> f64 {
        self.t_end.unwrap_or(scenario.t_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    WindStep { v_w: f64 },
    PowerSetpoint { p: f64 },
    FaultApply,
    FaultClear,
    #[serde(rename = "enable_gsc")]
    EnableGsc,
    #[serde(rename = "enable_msc")]
    EnableMsc,
    ConnectLoad,
    DisconnectGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn new(time: f64, kind: EventKind) -> Self {
        Self { time, kind }
    }
}

/// Recorded channel names, in output order.
pub const CHANNELS: [&str; 19] = [
    "v_dc", "P", "Q", "omega_r", "beta", "i_a", "i_b", "i_c", "v_t", "f", "i_mag", "i_peak",
    "v_w", "p_ref", "t_e_ref", "region", "i_limited", "overload", "chopper",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub scenario: String,
    pub mode: ControllerMode,
    pub scr: f64,
    pub dt: f64,
    pub diverged: bool,
    pub diverged_at: Option<f64>,
    pub diverged_state: Option<String>,
}

/// Uniformly sampled channels sharing the time vector `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub channels: Vec<(String, Vec<f64>)>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn sample_interval(&self) -> f64 {
        if self.t.len() > 1 {
            self.t[1] - self.t[0]
        } else {
            0.0
        }
    }
}

/// Apply one event to the plant state and references.
fn apply_event(kind: EventKind, s: &mut PlantState, p_ref: &mut f64) {
    match kind {
        EventKind::WindStep { v_w } => s.v_w = v_w,
        EventKind::PowerSetpoint { p } => *p_ref = p,
        EventKind::FaultApply => {
            s.topology.fault = true;
            s.fault_extinction = None;
        }
        EventKind::FaultClear => {
            s.topology.fault = false;
            s.fault_extinction = Some(0.0);
        }
        EventKind::EnableGsc => s.topology.converter = true,
        EventKind::EnableMsc => s.msc_enabled = true,
        EventKind::ConnectLoad => s.topology.load = true,
        EventKind::DisconnectGrid => {
            s.topology.grid = false;
            s.net.i_g = NetworkState::default().i_g;
        }
    }
}

/// Execute `scenario` for one controller mode.
pub fn run(
    scenario: &ScenarioSpec,
    mode: ControllerMode,
    cfg: &ControllerConfig,
    plant_params: &PlantParams,
    sim: &SimConfig,
) -> Result<TimeSeries> {
    scenario.validate()?;
    sim.validate(cfg, mode)?;
    if scenario.initial == InitialCondition::DeEnergized && mode.gsc_regulates_dc() {
        return Err(Error::config(
            "mode",
            format!("{} starts de-energised and needs m-mgfm or m-sgfm, got {mode}", scenario.name),
        ));
    }
    let t_end = sim.horizon(scenario);
    if t_end < sim.dt {
        return Err(Error::config("sim.t_end", "must be >= dt"));
    }
    let mut params = plant_params.clone();
    params.grid.scr = scenario.scr;
    let plant = Plant::new(params, sim.dt, sim.solver.network())?;
    let (mut state, mut p_ref) = match scenario.initial {
        InitialCondition::RatedEquilibrium => {
            let op = operating_point(
                &plant.params,
                plant.network(),
                mode,
                cfg,
                scenario.v_w0,
                scenario.p_ref0,
            )?;
            (op.state, op.p_ref_plant)
        }
        InitialCondition::DeEnergized => (de_energized(&plant.params, scenario.v_w0), scenario.p_ref0),
    };
    let mut ctl = Controller::new(mode, cfg, &plant.params, sim.dt, &state, p_ref)?;

    let mut events: Vec<(usize, Event)> = scenario.events.iter().copied().enumerate().collect();
    events.sort_by(|a, b| a.1.time.total_cmp(&b.1.time).then(a.0.cmp(&b.0)));
    let mut next_event = 0;

    let n_steps = (t_end / sim.dt).round() as usize;
    let n_rec = n_steps / sim.record_every + 1;
    let mut t_out = Vec::with_capacity(n_rec);
    let mut data: Vec<Vec<f64>> = vec![Vec::with_capacity(n_rec); CHANNELS.len()];
    let omega0 = plant.params.grid.omega_base();

    let mut diverged: Option<(f64, &'static str)> = None;
    let mut i_peak: f64 = 0.0;
    let mut telemetry = ctl.telemetry();
    let mut since_record = 0usize;

    for k in 0..=n_steps {
        let t = k as f64 * sim.dt;
        while next_event < events.len() && events[next_event].1.time <= t + 1e-9 * sim.dt {
            apply_event(events[next_event].1.kind, &mut state, &mut p_ref);
            next_event += 1;
        }
        i_peak = i_peak.max(state.net.i_f.norm());

        let meas = plant.measure(&state);
        if diverged.is_none() {
            let cmd = ctl.step(t, &meas, state.topology, state.msc_enabled, p_ref);
            telemetry = ctl.telemetry();
            if k < n_steps {
                let (next, _) = plant.step(&state, &cmd);
                if let Some(field) = next.divergence() {
                    diverged = Some((t + sim.dt, field));
                } else {
                    state = next;
                }
            }
        }

        if since_record == 0 {
            let i_abc = dq_to_abc(meas.i_f, omega0 * t);
            let chopper = state.dc.chopper_on as u8 as f64;
            let values = [
                meas.v_dc,
                meas.p,
                meas.q,
                meas.omega_r,
                state.beta,
                i_abc[0],
                i_abc[1],
                i_abc[2],
                meas.v_c.norm(),
                telemetry.frequency,
                meas.i_f.norm(),
                i_peak,
                state.v_w,
                telemetry.p_ref,
                telemetry.t_e_ref,
                telemetry.region.code(),
                telemetry.current_limited as u8 as f64,
                telemetry.overload_active as u8 as f64,
                chopper,
            ];
            t_out.push(t);
            for (col, v) in data.iter_mut().zip(values) {
                col.push(v);
            }
            i_peak = 0.0;
        }
        since_record = (since_record + 1) % sim.record_every;
    }

    Ok(TimeSeries {
        t: t_out,
        channels: CHANNELS
            .iter()
            .map(|s| s.to_string())
            .zip(data)
            .collect(),
        meta: SeriesMeta {
            scenario: scenario.name.clone(),
            mode,
            scr: scenario.scr,
            dt: sim.dt,
            diverged: diverged.is_some(),
            diverged_at: diverged.map(|d| d.0),
            diverged_state: diverged.map(|d| d.1.to_string()),
        },
    })
}
