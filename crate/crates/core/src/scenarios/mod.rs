//! Built-in scenario timelines, verdict detectors and the side-by-side
//! comparison harness.

pub mod verdict;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControllerConfig, ControllerMode};
use crate::error::{Error, Result};
use crate::plant::PlantParams;
use crate::sim::{run, Event, EventKind, SimConfig, TimeSeries};
pub use verdict::{
    peak_current, peak_vdc_deviation, recovered_post_fault, stable, Verdict, RECOVERY_BAND,
    RECOVERY_WINDOW, STABILITY_P2P, STABILITY_WINDOW,
};

/// Wind speed used for operation at rated power, m/s.
pub const RATED_WIND: f64 = 12.0;
/// Default fault inception time, s.
pub const FAULT_TIME: f64 = 5.0;
/// Default fault duration, s.
pub const FAULT_DURATION: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    RatedEquilibrium,
    DeEnergized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub scr: f64,
    pub modes: Vec<ControllerMode>,
    pub events: Vec<Event>,
    pub t_end: f64,
    pub initial: InitialCondition,
    /// Wind speed at t = 0, m/s.
    pub v_w0: f64,
    /// Plant power reference at t = 0, pu.
    pub p_ref0: f64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scr.is_finite() && self.scr > 0.0) {
            return Err(Error::config("scenario.scr", "must be > 0"));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::config("scenario.t_end", "must be > 0"));
        }
        if !(self.v_w0.is_finite() && self.v_w0 >= 0.0) {
            return Err(Error::config("scenario.v_w0", "must be >= 0"));
        }
        if !(self.p_ref0.is_finite() && self.p_ref0 >= 0.0) {
            return Err(Error::config("scenario.p_ref0", "must be >= 0"));
        }
        let mut order: Vec<&Event> = self.events.iter().collect();
        order.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut fault = false;
        for e in order {
            if !(e.time.is_finite() && e.time >= 0.0 && e.time <= self.t_end) {
                return Err(Error::config(
                    "scenario.events",
                    format!("event at t = {} lies outside [0, {}]", e.time, self.t_end),
                ));
            }
            match e.kind {
                EventKind::FaultApply if fault => {
                    return Err(Error::config(
                        "scenario.events",
                        format!("FaultApply at t = {} while a fault is active", e.time),
                    ))
                }
                EventKind::FaultApply => fault = true,
                EventKind::FaultClear if !fault => {
                    return Err(Error::config(
                        "scenario.events",
                        format!("FaultClear at t = {} without a preceding FaultApply", e.time),
                    ))
                }
                EventKind::FaultClear => fault = false,
                EventKind::WindStep { v_w } if !(v_w.is_finite() && v_w >= 0.0) => {
                    return Err(Error::config("scenario.events", "wind speed must be >= 0"))
                }
                EventKind::PowerSetpoint { p } if !(p.is_finite() && p >= 0.0) => {
                    return Err(Error::config("scenario.events", "power setpoint must be >= 0"))
                }
                _ => {}
            }
        }
        if self.initial == InitialCondition::DeEnergized {
            let has = |k: EventKind| self.events.iter().any(|e| e.kind == k);
            if !(has(EventKind::EnableMsc) && has(EventKind::EnableGsc)) {
                return Err(Error::config(
                    "scenario.initial",
                    "a de-energised start needs EnableMSC and EnableGSC events (black start)",
                ));
            }
            if let Some(m) = self.modes.iter().find(|m| m.gsc_regulates_dc()) {
                return Err(Error::config(
                    "scenario.modes",
                    format!("black start supports m-mgfm and m-sgfm only, got {m}"),
                ));
            }
        }
        Ok(())
    }

    /// Time of the first FaultApply and its matching FaultClear.
    pub fn fault_window(&self) -> Option<(f64, f64)> {
        let apply = self
            .events
            .iter()
            .filter(|e| e.kind == EventKind::FaultApply)
            .map(|e| e.time)
            .min_by(f64::total_cmp)?;
        let clear = self
            .events
            .iter()
            .filter(|e| e.kind == EventKind::FaultClear && e.time >= apply)
            .map(|e| e.time)
            .min_by(f64::total_cmp)
            .unwrap_or(self.t_end);
        Some((apply, clear))
    }
}

pub fn region_control_scenario(scr: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: "region".into(),
        scr,
        modes: ControllerMode::ALL.to_vec(),
        events: vec![Event::new(30.0, EventKind::WindStep { v_w: 15.0 })],
        t_end: 60.0,
        initial: InitialCondition::RatedEquilibrium,
        v_w0: 10.0,
        p_ref0: 1.0,
    }
}

pub fn curtailment_scenario(scr: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: "curtailment".into(),
        scr,
        modes: ControllerMode::ALL.to_vec(),
        events: vec![Event::new(30.0, EventKind::PowerSetpoint { p: 0.8 })],
        t_end: 60.0,
        initial: InitialCondition::RatedEquilibrium,
        v_w0: RATED_WIND,
        p_ref0: 1.0,
    }
}

pub fn fault_scenario(scr: f64, duration: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: "fault".into(),
        scr,
        modes: ControllerMode::ALL.to_vec(),
        events: vec![
            Event::new(FAULT_TIME, EventKind::FaultApply),
            Event::new(FAULT_TIME + duration, EventKind::FaultClear),
        ],
        t_end: 15.0,
        initial: InitialCondition::RatedEquilibrium,
        v_w0: RATED_WIND,
        p_ref0: 1.0,
    }
}

pub fn black_start_scenario() -> ScenarioSpec {
    ScenarioSpec {
        name: "black-start".into(),
        scr: 10.0,
        modes: vec![ControllerMode::MMgfm, ControllerMode::MSgfm],
        events: vec![
            Event::new(0.0, EventKind::DisconnectGrid),
            Event::new(0.0, EventKind::EnableMsc),
            Event::new(20.0, EventKind::EnableGsc),
            Event::new(25.0, EventKind::ConnectLoad),
        ],
        t_end: 40.0,
        initial: InitialCondition::DeEnergized,
        v_w0: RATED_WIND,
        p_ref0: 1.0,
    }
}

/// Rated-condition power step used to score virtual-machine gains.
pub fn power_step_scenario(scr: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: "power-step".into(),
        scr,
        modes: ControllerMode::ALL.to_vec(),
        events: vec![Event::new(1.0, EventKind::PowerSetpoint { p: 0.8 })],
        t_end: 15.0,
        initial: InitialCondition::RatedEquilibrium,
        v_w0: RATED_WIND,
        p_ref0: 1.0,
    }
}

/// Names accepted by [`by_name`] with a one-line description each.
pub const BUILT_IN: [(&str, &str); 5] = [
    ("region", "wind step 10 -> 15 m/s at 30 s, 60 s"),
    ("curtailment", "power setpoint 1.0 -> 0.8 pu at 30 s under rated wind, 60 s"),
    ("fault", "three-phase shunt fault at the PCC at 5 s for 150 ms, 15 s"),
    ("black-start", "islanded start from rest, GSC enabled at 20 s, RL load at 25 s, 40 s"),
    ("power-step", "power setpoint 1.0 -> 0.8 pu at 1 s under rated wind, 15 s"),
];

pub fn by_name(name: &str, scr: f64) -> Result<ScenarioSpec> {
    let spec = match name {
        "region" => region_control_scenario(scr),
        "curtailment" => curtailment_scenario(scr),
        "fault" => fault_scenario(scr, FAULT_DURATION),
        "black-start" => ScenarioSpec {
            scr,
            ..black_start_scenario()
        },
        "power-step" => power_step_scenario(scr),
        other => {
            let known: Vec<&str> = BUILT_IN.iter().map(|(n, _)| *n).collect();
            return Err(Error::config(
                "scenario",
                format!("unknown scenario '{other}', expected one of {}", known.join(", ")),
            ));
        }
    };
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeRun {
    pub mode: ControllerMode,
    pub series: TimeSeries,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: ScenarioSpec,
    pub runs: Vec<ModeRun>,
}

impl ScenarioResult {
    pub fn get(&self, mode: ControllerMode) -> Option<&ModeRun> {
        self.runs.iter().find(|r| r.mode == mode)
    }
}

/// Run one mode and score it.
pub fn run_mode(
    scenario: &ScenarioSpec,
    mode: ControllerMode,
    cfg: &ControllerConfig,
    plant: &PlantParams,
    sim: &SimConfig,
) -> Result<ModeRun> {
    let series = run(scenario, mode, cfg, plant, sim)?;
    let verdict = Verdict::assess(&series, scenario);
    Ok(ModeRun {
        mode,
        series,
        verdict,
    })
}

/// Run every mode of `modes` on the same scenario, concurrently, keeping the
/// given mode order in the result.
pub fn compare(
    modes: &[ControllerMode],
    scenario: &ScenarioSpec,
    cfg: &ControllerConfig,
    plant: &PlantParams,
    sim: &SimConfig,
) -> Result<ScenarioResult> {
    scenario.validate()?;
    let runs = modes
        .par_iter()
        .map(|&m| run_mode(scenario, m, cfg, plant, sim))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioResult {
        scenario: scenario.clone(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_are_pure() {
        assert_eq!(region_control_scenario(2.5), region_control_scenario(2.5));
        assert_eq!(black_start_scenario(), black_start_scenario());
    }

    #[test]
    fn region_has_single_wind_step() {
        let s = region_control_scenario(10.0);
        let steps: Vec<_> = s
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::WindStep { .. }))
            .collect();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].time, 30.0);
        assert_eq!(s.t_end, 60.0);
        assert_eq!(s.v_w0, 10.0);
    }

    #[test]
    fn built_ins_validate() {
        for (name, _) in BUILT_IN {
            by_name(name, 10.0).unwrap().validate().unwrap();
        }
        assert!(by_name("nope", 10.0).is_err());
    }

    #[test]
    fn clear_before_apply_is_rejected() {
        let mut s = fault_scenario(10.0, 0.15);
        s.events = vec![
            Event::new(5.0, EventKind::FaultClear),
            Event::new(6.0, EventKind::FaultApply),
        ];
        match s.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "scenario.events"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn event_outside_run_is_rejected() {
        let mut s = region_control_scenario(10.0);
        s.events.push(Event::new(61.0, EventKind::FaultApply));
        assert!(s.validate().is_err());
    }

    #[test]
    fn de_energised_start_needs_black_start_timeline() {
        let mut s = region_control_scenario(10.0);
        s.initial = InitialCondition::DeEnergized;
        assert!(s.validate().is_err());
        let mut b = black_start_scenario();
        b.modes.push(ControllerMode::Gfl);
        assert!(b.validate().is_err());
    }

    #[test]
    fn fault_window_pairs_apply_and_clear() {
        let s = fault_scenario(10.0, 0.15);
        let (a, c) = s.fault_window().unwrap();
        assert_eq!(a, FAULT_TIME);
        assert!((c - a - 0.15).abs() < 1e-12);
        assert!(region_control_scenario(10.0).fault_window().is_none());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = fault_scenario(2.5, 0.2);
        let js = serde_json::to_string(&s).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn empty_mode_list_gives_empty_result() {
        let r = compare(
            &[],
            &region_control_scenario(10.0),
            &ControllerConfig::default(),
            &PlantParams::default(),
            &SimConfig::default(),
        )
        .unwrap();
        assert!(r.runs.is_empty());
    }
}
