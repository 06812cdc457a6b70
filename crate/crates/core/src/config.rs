//! Versioned JSON run configuration: plant, controller, solver, scenario
//! overrides and tuning settings in one file. Every section is optional and
//! falls back to the built-in defaults.

use serde::{Deserialize, Serialize};

use crate::control::{ControllerConfig, ControllerMode};
use crate::error::{Error, Result};
use crate::plant::PlantParams;
use crate::scenarios::{InitialCondition, ScenarioSpec};
use crate::sim::{Event, SimConfig};
use crate::tuning::{Interval, ParamBounds, SqpOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// Replacements applied on top of a built-in scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub t_end: Option<f64>,
    pub events: Option<Vec<Event>>,
    pub initial: Option<InitialCondition>,
    pub v_w0: Option<f64>,
    pub p_ref0: Option<f64>,
}

impl ScenarioOverrides {
    pub fn apply(&self, mut spec: ScenarioSpec) -> ScenarioSpec {
        if let Some(t) = self.t_end {
            spec.t_end = t;
        }
        if let Some(e) = &self.events {
            spec.events = e.clone();
        }
        if let Some(i) = self.initial {
            spec.initial = i;
        }
        if let Some(v) = self.v_w0 {
            spec.v_w0 = v;
        }
        if let Some(p) = self.p_ref0 {
            spec.p_ref0 = p;
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    /// Weights on the normalised objectives (dvdc_int, p_max, t_r).
    pub weights: [f64; 3],
    /// Replacement box per parameter name; absent names keep the reference box.
    pub bounds: Vec<(String, Interval)>,
    pub sqp: SqpOptions,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            weights: [1.0; 3],
            bounds: Vec::new(),
            sqp: SqpOptions::default(),
        }
    }
}

impl TuningConfig {
    /// Reference box of `mode` with the configured replacements.
    pub fn bounds_for(&self, mode: ControllerMode) -> Result<ParamBounds> {
        let mut b = ParamBounds::for_mode(mode)?;
        for (name, iv) in &self.bounds {
            let k = b.names.iter().position(|n| n == name).ok_or_else(|| {
                Error::config(
                    format!("tuning.bounds.{name}"),
                    format!("{mode} has parameters {:?}", b.names),
                )
            })?;
            b.intervals[k] = *iv;
        }
        b.validate()?;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub plant: PlantParams,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    pub scenario: ScenarioOverrides,
    pub tuning: TuningConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: SCHEMA_VERSION,
            plant: PlantParams::default(),
            controller: ControllerConfig::default(),
            sim: SimConfig::default(),
            scenario: ScenarioOverrides::default(),
            tuning: TuningConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse and check everything that does not depend on the mode.
    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::config("config", format!("not valid JSON: {e}")))?;
        match probe.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::config(
                    "version",
                    format!("schema version {v} is not supported, expected {SCHEMA_VERSION}"),
                ))
            }
            None => return Err(Error::config("version", "missing schema version")),
        }
        let cfg: RunConfig = serde_json::from_value(probe)
            .map_err(|e| Error::config(field_of(&e.to_string()), e.to_string()))?;
        cfg.plant.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serialises")
    }

    /// Check the configuration against one mode and scenario.
    pub fn validate_for(&self, mode: ControllerMode, scenario: &ScenarioSpec) -> Result<()> {
        self.plant.validate()?;
        self.controller.validate(mode)?;
        self.sim.validate(&self.controller, mode)?;
        scenario.validate()
    }
}

/// Best-effort field name from a serde error message.
fn field_of(msg: &str) -> String {
    msg.split('`')
        .nth(1)
        .map(|s| s.to_string())
        .unwrap_or_else(|| "config".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::fault_scenario;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"version": 1}"#).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn version_is_required_and_checked() {
        let e = RunConfig::from_json("{}").unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "version"));
        let e = RunConfig::from_json(r#"{"version": 7}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "version"));
    }

    #[test]
    fn unknown_section_is_named() {
        let e = RunConfig::from_json(r#"{"version": 1, "controler": {}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "controler"), "{e}");
    }

    #[test]
    fn out_of_range_plant_parameter_is_named() {
        let e = RunConfig::from_json(r#"{"version": 1, "plant": {"grid": {"scr": -1}}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "grid.scr"), "{e}");
    }

    #[test]
    fn controller_checks_need_the_mode() {
        let cfg = RunConfig::from_json(
            r#"{"version": 1, "controller": {"limiter_scheme": "current_saturation"}}"#,
        )
        .unwrap();
        let s = fault_scenario(10.0, 0.15);
        assert!(cfg.validate_for(ControllerMode::GMgfm, &s).is_ok());
        assert!(cfg.validate_for(ControllerMode::GSgfm, &s).is_err());
    }

    #[test]
    fn scenario_overrides_apply() {
        let cfg = RunConfig::from_json(r#"{"version": 1, "scenario": {"t_end": 7.5}}"#).unwrap();
        let s = cfg.scenario.apply(fault_scenario(10.0, 0.15));
        assert_eq!(s.t_end, 7.5);
    }

    #[test]
    fn tuning_bounds_replace_by_name() {
        let cfg = RunConfig::from_json(
            r#"{"version": 1, "tuning": {"bounds": [["D", {"lo": 3.0, "hi": 4.0}]]}}"#,
        )
        .unwrap();
        let b = cfg.tuning.bounds_for(ControllerMode::MMgfm).unwrap();
        assert_eq!(b.intervals[1], Interval::new(3.0, 4.0));
        let e = cfg.tuning.bounds_for(ControllerMode::GMgfm).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "tuning.bounds.D"));
    }
}
