use serde::Serialize;

use super::{InitialCondition, ScenarioSpec};
use crate::plant::DIVERGENCE_LIMIT;
use crate::sim::TimeSeries;

/// Length of the closing window inspected by the stability detector, s.
pub const STABILITY_WINDOW: f64 = 5.0;
/// Largest peak-to-peak active power tolerated in that window, pu.
pub const STABILITY_P2P: f64 = 0.05;
/// Time allowed after fault clearing for power to come back, s.
pub const RECOVERY_WINDOW: f64 = 2.0;
/// Relative band around pre-fault power counted as recovered.
pub const RECOVERY_BAND: f64 = 0.05;
/// Averaging window before fault inception for the pre-fault power, s.
const PRE_FAULT_WINDOW: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub stable: bool,
    pub diverged: bool,
    pub peak_current: f64,
    pub peak_vdc_dev: f64,
    /// `None` when the scenario has no fault.
    pub recovered_post_fault: Option<bool>,
}

impl Verdict {
    pub fn assess(series: &TimeSeries, scenario: &ScenarioSpec) -> Self {
        let fault = scenario.fault_window();
        let vdc_from = match scenario.initial {
            InitialCondition::RatedEquilibrium => 0.0,
            InitialCondition::DeEnergized => {
                let v = series.channel("v_dc").unwrap_or(&[]);
                v.iter()
                    .position(|&x| x >= 1.0)
                    .map(|i| series.t[i])
                    .unwrap_or(f64::INFINITY)
            }
        };
        Self {
            stable: stable(series),
            diverged: series.meta.diverged,
            peak_current: peak_current(series, fault),
            peak_vdc_dev: peak_vdc_deviation(series, 1.0, vdc_from),
            recovered_post_fault: fault.map(|(a, c)| recovered_post_fault(series, a, c)),
        }
    }
}

/// Bounded states and a settled active power over the closing window.
pub fn stable(series: &TimeSeries) -> bool {
    if series.meta.diverged || series.is_empty() {
        return false;
    }
    let bounded = series
        .channels
        .iter()
        .all(|(_, v)| v.iter().all(|x| x.is_finite() && x.abs() < DIVERGENCE_LIMIT));
    if !bounded {
        return false;
    }
    let Some(p) = series.channel("P") else {
        return false;
    };
    let t_last = series.t[series.len() - 1];
    let from = t_last - STABILITY_WINDOW;
    let (lo, hi) = series
        .t
        .iter()
        .zip(p)
        .filter(|(t, _)| **t >= from - 1e-9)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &x)| {
            (lo.min(x), hi.max(x))
        });
    hi - lo < STABILITY_P2P
}

/// Largest converter current magnitude, restricted to `(start, end]` when a
/// window is given.
pub fn peak_current(series: &TimeSeries, window: Option<(f64, f64)>) -> f64 {
    let Some(i) = series.channel("i_peak") else {
        return f64::NAN;
    };
    let eps = 1e-9;
    series
        .t
        .iter()
        .zip(i)
        .filter(|(t, _)| match window {
            Some((a, b)) => **t > a + eps && **t <= b + eps,
            None => true,
        })
        .fold(0.0, |m, (_, &x)| m.max(x))
}

/// Largest |v_dc − v_ref| from `t_from` on.
pub fn peak_vdc_deviation(series: &TimeSeries, v_ref: f64, t_from: f64) -> f64 {
    let Some(v) = series.channel("v_dc") else {
        return f64::NAN;
    };
    series
        .t
        .iter()
        .zip(v)
        .filter(|(t, _)| **t >= t_from)
        .fold(0.0, |m, (_, &x)| m.max((x - v_ref).abs()))
}

/// Active power is back within the band around its pre-fault value no later
/// than [`RECOVERY_WINDOW`] after clearing and stays there to the end.
pub fn recovered_post_fault(series: &TimeSeries, apply: f64, clear: f64) -> bool {
    if series.meta.diverged {
        return false;
    }
    let Some(p) = series.channel("P") else {
        return false;
    };
    let pre: Vec<f64> = series
        .t
        .iter()
        .zip(p)
        .filter(|(t, _)| **t >= apply - PRE_FAULT_WINDOW && **t < apply)
        .map(|(_, &x)| x)
        .collect();
    if pre.is_empty() {
        return false;
    }
    let p0 = pre.iter().sum::<f64>() / pre.len() as f64;
    let band = RECOVERY_BAND * p0.abs().max(1e-3);
    let last_violation = series
        .t
        .iter()
        .zip(p)
        .filter(|(t, x)| **t >= clear && (x.is_nan() || (**x - p0).abs() > band))
        .map(|(t, _)| *t)
        .next_back();
    match last_violation {
        None => true,
        Some(t) => {
            let t_end = series.t[series.len() - 1];
            t < clear + RECOVERY_WINDOW && t < t_end
        }
    }
}
