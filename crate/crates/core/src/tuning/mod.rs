//! Step-response objectives, Monte Carlo sensitivity of the virtual-machine
//! gains and their box-constrained optimisation.

pub mod optimizer;
pub mod stats;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControllerConfig, ControllerMode, VicParams, VsmParams};
use crate::error::{Error, Result};
use crate::plant::PlantParams;
use crate::scenarios::{power_step_scenario, ScenarioSpec};
use crate::sim::{run, EventKind, SimConfig, TimeSeries};
pub use optimizer::{minimize_box, Interval, Minimum, SqpOptions, StartTrace};

pub const OBJECTIVES: [&str; 3] = ["dvdc_int", "p_max", "t_r"];

/// The three step-response objectives and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValues {
    /// Integrated absolute DC-voltage deviation, pu·s.
    pub dvdc_int: f64,
    /// Peak active-power excursion from the initial value, pu.
    pub p_max: f64,
    /// 10 % to 90 % rise time of the active power, s; infinite when the
    /// response never reaches 90 % of its final change.
    pub t_r: f64,
    pub rise_attained: bool,
    pub scalar_cost: f64,
}

impl ObjectiveValues {
    pub fn as_array(&self) -> [f64; 3] {
        [self.dvdc_int, self.p_max, self.t_r]
    }
}

/// Weighted sum of objectives, each divided by its scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalarization {
    pub weights: [f64; 3],
    pub scale: [f64; 3],
}

impl Default for Scalarization {
    fn default() -> Self {
        Self {
            weights: [1.0; 3],
            scale: [1.0; 3],
        }
    }
}

impl Scalarization {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::config("tuning.weights", "every weight must be finite and >= 0"));
        }
        if self.weights.iter().all(|w| *w == 0.0) {
            return Err(Error::config("tuning.weights", "at least one weight must be > 0"));
        }
        if self.scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config("tuning.scale", "every scale must be finite and > 0"));
        }
        Ok(())
    }

    /// Cost of an objective triple; infinite when the rise was not attained.
    pub fn cost(&self, dvdc_int: f64, p_max: f64, t_r: f64) -> f64 {
        [dvdc_int, p_max, t_r]
            .iter()
            .zip(self.weights.iter().zip(&self.scale))
            .map(|(v, (w, s))| if *w == 0.0 { 0.0 } else { w * v / s })
            .sum()
    }

    pub fn apply(&self, mut o: ObjectiveValues) -> ObjectiveValues {
        o.scalar_cost = self.cost(o.dvdc_int, o.p_max, o.t_r);
        o
    }
}

/// Objectives of a recorded step response. `p_init` is the active power
/// before the step; the steady-state change is measured at the last sample.
pub fn compute_objectives(series: &TimeSeries, v_dc_ref: f64, p_init: f64) -> Result<ObjectiveValues> {
    let missing = |name: &str| Error::config("series", format!("missing channel `{name}`"));
    let v_dc = series.channel("v_dc").ok_or_else(|| missing("v_dc"))?;
    let p = series.channel("P").ok_or_else(|| missing("P"))?;
    let t = &series.t;
    Ok(objectives_of(t, v_dc, p, v_dc_ref, p_init))
}

fn objectives_of(t: &[f64], v_dc: &[f64], p: &[f64], v_dc_ref: f64, p_init: f64) -> ObjectiveValues {
    let mut dvdc_int = 0.0;
    for k in 1..t.len() {
        let a = (v_dc[k - 1] - v_dc_ref).abs();
        let b = (v_dc[k] - v_dc_ref).abs();
        dvdc_int += 0.5 * (a + b) * (t[k] - t[k - 1]);
    }
    let p_max = p.iter().map(|v| (v - p_init).abs()).fold(0.0, f64::max);
    let t_r = match p.last() {
        Some(&p_end) if p_end != p_init => {
            let frac = |k: usize| (p[k] - p_init) / (p_end - p_init);
            let t1 = first_crossing(t, 0.1, frac);
            let t2 = first_crossing(t, 0.9, frac);
            match (t1, t2) {
                (Some(a), Some(b)) => b - a,
                _ => f64::INFINITY,
            }
        }
        _ => f64::INFINITY,
    };
    let o = ObjectiveValues {
        dvdc_int,
        p_max,
        t_r,
        rise_attained: t_r.is_finite(),
        scalar_cost: 0.0,
    };
    Scalarization::default().apply(o)
}

/// Time at which `frac` first reaches `level`, linearly interpolated.
fn first_crossing(t: &[f64], level: f64, frac: impl Fn(usize) -> f64) -> Option<f64> {
    if t.is_empty() {
        return None;
    }
    if frac(0) >= level {
        return Some(t[0]);
    }
    for k in 1..t.len() {
        let (a, b) = (frac(k - 1), frac(k));
        if b >= level {
            return Some(t[k - 1] + (level - a) / (b - a) * (t[k] - t[k - 1]));
        }
    }
    None
}

/// Tunable virtual-machine gains of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub mode: ControllerMode,
    pub names: Vec<String>,
    pub intervals: Vec<Interval>,
}

impl ParamBounds {
    /// Reference box of each tunable mode.
    pub fn for_mode(mode: ControllerMode) -> Result<Self> {
        let (names, intervals): (Vec<&str>, Vec<Interval>) = match mode {
            ControllerMode::GMgfm => (
                vec!["k_T", "k_J", "k_D"],
                vec![Interval::new(1.0, 60.0), Interval::new(0.001, 0.1), Interval::new(1.0, 50.0)],
            ),
            ControllerMode::GSgfm => (
                vec!["k_T", "k_J", "k_D"],
                vec![Interval::new(0.1, 60.0), Interval::new(0.001, 0.1), Interval::new(1.0, 50.0)],
            ),
            ControllerMode::MMgfm | ControllerMode::MSgfm => (
                vec!["J", "D"],
                vec![Interval::new(0.1, 1.0), Interval::new(2.0, 10.0)],
            ),
            ControllerMode::Gfl => {
                return Err(Error::config("mode", "gfl has no virtual-machine gains to tune"))
            }
        };
        Ok(Self {
            mode,
            names: names.into_iter().map(String::from).collect(),
            intervals,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let expected = Self::for_mode(self.mode)?;
        if self.names != expected.names || self.intervals.len() != self.names.len() {
            return Err(Error::config(
                "tuning.bounds",
                format!("{} expects parameters {:?}", self.mode, expected.names),
            ));
        }
        for (name, b) in self.names.iter().zip(&self.intervals) {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo <= b.hi && b.lo > 0.0) {
                return Err(Error::config(
                    format!("tuning.bounds.{name}"),
                    format!("needs 0 < lo <= hi, got [{}, {}]", b.lo, b.hi),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.intervals.len() && x.iter().zip(&self.intervals).all(|(v, b)| b.contains(*v))
    }

    /// Reference gains of the mode, clamped into the box.
    pub fn reference_point(&self) -> Vec<f64> {
        let raw = match self.mode {
            ControllerMode::GMgfm | ControllerMode::GSgfm => {
                let v = self.mode.default_vic();
                vec![v.k_t, v.k_j, v.k_d]
            }
            _ => {
                let v = self.mode.default_vsm();
                vec![v.j, v.d]
            }
        };
        raw.iter()
            .zip(&self.intervals)
            .map(|(v, b)| v.clamp(b.lo, b.hi))
            .collect()
    }

    /// Controller configuration with the gains `x` substituted.
    pub fn configure(&self, base: &ControllerConfig, x: &[f64]) -> ControllerConfig {
        let mut cfg = base.clone();
        match self.mode {
            ControllerMode::GMgfm | ControllerMode::GSgfm => {
                cfg.vic = Some(VicParams {
                    k_t: x[0],
                    k_j: x[1],
                    k_d: x[2],
                })
            }
            _ => cfg.vsm = Some(VsmParams { j: x[0], d: x[1] }),
        }
        cfg
    }
}

/// Everything an objective evaluation depends on besides the gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSetup {
    pub scenario: ScenarioSpec,
    pub controller: ControllerConfig,
    pub plant: PlantParams,
    pub sim: SimConfig,
}

impl Default for TuningSetup {
    fn default() -> Self {
        Self {
            scenario: power_step_scenario(10.0),
            controller: ControllerConfig::default(),
            plant: PlantParams::default(),
            sim: SimConfig {
                record_every: 10,
                ..SimConfig::default()
            },
        }
    }
}

impl TuningSetup {
    /// Objectives of the gains `x`, or `None` when the run diverged.
    pub fn evaluate(&self, bounds: &ParamBounds, x: &[f64]) -> Result<Option<ObjectiveValues>> {
        let cfg = bounds.configure(&self.controller, x);
        let series = run(&self.scenario, bounds.mode, &cfg, &self.plant, &self.sim)?;
        if series.meta.diverged {
            return Ok(None);
        }
        let p_init = self.initial_power(&series);
        compute_objectives(&series, cfg.v_dc_ref, p_init).map(Some)
    }

    /// Active power just before the first setpoint change.
    fn initial_power(&self, series: &TimeSeries) -> f64 {
        let t_step = self
            .scenario
            .events
            .iter()
            .find(|e| matches!(e.kind, EventKind::PowerSetpoint { .. }))
            .map_or(0.0, |e| e.time);
        let p = series.channel("P").unwrap_or(&[]);
        let k = series.t.iter().rposition(|&t| t < t_step).unwrap_or(0);
        p.get(k).copied().unwrap_or(self.scenario.p_ref0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub index: usize,
    pub params: Vec<f64>,
    /// `None` when the run diverged.
    pub objectives: Option<ObjectiveValues>,
    /// Scalar cost after normalisation, with the divergence penalty applied.
    pub cost: f64,
}

impl Sample {
    /// Diverged, or the rise time was never attained.
    pub fn penalized(&self) -> bool {
        self.objectives.is_none_or(|o| !o.rise_attained)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub mode: ControllerMode,
    pub seed: u64,
    pub bounds: ParamBounds,
    pub samples: Vec<Sample>,
    /// `correlation[i][j]`: Spearman correlation of parameter `i` with
    /// objective `j`, over the samples that were not penalized.
    pub correlation: Vec<[f64; 3]>,
    pub scalarization: Scalarization,
    /// Cost charged to penalized samples and optimizer evaluations.
    pub penalty: f64,
    pub median_cost: f64,
}

impl SensitivityReport {
    /// Spearman correlation between two objectives over the scored samples.
    pub fn objective_correlation(&self, a: usize, b: usize) -> f64 {
        let scored: Vec<[f64; 3]> = self
            .samples
            .iter()
            .filter(|s| !s.penalized())
            .filter_map(|s| s.objectives.map(|o| o.as_array()))
            .collect();
        let x: Vec<f64> = scored.iter().map(|v| v[a]).collect();
        let y: Vec<f64> = scored.iter().map(|v| v[b]).collect();
        stats::spearman(&x, &y)
    }
}

/// Multiplier on the worst scored cost charged to penalized points.
pub const PENALTY_FACTOR: f64 = 10.0;

/// Uniform Monte Carlo over the box. Samples are drawn in order from a
/// seeded stream, then simulated concurrently.
pub fn monte_carlo_sensitivity(
    setup: &TuningSetup,
    bounds: &ParamBounds,
    n: usize,
    weights: [f64; 3],
    seed: u64,
) -> Result<SensitivityReport> {
    if n == 0 {
        return Err(Error::config("tuning.n", "needs at least one sample"));
    }
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            bounds
                .intervals
                .iter()
                .map(|b| if b.lo == b.hi { b.lo } else { rng.gen_range(b.lo..=b.hi) })
                .collect()
        })
        .collect();
    let evaluated = points
        .par_iter()
        .map(|x| setup.evaluate(bounds, x))
        .collect::<Result<Vec<_>>>()?;

    let scored: Vec<ObjectiveValues> = evaluated
        .iter()
        .flatten()
        .filter(|o| o.rise_attained)
        .copied()
        .collect();
    let mut scale = [1.0; 3];
    for (j, s) in scale.iter_mut().enumerate() {
        let col: Vec<f64> = scored.iter().map(|o| o.as_array()[j]).collect();
        if let Some(m) = stats::median(&col) {
            if m > 0.0 {
                *s = m;
            }
        }
    }
    let scalarization = Scalarization { weights, scale };
    scalarization.validate()?;
    let worst = scored
        .iter()
        .map(|o| scalarization.apply(*o).scalar_cost)
        .fold(0.0, f64::max);
    let penalty = PENALTY_FACTOR * if worst > 0.0 { worst } else { 1.0 };

    let samples: Vec<Sample> = points
        .into_iter()
        .zip(evaluated)
        .enumerate()
        .map(|(index, (params, obj))| {
            let objectives = obj.map(|o| scalarization.apply(o));
            let cost = match objectives {
                Some(o) if o.rise_attained => o.scalar_cost,
                _ => penalty,
            };
            Sample {
                index,
                params,
                objectives,
                cost,
            }
        })
        .collect();

    let kept: Vec<&Sample> = samples.iter().filter(|s| !s.penalized()).collect();
    let correlation = (0..bounds.names.len())
        .map(|i| {
            let x: Vec<f64> = kept.iter().map(|s| s.params[i]).collect();
            let mut row = [0.0; 3];
            for (j, r) in row.iter_mut().enumerate() {
                let y: Vec<f64> = kept
                    .iter()
                    .map(|s| s.objectives.expect("kept samples are scored").as_array()[j])
                    .collect();
                *r = stats::spearman(&x, &y);
            }
            row
        })
        .collect();
    let costs: Vec<f64> = samples.iter().map(|s| s.cost).collect();
    let median_cost = stats::median(&costs).expect("n >= 1");
    Ok(SensitivityReport {
        mode: bounds.mode,
        seed,
        bounds: bounds.clone(),
        samples,
        correlation,
        scalarization,
        penalty,
        median_cost,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub mode: ControllerMode,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub objectives: ObjectiveValues,
    pub cost: f64,
    pub starts: Vec<StartTrace>,
}

/// Minimise the scalar cost over the box, starting from the reference gains
/// and `opts.starts − 1` seeded random points.
pub fn optimize(
    setup: &TuningSetup,
    bounds: &ParamBounds,
    scalarization: &Scalarization,
    penalty: f64,
    opts: &SqpOptions,
    seed: u64,
) -> Result<Optimum> {
    bounds.validate()?;
    scalarization.validate()?;
    if let Some(k) = bounds.intervals.iter().position(|b| b.lo == b.hi) {
        return Err(Error::config(
            format!("tuning.bounds.{}", bounds.names[k]),
            "optimisation needs lo < hi",
        ));
    }
    let cost = |x: &[f64]| -> Option<f64> {
        match setup.evaluate(bounds, x) {
            Ok(Some(o)) if o.rise_attained => Some(scalarization.apply(o).scalar_cost),
            _ => None,
        }
    };
    let min = minimize_box(cost, &bounds.intervals, &bounds.reference_point(), penalty, opts, seed)?;
    let objectives = setup
        .evaluate(bounds, &min.x)?
        .map(|o| scalarization.apply(o))
        .ok_or(Error::NoFeasibleImprovement)?;
    Ok(Optimum {
        mode: bounds.mode,
        names: bounds.names.clone(),
        params: min.x,
        objectives,
        cost: min.cost,
        starts: min.starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(t_end: f64, dt: f64) -> Vec<f64> {
        (0..=(t_end / dt).round() as usize).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn zero_deviation_integrates_to_zero() {
        let t = grid(1.0, 1e-3);
        let v = vec![1.0; t.len()];
        let p = vec![0.0; t.len()];
        assert_eq!(objectives_of(&t, &v, &p, 1.0, 0.0).dvdc_int, 0.0);
    }

    #[test]
    fn decaying_deviation_integral() {
        let t = grid(5.0, 1e-3);
        let v: Vec<f64> = t.iter().map(|t| 1.0 + 0.05 * (-t / 0.2).exp()).collect();
        let p: Vec<f64> = t.iter().map(|t| 1.0 - (-t).exp()).collect();
        let o = objectives_of(&t, &v, &p, 1.0, 0.0);
        assert!((o.dvdc_int - 0.01).abs() < 1e-4, "{}", o.dvdc_int);
    }

    #[test]
    fn first_order_rise_time() {
        let dt = 1e-3;
        let t = grid(20.0, dt);
        let v = vec![1.0; t.len()];
        let p: Vec<f64> = t.iter().map(|t| 1.0 - (-t).exp()).collect();
        let o = objectives_of(&t, &v, &p, 1.0, 0.0);
        assert!((o.t_r - 2.1972).abs() < dt, "{}", o.t_r);
        assert!(o.rise_attained);
        assert_relative_eq!(o.p_max, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn quadrature_error_is_second_order() {
        let err = |dt: f64| {
            let t = grid(2.0, dt);
            let v: Vec<f64> = t.iter().map(|t| 1.0 + t * t).collect();
            let p = vec![0.0; t.len()];
            (objectives_of(&t, &v, &p, 1.0, 0.0).dvdc_int - 8.0 / 3.0).abs()
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn downward_step_rise_time_uses_the_change() {
        let dt = 1e-3;
        let t = grid(20.0, dt);
        let v = vec![1.0; t.len()];
        let p: Vec<f64> = t.iter().map(|t| 1.0 - 0.2 * (1.0 - (-t).exp())).collect();
        let o = objectives_of(&t, &v, &p, 1.0, 1.0);
        assert!((o.t_r - 2.1972).abs() < dt);
        assert_relative_eq!(o.p_max, 0.2, epsilon = 1e-8);
    }

    #[test]
    fn unreached_rise_is_flagged() {
        let t = grid(1.0, 1e-3);
        let v = vec![1.0; t.len()];
        let mut p = vec![0.0; t.len()];
        *p.last_mut().unwrap() = 0.0;
        let o = objectives_of(&t, &v, &p, 1.0, 0.0);
        assert!(!o.rise_attained);
        assert!(o.t_r.is_infinite());
    }

    #[test]
    fn cost_is_monotone_in_each_objective() {
        let s = Scalarization {
            weights: [1.0, 2.0, 0.5],
            scale: [0.1, 0.3, 2.0],
        };
        let base = s.cost(0.1, 0.2, 1.0);
        assert!(s.cost(0.2, 0.2, 1.0) >= base);
        assert!(s.cost(0.1, 0.3, 1.0) >= base);
        assert!(s.cost(0.1, 0.2, 1.5) >= base);
    }

    #[test]
    fn reference_boxes() {
        let b = ParamBounds::for_mode(ControllerMode::GSgfm).unwrap();
        assert_eq!(b.names, ["k_T", "k_J", "k_D"]);
        assert_eq!(b.intervals[0], Interval::new(0.1, 60.0));
        let m = ParamBounds::for_mode(ControllerMode::MMgfm).unwrap();
        assert_eq!(m.intervals, [Interval::new(0.1, 1.0), Interval::new(2.0, 10.0)]);
        assert!(m.contains(&m.reference_point()));
        assert!(ParamBounds::for_mode(ControllerMode::Gfl).is_err());
    }

    #[test]
    fn configure_substitutes_gains() {
        let b = ParamBounds::for_mode(ControllerMode::GMgfm).unwrap();
        let cfg = b.configure(&ControllerConfig::default(), &[10.0, 0.01, 5.0]);
        assert_eq!(cfg.vic_for(ControllerMode::GMgfm).k_t, 10.0);
        let b = ParamBounds::for_mode(ControllerMode::MSgfm).unwrap();
        let cfg = b.configure(&ControllerConfig::default(), &[0.5, 4.0]);
        assert_eq!(cfg.vsm_for(ControllerMode::MSgfm).d, 4.0);
    }
}
