use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gfmsim::config::RunConfig;
use gfmsim::control::ControllerMode;
use gfmsim::error::Error;
use gfmsim::io::{format_value, write_aligned_csv, write_series_csv};
use gfmsim::scenarios::{by_name, compare, power_step_scenario, ModeRun, ScenarioSpec, Verdict, BUILT_IN};
use gfmsim::sim::{SimConfig, TimeSeries};
use gfmsim::tuning::{
    monte_carlo_sensitivity, optimize, Interval, ObjectiveValues, Optimum, Scalarization, SensitivityReport,
    StartTrace, TuningSetup, OBJECTIVES,
};
use serde::Serialize;

use crate::error::{CliError, EXIT_DIVERGED, EXIT_OK};
use crate::output::{emit, Artifact, Manifest, RunRecord};
use crate::plots::{self, Panel, ScatterPanel, Trace};

/// Channels plotted for every run, with axis labels.
pub const PLOT_CHANNELS: [(&str, &str); 6] = [
    ("P", "P [pu]"),
    ("v_dc", "v_dc [pu]"),
    ("omega_r", "ω_r [pu]"),
    ("beta", "β [deg]"),
    ("v_t", "v_t [pu]"),
    ("i_mag", "|i| [pu]"),
];

/// Objective evaluations record every this many solver steps.
pub const TUNING_RECORD_EVERY: usize = 10;

/// Settings shared by every simulating command.
pub struct Context {
    pub cfg: RunConfig,
    pub config_path: Option<PathBuf>,
    pub out: PathBuf,
    pub plots: bool,
}

impl Context {
    pub fn load(config: Option<&Path>, dt: Option<f64>, out: PathBuf, plots: bool) -> Result<Self, CliError> {
        let mut cfg = match config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::ConfigFile {
                    path: path.to_path_buf(),
                    source,
                })?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(dt) = dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("sim.dt", format!("must be > 0, got {dt}")).into());
            }
            cfg.sim.dt = dt;
        }
        Ok(Self {
            cfg,
            config_path: config.map(Path::to_path_buf),
            out,
            plots,
        })
    }

    fn scenario(&self, name: &str, scr: f64) -> Result<ScenarioSpec, CliError> {
        let spec = self.cfg.scenario.apply(by_name(name, scr)?);
        spec.validate()?;
        Ok(spec)
    }

    /// Requested modes, or every mode the scenario supports; each is checked
    /// against the configuration before anything runs.
    fn modes(&self, scenario: &ScenarioSpec, requested: &[ControllerMode]) -> Result<Vec<ControllerMode>, CliError> {
        let modes = if requested.is_empty() {
            scenario.modes.clone()
        } else {
            requested.to_vec()
        };
        for &m in &modes {
            if !scenario.modes.contains(&m) {
                let allowed: Vec<&str> = scenario.modes.iter().map(|m| m.name()).collect();
                return Err(Error::config(
                    "mode",
                    format!("{} supports {}, got {m}", scenario.name, allowed.join(", ")),
                )
                .into());
            }
            self.cfg.validate_for(m, scenario)?;
        }
        Ok(modes)
    }

    fn manifest(&self, command: &str) -> Manifest {
        Manifest::new(command, self.config_path.as_deref(), self.cfg.sim.dt)
    }
}

fn plot_error(name: &str) -> impl FnOnce(String) -> CliError + '_ {
    move |reason| CliError::Plot {
        name: name.to_string(),
        reason,
    }
}

fn csv_artifact(name: String, series: &TimeSeries) -> Result<Artifact, CliError> {
    let mut buf = Vec::new();
    write_series_csv(series, &mut buf)?;
    Ok(Artifact::new(name, buf))
}

fn json_artifact(name: String, value: &impl Serialize) -> Artifact {
    let mut text = serde_json::to_string_pretty(value).expect("summary serialises");
    text.push('\n');
    Artifact::new(name, text)
}

fn channel<'a>(series: &'a TimeSeries, name: &str) -> &'a [f64] {
    series.channel(name).expect("recorded channel")
}

fn run_figure(scenario: &ScenarioSpec, run: &ModeRun) -> Result<String, String> {
    let s = &run.series;
    let panels: Vec<Panel> = PLOT_CHANNELS
        .iter()
        .map(|(c, label)| Panel {
            y_label: label,
            traces: vec![Trace {
                label: run.mode.name(),
                x: &s.t,
                y: channel(s, c),
            }],
        })
        .collect();
    let title = format!("{} {} SCR {}", scenario.name, run.mode, scenario.scr);
    plots::stacked(&title, "t [s]", &panels)
}

fn exit_code(manifest: &Manifest) -> u8 {
    if manifest.diverged {
        EXIT_DIVERGED
    } else {
        EXIT_OK
    }
}

fn finish(ctx: &Context, artifacts: &[Artifact], mut manifest: Manifest, name: &str) -> Result<u8, CliError> {
    manifest.diverged = manifest.diverged || manifest.runs.iter().any(|r| r.diverged);
    manifest.exit_code = exit_code(&manifest);
    let path = emit(&ctx.out, artifacts, manifest.clone(), name)?;
    eprintln!("wrote {} files and {}", artifacts.len(), path.display());
    Ok(manifest.exit_code)
}

pub fn cmd_run(ctx: &Context, scenario: &str, scr: f64, mode: ControllerMode) -> Result<u8, CliError> {
    let spec = ctx.scenario(scenario, scr)?;
    ctx.modes(&spec, &[mode])?;
    let c = &ctx.cfg;
    let result = compare(&[mode], &spec, &c.controller, &c.plant, &c.sim)?;
    let run = &result.runs[0];
    let stem = format!("{}_{}", spec.name, mode);
    let mut artifacts = vec![csv_artifact(format!("{stem}.csv"), &run.series)?];
    if ctx.plots {
        let name = format!("{stem}.svg");
        let svg = run_figure(&spec, run).map_err(plot_error(&name))?;
        artifacts.push(Artifact::new(name, svg));
    }
    print_verdicts(&spec, &result.runs);
    let mut manifest = ctx.manifest("run");
    manifest.scenario = Some(spec.name.clone());
    manifest.runs.push(RunRecord::of(run));
    finish(ctx, &artifacts, manifest, &format!("{stem}_manifest.json"))
}

fn print_verdicts(spec: &ScenarioSpec, runs: &[ModeRun]) {
    println!("{} at SCR {}", spec.name, spec.scr);
    println!(
        "{:<8} {:>7} {:>8} {:>9} {:>10} {:>10}",
        "mode", "stable", "blew_up", "peak_i", "peak_dvdc", "recovered"
    );
    for r in runs {
        let v = &r.verdict;
        let rec = v.recovered_post_fault.map_or("-".to_string(), |b| b.to_string());
        println!(
            "{:<8} {:>7} {:>8} {:>9.3} {:>10.3} {:>10}",
            r.mode.name(),
            v.stable,
            v.diverged,
            v.peak_current,
            v.peak_vdc_dev,
            rec
        );
    }
}

pub fn cmd_compare(
    ctx: &Context,
    scenario: &str,
    scr: f64,
    requested: &[ControllerMode],
) -> Result<u8, CliError> {
    let spec = ctx.scenario(scenario, scr)?;
    let modes = ctx.modes(&spec, requested)?;
    let c = &ctx.cfg;
    let result = compare(&modes, &spec, &c.controller, &c.plant, &c.sim)?;

    let mut artifacts = Vec::new();
    for r in &result.runs {
        artifacts.push(csv_artifact(format!("{}_{}.csv", spec.name, r.mode), &r.series)?);
    }
    let labelled: Vec<(&str, &TimeSeries)> = result.runs.iter().map(|r| (r.mode.name(), &r.series)).collect();
    let mut aligned = Vec::new();
    write_aligned_csv(&labelled, &mut aligned)?;
    artifacts.push(Artifact::new(format!("{}_compare.csv", spec.name), aligned));
    let verdicts: BTreeMap<&str, &Verdict> = result.runs.iter().map(|r| (r.mode.name(), &r.verdict)).collect();
    artifacts.push(json_artifact(format!("{}_verdicts.json", spec.name), &verdicts));
    if ctx.plots {
        for (c, label) in PLOT_CHANNELS {
            let name = format!("{}_{c}.svg", spec.name);
            let traces = result
                .runs
                .iter()
                .map(|r| Trace {
                    label: r.mode.name(),
                    x: &r.series.t,
                    y: channel(&r.series, c),
                })
                .collect();
            let title = format!("{} {c} SCR {}", spec.name, spec.scr);
            let svg = plots::stacked(&title, "t [s]", &[Panel { y_label: label, traces }])
                .map_err(plot_error(&name))?;
            artifacts.push(Artifact::new(name, svg));
        }
    }
    print_verdicts(&spec, &result.runs);
    let mut manifest = ctx.manifest("compare");
    manifest.scenario = Some(spec.name.clone());
    manifest.runs = result.runs.iter().map(RunRecord::of).collect();
    finish(ctx, &artifacts, manifest, &format!("{}_compare_manifest.json", spec.name))
}

struct SweepLine {
    mode: ControllerMode,
    scr: Vec<f64>,
    peak_current: Vec<f64>,
    stable: Vec<f64>,
}

pub fn cmd_sweep(
    ctx: &Context,
    scenario: &str,
    scrs: &[f64],
    requested: &[ControllerMode],
) -> Result<u8, CliError> {
    if scrs.is_empty() {
        return Err(Error::config("scr", "sweep needs at least one value").into());
    }
    let mut specs = Vec::with_capacity(scrs.len());
    let mut modes = Vec::new();
    for &scr in scrs {
        let spec = ctx.scenario(scenario, scr)?;
        modes = ctx.modes(&spec, requested)?;
        specs.push(spec);
    }
    let c = &ctx.cfg;
    let mut runs: Vec<ModeRun> = Vec::new();
    for spec in &specs {
        let result = compare(&modes, spec, &c.controller, &c.plant, &c.sim)?;
        print_verdicts(spec, &result.runs);
        runs.extend(result.runs);
    }
    let records: Vec<RunRecord> = runs.iter().map(RunRecord::of).collect();
    let name = &specs[0].name;

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_error = |e: csv::Error| Error::config("output", e.to_string());
    w.write_record(["scr", "mode", "stable", "diverged", "peak_current", "peak_vdc_dev", "recovered"])
        .map_err(csv_error)?;
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    for r in &records {
        w.write_record([
            format_value(r.scr),
            r.mode.clone(),
            flag(r.stable),
            flag(r.diverged),
            format_value(r.peak_current),
            format_value(r.peak_vdc_dev),
            r.recovered_post_fault.map_or(String::new(), flag),
        ])
        .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config("output", e.to_string()))?;
    let mut artifacts = vec![Artifact::new(format!("{name}_sweep.csv"), bytes)];

    if ctx.plots {
        let file = format!("{name}_sweep.svg");
        let lines: Vec<SweepLine> = modes
            .iter()
            .map(|&m| {
                let rows: Vec<&ModeRun> = runs.iter().filter(|r| r.mode == m).collect();
                SweepLine {
                    mode: m,
                    scr: rows.iter().map(|r| r.series.meta.scr).collect(),
                    peak_current: rows.iter().map(|r| r.verdict.peak_current).collect(),
                    stable: rows.iter().map(|r| r.verdict.stable as u8 as f64).collect(),
                }
            })
            .collect();
        let traces = |pick: fn(&SweepLine) -> &[f64]| {
            lines
                .iter()
                .map(|l| Trace {
                    label: l.mode.name(),
                    x: &l.scr,
                    y: pick(l),
                })
                .collect()
        };
        let panels = [
            Panel {
                y_label: "peak |i| [pu]",
                traces: traces(|l| &l.peak_current),
            },
            Panel {
                y_label: "stable",
                traces: traces(|l| &l.stable),
            },
        ];
        let svg = plots::stacked(&format!("{name} SCR sweep"), "SCR", &panels).map_err(plot_error(&file))?;
        artifacts.push(Artifact::new(file, svg));
    }
    let mut manifest = ctx.manifest("sweep");
    manifest.scenario = Some(name.clone());
    manifest.runs = records;
    finish(ctx, &artifacts, manifest, &format!("{name}_sweep_manifest.json"))
}

#[derive(Serialize)]
struct NamedInterval<'a> {
    name: &'a str,
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct Correlation<'a> {
    param: &'a str,
    dvdc_int: f64,
    p_max: f64,
    t_r: f64,
}

#[derive(Serialize)]
struct OptimumSummary<'a> {
    params: BTreeMap<&'a str, f64>,
    objectives: ObjectiveValues,
    cost: f64,
    inside_bounds: bool,
    below_median: bool,
    starts: &'a [StartTrace],
}

#[derive(Serialize)]
struct TuneSummary<'a> {
    mode: ControllerMode,
    seed: u64,
    samples: usize,
    penalized_samples: usize,
    scenario: &'a str,
    scr: f64,
    bounds: Vec<NamedInterval<'a>>,
    scalarization: Scalarization,
    penalty: f64,
    median_cost: f64,
    correlation: Vec<Correlation<'a>>,
    rise_time_vs_dvdc_int: f64,
    optimum: Option<OptimumSummary<'a>>,
}

fn sensitivity_csv(report: &SensitivityReport) -> Result<Vec<u8>, CliError> {
    let csv_error = |e: csv::Error| Error::config("output", e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string()];
    header.extend(report.bounds.names.iter().cloned());
    header.extend(OBJECTIVES.iter().map(|s| s.to_string()));
    header.extend(["cost".to_string(), "diverged".to_string()]);
    w.write_record(&header).map_err(csv_error)?;
    for s in &report.samples {
        let mut row = vec![s.index.to_string()];
        row.extend(s.params.iter().map(|&v| format_value(v)));
        let obj = s.objectives.map_or([f64::NAN; 3], |o| o.as_array());
        row.extend(obj.iter().map(|&v| format_value(v)));
        row.push(format_value(s.cost));
        row.push(if s.objectives.is_none() { "1" } else { "0" }.to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::config("output", e.to_string()).into())
}

fn tune_figure(mode: ControllerMode, report: &SensitivityReport, opt: Option<&Optimum>) -> Result<String, String> {
    let scored: Vec<[f64; 3]> = report
        .samples
        .iter()
        .filter(|s| !s.penalized())
        .filter_map(|s| s.objectives.map(|o| o.as_array()))
        .collect();
    let best: Vec<[f64; 3]> = opt.map(|o| o.objectives.as_array()).into_iter().collect();
    let pairs = [(2, 0), (2, 1), (0, 1)];
    let panels: Vec<ScatterPanel> = pairs
        .iter()
        .map(|&(a, b)| ScatterPanel {
            x_label: OBJECTIVES[a],
            y_label: OBJECTIVES[b],
            cloud: scored.iter().map(|v| (v[a], v[b])).collect(),
            marked: best.iter().map(|v| (v[a], v[b])).collect(),
        })
        .collect();
    plots::scatter(&format!("{mode}: random samples and optimum"), &panels)
}

pub fn cmd_tune(ctx: &Context, mode: ControllerMode, scr: f64, n: usize, seed: u64) -> Result<u8, CliError> {
    let c = &ctx.cfg;
    let bounds = c.tuning.bounds_for(mode)?;
    let scenario = c.scenario.apply(power_step_scenario(scr));
    c.validate_for(mode, &scenario)?;
    let setup = TuningSetup {
        scenario,
        controller: c.controller.clone(),
        plant: c.plant.clone(),
        sim: SimConfig {
            record_every: TUNING_RECORD_EVERY,
            ..c.sim.clone()
        },
    };
    setup.sim.validate(&setup.controller, mode)?;
    if n == 0 {
        return Err(Error::config("n", "needs at least one sample").into());
    }

    let report = monte_carlo_sensitivity(&setup, &bounds, n, c.tuning.weights, seed)?;
    let opt = match optimize(&setup, &bounds, &report.scalarization, report.penalty, &c.tuning.sqp, seed) {
        Ok(o) => Some(o),
        Err(Error::NoFeasibleImprovement) => None,
        Err(e) => return Err(e.into()),
    };

    let names = &bounds.names;
    let summary = TuneSummary {
        mode,
        seed,
        samples: n,
        penalized_samples: report.samples.iter().filter(|s| s.penalized()).count(),
        scenario: &setup.scenario.name,
        scr: setup.scenario.scr,
        bounds: names
            .iter()
            .zip(&bounds.intervals)
            .map(|(name, &Interval { lo, hi })| NamedInterval { name, lo, hi })
            .collect(),
        scalarization: report.scalarization,
        penalty: report.penalty,
        median_cost: report.median_cost,
        correlation: names
            .iter()
            .zip(&report.correlation)
            .map(|(param, r)| Correlation {
                param,
                dvdc_int: r[0],
                p_max: r[1],
                t_r: r[2],
            })
            .collect(),
        rise_time_vs_dvdc_int: report.objective_correlation(2, 0),
        optimum: opt.as_ref().map(|o| OptimumSummary {
            params: names.iter().map(String::as_str).zip(o.params.iter().copied()).collect(),
            objectives: o.objectives,
            cost: o.cost,
            inside_bounds: bounds.contains(&o.params),
            below_median: o.cost <= report.median_cost,
            starts: &o.starts,
        }),
    };

    let stem = format!("tune_{mode}");
    let mut artifacts = vec![
        Artifact::new(format!("{stem}_samples.csv"), sensitivity_csv(&report)?),
        json_artifact(format!("{stem}_summary.json"), &summary),
    ];
    if ctx.plots {
        let name = format!("{stem}_scatter.svg");
        let svg = tune_figure(mode, &report, opt.as_ref()).map_err(plot_error(&name))?;
        artifacts.push(Artifact::new(name, svg));
    }

    println!("{mode}: {n} samples, median cost {:.4}", report.median_cost);
    for c in &summary.correlation {
        println!(
            "  rho({}, ·): dvdc_int {:+.3}  p_max {:+.3}  t_r {:+.3}",
            c.param, c.dvdc_int, c.p_max, c.t_r
        );
    }
    match &opt {
        Some(o) => println!("  optimum {:?} cost {:.4}", o.params, o.cost),
        None => println!("  no start produced a stable response"),
    }

    let mut manifest = ctx.manifest("tune");
    manifest.scenario = Some(setup.scenario.name.clone());
    manifest.seed = Some(seed);
    manifest.diverged = opt.is_none();
    finish(ctx, &artifacts, manifest, &format!("{stem}_manifest.json"))
}

pub fn cmd_list_scenarios() -> u8 {
    for (name, description) in BUILT_IN {
        let modes = by_name(name, 10.0)
            .map(|s| s.modes.iter().map(|m| m.name()).collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        println!("{name:<12} {description} [{modes}]");
    }
    EXIT_OK
}
