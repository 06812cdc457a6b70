use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn gfmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfmsim"))
        .args(args)
        .env_remove("GFMSIM_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn assert_checksums(dir: &Path, manifest: &Value) {
    for a in manifest["artifacts"].as_array().unwrap() {
        let bytes = fs::read(dir.join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(a["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn run_writes_csv_plot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = gfmsim(&["run", "region", "--scr", "10", "--mode", "g-sgfm", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        files(&out),
        ["region_g-sgfm.csv", "region_g-sgfm.svg", "region_g-sgfm_manifest.json"]
    );
    let (header, rows) = gfmsim::io::read_csv(fs::File::open(out.join("region_g-sgfm.csv")).unwrap()).unwrap();
    assert_eq!(header[0], "t");
    assert_eq!(&header[1..], gfmsim::sim::CHANNELS);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    assert_eq!(rows.last().unwrap()[0], 60.0);
    let m = json(&out.join("region_g-sgfm_manifest.json"));
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["diverged"], false);
    assert_eq!(m["runs"][0]["stable"], true);
    assert_checksums(&out, &m);
}

#[test]
fn weak_grid_fault_flags_gfl_and_still_writes_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = gfmsim(&["run", "fault", "--scr", "2.5", "--mode", "gfl", "--no-plots", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert_eq!(files(out), ["fault_gfl.csv", "fault_gfl_manifest.json"]);
    let m = json(&out.join("fault_gfl_manifest.json"));
    assert_eq!(m["diverged"], true);
    assert_eq!(m["runs"][0]["diverged"], true);
    assert_eq!(m["exit_code"], 3);
}

#[test]
fn missing_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let cfg = dir.path().join("absent.json");
    let o = gfmsim(&[
        "run",
        "region",
        "--mode",
        "gfl",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.json"));
}

#[test]
fn out_of_range_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"version": 1, "plant": {"dc_link": {"c_dc": -0.04}}}"#).unwrap();
    let out = dir.path().join("o");
    let o = gfmsim(&[
        "run",
        "region",
        "--mode",
        "gfl",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("c_dc"));
    assert!(!out.exists());
}

#[test]
fn config_overrides_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    fs::write(&cfg, r#"{"version": 1, "scenario": {"t_end": 2.0}}"#).unwrap();
    let out = dir.path().join("o");
    let o = gfmsim(&[
        "run",
        "power-step",
        "--mode",
        "m-mgfm",
        "--dt",
        "5e-5",
        "--no-plots",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let (_, rows) = gfmsim::io::read_csv(fs::File::open(out.join("power-step_m-mgfm.csv")).unwrap()).unwrap();
    assert_eq!(rows.last().unwrap()[0], 2.0);
    let m = json(&out.join("power-step_m-mgfm_manifest.json"));
    assert_eq!(m["dt"], 5e-5);
}

#[test]
fn override_that_drops_an_event_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    fs::write(&cfg, r#"{"version": 1, "scenario": {"t_end": 2.0}}"#).unwrap();
    let out = dir.path().join("o");
    let o = gfmsim(&[
        "run",
        "curtailment",
        "--mode",
        "gfl",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario.events"));
    assert!(!out.exists());
}

#[test]
fn unknown_scenario_and_untunable_mode_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = gfmsim(&["run", "gust", "--mode", "gfl", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = gfmsim(&["tune", "gfl", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = gfmsim(&["run", "black-start", "--mode", "g-mgfm", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn compare_weak_grid_verdicts_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = gfmsim(&["compare", "region", "--scr", "2.5", "--all", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let v = json(&out.join("region_verdicts.json"));
    assert_eq!(v["gfl"]["stable"], false);
    for m in ["g-mgfm", "g-sgfm", "m-mgfm", "m-sgfm"] {
        assert_eq!(v[m]["stable"], true, "{m}");
    }
    for c in ["P", "v_dc", "omega_r", "beta", "v_t", "i_mag"] {
        assert!(out.join(format!("region_{c}.svg")).exists(), "{c}");
    }
    let (header, _) = gfmsim::io::read_csv(fs::File::open(out.join("region_compare.csv")).unwrap()).unwrap();
    assert!(header.contains(&"P_gfl".to_string()) && header.contains(&"v_dc_m-sgfm".to_string()));
    assert_checksums(out, &json(&out.join("region_compare_manifest.json")));
}

#[test]
fn compare_with_one_mode_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = gfmsim(&["compare", "power-step", "--mode", "m-sgfm", "--no-plots", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = gfmsim(&["run", "power-step", "--mode", "m-sgfm", "--no-plots", "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let name = "power-step_m-sgfm.csv";
    assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    let v = json(&a.join("power-step_verdicts.json"));
    assert_eq!(v.as_object().unwrap().len(), 1);
    assert_eq!(v["m-sgfm"]["stable"], true);
}

#[test]
fn sweep_tabulates_each_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = gfmsim(&[
        "sweep",
        "power-step",
        "--scr",
        "2.5,10",
        "--mode",
        "gfl",
        "--mode",
        "m-sgfm",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    let mut r = csv::Reader::from_path(out.join("power-step_sweep.csv")).unwrap();
    let rows: Vec<Vec<String>> = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let stable = |scr: &str, mode: &str| {
        rows.iter()
            .find(|row| row[0] == scr && row[1] == mode)
            .map(|row| row[2] == "1")
            .unwrap()
    };
    assert!(!stable("2.50000000e0", "gfl"));
    assert!(stable("2.50000000e0", "m-sgfm"));
    assert!(stable("1.00000000e1", "gfl"));
    assert!(out.join("power-step_sweep.svg").exists());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_gfmsim"))
        .args(["run", "power-step", "--mode", "gfl", "--no-plots"])
        .env("GFMSIM_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(out.join("power-step_gfl.csv").exists());
}

#[test]
fn list_scenarios_names_every_builtin() {
    let o = gfmsim(&["list-scenarios"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["region", "curtailment", "fault", "black-start", "power-step"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn tune_is_reproducible_and_improves_on_the_median() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let args = ["tune", "m-mgfm", "--n", "50", "--seed", "7", "--out", out.to_str().unwrap()];
    assert_eq!(code(&gfmsim(&args)), 0);
    let first: Vec<(String, Vec<u8>)> = files(out)
        .into_iter()
        .map(|f| {
            let bytes = fs::read(out.join(&f)).unwrap();
            (f, bytes)
        })
        .collect();
    assert_eq!(
        first.iter().map(|(f, _)| f.as_str()).collect::<Vec<_>>(),
        [
            "tune_m-mgfm_manifest.json",
            "tune_m-mgfm_samples.csv",
            "tune_m-mgfm_scatter.svg",
            "tune_m-mgfm_summary.json"
        ]
    );
    assert_eq!(code(&gfmsim(&args)), 0);
    for (f, bytes) in &first {
        assert!(fs::read(out.join(f)).unwrap() == *bytes, "{f} differs between runs");
    }

    let s = json(&out.join("tune_m-mgfm_summary.json"));
    let opt = &s["optimum"];
    assert_eq!(opt["inside_bounds"], true);
    let j = opt["params"]["J"].as_f64().unwrap();
    let d = opt["params"]["D"].as_f64().unwrap();
    assert!((0.1..=1.0).contains(&j) && (2.0..=10.0).contains(&d));
    assert!(opt["cost"].as_f64().unwrap() <= s["median_cost"].as_f64().unwrap());

    let mut r = csv::Reader::from_path(out.join("tune_m-mgfm_samples.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["index", "J", "D", "dvdc_int", "p_max", "t_r", "cost", "diverged"]);
    assert_eq!(r.records().count(), 50);
}
