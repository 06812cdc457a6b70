use gfmsim::config::RunConfig;
use gfmsim::control::{ControllerConfig, ControllerMode};
use gfmsim::error::Error;
use gfmsim::io::{read_csv, write_series_csv};
use gfmsim::plant::PlantParams;
use gfmsim::scenarios::{black_start_scenario, by_name, compare, power_step_scenario, run_mode, BUILT_IN};
use gfmsim::sim::{SimConfig, CHANNELS};

fn short() -> SimConfig {
    SimConfig {
        t_end: Some(3.0),
        ..SimConfig::default()
    }
}

#[test]
fn every_builtin_is_addressable_and_valid() {
    for (name, _) in BUILT_IN {
        let s = by_name(name, 5.0).unwrap();
        assert_eq!(s.name, name);
        s.validate().unwrap();
    }
    assert!(matches!(by_name("gust", 10.0), Err(Error::Config { .. })));
}

#[test]
fn compare_keeps_requested_order() {
    let modes = [ControllerMode::MSgfm, ControllerMode::Gfl, ControllerMode::GMgfm];
    let r = compare(
        &modes,
        &power_step_scenario(10.0),
        &ControllerConfig::default(),
        &PlantParams::default(),
        &short(),
    )
    .unwrap();
    let got: Vec<ControllerMode> = r.runs.iter().map(|m| m.mode).collect();
    assert_eq!(got, modes);
    assert!(r.get(ControllerMode::GSgfm).is_none());
}

#[test]
fn csv_round_trip_of_a_real_run() {
    let run = run_mode(
        &power_step_scenario(10.0),
        ControllerMode::GSgfm,
        &ControllerConfig::default(),
        &PlantParams::default(),
        &short(),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_series_csv(&run.series, &mut buf).unwrap();
    let (header, rows) = read_csv(buf.as_slice()).unwrap();
    assert_eq!(header.len(), CHANNELS.len() + 1);
    assert_eq!(rows.len(), run.series.len());
    for (j, (_, v)) in run.series.channels.iter().enumerate() {
        for (k, row) in rows.iter().enumerate() {
            assert!((row[j + 1] - v[k]).abs() <= 5e-9 * v[k].abs(), "{} row {k}", header[j + 1]);
        }
    }
}

#[test]
fn power_step_settles_on_the_new_setpoint() {
    let sim = SimConfig {
        t_end: Some(8.0),
        ..SimConfig::default()
    };
    for mode in ControllerMode::ALL {
        let run = run_mode(
            &power_step_scenario(10.0),
            mode,
            &ControllerConfig::default(),
            &PlantParams::default(),
            &sim,
        )
        .unwrap();
        let p = *run.series.channel("P").unwrap().last().unwrap();
        assert!((p - 0.8).abs() < 0.01, "{mode}: P = {p}");
    }
}

#[test]
fn black_start_needs_a_machine_side_dc_mode() {
    let e = run_mode(
        &black_start_scenario(),
        ControllerMode::GMgfm,
        &ControllerConfig::default(),
        &PlantParams::default(),
        &short(),
    )
    .unwrap_err();
    assert!(matches!(e, Error::Config { ref field, .. } if field == "mode"));
}

#[test]
fn too_coarse_step_is_rejected() {
    let cfg = RunConfig::from_json(r#"{"version": 1, "sim": {"dt": 0.01}}"#).unwrap();
    let e = cfg
        .validate_for(ControllerMode::MMgfm, &power_step_scenario(10.0))
        .unwrap_err();
    assert!(matches!(e, Error::Config { .. }), "{e}");
}
