use gfmsim::control::ControllerMode;
use gfmsim::tuning::{minimize_box, monte_carlo_sensitivity, Interval, ParamBounds, SqpOptions, TuningSetup};

#[test]
fn reference_gains_lie_in_their_boxes() {
    for mode in [ControllerMode::GMgfm, ControllerMode::GSgfm, ControllerMode::MMgfm, ControllerMode::MSgfm] {
        let b = ParamBounds::for_mode(mode).unwrap();
        assert!(b.contains(&b.reference_point()), "{mode}");
    }
}

#[test]
fn sampling_is_seeded() {
    let setup = TuningSetup::default();
    let b = ParamBounds::for_mode(ControllerMode::MSgfm).unwrap();
    let a = monte_carlo_sensitivity(&setup, &b, 4, [1.0; 3], 11).unwrap();
    let again = monte_carlo_sensitivity(&setup, &b, 4, [1.0; 3], 11).unwrap();
    let other = monte_carlo_sensitivity(&setup, &b, 4, [1.0; 3], 12).unwrap();
    assert_eq!(a, again);
    assert_ne!(a.samples[0].params, other.samples[0].params);
    assert!(a.samples.iter().all(|s| b.contains(&s.params)));
}

#[test]
fn larger_damping_slows_the_response() {
    let setup = TuningSetup::default();
    let b = ParamBounds::for_mode(ControllerMode::MMgfm).unwrap();
    let soft = setup.evaluate(&b, &[0.5, 3.0]).unwrap().unwrap();
    let stiff = setup.evaluate(&b, &[0.5, 9.0]).unwrap().unwrap();
    assert!(stiff.t_r > soft.t_r);
    assert!(stiff.dvdc_int < soft.dvdc_int);
}

#[test]
fn minimiser_lands_on_an_active_face() {
    let bounds = [Interval::new(0.0, 1.0), Interval::new(-2.0, 2.0)];
    // unconstrained minimum at (1.5, 0.25) lies outside the first bound
    let f = |x: &[f64]| Some((x[0] - 1.5).powi(2) + 4.0 * (x[1] - 0.25).powi(2));
    let m = minimize_box(f, &bounds, &[0.2, -1.0], 1e3, &SqpOptions::default(), 3).unwrap();
    assert!((m.x[0] - 1.0).abs() < 1e-6);
    assert!((m.x[1] - 0.25).abs() < 1e-4);
}
