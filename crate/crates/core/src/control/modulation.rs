use std::f64::consts::PI;

use num_complex::Complex64;

/// Three-phase modulating wave of amplitude `e_ref` at angle `theta`.
pub fn modulation_wave(theta: f64, e_ref: f64) -> [f64; 3] {
    [
        e_ref * theta.sin(),
        e_ref * (theta - 2.0 * PI / 3.0).sin(),
        e_ref * (theta + 2.0 * PI / 3.0).sin(),
    ]
}

/// Phase quantities of a space vector `x` (amplitude-invariant) whose frame
/// sits at absolute angle `theta`.
pub fn dq_to_abc(x: Complex64, theta: f64) -> [f64; 3] {
    let a = x * Complex64::from_polar(1.0, theta);
    let b = x * Complex64::from_polar(1.0, theta - 2.0 * PI / 3.0);
    let c = x * Complex64::from_polar(1.0, theta + 2.0 * PI / 3.0);
    [a.re, b.re, c.re]
}

/// Space vector (amplitude-invariant) of phase quantities, expressed in a
/// frame at absolute angle `theta`.
pub fn abc_to_dq(abc: [f64; 3], theta: f64) -> Complex64 {
    let a = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    let v = (Complex64::new(abc[0], 0.0) + a * abc[1] + a * a * abc[2]) * (2.0 / 3.0);
    v * Complex64::from_polar(1.0, -theta)
}
