#![allow(dead_code)]

use curveq::curve::{CurveDefinition, CurveKernel};
use curveq::helix::{helix_curve, HelixParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RANDOM_CURVE_SEED: u64 = 20_240_611;
/// Perturbation amplitudes stay below this so the curve keeps kappa well above zero.
pub const MAX_PERTURBATION: f64 = 0.05;

pub fn random_coefficients(seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [(); 3].map(|_| rng.random_range(-MAX_PERTURBATION..MAX_PERTURBATION))
}

/// A perturbed helix `(cos t + e1 sin 2t, sin t + e2 cos 3t, t/2 + e3 sin t)` on `[0, 6]`.
pub fn random_expressions(seed: u64) -> [String; 3] {
    let [e1, e2, e3] = random_coefficients(seed);
    [
        format!("cos(t) + ({e1:?})*sin(2*t)"),
        format!("sin(t) + ({e2:?})*cos(3*t)"),
        format!("0.5*t + ({e3:?})*sin(t)"),
    ]
}

pub fn random_curve(seed: u64) -> CurveKernel {
    let e = random_expressions(seed);
    CurveKernel::new(CurveDefinition::parse([&e[0], &e[1], &e[2]], "t", 0.0, 6.0, false).unwrap()).unwrap()
}

pub fn random_curve_config(seed: u64, extra: &str) -> String {
    let e = random_expressions(seed);
    format!(
        r#"{{"curve": {{"ax": "{}", "ay": "{}", "az": "{}", "t_min": 0, "t_max": 6}}{extra}}}"#,
        e[0], e[1], e[2]
    )
}

pub fn helix_3_4() -> CurveKernel {
    CurveKernel::new(helix_curve(&HelixParams::new(3.0, 4.0).unwrap(), 1.0).unwrap()).unwrap()
}

pub fn unit_circle() -> CurveKernel {
    CurveKernel::new(CurveDefinition::circle(1.0).unwrap()).unwrap()
}

pub fn segment(length: f64) -> CurveKernel {
    CurveKernel::new(CurveDefinition::segment(length).unwrap()).unwrap()
}

/// Line, circle, helix and the seeded random curve.
pub fn test_curves() -> Vec<(&'static str, CurveKernel)> {
    vec![
        ("line", segment(2.0)),
        ("circle", unit_circle()),
        ("helix", helix_3_4()),
        ("random", random_curve(RANDOM_CURVE_SEED)),
    ]
}

pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
