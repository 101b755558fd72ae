use curveq::expr::{eval_jet, eval_value, parse_expression, Expr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Second-order central differences for derivatives 1 to 4.
fn central(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> [f64; 4] {
    let (m2, m1, z, p1, p2) = (f(t - 2.0 * h), f(t - h), f(t), f(t + h), f(t + 2.0 * h));
    [
        (p1 - m1) / (2.0 * h),
        (p1 - 2.0 * z + m1) / (h * h),
        (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h.powi(3)),
        (p2 - 4.0 * p1 + 6.0 * z - 4.0 * m1 + m2) / h.powi(4),
    ]
}

fn random_smooth_expressions(seed: u64, count: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = || (rng.random_range(0.2..1.5f64) * 1000.0).round() / 1000.0;
    (0..count)
        .map(|i| match i % 4 {
            0 => format!("sin({}*t + {}) * exp({}*t)", c(), c(), c()),
            1 => format!("sqrt({} + {}*t^2) - cos({}*t)", c() + 1.0, c(), c()),
            2 => format!("cos(t)^3 / (2 + sin({}*t))", c()),
            _ => format!("log({} + t^2) * tan({}*t)", c() + 0.5, 0.3 * c()),
        })
        .collect()
}

#[test]
fn t_exp_t_derivatives_are_closed_form() {
    let ast = parse_expression("t*exp(t)").unwrap();
    for t in [-1.5, -0.2, 0.0, 0.7, 2.0] {
        let j = eval_jet(&ast, t).unwrap();
        let d = [j.d1(), j.d2(), j.d3(), j.d4()];
        for (k, dk) in d.iter().enumerate() {
            let exact = (t + (k + 1) as f64) * f64::exp(t);
            assert!((dk - exact).abs() <= 1e-13 * exact.abs().max(1.0), "t={t} k={}", k + 1);
        }
    }
}

/// Sixth-order estimates from two Richardson passes over `central` at `h, h/2, h/4`.
fn richardson6(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> [f64; 4] {
    let d = [central(f, t, h), central(f, t, h / 2.0), central(f, t, h / 4.0)];
    std::array::from_fn(|k| {
        let r1 = (4.0 * d[1][k] - d[0][k]) / 3.0;
        let r2 = (4.0 * d[2][k] - d[1][k]) / 3.0;
        (16.0 * r2 - r1) / 15.0
    })
}

#[test]
fn t_exp_t_matches_sixth_order_differences() {
    let ast = parse_expression("t*exp(t)").unwrap();
    let f = |t: f64| eval_value(&ast, t).unwrap();
    let j = eval_jet(&ast, 1.0).unwrap();
    assert!((j.value() - f(1.0)).abs() <= 1e-15 * f(1.0));
    let exact = [j.d1(), j.d2(), j.d3(), j.d4()];
    let mut previous = f64::INFINITY;
    for h in [0.2, 0.1] {
        let fd = richardson6(&f, 1.0, h);
        let worst = (0..4).map(|k| ((fd[k] - exact[k]) / exact[k]).abs()).fold(0.0, f64::max);
        assert!(worst < previous, "h={h}: {worst}");
        previous = worst;
    }
    assert!(previous <= 1e-7, "{previous}");
}

#[test]
fn jet_derivatives_match_central_differences_at_second_order() {
    for text in random_smooth_expressions(7, 12) {
        let ast: Expr = parse_expression(&text).unwrap();
        let f = |t: f64| eval_value(&ast, t).unwrap();
        for t in [0.13, 0.41, 0.9] {
            let j = eval_jet(&ast, t).unwrap();
            let exact = [j.d1(), j.d2(), j.d3(), j.d4()];
            let coarse = central(&f, t, 0.04);
            let fine = central(&f, t, 0.02);
            for k in 0..4 {
                let (e0, e1) = ((coarse[k] - exact[k]).abs(), (fine[k] - exact[k]).abs());
                let scale = exact[k].abs().max(1.0);
                assert!(e1 <= 1e-2 * scale, "{text} t={t} k={}: {e1}", k + 1);
                if e0 > 1e-7 * scale {
                    let p = (e0 / e1).log2();
                    assert!((p - 2.0).abs() < 0.3, "{text} t={t} k={}: order {p}", k + 1);
                }
            }
        }
    }
}
