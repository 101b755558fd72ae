//! Acceptance criteria, one line each.
//!
//! Runs as a plain binary so every criterion is printed even when an earlier
//! one fails. Criteria listed in `EXPECTED_RED` are known to be unattainable
//! as stated; they are still evaluated and printed, and the run fails if one
//! of them unexpectedly passes or if any other criterion fails.

mod common;

use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use common::{helix_3_4, order, test_curves, unit_circle};
use curveq::app::tube_radius;
use curveq::curve::{frenet_serret_residuals, CurveKernel};
use curveq::operators::{
    build_force, build_force_constant_curvature_normal_order, build_free_hamiltonian, build_geometric_momentum,
    build_hamiltonian, force_identity_residual, kinematical_identity_residual, operator_max_difference,
    solve_spectrum, tangentiality_residual, BoundaryCondition, CurveGrid, IdentityResidual, OperatorMatrix,
    PhysicalConstants, EXACT_RELATIVE_FLOOR,
};
use curveq::tube::{divergence_identity, limit_suite, metric_at};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXPECTED_RED: &[&str] = &["2"];

const GROUND_STATE_ABS_TOL: f64 = 5e-5;
const CIRCLE_RUNTIME_S: f64 = 30.0;
const HELIX_REL_TOL: f64 = 1e-5;
const HELIX_RUNTIME_S: f64 = 60.0;
/// Stated target for the first excited helix doublet.
const HELIX_E1_STATED: f64 = 0.019550;
const ORDER_TARGET: f64 = 2.0;
const ORDER_TOL: f64 = 0.3;
const FORCE_FORMS_REL_TOL: f64 = 1e-12;
const LIMIT_REL_TOL: f64 = 1e-4;
const METRIC_TOL: f64 = 1e-12;
const FRAME_TOL: f64 = 1e-12;
const DIVERGENCE_TOL: f64 = 1e-6;
const REFINEMENT: [usize; 3] = [256, 512, 1024];

type Criterion = (&'static str, &'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn natural_grid(kernel: &CurveKernel, n: usize) -> Arc<CurveGrid> {
    let bc = if kernel.is_closed() { BoundaryCondition::Periodic } else { BoundaryCondition::Dirichlet };
    Arc::new(CurveGrid::new(kernel, n, bc).unwrap())
}

fn orders_ok(r: &[IdentityResidual]) -> (bool, String) {
    if r.iter().all(IdentityResidual::is_exact) {
        return (true, "exact".into());
    }
    let orders: Vec<f64> = r.windows(2).map(|w| order(w[0].residual, w[1].residual)).collect();
    let ok = orders.iter().all(|p| (p - ORDER_TARGET).abs() <= ORDER_TOL);
    (ok, format!("orders {}", orders.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join("/")))
}

fn per_curve(f: impl Fn(&CurveKernel) -> (bool, String)) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, k) in test_curves() {
        let (ok, d) = f(&k);
        passed &= ok;
        parts.push(format!("{name} {d}"));
    }
    outcome(passed, parts.join("; "))
}

fn c1_geometric_shift() -> Outcome {
    let started = Instant::now();
    let c = PhysicalConstants::default();
    let grid = natural_grid(&unit_circle(), 2000);
    let e0 = solve_spectrum(&build_hamiltonian(&grid, &c).unwrap(), 1).unwrap().eigenvalues[0];
    let free = solve_spectrum(&build_free_hamiltonian(&grid, &c).unwrap(), 1).unwrap().eigenvalues[0];
    let elapsed = started.elapsed().as_secs_f64();
    let passed = (e0 + 0.125).abs() <= GROUND_STATE_ABS_TOL && free.abs() <= GROUND_STATE_ABS_TOL && elapsed <= CIRCLE_RUNTIME_S;
    outcome(passed, format!("E0 = {e0:.9}, free E0 = {free:.2e}, {elapsed:.1} s"))
}

fn c2_helix_spectrum() -> Outcome {
    let started = Instant::now();
    let c = PhysicalConstants::default();
    let (r, cc) = (3.0f64, 4.0f64);
    let p = r * r + cc * cc;
    let kappa = r / p;
    let e0_exact = -0.5 * kappa * kappa / 4.0;
    let e1_exact = 0.5 * (1.0 / p - kappa * kappa / 4.0);
    let k = helix_3_4();
    let levels: Vec<Vec<f64>> = [512, 1024, 2048]
        .iter()
        .map(|&n| {
            let grid = Arc::new(CurveGrid::new(&k, n, BoundaryCondition::Periodic).unwrap());
            solve_spectrum(&build_hamiltonian(&grid, &c).unwrap(), 3).unwrap().eigenvalues
        })
        .collect();
    let elapsed = started.elapsed().as_secs_f64();
    let fine = &levels[2];
    let rel = |e: f64, x: f64| (e - x).abs() / x.abs();
    let e0_ok = rel(fine[0], -0.0018) <= HELIX_REL_TOL;
    let stated_ok = [fine[1], fine[2]].iter().all(|&e| rel(e, HELIX_E1_STATED) <= HELIX_REL_TOL);
    let derived_ok = [fine[1], fine[2]].iter().all(|&e| rel(e, e1_exact) <= HELIX_REL_TOL);
    let err: Vec<f64> = levels.iter().map(|l| (l[1] - e1_exact).abs()).collect();
    let orders = [order(err[0], err[1]), order(err[1], err[2])];
    let order_ok = orders.iter().all(|p| (p - ORDER_TARGET).abs() <= ORDER_TOL);
    outcome(
        e0_ok && stated_ok && order_ok && elapsed <= HELIX_RUNTIME_S,
        format!(
            "E0 = {:.9} (closed form {e0_exact}), E+-1 = {:.9}/{:.9}: rel err {:.2e} vs stated {HELIX_E1_STATED}, \
             {:.2e} vs closed form {e1_exact:.6} ({}), orders {:.3}/{:.3}, {elapsed:.1} s",
            fine[0],
            fine[1],
            fine[2],
            rel(fine[1], HELIX_E1_STATED),
            rel(fine[1], e1_exact),
            if derived_ok { "within tolerance" } else { "outside tolerance" },
            orders[0],
            orders[1],
        ),
    )
}

fn c3_hermiticity() -> Outcome {
    let c = PhysicalConstants::default();
    per_curve(|k| {
        let grid = natural_grid(k, 256);
        let h = build_hamiltonian(&grid, &c).unwrap().hermiticity_defect();
        let p = build_geometric_momentum(&grid, &c).unwrap().iter().map(OperatorMatrix::hermiticity_defect).fold(0.0, f64::max);
        (h == 0.0 && p == 0.0, format!("H {h:.1e} P {p:.1e}"))
    })
}

fn c4_kinematical() -> Outcome {
    let c = PhysicalConstants::default();
    per_curve(|k| {
        let r: Vec<_> = REFINEMENT
            .iter()
            .map(|&n| {
                let grid = Arc::new(CurveGrid::new(k, n, BoundaryCondition::Dirichlet).unwrap());
                let h = build_hamiltonian(&grid, &c).unwrap();
                kinematical_identity_residual(&h, &build_geometric_momentum(&grid, &c).unwrap(), &c).unwrap()
            })
            .collect();
        orders_ok(&r)
    })
}

fn c5_force() -> Outcome {
    let c = PhysicalConstants::default();
    let identity = per_curve(|k| {
        let r: Vec<_> = REFINEMENT
            .iter()
            .map(|&n| {
                let grid = natural_grid(k, n);
                let h = build_hamiltonian(&grid, &c).unwrap();
                force_identity_residual(&h, &build_geometric_momentum(&grid, &c).unwrap(), &build_force(&grid, &c), &c)
            })
            .collect();
        orders_ok(&r)
    });
    let mut forms_ok = true;
    let mut parts = Vec::new();
    for (name, k) in [("circle", unit_circle()), ("helix", helix_3_4())] {
        let grid = natural_grid(&k, 512);
        let general = build_force(&grid, &c);
        let reduced = build_force_constant_curvature_normal_order(&k, &grid, &c).unwrap();
        let scale = general.iter().map(OperatorMatrix::max_abs).fold(0.0, f64::max);
        let diff = operator_max_difference(&general, &reduced);
        forms_ok &= diff <= FORCE_FORMS_REL_TOL * scale;
        parts.push(format!("{name} forms differ by {diff:.1e} (scale {scale:.1e})"));
    }
    outcome(identity.passed && forms_ok, format!("{}; {}", identity.detail, parts.join("; ")))
}

fn c6_tangentiality() -> Outcome {
    let c = PhysicalConstants::default();
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, k) in [("circle", unit_circle()), ("helix", helix_3_4())] {
        let r: Vec<_> = REFINEMENT
            .iter()
            .map(|&n| tangentiality_residual(&build_geometric_momentum(&natural_grid(&k, n), &c).unwrap()))
            .collect();
        let (ok, d) = orders_ok(&r);
        passed &= ok;
        parts.push(format!("{name} {d} (max {:.1e})", r.iter().map(|x| x.residual).fold(0.0, f64::max)));
    }
    outcome(passed, parts.join("; "))
}

fn c7_limits() -> Outcome {
    let k = helix_3_4();
    let report = limit_suite(&k, 0.37 * k.length()).unwrap();
    let gg = report.entry("Gamma.Gamma").unwrap().extrapolated;
    let ug = report.entry("u^a.d_a Gamma").unwrap().extrapolated;
    let values_ok = (gg - 0.0036).abs() <= LIMIT_REL_TOL * 0.0036 && (ug - 0.0072).abs() <= LIMIT_REL_TOL * 0.0072;
    let failing: Vec<&str> = report.entries.iter().filter(|e| !e.passed).map(|e| e.quantity.as_str()).collect();
    outcome(
        values_ok && failing.is_empty(),
        format!("{} limits, Gamma.Gamma = {gg:.8}, u^a.d_a Gamma = {ug:.8}, failing {failing:?}", report.entries.len()),
    )
}

fn random_points(k: &CurveKernel, count: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = tube_radius(k).unwrap();
    (0..count)
        .map(|_| (rng.random_range(0.0..k.length()), rng.random_range(-rho..rho), rng.random_range(-rho..rho)))
        .collect()
}

fn c8_metric() -> Outcome {
    per_curve(|k| {
        let (mut det, mut inv) = (0.0f64, 0.0f64);
        for (s, q2, q3) in random_points(k, 1000, 8) {
            let m = metric_at(&k.tube_frame_at(s).unwrap().sample(), q2, q3).unwrap();
            det = det.max(m.det_mismatch());
            inv = inv.max(m.inverse_residual());
        }
        (det <= METRIC_TOL && inv <= METRIC_TOL, format!("det {det:.1e} inverse {inv:.1e}"))
    })
}

fn c9_frenet_serret() -> Outcome {
    per_curve(|k| {
        let r: Vec<[f64; 3]> = REFINEMENT.iter().map(|&n| frenet_serret_residuals(k, n).unwrap()).collect();
        let scale = (0..=64)
            .map(|i| {
                let f = k.tube_frame_at(k.length() * i as f64 / 64.0).unwrap().sample();
                f.kappa.abs().max(f.tau.abs())
            })
            .fold(1.0 / k.length(), f64::max);
        let mut ok = true;
        let mut orders = Vec::new();
        for rel in 0..3 {
            // A relation that holds to rounding, such as b' = 0 on a plane curve.
            if r.iter().all(|x| x[rel] <= EXACT_RELATIVE_FLOOR * scale) {
                continue;
            }
            for w in r.windows(2) {
                let p = order(w[0][rel], w[1][rel]);
                ok &= (p - ORDER_TARGET).abs() <= ORDER_TOL;
                orders.push(p);
            }
        }
        let frame = (0..=1000)
            .map(|i| k.tube_frame_at(k.length() * i as f64 / 1000.0).unwrap().sample().orthonormality_defect())
            .fold(0.0, f64::max);
        ok &= frame <= FRAME_TOL;
        let orders = if orders.is_empty() {
            "exact".to_owned()
        } else {
            format!("orders {:.3}..{:.3}", orders.iter().cloned().fold(f64::MAX, f64::min), orders.iter().cloned().fold(0.0, f64::max))
        };
        (ok, format!("{orders}, frame {frame:.1e}"))
    })
}

fn c10_divergence() -> Outcome {
    per_curve(|k| {
        let worst = random_points(k, 100, 10)
            .into_iter()
            .map(|(s, q2, q3)| divergence_identity(k, s, q2, q3).unwrap())
            .fold(0.0, f64::max);
        (worst <= DIVERGENCE_TOL, format!("max {worst:.1e}"))
    })
}

fn c11_cli() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let good = dir.path().join("helix.json");
    let bad = dir.path().join("corrupt.json");
    let base = r#"{"curve": {"builtin": "helix", "R": 3.0, "C": 4.0, "turns": 1}, "grid": {"n": 256, "bc": "periodic"}"#;
    std::fs::write(&good, format!("{base}}}")).unwrap();
    std::fs::write(&bad, format!(r#"{base}, "test_hooks": {{"kappa_scale": 1.05}}}}"#)).unwrap();
    let run = |path: &std::path::Path| {
        Command::new(env!("CARGO_BIN_EXE_curveq")).args(["verify", "--config", path.to_str().unwrap()]).output().unwrap()
    };
    let (a, b, n) = (run(&good), run(&good), run(&bad));
    let identical = a.stdout == b.stdout && !a.stdout.is_empty();
    let clean = a.status.code() == Some(0);
    let control = n.status.code().is_some_and(|c| c != 0);
    outcome(
        identical && clean && control,
        format!(
            "identical {identical}, helix exit {:?}, corrupted-kappa exit {:?}",
            a.status.code(),
            n.status.code()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1", "geometric potential shift", c1_geometric_shift),
        ("2", "helix spectrum", c2_helix_spectrum),
        ("3", "hermiticity", c3_hermiticity),
        ("4", "kinematical identity", c4_kinematical),
        ("5", "force identity", c5_force),
        ("6", "tangentiality", c6_tangentiality),
        ("7", "limit table", c7_limits),
        ("8", "metric identities", c8_metric),
        ("9", "frenet-serret", c9_frenet_serret),
        ("10", "divergence identity", c10_divergence),
        ("11", "cli determinism", c11_cli),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let o = check();
        let red_expected = EXPECTED_RED.contains(&id);
        let tag = match (o.passed, red_expected) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (expected)",
            (true, true) => "PASS (unexpected)",
        };
        println!("criterion {id:>2} {name}: {tag}: {}", o.detail);
        if o.passed == red_expected {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcomes: {unexpected:?}");
        ExitCode::FAILURE
    }
}
