mod common;

use std::sync::Arc;

use common::helix_3_4;
use curveq::helix::{helix_spectrum_analytic, HelixBoundary, HelixParams};
use curveq::operators::{build_hamiltonian, solve_spectrum, BoundaryCondition, CurveGrid, PhysicalConstants};

/// Eigenvalue of the three-point periodic stencil for angular mode `j`.
fn discrete_level(params: &HelixParams, c: &PhysicalConstants, j: i64, n: usize) -> f64 {
    let length = std::f64::consts::TAU * params.ds_dtheta();
    let h = length / n as f64;
    let k = std::f64::consts::TAU * j as f64 / length;
    c.kinetic_scale() * (4.0 / (h * h) * (0.5 * k * h).sin().powi(2) - 0.25 * params.kappa * params.kappa)
}

fn modes() -> Vec<i64> {
    (0..11).map(|i| if i % 2 == 1 { (i + 1) / 2 } else { -(i / 2) }).collect()
}

fn spectrum(n: usize, c: &PhysicalConstants) -> Vec<f64> {
    let grid = Arc::new(CurveGrid::new(&helix_3_4(), n, BoundaryCondition::Periodic).unwrap());
    solve_spectrum(&build_hamiltonian(&grid, c).unwrap(), 11).unwrap().eigenvalues
}

#[test]
fn helix_spectrum_up_to_fifth_mode() {
    let params = HelixParams::new(3.0, 4.0).unwrap();
    let c = PhysicalConstants::default();
    let levels: Vec<Vec<f64>> = [512, 1024, 2048].iter().map(|&n| spectrum(n, &c)).collect();
    for (idx, j) in modes().into_iter().enumerate() {
        let exact = helix_spectrum_analytic(&params, &c, j, HelixBoundary::Periodic).unwrap();
        for (level, n) in levels.iter().zip([512, 1024, 2048]) {
            let stencil = discrete_level(&params, &c, j, n);
            assert!((level[idx] - stencil).abs() <= 1e-12 + 1e-10 * stencil.abs(), "j={j} n={n}");
        }
        let rel = (levels[2][idx] - exact).abs() / exact.abs();
        // Second-order truncation reaches 1e-5 at n = 2048 only up to |j| = 3.
        if j.abs() <= 3 {
            assert!(rel <= 1e-5, "j={j}: {rel}");
        }
        if j != 0 {
            let err: Vec<f64> = levels.iter().map(|l| (l[idx] - exact).abs()).collect();
            for w in err.windows(2) {
                let p = (w[0] / w[1]).log2();
                assert!((p - 2.0).abs() < 0.3, "j={j}: order {p}");
            }
        } else {
            assert!((levels[2][0] + 0.0018).abs() < 1e-12);
        }
    }
}

#[test]
fn box_levels_on_a_dirichlet_helix() {
    let params = HelixParams::new(1.0, 0.5).unwrap();
    let c = PhysicalConstants::new(1.0, 2.0).unwrap();
    let kernel = curveq::curve::CurveKernel::new(curveq::helix::helix_curve(&params, 1.5).unwrap()).unwrap();
    let grid = Arc::new(CurveGrid::new(&kernel, 1500, BoundaryCondition::Dirichlet).unwrap());
    let e = solve_spectrum(&build_hamiltonian(&grid, &c).unwrap(), 3).unwrap().eigenvalues;
    for (i, ei) in e.iter().enumerate() {
        let boundary = HelixBoundary::Dirichlet { theta_max: 1.5 * std::f64::consts::TAU };
        let exact = helix_spectrum_analytic(&params, &c, i as i64 + 1, boundary).unwrap();
        assert!((ei - exact).abs() <= 1e-4 * exact.abs(), "{ei} vs {exact}");
    }
}
