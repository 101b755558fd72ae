//! Closed-form quantities for a particle on the cylindrical helix
//! `r = R, z = C theta`, used as an analytic oracle for the general pipeline.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use faer::{c64, Mat};
use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::curve::{CurveDefinition, CurveError};
use crate::operators::{CurveGrid, OperatorMatrix, PhysicalConstants};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HelixError {
    #[error("helix needs R > 0 and C >= 0 (got R = {radius}, C = {apex})")]
    InvalidParams { radius: f64, apex: f64 },
    #[error("number of turns must be positive, got {0}")]
    InvalidTurns(f64),
    #[error("Dirichlet modes start at n = 1, got {0}")]
    InvalidMode(i64),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HelixParams {
    pub radius: f64,
    pub apex: f64,
    pub kappa: f64,
    pub tau: f64,
    /// `R^2 / (R^2 + C^2)`
    pub sin2_alpha: f64,
    /// `C^2 / (R^2 + C^2)`
    pub cos2_alpha: f64,
}

impl HelixParams {
    pub fn new(radius: f64, apex: f64) -> Result<Self, HelixError> {
        if !(radius > 0.0 && apex >= 0.0 && radius.is_finite() && apex.is_finite()) {
            return Err(HelixError::InvalidParams { radius, apex });
        }
        let p = radius * radius + apex * apex;
        Ok(Self {
            radius,
            apex,
            kappa: radius / p,
            tau: apex / p,
            sin2_alpha: radius * radius / p,
            cos2_alpha: apex * apex / p,
        })
    }

    /// `R^2 + C^2`
    pub fn pitch_sq(&self) -> f64 {
        self.radius * self.radius + self.apex * self.apex
    }

    /// Arc length per radian of `theta`.
    pub fn ds_dtheta(&self) -> f64 {
        self.pitch_sq().sqrt()
    }

    pub fn length(&self, turns: f64) -> f64 {
        TAU * turns * self.ds_dtheta()
    }
}

/// The helix as Cartesian expressions in `theta = t` over `turns` full turns.
/// A flat helix (`C = 0`) of exactly one turn is the closed circle.
pub fn helix_curve(params: &HelixParams, turns: f64) -> Result<CurveDefinition, HelixError> {
    if !(turns > 0.0 && turns.is_finite()) {
        return Err(HelixError::InvalidTurns(turns));
    }
    let (r, c) = (format!("{:?}", params.radius), format!("{:?}", params.apex));
    let closed = params.apex == 0.0 && turns == 1.0;
    Ok(CurveDefinition::parse(
        [&format!("{r}*cos(t)"), &format!("{r}*sin(t)"), &format!("{c}*t")],
        "t",
        0.0,
        TAU * turns,
        closed,
    )?)
}

/// `H = prefactor (d_theta^2 + potential_const)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HelixHamiltonian {
    /// `-hbar^2 / (2 m (R^2 + C^2))`
    pub prefactor: f64,
    /// `sin^2(alpha) / 4`
    pub potential_const: f64,
}

pub fn helix_hamiltonian_coefficients(params: &HelixParams, constants: &PhysicalConstants) -> HelixHamiltonian {
    HelixHamiltonian {
        prefactor: -constants.hbar * constants.hbar / (2.0 * constants.mass * params.pitch_sq()),
        potential_const: 0.25 * params.sin2_alpha,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum HelixBoundary {
    /// Periodic in `theta` over one turn.
    Periodic,
    /// Vanishing at `theta = 0` and `theta = theta_max`.
    Dirichlet { theta_max: f64 },
}

/// Eigenvalue of mode `n` of the helix Hamiltonian.
pub fn helix_spectrum_analytic(
    params: &HelixParams,
    constants: &PhysicalConstants,
    n: i64,
    bc: HelixBoundary,
) -> Result<f64, HelixError> {
    let scale = constants.hbar * constants.hbar / (2.0 * constants.mass * params.pitch_sq());
    let q = 0.25 * params.sin2_alpha;
    match bc {
        HelixBoundary::Periodic => Ok(scale * ((n * n) as f64 - q)),
        HelixBoundary::Dirichlet { theta_max } => {
            if n < 1 {
                return Err(HelixError::InvalidMode(n));
            }
            let k = n as f64 * PI / theta_max;
            Ok(scale * (k * k - q))
        }
    }
}

/// Vector coefficients in the cylindrical basis `(r, theta, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cylindrical {
    pub r: f64,
    pub theta: f64,
    pub z: f64,
}

impl Cylindrical {
    /// Cartesian vector at azimuth `theta`.
    pub fn at(&self, theta: f64) -> Vector3<f64> {
        let (s, c) = theta.sin_cos();
        Vector3::new(self.r * c - self.theta * s, self.r * s + self.theta * c, self.z)
    }
}

/// Operator coefficients of the helix momentum, velocity-squared and force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HelixOperatorBundle {
    /// `p = -i hbar (momentum_derivative d_theta + momentum_zeroth)`
    pub momentum_derivative: Cylindrical,
    pub momentum_zeroth: Cylindrical,
    /// `v^2 = v2_prefactor (d_theta^2 - sin^2(alpha) / 4)`
    pub v2_prefactor: f64,
    /// Normal direction `n = -r`.
    pub normal: Cylindrical,
    /// Weight of the symmetrized `(n m v^2 + m v^2 n) / 2` term, equal to `kappa`.
    pub classical_weight: f64,
    /// `hbar^2 kappa (2 kappa^2 + tau^2) / 4m`, entering as `-n * quantum_term`.
    pub quantum_term: f64,
    /// Alternative closed form of the same term,
    /// `hbar^2 R (2 sin^2 + cos^2) / (4 m (R^2 + C^2)^3)`; differs from
    /// `quantum_term` by a factor `R^2 + C^2`.
    pub alt_quantum_term: f64,
    /// Alternative classical weight `sin(alpha) / R` with the true `sin(alpha)`;
    /// reduces to `kappa` only if `sin(alpha)` is read as `R^2 / (R^2 + C^2)`.
    pub alt_classical_weight: f64,
}

pub fn helix_momentum_and_force_analytic(params: &HelixParams, constants: &PhysicalConstants) -> HelixOperatorBundle {
    let (hbar, m) = (constants.hbar, constants.mass);
    let (kappa, tau) = (params.kappa, params.tau);
    let p = params.pitch_sq();
    HelixOperatorBundle {
        momentum_derivative: Cylindrical { r: 0.0, theta: kappa, z: tau },
        momentum_zeroth: Cylindrical { r: -0.5 * kappa, theta: 0.0, z: 0.0 },
        v2_prefactor: -hbar * hbar / (m * m * p),
        normal: Cylindrical { r: -1.0, theta: 0.0, z: 0.0 },
        classical_weight: kappa,
        quantum_term: hbar * hbar * kappa * (2.0 * kappa * kappa + tau * tau) / (4.0 * m),
        alt_quantum_term: hbar * hbar * params.radius * (2.0 * params.sin2_alpha + params.cos2_alpha)
            / (4.0 * m * p.powi(3)),
        alt_classical_weight: params.sin2_alpha.sqrt() / params.radius,
    }
}

/// The reduced force on `grid`, assembled from the closed-form frame
/// `n(s) = -r(theta(s))` and the bundle coefficients in the `theta` variable.
///
/// The grid must lie on the helix `helix_curve(params, _)` with `s = sqrt(R^2 + C^2) theta`.
pub fn helix_force_matrices(
    params: &HelixParams,
    constants: &PhysicalConstants,
    grid: &Arc<CurveGrid>,
) -> [OperatorMatrix; 3] {
    let b = helix_momentum_and_force_analytic(params, constants);
    let n = grid.n;
    let dtheta = grid.h / params.ds_dtheta();
    // m v^2 = m v2_prefactor (d_theta^2 - sin^2/4), with d_theta^2 on the theta grid.
    let d2 = grid.second_difference();
    let to_theta = grid.h * grid.h / (dtheta * dtheta);
    let mut mv2 = Mat::from_fn(n, n, |i, j| constants.mass * b.v2_prefactor * d2[(i, j)] * to_theta);
    for i in 0..n {
        mv2[(i, i)] -= constants.mass * b.v2_prefactor * 0.25 * params.sin2_alpha;
    }
    let normals: Vec<Vector3<f64>> = grid.s_values.iter().map(|&s| b.normal.at(s / params.ds_dtheta())).collect();
    [0, 1, 2].map(|c| {
        let entries = Mat::from_fn(n, n, |i, j| {
            let mut v = 0.5 * b.classical_weight * (normals[i][c] + normals[j][c]) * mv2[(i, j)];
            if i == j {
                v -= normals[i][c] * b.quantum_term;
            }
            c64::new(v, 0.0)
        });
        OperatorMatrix { entries, grid: grid.clone(), hermitian: true }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{frenet_at, CurveKernel};

    fn std_params() -> HelixParams {
        HelixParams::new(3.0, 4.0).unwrap()
    }

    #[test]
    fn derived_parameters() {
        let p = std_params();
        assert!((p.kappa - 0.12).abs() < 1e-16);
        assert!((p.tau - 0.16).abs() < 1e-16);
        assert!((p.kappa * p.kappa + p.tau * p.tau - 1.0 / 25.0).abs() < 1e-16);
        assert!((p.sin2_alpha - 0.36).abs() < 1e-16);
        assert!((p.length(1.0) - 10.0 * PI).abs() < 1e-13);
        let flat = HelixParams::new(2.0, 0.0).unwrap();
        assert_eq!(flat.tau, 0.0);
        assert_eq!(flat.kappa, 0.5);
        let unit = HelixParams::new(1.0, 1.0).unwrap();
        assert_eq!(unit.sin2_alpha, 0.5);
    }

    #[test]
    fn invalid_params() {
        assert!(HelixParams::new(0.0, 1.0).is_err());
        assert!(HelixParams::new(1.0, -1.0).is_err());
        assert!(helix_curve(&std_params(), 0.0).is_err());
    }

    #[test]
    fn hamiltonian_coefficients() {
        let h = helix_hamiltonian_coefficients(&std_params(), &PhysicalConstants::default());
        assert!((h.prefactor + 1.0 / 50.0).abs() < 1e-17);
        assert!((h.potential_const - 0.09).abs() < 1e-16);
        let circle = helix_hamiltonian_coefficients(&HelixParams::new(1.0, 0.0).unwrap(), &PhysicalConstants::default());
        assert_eq!(circle.potential_const, 0.25);
    }

    #[test]
    fn hamiltonian_matches_arc_length_form() {
        // -(hbar^2 / 2m)(d_s^2 + kappa^2 / 4) with d_s = d_theta / sqrt(R^2 + C^2)
        let p = std_params();
        let c = PhysicalConstants::new(0.8, 1.7).unwrap();
        let h = helix_hamiltonian_coefficients(&p, &c);
        let general_prefactor = -c.kinetic_scale() / p.pitch_sq();
        let general_potential = c.kinetic_scale() * p.kappa * p.kappa / 4.0;
        assert!((h.prefactor - general_prefactor).abs() < 1e-15);
        assert!((-h.prefactor * h.potential_const - general_potential).abs() < 1e-15);
    }

    #[test]
    fn analytic_spectrum() {
        let (p, c) = (std_params(), PhysicalConstants::default());
        let e0 = helix_spectrum_analytic(&p, &c, 0, HelixBoundary::Periodic).unwrap();
        assert!((e0 + 0.0018).abs() < 1e-16);
        let e1 = helix_spectrum_analytic(&p, &c, 1, HelixBoundary::Periodic).unwrap();
        assert!((e1 - 0.0182).abs() < 1e-15);
        let circle = HelixParams::new(1.0, 0.0).unwrap();
        assert_eq!(helix_spectrum_analytic(&circle, &c, 0, HelixBoundary::Periodic).unwrap(), -0.125);
        assert!(helix_spectrum_analytic(&p, &c, 0, HelixBoundary::Dirichlet { theta_max: 1.0 }).is_err());
    }

    #[test]
    fn force_bundle_values() {
        let b = helix_momentum_and_force_analytic(&std_params(), &PhysicalConstants::default());
        assert!((b.quantum_term - 102.0 / (4.0 * 15625.0)).abs() < 1e-17);
        assert!((b.alt_quantum_term * 25.0 - b.quantum_term).abs() < 1e-17);
        assert!((b.v2_prefactor + 1.0 / 25.0).abs() < 1e-17);
    }

    #[test]
    fn general_path_reproduces_frame() {
        let p = std_params();
        let k = CurveKernel::new(helix_curve(&p, 1.0).unwrap()).unwrap();
        let b = helix_momentum_and_force_analytic(&p, &PhysicalConstants::default());
        for s in [0.0, 4.0, 17.5, 31.0] {
            let f = frenet_at(&k, s).unwrap();
            let theta = s / p.ds_dtheta();
            assert!((f.kappa - p.kappa).abs() < 1e-10);
            assert!((f.tau - p.tau).abs() < 1e-10);
            assert!((f.n_hat - b.normal.at(theta)).amax() < 1e-10);
            // t d_s = (kappa theta_hat + tau z) d_theta
            assert!((f.t_hat / p.ds_dtheta() - b.momentum_derivative.at(theta)).amax() < 1e-10);
            assert!((f.curvature_vector() * 0.5 - b.momentum_zeroth.at(theta)).amax() < 1e-10);
        }
    }

    #[test]
    fn flat_helix_is_circle() {
        let p = HelixParams::new(2.0, 0.0).unwrap();
        let def = helix_curve(&p, 1.0).unwrap();
        assert!(def.closed);
        let k = CurveKernel::new(def).unwrap();
        assert!((k.length() - 4.0 * PI).abs() < 1e-12);
    }
}
