//! Finite-difference discretization of the on-curve Hamiltonian, geometric
//! momentum and force operators, with spectral solves and the matrix-level
//! Heisenberg checks.
//!
//! Identity checks never compare matrix norms directly. A residual operator
//! `R` is applied to a fixed set of smooth probe functions and the largest
//! entry on interior rows is reported; for a consistent discretization this
//! converges at the truncation order of the stencils, whereas matrix norms of
//! `R` are dominated by high-frequency modes the continuum identity says
//! nothing about.

use std::f64::consts::TAU;
use std::sync::Arc;

use faer::{c64, Mat, Side};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{CurveError, CurveKernel, FrenetSample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("grid needs at least {min} points, got {n}")]
    GridTooSmall { n: usize, min: usize },
    #[error("periodic grid requested on an open curve whose frame is not periodic (mismatch {mismatch:e})")]
    PeriodicOpenCurve { mismatch: f64 },
    #[error("position is not periodic on this grid; use a Dirichlet grid")]
    NonPeriodicPosition,
    #[error("curvature and torsion are not constant (spread {spread:e})")]
    NonConstantCurvature { spread: f64 },
    #[error("matrix flagged Hermitian has defect {defect:e}")]
    NotHermitian { defect: f64 },
    #[error("requested {k} eigenpairs of a {n}x{n} matrix")]
    InvalidEigenCount { k: usize, n: usize },
    #[error("eigensolver failed to converge")]
    EigenFailure,
    #[error("eigenpair {index} has relative residual {residual:e}")]
    EigenResidual { index: usize, residual: f64 },
    #[error("state has grid norm {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("operator and state sizes differ ({matrix} vs {state})")]
    SizeMismatch { matrix: usize, state: usize },
    #[error("physical constants must be positive (hbar = {hbar}, mass = {mass})")]
    InvalidConstants { hbar: f64, mass: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self, OperatorError> {
        if hbar > 0.0 && mass > 0.0 && hbar.is_finite() && mass.is_finite() {
            Ok(Self { hbar, mass })
        } else {
            Err(OperatorError::InvalidConstants { hbar, mass })
        }
    }

    /// `hbar^2 / 2m`
    pub fn kinetic_scale(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Periodic,
    Dirichlet,
}

/// Rows excluded at each end of a Dirichlet grid when measuring residuals.
pub const BOUNDARY_COLLAR: usize = 2;

/// Tolerance on frame periodicity for the constant-curvature periodic fixture.
const FIXTURE_FRAME_TOL: f64 = 1e-9;

/// Relative tolerance on the constancy of curvature and torsion.
const CONSTANT_CURVATURE_TOL: f64 = 1e-10;

/// Uniform grid in arc length with the frame sampled at every node.
///
/// Periodic grids hold `s_i = i h`, `h = L / n`. Dirichlet grids hold the
/// interior nodes `s_i = (i + 1) h`, `h = L / (n + 1)`, the wave function
/// vanishing at both ends.
#[derive(Debug, Clone)]
pub struct CurveGrid {
    pub n: usize,
    pub s_values: Vec<f64>,
    pub h: f64,
    pub bc: BoundaryCondition,
    pub length: f64,
    closed: bool,
    samples: Vec<FrenetSample>,
}

impl CurveGrid {
    pub const MIN_POINTS: usize = 8;

    /// Periodic grids require a closed curve, or an open curve of constant
    /// curvature and torsion whose frame repeats at the two ends (used as a
    /// spectral fixture; the position itself is not periodic).
    pub fn new(kernel: &CurveKernel, n: usize, bc: BoundaryCondition) -> Result<Self, OperatorError> {
        if n < Self::MIN_POINTS {
            return Err(OperatorError::GridTooSmall { n, min: Self::MIN_POINTS });
        }
        let length = kernel.length();
        let (h, offset) = match bc {
            BoundaryCondition::Periodic => (length / n as f64, 0.0),
            BoundaryCondition::Dirichlet => {
                let h = length / (n + 1) as f64;
                (h, h)
            }
        };
        let s_values: Vec<f64> = (0..n).map(|i| offset + i as f64 * h).collect();
        let samples = s_values
            .iter()
            .map(|&s| kernel.tube_frame_at(s).map(|f| f.sample()))
            .collect::<Result<Vec<_>, _>>()?;
        let grid = Self { n, s_values, h, bc, length, closed: kernel.is_closed(), samples };
        if bc == BoundaryCondition::Periodic && !kernel.is_closed() {
            let end = kernel.tube_frame_at(length)?.sample();
            let start = &grid.samples[0];
            let mismatch = [
                (end.t_hat - start.t_hat).amax(),
                (end.n_hat - start.n_hat).amax(),
                (end.b_hat - start.b_hat).amax(),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            let spread = grid.curvature_spread();
            if kernel.is_straight() {
                return Err(OperatorError::PeriodicOpenCurve { mismatch: f64::INFINITY });
            }
            if mismatch > FIXTURE_FRAME_TOL || spread > CONSTANT_CURVATURE_TOL {
                return Err(OperatorError::PeriodicOpenCurve { mismatch: mismatch.max(spread) });
            }
        }
        Ok(grid)
    }

    pub fn samples(&self) -> &[FrenetSample] {
        &self.samples
    }

    /// Periodic grid over an open curve (constant-curvature fixture).
    pub fn is_fixture(&self) -> bool {
        self.bc == BoundaryCondition::Periodic && !self.closed
    }

    /// `max |s_{i+1} - s_i - h|`
    pub fn spacing_defect(&self) -> f64 {
        self.s_values.windows(2).map(|w| (w[1] - w[0] - self.h).abs()).fold(0.0, f64::max)
    }

    /// Largest relative variation of curvature and torsion over the nodes.
    pub fn curvature_spread(&self) -> f64 {
        let range = |f: &dyn Fn(&FrenetSample) -> f64| {
            let (lo, hi) = self
                .samples
                .iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        };
        let scale = self
            .samples
            .iter()
            .map(|x| x.kappa.abs().max(x.tau.abs()))
            .fold(1.0 / self.length, f64::max);
        let derivs = self
            .samples
            .iter()
            .map(|x| x.kappa_s.abs().max(x.kappa_ss.abs() * self.length).max(x.tau_s.abs()) * self.length)
            .fold(0.0, f64::max);
        (range(&|x| x.kappa).max(range(&|x| x.tau)).max(derivs)) / scale
    }

    /// Rows on which residuals are measured.
    pub fn interior(&self) -> std::ops::Range<usize> {
        match self.bc {
            BoundaryCondition::Periodic => 0..self.n,
            BoundaryCondition::Dirichlet => BOUNDARY_COLLAR..self.n - BOUNDARY_COLLAR,
        }
    }

    /// Smooth probe functions used by the residual norms.
    pub fn probes(&self) -> Vec<Vec<c64>> {
        let w = TAU / self.length;
        let shapes: [&dyn Fn(f64) -> c64; 3] = [
            &|s| c64::new((w * s).sin().exp(), 0.0),
            &|s| c64::new((2.0 * w * s + 0.3).cos(), 0.0),
            &|s| c64::from_polar(1.0 + 0.5 * (w * s).cos(), (w * s).sin()),
        ];
        shapes.iter().map(|f| self.s_values.iter().map(|&s| f(s)).collect()).collect()
    }

    fn neighbours(&self, i: usize) -> (Option<usize>, Option<usize>) {
        match self.bc {
            BoundaryCondition::Periodic => (Some((i + self.n - 1) % self.n), Some((i + 1) % self.n)),
            BoundaryCondition::Dirichlet => (i.checked_sub(1), (i + 1 < self.n).then_some(i + 1)),
        }
    }

    /// Central first difference `D1`, antisymmetric.
    pub fn first_difference(&self) -> Mat<f64> {
        let mut d = Mat::<f64>::zeros(self.n, self.n);
        let c = 0.5 / self.h;
        for i in 0..self.n {
            let (lo, hi) = self.neighbours(i);
            if let Some(j) = hi {
                d[(i, j)] += c;
            }
            if let Some(j) = lo {
                d[(i, j)] -= c;
            }
        }
        d
    }

    /// Three-point second difference `D2`, symmetric.
    pub fn second_difference(&self) -> Mat<f64> {
        let mut d = Mat::<f64>::zeros(self.n, self.n);
        let c = 1.0 / (self.h * self.h);
        for i in 0..self.n {
            d[(i, i)] = -2.0 * c;
            let (lo, hi) = self.neighbours(i);
            for j in [lo, hi].into_iter().flatten() {
                d[(i, j)] += c;
            }
        }
        d
    }
}

/// A dense operator on a [`CurveGrid`].
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub entries: Mat<c64>,
    pub grid: Arc<CurveGrid>,
    pub hermitian: bool,
}

/// Relative Hermiticity tolerance enforced on matrices flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-13;

impl OperatorMatrix {
    fn general(entries: Mat<c64>, grid: Arc<CurveGrid>) -> Self {
        Self { entries, grid, hermitian: false }
    }

    fn hermitian(entries: Mat<c64>, grid: Arc<CurveGrid>) -> Result<Self, OperatorError> {
        let m = Self { entries, grid, hermitian: true };
        let defect = m.hermiticity_defect();
        if defect > HERMITIAN_TOL * m.max_abs() {
            return Err(OperatorError::NotHermitian { defect });
        }
        Ok(m)
    }

    fn from_real(a: &Mat<f64>, scale: c64) -> Mat<c64> {
        Mat::from_fn(a.nrows(), a.ncols(), |i, j| scale * a[(i, j)])
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.n() {
            for i in 0..self.n() {
                m = m.max(self.entries[(i, j)].norm());
            }
        }
        m
    }

    /// `max |M - M^dagger|`
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n();
        let mut d = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                d = d.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// `max |A - B|` over entries.
    pub fn max_difference(&self, other: &OperatorMatrix) -> f64 {
        let mut d = 0.0f64;
        for j in 0..self.n() {
            for i in 0..self.n() {
                d = d.max((self.entries[(i, j)] - other.entries[(i, j)]).norm());
            }
        }
        d
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        let n = self.n();
        let mut out = vec![c64::new(0.0, 0.0); n];
        for (j, &x) in v.iter().enumerate() {
            if x == c64::new(0.0, 0.0) {
                continue;
            }
            let col = self.entries.col(j);
            for (i, o) in out.iter_mut().enumerate() {
                *o += col[i] * x;
            }
        }
        out
    }

    fn is_real(&self) -> bool {
        let n = self.n();
        (0..n).all(|j| (0..n).all(|i| self.entries[(i, j)].im == 0.0))
    }
}

fn diag_times(d: &[f64], a: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)])
}

fn component(samples: &[FrenetSample], c: usize, f: impl Fn(&FrenetSample) -> Vector3<f64>) -> Vec<f64> {
    samples.iter().map(|x| f(x)[c]).collect()
}

/// `H = -(hbar^2 / 2m) (D2 + diag(kappa^2 / 4))`
pub fn build_hamiltonian(grid: &Arc<CurveGrid>, constants: &PhysicalConstants) -> Result<OperatorMatrix, OperatorError> {
    let mut a = grid.second_difference();
    for (i, x) in grid.samples.iter().enumerate() {
        a[(i, i)] += 0.25 * x.kappa * x.kappa;
    }
    let scale = c64::new(-constants.kinetic_scale(), 0.0);
    OperatorMatrix::hermitian(OperatorMatrix::from_real(&a, scale), grid.clone())
}

/// `-(hbar^2 / 2m) D2`, the Hamiltonian without the geometric potential.
pub fn build_free_hamiltonian(grid: &Arc<CurveGrid>, constants: &PhysicalConstants) -> Result<OperatorMatrix, OperatorError> {
    let scale = c64::new(-constants.kinetic_scale(), 0.0);
    OperatorMatrix::hermitian(OperatorMatrix::from_real(&grid.second_difference(), scale), grid.clone())
}

/// Symmetric form `P_c = (-i hbar / 2) (diag(t_c) D1 + D1 diag(t_c))`.
pub fn build_geometric_momentum(
    grid: &Arc<CurveGrid>,
    constants: &PhysicalConstants,
) -> Result<[OperatorMatrix; 3], OperatorError> {
    let d1 = grid.first_difference();
    let scale = c64::new(0.0, -0.5 * constants.hbar);
    let build = |c: usize| {
        let t = component(&grid.samples, c, |x| x.t_hat);
        let m = Mat::from_fn(grid.n, grid.n, |i, j| scale * ((t[i] + t[j]) * d1[(i, j)]));
        OperatorMatrix::hermitian(m, grid.clone())
    };
    Ok([build(0)?, build(1)?, build(2)?])
}

/// Form `-i hbar (diag(t_c) D1 + diag(kappa n_c / 2))`; not Hermitian on the grid.
pub fn build_geometric_momentum_normal_form(grid: &Arc<CurveGrid>, constants: &PhysicalConstants) -> [OperatorMatrix; 3] {
    let d1 = grid.first_difference();
    let scale = c64::new(0.0, -constants.hbar);
    [0, 1, 2].map(|c| {
        let t = component(&grid.samples, c, |x| x.t_hat);
        let kn = component(&grid.samples, c, |x| x.curvature_vector() * 0.5);
        let mut a = diag_times(&t, &d1);
        for (i, v) in kn.iter().enumerate() {
            a[(i, i)] += v;
        }
        OperatorMatrix::general(OperatorMatrix::from_real(&a, scale), grid.clone())
    })
}

/// Force operator from the Heisenberg equation for the geometric momentum,
/// frame components multiplying each derivative from the left.
pub fn build_force(grid: &Arc<CurveGrid>, constants: &PhysicalConstants) -> [OperatorMatrix; 3] {
    build_force_scaled(grid, constants, 1.0)
}

/// [`build_force`] with the curvature (and its derivatives) multiplied by
/// `kappa_scale`. Any value other than 1 yields a wrong operator; it exists
/// as a negative control for the identity checks.
pub fn build_force_scaled(grid: &Arc<CurveGrid>, constants: &PhysicalConstants, kappa_scale: f64) -> [OperatorMatrix; 3] {
    let d1 = grid.first_difference();
    let d2 = grid.second_difference();
    let pre = constants.kinetic_scale();
    let n = grid.n;
    [0, 1, 2].map(|c| {
        let mut first = vec![0.0; n];
        let mut second = vec![0.0; n];
        let mut zeroth = vec![0.0; n];
        for (i, x) in grid.samples.iter().enumerate() {
            let (k, k1, k2) = (x.kappa * kappa_scale, x.kappa_s * kappa_scale, x.kappa_ss * kappa_scale);
            let (tau, tau1) = (x.tau, x.tau_s);
            let (t, nn, b) = (x.t_hat[c], x.n_hat[c], x.b_hat[c]);
            first[i] = t * 2.0 * k * k - nn * 2.0 * k1 - b * 2.0 * tau * k;
            second[i] = -nn * 2.0 * k;
            zeroth[i] = t * 2.0 * k * k1 + nn * (0.5 * k * k * k + 0.5 * tau * tau * k - 0.5 * k2)
                - b * (0.5 * k * tau1 + tau * k1);
        }
        let mut a = Mat::from_fn(n, n, |i, j| first[i] * d1[(i, j)] + second[i] * d2[(i, j)]);
        for (i, z) in zeroth.iter().enumerate() {
            a[(i, i)] += z;
        }
        OperatorMatrix::general(OperatorMatrix::from_real(&a, c64::new(pre, 0.0)), grid.clone())
    })
}

/// Reduced force for constant curvature and torsion:
/// `(1/2)(n_c K + K n_c) - n_c hbar^2 kappa (2 kappa^2 + tau^2) / 4m`
/// with `K = kappa m v^2 = -(hbar^2 kappa / m)(D2 - kappa^2 / 4)`.
pub fn build_force_constant_curvature(
    grid: &Arc<CurveGrid>,
    constants: &PhysicalConstants,
) -> Result<[OperatorMatrix; 3], OperatorError> {
    let spread = grid.curvature_spread();
    if spread > CONSTANT_CURVATURE_TOL {
        return Err(OperatorError::NonConstantCurvature { spread });
    }
    let n = grid.n;
    let kappa = grid.samples.iter().map(|x| x.kappa).sum::<f64>() / n as f64;
    let tau = grid.samples.iter().map(|x| x.tau).sum::<f64>() / n as f64;
    let hb2m = constants.hbar * constants.hbar / constants.mass;
    let mut k = grid.second_difference();
    for i in 0..n {
        k[(i, i)] -= 0.25 * kappa * kappa;
    }
    let k = Mat::from_fn(n, n, |i, j| -hb2m * kappa * k[(i, j)]);
    let quantum = 0.25 * hb2m * kappa * (2.0 * kappa * kappa + tau * tau);
    let build = |c: usize| {
        let nc = component(&grid.samples, c, |x| x.n_hat);
        let mut a = Mat::from_fn(n, n, |i, j| 0.5 * (nc[i] + nc[j]) * k[(i, j)]);
        for (i, v) in nc.iter().enumerate() {
            a[(i, i)] -= v * quantum;
        }
        OperatorMatrix::hermitian(OperatorMatrix::from_real(&a, c64::new(1.0, 0.0)), grid.clone())
    };
    Ok([build(0)?, build(1)?, build(2)?])
}

/// Assembles `c2 D2 + c1 D1 + c0` on the grid stencils, one matrix per
/// Cartesian component. The force builds share this layout, so two sets of
/// coefficients can be compared entry by entry.
pub fn assemble_normal_ordered(grid: &Arc<CurveGrid>, coeffs: &NormalOrdered) -> [OperatorMatrix; 3] {
    let d1 = grid.first_difference();
    let d2 = grid.second_difference();
    let n = grid.n;
    [0, 1, 2].map(|c| {
        let mut a = Mat::from_fn(n, n, |i, j| coeffs.c1[i][c] * d1[(i, j)] + coeffs.c2[i][c] * d2[(i, j)]);
        for i in 0..n {
            a[(i, i)] += coeffs.c0[i][c];
        }
        OperatorMatrix::general(OperatorMatrix::from_real(&a, c64::new(1.0, 0.0)), grid.clone())
    })
}

/// Reduced constant-curvature force expanded into normal order and assembled
/// like [`build_force`]; see [`force_constant_curvature_coefficients`].
pub fn build_force_constant_curvature_normal_order(
    kernel: &CurveKernel,
    grid: &Arc<CurveGrid>,
    constants: &PhysicalConstants,
) -> Result<[OperatorMatrix; 3], OperatorError> {
    Ok(assemble_normal_ordered(grid, &force_constant_curvature_coefficients(kernel, grid, constants)?))
}

/// Coefficients of a second-order operator in normal order,
/// `c2 d^2 + c1 d + c0`, one Cartesian vector per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalOrdered {
    pub c2: Vec<Vector3<f64>>,
    pub c1: Vec<Vector3<f64>>,
    pub c0: Vec<Vector3<f64>>,
}

impl NormalOrdered {
    pub fn max_difference(&self, other: &NormalOrdered) -> f64 {
        let diff = |a: &[Vector3<f64>], b: &[Vector3<f64>]| {
            a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
        };
        diff(&self.c2, &other.c2).max(diff(&self.c1, &other.c1)).max(diff(&self.c0, &other.c0))
    }
}

/// Continuum coefficients of the Heisenberg-equation force at the grid nodes.
pub fn force_coefficients(grid: &CurveGrid, constants: &PhysicalConstants) -> NormalOrdered {
    let pre = constants.kinetic_scale();
    let mut out = NormalOrdered { c2: Vec::new(), c1: Vec::new(), c0: Vec::new() };
    for x in &grid.samples {
        let (k, k1, k2, tau, tau1) = (x.kappa, x.kappa_s, x.kappa_ss, x.tau, x.tau_s);
        out.c2.push(x.n_hat * (-2.0 * k * pre));
        out.c1.push((x.t_hat * (2.0 * k * k) - x.n_hat * (2.0 * k1) - x.b_hat * (2.0 * tau * k)) * pre);
        out.c0.push(
            (x.t_hat * (2.0 * k * k1) + x.n_hat * (0.5 * k * k * k + 0.5 * tau * tau * k - 0.5 * k2)
                - x.b_hat * (0.5 * k * tau1 + tau * k1))
                * pre,
        );
    }
    out
}

/// Normal-ordered coefficients of the reduced constant-curvature force,
/// expanding `K n` by the product rule with the arc-length derivatives of the
/// normal taken from the frame series (not from the Frenet relations).
pub fn force_constant_curvature_coefficients(
    kernel: &CurveKernel,
    grid: &CurveGrid,
    constants: &PhysicalConstants,
) -> Result<NormalOrdered, OperatorError> {
    let spread = grid.curvature_spread();
    if spread > CONSTANT_CURVATURE_TOL {
        return Err(OperatorError::NonConstantCurvature { spread });
    }
    let hb2m = constants.hbar * constants.hbar / constants.mass;
    let mut out = NormalOrdered { c2: Vec::new(), c1: Vec::new(), c0: Vec::new() };
    for &s in &grid.s_values {
        let f = kernel.tube_frame_at(s)?;
        let kappa = f.kappa.value();
        let tau = f.tau.value();
        let d = |k: usize| Vector3::new(f.normal[0].derivative(k), f.normal[1].derivative(k), f.normal[2].derivative(k));
        let (n0, n1, n2) = (d(0), d(1), d(2));
        // K = -(hbar^2 kappa / m)(d^2 - kappa^2 / 4)
        // n K: n d^2 - n kappa^2/4;  K n: n d^2 + 2 n' d + n'' - n kappa^2/4
        let k = -hb2m * kappa;
        out.c2.push(n0 * k);
        out.c1.push(n1 * k);
        out.c0.push((n2 * 0.5 - n0 * (0.25 * kappa * kappa)) * k - n0 * (0.25 * hb2m * kappa * (2.0 * kappa * kappa + tau * tau)));
    }
    Ok(out)
}

fn interior_max(grid: &CurveGrid, v: &[c64]) -> f64 {
    grid.interior().map(|i| v[i].norm()).fold(0.0, f64::max)
}

fn scale_vec(d: &[f64], v: &[c64]) -> Vec<c64> {
    d.iter().zip(v).map(|(a, b)| b * *a).collect()
}

/// Interior probe norm of an identity residual together with the largest
/// interior magnitude of the individual terms that were subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub residual: f64,
    pub scale: f64,
}

/// Residuals at or below this fraction of the term magnitude count as exact.
pub const EXACT_RELATIVE_FLOOR: f64 = 1e-8;

impl IdentityResidual {
    fn new() -> Self {
        Self { residual: 0.0, scale: 0.0 }
    }

    fn absorb(&mut self, grid: &CurveGrid, residual: &[c64], terms: &[&[c64]]) {
        self.residual = self.residual.max(interior_max(grid, residual));
        for t in terms {
            self.scale = self.scale.max(interior_max(grid, t));
        }
    }

    /// Zero up to rounding in the stencils.
    pub fn is_exact(&self) -> bool {
        self.residual <= EXACT_RELATIVE_FLOOR * self.scale
    }
}

/// Interior probe norm of `sum_c {diag(n_c), P_c}`.
pub fn tangentiality_residual(momentum: &[OperatorMatrix; 3]) -> IdentityResidual {
    let grid = &momentum[0].grid;
    let mut out = IdentityResidual::new();
    for f in grid.probes() {
        let mut acc = vec![c64::new(0.0, 0.0); grid.n];
        let mut terms = Vec::new();
        for (c, p) in momentum.iter().enumerate() {
            let nc = component(&grid.samples, c, |x| x.n_hat);
            let a = scale_vec(&nc, &p.apply(&f));
            let b = p.apply(&scale_vec(&nc, &f));
            for i in 0..grid.n {
                acc[i] += a[i] + b[i];
            }
            terms.push(a);
            terms.push(b);
        }
        let refs: Vec<&[c64]> = terms.iter().map(|t| t.as_slice()).collect();
        out.absorb(grid, &acc, &refs);
    }
    out
}

/// Interior probe norm of `(m / i hbar)[diag(a_c), H] - P_c`, maximized over `c`.
pub fn kinematical_identity_residual(
    hamiltonian: &OperatorMatrix,
    momentum: &[OperatorMatrix; 3],
    constants: &PhysicalConstants,
) -> Result<IdentityResidual, OperatorError> {
    let grid = &hamiltonian.grid;
    if grid.is_fixture() {
        return Err(OperatorError::NonPeriodicPosition);
    }
    let factor = c64::new(0.0, -constants.mass / constants.hbar);
    let mut out = IdentityResidual::new();
    for f in grid.probes() {
        let hf = hamiltonian.apply(&f);
        for (c, p) in momentum.iter().enumerate() {
            let a = component(&grid.samples, c, |x| x.position);
            let ahf: Vec<c64> = scale_vec(&a, &hf).into_iter().map(|x| x * factor).collect();
            let haf: Vec<c64> = hamiltonian.apply(&scale_vec(&a, &f)).into_iter().map(|x| x * factor).collect();
            let pf = p.apply(&f);
            let r: Vec<c64> = (0..grid.n).map(|i| ahf[i] - haf[i] - pf[i]).collect();
            out.absorb(grid, &r, &[&ahf, &haf, &pf]);
        }
    }
    Ok(out)
}

/// Interior probe norm of `(1 / i hbar)[P_c, H] - F_c`, maximized over `c`.
pub fn force_identity_residual(
    hamiltonian: &OperatorMatrix,
    momentum: &[OperatorMatrix; 3],
    force: &[OperatorMatrix; 3],
    constants: &PhysicalConstants,
) -> IdentityResidual {
    let grid = &hamiltonian.grid;
    let factor = c64::new(0.0, -1.0 / constants.hbar);
    let mut out = IdentityResidual::new();
    for f in grid.probes() {
        let hf = hamiltonian.apply(&f);
        for (p, fc) in momentum.iter().zip(force) {
            let phf: Vec<c64> = p.apply(&hf).into_iter().map(|x| x * factor).collect();
            let hpf: Vec<c64> = hamiltonian.apply(&p.apply(&f)).into_iter().map(|x| x * factor).collect();
            let ff = fc.apply(&f);
            let r: Vec<c64> = (0..grid.n).map(|i| phf[i] - hpf[i] - ff[i]).collect();
            out.absorb(grid, &r, &[&phf, &hpf, &ff]);
        }
    }
    out
}

/// Interior probe norm of `A_c - B_c`, maximized over `c`.
pub fn operator_difference_residual(a: &[OperatorMatrix; 3], b: &[OperatorMatrix; 3]) -> IdentityResidual {
    let grid = &a[0].grid;
    let mut out = IdentityResidual::new();
    for f in grid.probes() {
        for (x, y) in a.iter().zip(b) {
            let (u, v) = (x.apply(&f), y.apply(&f));
            let r: Vec<c64> = u.iter().zip(&v).map(|(p, q)| p - q).collect();
            out.absorb(grid, &r, &[&u, &v]);
        }
    }
    out
}

/// `max_c max |A_c - B_c|` over matrix entries.
pub fn operator_max_difference(a: &[OperatorMatrix; 3], b: &[OperatorMatrix; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_difference(y)).fold(0.0, f64::max)
}

/// Lowest eigenpairs of a Hermitian operator, normalized so that
/// `sum_i h |psi_i|^2 = 1`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// `n x k`, one eigenvector per column.
    pub eigenvectors: Mat<c64>,
    /// `|H psi - E psi| / (|H|_2 |psi|)` per pair.
    pub residuals: Vec<f64>,
    /// `max |<psi_i, psi_j> - delta_ij|` under the grid inner product.
    pub orthonormality: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub residual: f64,
}

/// Relative residual bound enforced on every eigenpair.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-9;

impl Spectrum {
    pub fn rows(&self) -> Vec<SpectrumRow> {
        self.eigenvalues
            .iter()
            .zip(&self.residuals)
            .enumerate()
            .map(|(index, (&eigenvalue, &residual))| SpectrumRow { index, eigenvalue, residual })
            .collect()
    }

    pub fn state(&self, k: usize) -> Vec<c64> {
        let col = self.eigenvectors.col(k);
        (0..self.eigenvectors.nrows()).map(|i| col[i]).collect()
    }
}

pub fn solve_spectrum(hamiltonian: &OperatorMatrix, k: usize) -> Result<Spectrum, OperatorError> {
    let n = hamiltonian.n();
    if k == 0 || k > n {
        return Err(OperatorError::InvalidEigenCount { k, n });
    }
    if !hamiltonian.hermitian {
        return Err(OperatorError::NotHermitian { defect: hamiltonian.hermiticity_defect() });
    }
    let (values, vectors): (Vec<f64>, Mat<c64>) = if hamiltonian.is_real() {
        let a = Mat::<f64>::from_fn(n, n, |i, j| hamiltonian.entries[(i, j)].re);
        let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| OperatorError::EigenFailure)?;
        let s = evd.S().column_vector();
        let u = evd.U();
        ((0..n).map(|i| s[i]).collect(), Mat::from_fn(n, k, |i, j| c64::new(u[(i, j)], 0.0)))
    } else {
        let evd = hamiltonian.entries.self_adjoint_eigen(Side::Lower).map_err(|_| OperatorError::EigenFailure)?;
        let s = evd.S().column_vector();
        let u = evd.U();
        ((0..n).map(|i| s[i].re).collect(), Mat::from_fn(n, k, |i, j| u[(i, j)]))
    };
    let norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let h = hamiltonian.grid.h;
    let inv_sqrt_h = 1.0 / h.sqrt();
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let psi: Vec<c64> = (0..n).map(|i| vectors[(i, j)]).collect();
        let hpsi = hamiltonian.apply(&psi);
        let r = hpsi.iter().zip(&psi).map(|(a, b)| (a - b * values[j]).norm_sqr()).sum::<f64>().sqrt();
        let len = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let rel = r / (norm * len);
        if rel > EIGEN_RESIDUAL_TOL {
            return Err(OperatorError::EigenResidual { index: j, residual: rel });
        }
        residuals.push(rel);
    }
    let eigenvectors = Mat::from_fn(n, k, |i, j| vectors[(i, j)] * inv_sqrt_h);
    let mut orthonormality = 0.0f64;
    for a in 0..k {
        for b in 0..=a {
            let mut dot = c64::new(0.0, 0.0);
            for i in 0..n {
                dot += eigenvectors[(i, a)].conj() * eigenvectors[(i, b)];
            }
            let target = if a == b { 1.0 } else { 0.0 };
            orthonormality = orthonormality.max((dot * h - target).norm());
        }
    }
    Ok(Spectrum { eigenvalues: values[..k].to_vec(), eigenvectors, residuals, orthonormality, h })
}

/// Allowed deviation of the grid norm of a state from 1.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// `sum_ij h psi_i^* M_ij psi_j` for a grid-normalized state.
pub fn expectation(m: &OperatorMatrix, psi: &[c64]) -> Result<c64, OperatorError> {
    if psi.len() != m.n() {
        return Err(OperatorError::SizeMismatch { matrix: m.n(), state: psi.len() });
    }
    let h = m.grid.h;
    let norm = h * psi.iter().map(|x| x.norm_sqr()).sum::<f64>();
    if (norm - 1.0).abs() > NORMALIZATION_TOL {
        return Err(OperatorError::NotNormalized { norm });
    }
    let mpsi = m.apply(psi);
    Ok(psi.iter().zip(&mpsi).map(|(a, b)| a.conj() * b).sum::<c64>() * h)
}
