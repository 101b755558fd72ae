//! Curve-centred tube coordinates `(s, q2, q3)` with `R = a(s) + q2 n + q3 b`.
//!
//! Point quantities (tangent vectors, metric, determinant, inverse) are
//! evaluated directly from a [`FrenetSample`]. Quantities that need an
//! arc-length derivative at fixed `(q2, q3)`, such as the Hermitizing field
//! `Gamma = (1 / 2 sqrt G) d/ds (sqrt G u^1)`, are evaluated on arc-length
//! jets of the frame; derivatives in `q2`, `q3` use Richardson-extrapolated
//! finite differences.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::convergence;
use crate::curve::{CurveError, CurveKernel, FrameJet, FrenetSample};
use crate::expr::jet::{self, Jet, JetVec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TubeError {
    #[error("tube point (s = {s}, q2 = {q2}, q3 = {q3}) outside the coordinate patch: 1 - kappa q2 = {factor:e}")]
    OutsideTube { s: f64, q2: f64, q3: f64, factor: f64 },
    #[error("singular metric at s = {s}")]
    SingularMetric { s: f64 },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Smallest admissible value of `1 - kappa q2`.
const MIN_TUBE_FACTOR: f64 = 1e-6;

/// Relative step used for finite differences in `q2`, `q3` and `s`.
const FD_RELATIVE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TubePoint {
    pub s: f64,
    pub q2: f64,
    pub q3: f64,
}

impl TubePoint {
    pub fn new(s: f64, q2: f64, q3: f64) -> Self {
        Self { s, q2, q3 }
    }
}

fn check_valid(kappa: f64, s: f64, q2: f64, q3: f64) -> Result<f64, TubeError> {
    let factor = 1.0 - kappa * q2;
    if factor > MIN_TUBE_FACTOR {
        Ok(factor)
    } else {
        Err(TubeError::OutsideTube { s, q2, q3, factor })
    }
}

/// Covariant tangent vectors `u_i = dR/dq^i`.
pub fn tangent_vectors(sample: &FrenetSample, q2: f64, q3: f64) -> Result<[Vector3<f64>; 3], TubeError> {
    let factor = check_valid(sample.kappa, sample.s, q2, q3)?;
    let u1 = sample.t_hat * factor - sample.n_hat * (q3 * sample.tau) + sample.b_hat * (q2 * sample.tau);
    Ok([u1, sample.n_hat, sample.b_hat])
}

/// Metric `G_ij = u_i . u_j` with determinant and inverse at one tube point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeMetric {
    pub u: [Vector3<f64>; 3],
    pub g: Matrix3<f64>,
    /// Direct 3x3 determinant of `g`.
    pub det_g: f64,
    /// `(1 - kappa q2)^2`.
    pub det_closed_form: f64,
    pub g_inv: Matrix3<f64>,
}

impl TubeMetric {
    /// Contravariant vector `u^i = G^{ij} u_j`.
    pub fn upper(&self, i: usize) -> Vector3<f64> {
        (0..3).fold(Vector3::zeros(), |acc, j| acc + self.u[j] * self.g_inv[(i, j)])
    }

    pub fn sqrt_det(&self) -> f64 {
        self.det_g.sqrt()
    }

    /// `max |G G^-1 - I|`.
    pub fn inverse_residual(&self) -> f64 {
        (self.g * self.g_inv - Matrix3::identity()).amax()
    }

    /// Relative mismatch between the direct and closed-form determinant.
    pub fn det_mismatch(&self) -> f64 {
        (self.det_g - self.det_closed_form).abs() / self.det_closed_form
    }
}

pub fn metric_at(sample: &FrenetSample, q2: f64, q3: f64) -> Result<TubeMetric, TubeError> {
    let u = tangent_vectors(sample, q2, q3)?;
    let g = Matrix3::from_fn(|i, j| u[i].dot(&u[j]));
    let det_g = g.determinant();
    let g_inv = g.try_inverse().ok_or(TubeError::SingularMetric { s: sample.s })?;
    let factor = 1.0 - sample.kappa * q2;
    Ok(TubeMetric { u, g, det_g, det_closed_form: factor * factor, g_inv })
}

/// Jet-valued metric data along `s` at fixed `(q2, q3)`.
#[derive(Debug, Clone, Copy)]
struct DualBasisJet {
    sqrt_g: Jet<2>,
    upper: [JetVec3<2>; 3],
}

impl DualBasisJet {
    fn new(frame: &FrameJet, q2: f64, q3: f64) -> Result<Self, TubeError> {
        check_valid(frame.kappa.value(), frame.s, q2, q3)?;
        let t: JetVec3<2> = jet::truncate_vec(&frame.tangent);
        let n: JetVec3<2> = jet::truncate_vec(&frame.normal);
        let b: JetVec3<2> = jet::truncate_vec(&frame.binormal);
        let kappa: Jet<2> = frame.kappa.truncate();
        let tau = frame.tau;
        let factor = Jet::constant(1.0) - kappa * q2;
        let u1 = jet::add(&jet::add(&jet::scale(&t, factor), &jet::scale(&n, tau * (-q3))), &jet::scale(&b, tau * q2));
        let lower = [u1, n, b];
        let mut g = [[Jet::<2>::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = jet::dot(&lower[i], &lower[j]);
            }
        }
        // Cofactor inverse; the metric is symmetric so the adjugate is too.
        let cof = |i: usize, j: usize| {
            let r = |k: usize| (i + k) % 3;
            let c = |k: usize| (j + k) % 3;
            g[r(1)][c(1)] * g[r(2)][c(2)] - g[r(1)][c(2)] * g[r(2)][c(1)]
        };
        let det = g[0][0] * cof(0, 0) + g[0][1] * cof(0, 1) + g[0][2] * cof(0, 2);
        if det.value() <= 0.0 {
            return Err(TubeError::SingularMetric { s: frame.s });
        }
        let inv_det = det.recip();
        let mut upper = [[Jet::<2>::zero(); 3]; 3];
        for (i, up) in upper.iter_mut().enumerate() {
            for (j, low) in lower.iter().enumerate() {
                let g_inv_ij = cof(j, i) * inv_det;
                *up = jet::add(up, &jet::scale(low, g_inv_ij));
            }
        }
        Ok(Self { sqrt_g: det.sqrt(), upper })
    }

    /// `(1 / sqrt G) d/ds (sqrt G u^1)`, which is `2 Gamma`.
    fn divergence_along_curve(&self) -> Vector3<f64> {
        let w = jet::scale(&self.upper[0], self.sqrt_g);
        Vector3::new(w[0].derivative(1), w[1].derivative(1), w[2].derivative(1)) / self.sqrt_g.value()
    }

    fn gamma(&self) -> Vector3<f64> {
        self.divergence_along_curve() * 0.5
    }

    fn upper_value(&self, i: usize) -> Vector3<f64> {
        jet::values(&self.upper[i])
    }

    fn upper_derivative(&self, i: usize) -> Vector3<f64> {
        let u = &self.upper[i];
        Vector3::new(u[0].derivative(1), u[1].derivative(1), u[2].derivative(1))
    }
}

/// Length scale used to size finite-difference steps and limit sequences.
fn length_scale(kernel: &CurveKernel, kappa: f64) -> f64 {
    if kappa > 0.0 {
        kernel.length().min(1.0 / kappa)
    } else {
        kernel.length()
    }
}

/// The field `Gamma` together with an independent central-difference
/// evaluation of the same expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaField {
    pub gamma: [f64; 3],
    /// `(1 / 2 sqrt G) d/ds (sqrt G u^1)` with the derivative taken by
    /// Richardson-extrapolated central differences in `s`.
    pub gamma_fd: [f64; 3],
}

impl GammaField {
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::from(self.gamma)
    }

    pub fn fd_discrepancy(&self) -> f64 {
        (Vector3::from(self.gamma) - Vector3::from(self.gamma_fd)).norm()
    }
}

pub fn gamma_at(kernel: &CurveKernel, s: f64, q2: f64, q3: f64) -> Result<GammaField, TubeError> {
    let frame = kernel.tube_frame_at(s)?;
    let dual = DualBasisJet::new(&frame, q2, q3)?;
    let gamma = dual.gamma();
    let h = FD_RELATIVE_STEP * length_scale(kernel, frame.kappa.value());
    let weighted = |x: f64| -> Result<Vector3<f64>, TubeError> {
        let sample = kernel.tube_frame_at(kernel.wrap(x))?.sample();
        let m = metric_at(&sample, q2, q3)?;
        Ok(m.upper(0) * m.sqrt_det())
    };
    let (lo, hi) = if kernel.is_closed() { (f64::MIN, f64::MAX) } else { (0.0, kernel.length()) };
    let dw = convergence::derivative(weighted, s, h, lo, hi)?;
    let sqrt_g = dual.sqrt_g.value();
    let gamma_fd = dw / (2.0 * sqrt_g);
    Ok(GammaField { gamma: gamma.into(), gamma_fd: gamma_fd.into() })
}

fn q_derivative<F>(mut f: F, q2: f64, q3: f64, slot: usize, h: f64) -> Result<Vector3<f64>, TubeError>
where
    F: FnMut(f64, f64) -> Result<Vector3<f64>, TubeError>,
{
    match slot {
        2 => convergence::derivative(|x| f(x, q3), q2, h, f64::MIN, f64::MAX),
        3 => convergence::derivative(|x| f(q2, x), q3, h, f64::MIN, f64::MAX),
        _ => unreachable!("normal slots are 2 and 3"),
    }
}

/// Norm of `(1 / sqrt G) d_i (sqrt G u^i)`, which vanishes identically.
///
/// The `s` term comes from jets; the `q2`, `q3` terms from finite
/// differences with base step `step`.
pub fn divergence_identity_with_step(
    kernel: &CurveKernel,
    s: f64,
    q2: f64,
    q3: f64,
    step: f64,
) -> Result<f64, TubeError> {
    let frame = kernel.tube_frame_at(s)?;
    let dual = DualBasisJet::new(&frame, q2, q3)?;
    let sample = frame.sample();
    let along = dual.divergence_along_curve();
    let mut across = Vector3::zeros();
    for slot in [2, 3] {
        let d = q_derivative(
            |a, b| {
                let m = metric_at(&sample, a, b)?;
                Ok(m.upper(slot - 1) * m.sqrt_det())
            },
            q2,
            q3,
            slot,
            step,
        )?;
        across += d;
    }
    Ok((along + across / dual.sqrt_g.value()).norm())
}

pub fn divergence_identity(kernel: &CurveKernel, s: f64, q2: f64, q3: f64) -> Result<f64, TubeError> {
    let frame = kernel.tube_frame_at(s)?;
    let kappa = frame.kappa.value();
    let factor = check_valid(kappa, s, q2, q3)?;
    let step = FD_RELATIVE_STEP * length_scale(kernel, kappa) * factor;
    divergence_identity_with_step(kernel, s, q2, q3, step)
}

/// Coefficients of one momentum operator, in units of `-i hbar`:
/// `sum_i derivative[i] d_i + zeroth`, slot 0 being the arc-length direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumCoefficients {
    pub derivative: [[f64; 3]; 3],
    pub zeroth: [f64; 3],
}

impl MomentumCoefficients {
    pub fn sum(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..3 {
            for c in 0..3 {
                out.derivative[i][c] += other.derivative[i][c];
            }
            out.zeroth[i] += other.zeroth[i];
        }
        out
    }
}

/// Split of the gradient into separately Hermitian tangential and normal parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumSplit {
    pub point: TubePoint,
    /// `u^1 d_1 + Gamma`
    pub along: MomentumCoefficients,
    /// `u^a d_a - Gamma`
    pub normal: MomentumCoefficients,
    /// `u^i d_i`
    pub full: MomentumCoefficients,
}

pub fn momentum_field_split(kernel: &CurveKernel, s: f64, q2: f64, q3: f64) -> Result<MomentumSplit, TubeError> {
    let frame = kernel.tube_frame_at(s)?;
    let dual = DualBasisJet::new(&frame, q2, q3)?;
    let gamma: [f64; 3] = dual.gamma().into();
    let ups: [[f64; 3]; 3] = [0, 1, 2].map(|i| dual.upper_value(i).into());
    let zero = [0.0; 3];
    let along = MomentumCoefficients { derivative: [ups[0], zero, zero], zeroth: gamma };
    let normal = MomentumCoefficients { derivative: [zero, ups[1], ups[2]], zeroth: gamma.map(|g| -g) };
    let full = MomentumCoefficients { derivative: ups, zeroth: zero };
    Ok(MomentumSplit { point: TubePoint::new(s, q2, q3), along, normal, full })
}

/// Applies both forms of each split momentum operator (the `Gamma` form and
/// the anticommutator form `(1 / 2 sqrt G) {sqrt G u, d}`) to a smooth test
/// function and returns the largest discrepancy, in units of `-i hbar`.
pub fn symmetrized_form_residual(kernel: &CurveKernel, s: f64, q2: f64, q3: f64) -> Result<f64, TubeError> {
    let frame = kernel.tube_frame_at(s)?;
    let kappa = frame.kappa.value();
    let factor = check_valid(kappa, s, q2, q3)?;
    let ell = length_scale(kernel, kappa);
    let dual = DualBasisJet::new(&frame, q2, q3)?;
    let sample = frame.sample();

    // psi(s, q2, q3) = exp(0.3 s / l) (1 + 0.2 q2 / l - 0.1 q3 / l)
    let (c2, c3) = (0.2 / ell, -0.1 / ell);
    let transverse = |a: f64, b: f64| 1.0 + c2 * a + c3 * b;
    let psi_s: Jet<2> = (Jet::variable(s) * (0.3 / ell)).exp() * transverse(q2, q3);
    let envelope = psi_s.value() / transverse(q2, q3);
    let psi = psi_s.value();
    let gamma = dual.gamma();
    let sqrt_g = dual.sqrt_g.value();

    // Tangential part.
    let u1 = dual.upper_value(0);
    let gamma_form = u1 * psi_s.derivative(1) + gamma * psi;
    let w = jet::scale(&dual.upper[0], dual.sqrt_g);
    let w_psi = jet::scale(&w, psi_s);
    let d_w_psi = Vector3::new(w_psi[0].derivative(1), w_psi[1].derivative(1), w_psi[2].derivative(1));
    let anti_form = (jet::values(&w) * psi_s.derivative(1) + d_w_psi) / (2.0 * sqrt_g);
    let along = (gamma_form - anti_form).norm();

    // Normal part.
    let dpsi = [envelope * c2, envelope * c3];
    let mut gamma_form = -gamma * psi;
    let mut anti_form = Vector3::zeros();
    let step = FD_RELATIVE_STEP * ell * factor;
    for slot in [2usize, 3] {
        let up = dual.upper_value(slot - 1);
        gamma_form += up * dpsi[slot - 2];
        anti_form += up * (sqrt_g * dpsi[slot - 2]);
        anti_form += q_derivative(
            |a, b| {
                let m = metric_at(&sample, a, b)?;
                Ok(m.upper(slot - 1) * (m.sqrt_det() * envelope * transverse(a, b)))
            },
            q2,
            q3,
            slot,
            step,
        )?;
    }
    anti_form /= 2.0 * sqrt_g;
    let normal = (gamma_form - anti_form).norm();
    Ok(along.max(normal))
}

/// Relative tolerance for each reproduced limit.
pub const LIMIT_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct LimitEntry {
    pub quantity: String,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub extrapolated: f64,
    pub target: f64,
    /// Natural magnitude used when the target is zero.
    pub scale: f64,
    /// Absent when the sequence is constant to rounding.
    pub observed_order: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub s: f64,
    pub kappa: f64,
    pub tau: f64,
    pub entries: Vec<LimitEntry>,
}

impl LimitReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn entry(&self, name: &str) -> Option<&LimitEntry> {
        self.entries.iter().find(|e| e.quantity == name)
    }
}

/// Number of halvings in the limit sequence, `eps0 / 2^k` for `k = 0..=LIMIT_LEVELS`.
const LIMIT_LEVELS: usize = 10;

/// Evaluates every term of the expanded 3D kinetic operator along
/// `q2 = q3 = eps -> 0` and extrapolates to the curve.
pub fn limit_suite(kernel: &CurveKernel, s: f64) -> Result<LimitReport, TubeError> {
    let frame = kernel.tube_frame_at(s)?;
    let sample = frame.sample();
    let (kappa, tau) = (sample.kappa, sample.tau);
    let ell = length_scale(kernel, kappa);
    let eps0 = 0.1 * ell;
    let epsilons: Vec<f64> = (0..=LIMIT_LEVELS).map(|k| eps0 / 2f64.powi(k as i32)).collect();
    let q_step = FD_RELATIVE_STEP * ell;

    let inv_len = 1.0 / kernel.length();
    let k1 = kappa.max(inv_len);
    let k2 = k1 * k1;

    // (name, target, scale)
    let mut specs: Vec<(String, f64, f64)> = Vec::new();
    let axes = ['x', 'y', 'z'];
    specs.push(("det G".into(), 1.0, 1.0));
    for (i, j) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
        specs.push((format!("G^{}{}", i + 1, j + 1), if i == j { 1.0 } else { 0.0 }, 1.0));
    }
    for (name, v) in [("u^1", sample.t_hat), ("u^2", sample.n_hat), ("u^3", sample.b_hat)] {
        for (c, axis) in axes.iter().enumerate() {
            specs.push((format!("{name}.{axis}"), v[c], 1.0));
        }
    }
    let gamma_target = sample.n_hat * (0.5 * kappa);
    for (c, axis) in axes.iter().enumerate() {
        specs.push((format!("Gamma.{axis}"), gamma_target[c], k1));
    }
    specs.push(("u^1.(d_1 u^2)".into(), -kappa, k1));
    specs.push(("u^1.(d_1 u^3)".into(), 0.0, k1));
    specs.push(("2 u^2.Gamma".into(), kappa, k1));
    specs.push(("2 u^3.Gamma".into(), 0.0, k1));
    specs.push(("u^1.u^1".into(), 1.0, 1.0));
    specs.push(("u^a.d_a Gamma".into(), 0.5 * kappa * kappa, k2));
    specs.push(("Gamma.Gamma".into(), 0.25 * kappa * kappa, k2));
    specs.push(("u^a.(d_a u^1)".into(), 0.0, k1));
    specs.push(("u^1.(d_1 u^1)".into(), 0.0, k1));
    specs.push(("2 u^1.u^2".into(), 0.0, 1.0));
    specs.push(("2 u^1.u^3".into(), 0.0, 1.0));

    let mut table: Vec<Vec<f64>> = vec![Vec::with_capacity(epsilons.len()); specs.len()];
    for &eps in &epsilons {
        let row = limit_row(kernel, &frame, &sample, eps, q_step)?;
        debug_assert_eq!(row.len(), specs.len());
        for (col, v) in table.iter_mut().zip(row) {
            col.push(v);
        }
    }

    let entries = specs
        .into_iter()
        .zip(table)
        .map(|((quantity, target, scale), values)| {
            let n = values.len();
            let extrapolated = 2.0 * values[n - 1] - values[n - 2];
            let d1 = (values[2] - values[3]).abs();
            let d2 = (values[3] - values[4]).abs();
            // Below this the differences are finite-difference rounding noise.
            let floor = 1e-9 * scale.max(target.abs());
            let observed_order = (d1 > floor && d2 > floor).then(|| (d1 / d2).log2());
            let passed = (extrapolated - target).abs() <= LIMIT_REL_TOL * target.abs().max(scale)
                && observed_order.is_none_or(|p| p >= 1.0 - 0.1);
            LimitEntry {
                quantity,
                epsilons: epsilons.clone(),
                values,
                extrapolated,
                target,
                scale,
                observed_order,
                passed,
            }
        })
        .collect();
    Ok(LimitReport { s, kappa, tau, entries })
}

fn limit_row(
    kernel: &CurveKernel,
    frame: &FrameJet,
    sample: &FrenetSample,
    eps: f64,
    q_step: f64,
) -> Result<Vec<f64>, TubeError> {
    let (q2, q3) = (eps, eps);
    let m = metric_at(sample, q2, q3)?;
    let dual = DualBasisJet::new(frame, q2, q3)?;
    let gamma = dual.gamma();
    let u = [dual.upper_value(0), dual.upper_value(1), dual.upper_value(2)];
    let du1 = [dual.upper_derivative(0), dual.upper_derivative(1), dual.upper_derivative(2)];

    let gamma_at_q = |a: f64, b: f64| -> Result<Vector3<f64>, TubeError> { Ok(DualBasisJet::new(frame, a, b)?.gamma()) };
    let u1_at_q = |a: f64, b: f64| -> Result<Vector3<f64>, TubeError> { Ok(metric_at(sample, a, b)?.upper(0)) };
    let mut ua_d_gamma = 0.0;
    let mut ua_d_u1 = 0.0;
    for slot in [2usize, 3] {
        ua_d_gamma += u[slot - 1].dot(&q_derivative(gamma_at_q, q2, q3, slot, q_step)?);
        ua_d_u1 += u[slot - 1].dot(&q_derivative(u1_at_q, q2, q3, slot, q_step)?);
    }

    let mut row = vec![m.det_g];
    for (i, j) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
        row.push(m.g_inv[(i, j)]);
    }
    for v in &u {
        row.extend(v.iter().copied());
    }
    row.extend(gamma.iter().copied());
    row.push(u[0].dot(&du1[1]));
    row.push(u[0].dot(&du1[2]));
    row.push(2.0 * u[1].dot(&gamma));
    row.push(2.0 * u[2].dot(&gamma));
    row.push(u[0].dot(&u[0]));
    row.push(ua_d_gamma);
    row.push(gamma.dot(&gamma));
    row.push(ua_d_u1);
    row.push(u[0].dot(&du1[0]));
    row.push(2.0 * u[0].dot(&u[1]));
    row.push(2.0 * u[0].dot(&u[2]));
    let _ = kernel;
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CurveDefinition;
    use crate::helix::{helix_curve, HelixParams};

    fn sample(kappa: f64, tau: f64) -> FrenetSample {
        FrenetSample {
            s: 0.0,
            position: Vector3::zeros(),
            t_hat: Vector3::x(),
            n_hat: Vector3::y(),
            b_hat: Vector3::z(),
            kappa,
            tau,
            kappa_s: 0.0,
            kappa_ss: 0.0,
            tau_s: 0.0,
        }
    }

    fn helix() -> CurveKernel {
        CurveKernel::new(helix_curve(&HelixParams::new(3.0, 4.0).unwrap(), 1.0).unwrap()).unwrap()
    }

    #[test]
    fn tangent_vectors_on_the_curve_are_the_frame() {
        let f = sample(0.12, 0.16);
        let u = tangent_vectors(&f, 0.0, 0.0).unwrap();
        assert_eq!(u, [f.t_hat, f.n_hat, f.b_hat]);
    }

    #[test]
    fn tangent_vector_plugged_values() {
        let f = sample(0.12, 0.16);
        let u = tangent_vectors(&f, 0.5, 0.25).unwrap();
        let expected = Vector3::new(0.94, -0.04, 0.08);
        assert!((u[0] - expected).amax() < 1e-15);
        let planar = tangent_vectors(&sample(0.12, 0.0), 0.5, 0.25).unwrap();
        assert_eq!(planar[0], f.t_hat * (1.0 - 0.06));
    }

    #[test]
    fn metric_plugged_values() {
        let m = metric_at(&sample(0.12, 0.16), 0.5, 0.25).unwrap();
        assert!((m.g[(0, 0)] - 0.8916).abs() < 1e-15);
        assert!((m.g[(0, 1)] + 0.04).abs() < 1e-15);
        assert!((m.g[(0, 2)] - 0.08).abs() < 1e-15);
        assert_eq!(m.g, m.g.transpose());
        assert!((m.det_g - 0.8836).abs() < 1e-14);
        assert!((m.det_closed_form - 0.8836).abs() < 1e-15);
        assert!(m.inverse_residual() < 1e-14);
        // Direct inversion gives G^11 = 1 / (1 - kappa q2)^2.
        assert!((m.g_inv[(0, 0)] - 1.0 / 0.8836).abs() < 1e-13);
    }

    #[test]
    fn metric_on_curve_is_identity() {
        let m = metric_at(&sample(0.3, 0.7), 0.0, 0.0).unwrap();
        assert_eq!(m.g, Matrix3::identity());
        assert_eq!(m.det_g, 1.0);
        assert_eq!(m.g_inv, Matrix3::identity());
    }

    #[test]
    fn tube_validity_enforced() {
        let err = metric_at(&sample(0.5, 0.0), 2.0, 0.0).unwrap_err();
        assert!(matches!(err, TubeError::OutsideTube { .. }));
        assert!(tangent_vectors(&sample(0.5, 0.0), 2.5, 0.0).is_err());
    }

    #[test]
    fn gamma_vanishes_on_a_line() {
        let k = CurveKernel::new(CurveDefinition::segment(1.0).unwrap()).unwrap();
        let g = gamma_at(&k, 0.4, 0.1, -0.2).unwrap();
        assert_eq!(g.vector(), Vector3::zeros());
        assert_eq!(divergence_identity(&k, 0.4, 0.1, -0.2).unwrap(), 0.0);
    }

    #[test]
    fn gamma_on_circle_matches_central_differences() {
        let k = CurveKernel::new(CurveDefinition::circle(1.0).unwrap()).unwrap();
        let g = gamma_at(&k, 0.0, 0.1, 0.0).unwrap();
        assert!(g.fd_discrepancy() < 1e-8, "{}", g.fd_discrepancy());
        // Closed form kappa n / (2 (1 - kappa q2)) with n = (-1, 0, 0) at s = 0.
        let expected = Vector3::new(-1.0 / (2.0 * 0.9), 0.0, 0.0);
        assert!((g.vector() - expected).norm() < 1e-12);
    }

    #[test]
    fn gamma_tends_to_half_curvature_vector_linearly() {
        let k = helix();
        let s = 3.3;
        let f = frenet_sample(&k, s);
        let target = f.n_hat * (0.5 * f.kappa);
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&e| (gamma_at(&k, s, e, e).unwrap().vector() - target).norm())
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 1.0).abs() < 0.05, "order {order}");
        }
    }

    fn frenet_sample(k: &CurveKernel, s: f64) -> FrenetSample {
        crate::curve::frenet_at(k, s).unwrap()
    }

    #[test]
    fn divergence_identity_on_helix() {
        let k = helix();
        let r = divergence_identity(&k, 5.0, 0.2, 0.1).unwrap();
        assert!(r <= 1e-8, "{r}");
    }

    #[test]
    fn momentum_split_sums_to_gradient() {
        let k = helix();
        let split = momentum_field_split(&k, 2.0, 0.3, -0.4).unwrap();
        assert_eq!(split.along.sum(&split.normal), split.full);
        let on_curve = momentum_field_split(&k, 2.0, 0.0, 0.0).unwrap();
        let f = frenet_sample(&k, 2.0);
        let expected = f.n_hat * (0.5 * f.kappa);
        assert!((Vector3::from(on_curve.along.zeroth) - expected).norm() < 1e-13);
    }

    #[test]
    fn symmetrized_forms_agree() {
        let k = helix();
        let r = symmetrized_form_residual(&k, 7.0, 0.4, 0.3).unwrap();
        assert!(r <= 1e-10, "{r}");
    }

    #[test]
    fn helix_limit_table() {
        let k = helix();
        let report = limit_suite(&k, 4.0).unwrap();
        let gg = report.entry("Gamma.Gamma").unwrap();
        assert!((gg.target - 0.0036).abs() < 1e-15);
        assert!((gg.extrapolated - 0.0036).abs() <= 1e-4 * 0.0036);
        let ua = report.entry("u^a.d_a Gamma").unwrap();
        assert!((ua.extrapolated - 0.0072).abs() <= 1e-4 * 0.0072);
        for e in &report.entries {
            assert!(e.passed, "{e:?}");
        }
    }

    #[test]
    fn line_limit_table() {
        let k = CurveKernel::new(CurveDefinition::segment(2.0).unwrap()).unwrap();
        let report = limit_suite(&k, 1.0).unwrap();
        assert!(report.all_passed());
        assert_eq!(report.entry("u^1.u^1").unwrap().extrapolated, 1.0);
        assert_eq!(report.entry("Gamma.Gamma").unwrap().extrapolated, 0.0);
    }
}
