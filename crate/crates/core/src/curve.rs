//! Parametric space curves, their arc-length reparametrization, and the
//! Frenet–Serret frame with curvature, torsion and their arc-length
//! derivatives.
//!
//! All derivative data is obtained from truncated Taylor series of the
//! component expressions in the raw parameter `t`, composed with the series
//! of `t(s)` obtained by series reversion of `s(t)`. Nothing is differenced.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::expr::jet::{self, Jet, JetVec3};
use crate::expr::{eval_series, parse_expression_in, EvalError, Expr, ParseError};
use crate::quadrature;

/// Curvature below `KAPPA_MIN_SCALE / L` is treated as zero.
pub const KAPPA_MIN_SCALE: f64 = 1e-8;

/// Relative tolerance of the arc-length quadrature.
const ARC_REL_TOL: f64 = 1e-14;

/// Dense sample count used for the regularity and straightness scans.
const SCAN_SAMPLES: usize = 2048;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("component {component}: {source}")]
    Parse {
        component: char,
        #[source]
        source: ParseError,
    },
    #[error("component {component} at t = {t}: {source}")]
    Eval {
        component: char,
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error("invalid parameter domain [{t_min}, {t_max}]")]
    InvalidDomain { t_min: f64, t_max: f64 },
    #[error("curve is not regular at t = {t}: |a'(t)| = {speed:e}")]
    Irregular { t: f64, speed: f64 },
    #[error("curve flagged closed but endpoints differ by {mismatch:e}")]
    NotClosed { mismatch: f64 },
    #[error("arc-length map needs at least 16 samples, got {0}")]
    TooFewSamples(usize),
    #[error("curvature {kappa:e} below kappa_min {kappa_min:e} at s = {s}; Frenet normal undefined")]
    VanishingCurvature { s: f64, kappa: f64, kappa_min: f64 },
    #[error("arc length {s} outside [0, {length}]")]
    OutOfDomain { s: f64, length: f64 },
}

const AXES: [char; 3] = ['x', 'y', 'z'];

/// The embedded curve `a(t)` given by three Cartesian component expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveDefinition {
    pub components: [Expr; 3],
    pub t_min: f64,
    pub t_max: f64,
    pub closed: bool,
}

impl CurveDefinition {
    /// Validates the domain, regularity on a dense sample, and closure.
    pub fn new(components: [Expr; 3], t_min: f64, t_max: f64, closed: bool) -> Result<Self, CurveError> {
        if !(t_min.is_finite() && t_max.is_finite() && t_max > t_min) {
            return Err(CurveError::InvalidDomain { t_min, t_max });
        }
        let def = Self { components, t_min, t_max, closed };
        def.check_regular()?;
        if closed {
            def.check_closed()?;
        }
        Ok(def)
    }

    /// Parses the three components with `var` as the parameter name.
    pub fn parse(
        sources: [&str; 3],
        var: &str,
        t_min: f64,
        t_max: f64,
        closed: bool,
    ) -> Result<Self, CurveError> {
        let mut parsed = Vec::with_capacity(3);
        for (src, component) in sources.iter().zip(AXES) {
            let e = parse_expression_in(src, var).map_err(|source| CurveError::Parse { component, source })?;
            parsed.push(e);
        }
        let components: [Expr; 3] = parsed.try_into().expect("three components");
        Self::new(components, t_min, t_max, closed)
    }

    /// Circle of the given radius in the xy-plane, starting at `(R, 0, 0)`.
    pub fn circle(radius: f64) -> Result<Self, CurveError> {
        let r = format!("{radius:?}");
        Self::parse(
            [&format!("{r}*cos(t)"), &format!("{r}*sin(t)"), "0"],
            "t",
            0.0,
            std::f64::consts::TAU,
            true,
        )
    }

    /// Straight segment of the given length along the x axis.
    pub fn segment(length: f64) -> Result<Self, CurveError> {
        Self::parse(["t", "0", "0"], "t", 0.0, length, false)
    }

    /// Series of `a(t)` with `N` coefficients around `t`.
    pub fn position_series<const N: usize>(&self, t: f64) -> Result<JetVec3<N>, CurveError> {
        let mut out = [Jet::<N>::zero(); 3];
        for (k, (expr, component)) in self.components.iter().zip(AXES).enumerate() {
            out[k] = eval_series::<N>(expr, t).map_err(|source| CurveError::Eval { component, t, source })?;
        }
        Ok(out)
    }

    pub fn position(&self, t: f64) -> Result<Vector3<f64>, CurveError> {
        Ok(jet::values(&self.position_series::<1>(t)?))
    }

    /// `|a'(t)|`.
    pub fn speed(&self, t: f64) -> Result<f64, CurveError> {
        let a = self.position_series::<2>(t)?;
        let d = Vector3::new(a[0].derivative(1), a[1].derivative(1), a[2].derivative(1));
        Ok(d.norm())
    }

    /// Curvature from the raw parametrization, `|a' x a''| / |a'|^3`.
    fn raw_curvature(&self, t: f64) -> Result<f64, CurveError> {
        let a = self.position_series::<3>(t)?;
        let d1 = Vector3::new(a[0].derivative(1), a[1].derivative(1), a[2].derivative(1));
        let d2 = Vector3::new(a[0].derivative(2), a[1].derivative(2), a[2].derivative(2));
        Ok(d1.cross(&d2).norm() / d1.norm().powi(3))
    }

    fn scan_points(&self) -> impl Iterator<Item = f64> + '_ {
        let span = self.t_max - self.t_min;
        (0..=SCAN_SAMPLES).map(move |i| self.t_min + span * i as f64 / SCAN_SAMPLES as f64)
    }

    fn check_regular(&self) -> Result<(), CurveError> {
        let mut speeds = Vec::with_capacity(SCAN_SAMPLES + 1);
        for t in self.scan_points() {
            speeds.push((t, self.speed(t)?));
        }
        let max = speeds.iter().map(|p| p.1).fold(0.0, f64::max);
        let threshold = 1e-8 * max;
        match speeds.iter().find(|(_, v)| !(*v > threshold)) {
            Some(&(t, speed)) => Err(CurveError::Irregular { t, speed }),
            None => Ok(()),
        }
    }

    fn check_closed(&self) -> Result<(), CurveError> {
        let a = self.position(self.t_min)?;
        let b = self.position(self.t_max)?;
        let mut mismatch = (a - b).amax();
        let ta = self.position_series::<2>(self.t_min)?;
        let tb = self.position_series::<2>(self.t_max)?;
        let dir = |j: &JetVec3<2>| Vector3::new(j[0].derivative(1), j[1].derivative(1), j[2].derivative(1)).normalize();
        mismatch = mismatch.max((dir(&ta) - dir(&tb)).amax());
        if mismatch > 1e-9 {
            return Err(CurveError::NotClosed { mismatch });
        }
        Ok(())
    }
}

/// Monotone map between the raw parameter `t` and arc length `s`.
///
/// Cumulative arc length is tabulated at uniformly spaced knots in `t`;
/// values between knots come from a fresh quadrature on the partial panel,
/// so the map is exact up to the quadrature tolerance everywhere.
#[derive(Debug, Clone)]
pub struct ArcLengthMap {
    knots_t: Vec<f64>,
    knots_s: Vec<f64>,
    length: f64,
    /// Number of Kronrod nodes per quadrature panel.
    pub quadrature_order: usize,
}

/// Builds the arc-length table with `n_samples` panels.
pub fn arclength_map(curve: &CurveDefinition, n_samples: usize) -> Result<ArcLengthMap, CurveError> {
    if n_samples < 16 {
        return Err(CurveError::TooFewSamples(n_samples));
    }
    let span = curve.t_max - curve.t_min;
    let knots_t: Vec<f64> = (0..=n_samples)
        .map(|i| if i == n_samples { curve.t_max } else { curve.t_min + span * i as f64 / n_samples as f64 })
        .collect();
    let mut knots_s = Vec::with_capacity(knots_t.len());
    knots_s.push(0.0);
    let mut acc = 0.0;
    for w in knots_t.windows(2) {
        acc += panel_length(curve, w[0], w[1])?;
        knots_s.push(acc);
    }
    for (i, w) in knots_s.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(CurveError::Irregular { t: knots_t[i], speed: curve.speed(knots_t[i])? });
        }
    }
    Ok(ArcLengthMap { knots_t, knots_s, length: acc, quadrature_order: 15 })
}

fn panel_length(curve: &CurveDefinition, a: f64, b: f64) -> Result<f64, CurveError> {
    quadrature::integrate(|t| curve.speed(t), a, b, ARC_REL_TOL, 0.0)
}

impl ArcLengthMap {
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Arc length from `t_min` to `t`.
    pub fn arc_length_at(&self, curve: &CurveDefinition, t: f64) -> Result<f64, CurveError> {
        let k = self.panel_of(&self.knots_t, t);
        Ok(self.knots_s[k] + panel_length(curve, self.knots_t[k], t)?)
    }

    /// Parameter value at arc length `s`, by safeguarded Newton iteration.
    pub fn param_at(&self, curve: &CurveDefinition, s: f64) -> Result<f64, CurveError> {
        let tol = 1e-12 * self.length;
        if !(s >= -tol && s <= self.length + tol) {
            return Err(CurveError::OutOfDomain { s, length: self.length });
        }
        let s = s.clamp(0.0, self.length);
        let k = self.panel_of(&self.knots_s, s);
        let (mut lo, mut hi) = (self.knots_t[k], self.knots_t[k + 1]);
        let (s_lo, s_hi) = (self.knots_s[k], self.knots_s[k + 1]);
        if s == s_lo {
            return Ok(lo);
        }
        if s == s_hi {
            return Ok(hi);
        }
        let mut t = lo + (hi - lo) * (s - s_lo) / (s_hi - s_lo);
        for _ in 0..100 {
            let f = s_lo + panel_length(curve, self.knots_t[k], t)? - s;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = f / curve.speed(t)?;
            let mut next = t - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let converged = (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0);
            t = next;
            if converged || hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                break;
            }
        }
        Ok(t)
    }

    fn panel_of(&self, knots: &[f64], x: f64) -> usize {
        let idx = knots.partition_point(|&v| v <= x);
        idx.saturating_sub(1).min(knots.len() - 2)
    }
}

/// Frenet data at one arc-length point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetSample {
    pub s: f64,
    pub position: Vector3<f64>,
    pub t_hat: Vector3<f64>,
    pub n_hat: Vector3<f64>,
    pub b_hat: Vector3<f64>,
    pub kappa: f64,
    pub tau: f64,
    /// dκ/ds
    pub kappa_s: f64,
    /// d²κ/ds²
    pub kappa_ss: f64,
    /// dτ/ds
    pub tau_s: f64,
}

impl FrenetSample {
    pub fn curvature_vector(&self) -> Vector3<f64> {
        self.n_hat * self.kappa
    }

    /// `max |F^T F - I|` for the frame matrix `F = [t n b]`, together with
    /// the deviation of `det F` from +1.
    pub fn orthonormality_defect(&self) -> f64 {
        let f = Matrix3::from_columns(&[self.t_hat, self.n_hat, self.b_hat]);
        let gram = (f.transpose() * f - Matrix3::identity()).amax();
        gram.max((f.determinant() - 1.0).abs())
    }
}

/// Central-difference residuals of the three Frenet–Serret relations,
/// `t' - kappa n`, `n' + kappa t - tau b`, `b' + tau n`, at spacing `L / n`.
///
/// Closed curves use every node with wrap-around; open curves only nodes
/// whose stencil stays inside `[0, L]`.
pub fn frenet_serret_residuals(kernel: &CurveKernel, n: usize) -> Result<[f64; 3], CurveError> {
    let h = kernel.length() / n as f64;
    let nodes: Vec<usize> = if kernel.is_closed() { (0..n).collect() } else { (1..n).collect() };
    let frame = |s: f64| kernel.tube_frame_at(kernel.wrap(s)).map(|f| f.sample());
    let mut worst = [0.0f64; 3];
    for i in nodes {
        let s = i as f64 * h;
        let (lo, mid, hi) = (frame(s - h)?, frame(s)?, frame(s + h)?);
        let d = |a: Vector3<f64>, b: Vector3<f64>| (b - a) / (2.0 * h);
        let r = [
            d(lo.t_hat, hi.t_hat) - mid.n_hat * mid.kappa,
            d(lo.n_hat, hi.n_hat) + mid.t_hat * mid.kappa - mid.b_hat * mid.tau,
            d(lo.b_hat, hi.b_hat) + mid.n_hat * mid.tau,
        ];
        for (w, v) in worst.iter_mut().zip(r) {
            *w = w.max(v.amax());
        }
    }
    Ok(worst)
}

/// Frame quantities as truncated series in arc length around one point.
#[derive(Debug, Clone, Copy)]
pub struct FrameJet {
    pub s: f64,
    /// Raw parameter value at `s`.
    pub t: f64,
    pub position: JetVec3<5>,
    pub tangent: JetVec3<4>,
    pub normal: JetVec3<3>,
    pub binormal: JetVec3<3>,
    pub kappa: Jet<3>,
    pub tau: Jet<2>,
}

impl FrameJet {
    pub fn sample(&self) -> FrenetSample {
        FrenetSample {
            s: self.s,
            position: jet::values(&self.position),
            t_hat: jet::values(&self.tangent),
            n_hat: jet::values(&self.normal),
            b_hat: jet::values(&self.binormal),
            kappa: self.kappa.value(),
            tau: self.tau.value(),
            kappa_s: self.kappa.derivative(1),
            kappa_ss: self.kappa.derivative(2),
            tau_s: self.tau.derivative(1),
        }
    }
}

/// Geometry at a grid point: either a full Frenet sample or, for a straight
/// curve, only position and tangent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointGeometry {
    Straight { s: f64, position: Vector3<f64>, tangent: Vector3<f64> },
    Curved(FrenetSample),
}

impl PointGeometry {
    pub fn position(&self) -> Vector3<f64> {
        match self {
            PointGeometry::Straight { position, .. } => *position,
            PointGeometry::Curved(f) => f.position,
        }
    }

    pub fn tangent(&self) -> Vector3<f64> {
        match self {
            PointGeometry::Straight { tangent, .. } => *tangent,
            PointGeometry::Curved(f) => f.t_hat,
        }
    }

    pub fn kappa(&self) -> f64 {
        match self {
            PointGeometry::Straight { .. } => 0.0,
            PointGeometry::Curved(f) => f.kappa,
        }
    }

    pub fn frenet(&self) -> Option<&FrenetSample> {
        match self {
            PointGeometry::Straight { .. } => None,
            PointGeometry::Curved(f) => Some(f),
        }
    }
}

/// A validated curve together with its arc-length map.
#[derive(Debug, Clone)]
pub struct CurveKernel {
    pub curve: CurveDefinition,
    pub map: ArcLengthMap,
    straight: bool,
}

impl CurveKernel {
    pub const DEFAULT_SAMPLES: usize = 256;

    pub fn new(curve: CurveDefinition) -> Result<Self, CurveError> {
        Self::with_samples(curve, Self::DEFAULT_SAMPLES)
    }

    pub fn with_samples(curve: CurveDefinition, n_samples: usize) -> Result<Self, CurveError> {
        let map = arclength_map(&curve, n_samples)?;
        let kappa_min = KAPPA_MIN_SCALE / map.length();
        let mut straight = true;
        for t in curve.scan_points() {
            if curve.raw_curvature(t)? >= kappa_min {
                straight = false;
                break;
            }
        }
        Ok(Self { curve, map, straight })
    }

    pub fn length(&self) -> f64 {
        self.map.length()
    }

    pub fn kappa_min(&self) -> f64 {
        KAPPA_MIN_SCALE / self.length()
    }

    /// True when the curvature stays below `kappa_min` on the whole curve.
    pub fn is_straight(&self) -> bool {
        self.straight
    }

    pub fn is_closed(&self) -> bool {
        self.curve.closed
    }

    /// Maps `s` into `[0, L)` for closed curves; identity otherwise.
    pub fn wrap(&self, s: f64) -> f64 {
        if self.curve.closed {
            s.rem_euclid(self.length())
        } else {
            s
        }
    }

    pub fn param_at(&self, s: f64) -> Result<f64, CurveError> {
        self.map.param_at(&self.curve, s)
    }

    /// Position and unit tangent at `s`; defined for every regular curve.
    pub fn tangent_at(&self, s: f64) -> Result<(Vector3<f64>, Vector3<f64>), CurveError> {
        let t = self.param_at(s)?;
        let a = self.curve.position_series::<2>(t)?;
        let d = Vector3::new(a[0].derivative(1), a[1].derivative(1), a[2].derivative(1));
        Ok((jet::values(&a), d.normalize()))
    }

    /// Arc-length series of the Frenet frame, curvature and torsion at `s`.
    pub fn frame_jet_at(&self, s: f64) -> Result<FrameJet, CurveError> {
        self.frame_jet(s, false)
    }

    /// Like [`Self::frame_jet_at`], but a straight curve gets a constant
    /// orthonormal completion of its tangent with zero curvature and torsion.
    pub fn tube_frame_at(&self, s: f64) -> Result<FrameJet, CurveError> {
        self.frame_jet(s, self.straight)
    }

    fn frame_jet(&self, s: f64, synthetic_normal: bool) -> Result<FrameJet, CurveError> {
        let t = self.param_at(s)?;
        let a: JetVec3<5> = self.curve.position_series(t)?;
        let da: JetVec3<4> = jet::differentiate_vec(&a);
        let speed = jet::dot(&da, &da).sqrt();
        // s(t) - s0 = integral of the speed series.
        let mut s_coeffs = [0.0; 5];
        s_coeffs[0] = s;
        for (k, c) in speed.coeffs().iter().enumerate() {
            s_coeffs[k + 1] = c / (k + 1) as f64;
        }
        let t_of_s = Jet::from_coeffs(s_coeffs).invert(t).ok_or(CurveError::Irregular { t, speed: speed.value() })?;
        let position = [a[0].compose(&t_of_s), a[1].compose(&t_of_s), a[2].compose(&t_of_s)];
        let tangent: JetVec3<4> = jet::differentiate_vec(&position);
        if synthetic_normal {
            let t_hat = jet::values(&tangent);
            let axis = if t_hat.x.abs() <= t_hat.y.abs() && t_hat.x.abs() <= t_hat.z.abs() {
                Vector3::x()
            } else if t_hat.y.abs() <= t_hat.z.abs() {
                Vector3::y()
            } else {
                Vector3::z()
            };
            let n = t_hat.cross(&axis).normalize();
            let b = t_hat.cross(&n);
            let lift = |v: Vector3<f64>| [Jet::constant(v.x), Jet::constant(v.y), Jet::constant(v.z)];
            return Ok(FrameJet {
                s,
                t,
                position,
                tangent,
                normal: lift(n),
                binormal: lift(b),
                kappa: Jet::zero(),
                tau: Jet::zero(),
            });
        }
        let bend: JetVec3<3> = jet::differentiate_vec(&tangent);
        let kappa = jet::dot(&bend, &bend).sqrt();
        let kappa_min = self.kappa_min();
        if !(kappa.value() >= kappa_min) {
            return Err(CurveError::VanishingCurvature { s, kappa: kappa.value(), kappa_min });
        }
        let inv_kappa = kappa.recip();
        let normal = jet::scale(&bend, inv_kappa);
        let binormal = jet::cross(&jet::truncate_vec(&tangent), &normal);
        let db: JetVec3<2> = jet::differentiate_vec(&binormal);
        let tau = -jet::dot(&db, &jet::truncate_vec(&normal));
        Ok(FrameJet { s, t, position, tangent, normal, binormal, kappa, tau })
    }

    /// Geometry for operator assembly: straight curves skip the frame.
    pub fn geometry_at(&self, s: f64) -> Result<PointGeometry, CurveError> {
        if self.straight {
            let (position, tangent) = self.tangent_at(s)?;
            Ok(PointGeometry::Straight { s, position, tangent })
        } else {
            frenet_at(self, s).map(PointGeometry::Curved)
        }
    }
}

/// Orthonormal right-handed Frenet frame and scalar invariants at `s`.
pub fn frenet_at(kernel: &CurveKernel, s: f64) -> Result<FrenetSample, CurveError> {
    Ok(kernel.frame_jet_at(s)?.sample())
}
