//! Truncated Taylor series ("jets") in one variable.
//!
//! A `Jet<N>` stores the first `N` normalized Taylor coefficients
//! `c_k = f^(k)(t0) / k!` of a function around a base point. Arithmetic
//! propagates the coefficients with the usual recurrences, so evaluating an
//! expression on `Jet::variable(t0)` yields exact derivatives (up to
//! rounding) without any symbolic differentiation.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Truncated Taylor series with `N` coefficients (derivative orders `0..N`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    coeffs: [f64; N],
}

/// Value plus derivatives of orders one through four.
pub type Jet4 = Jet<5>;

impl<const N: usize> Default for Jet<N> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const N: usize> Jet<N> {
    pub const fn from_coeffs(coeffs: [f64; N]) -> Self {
        Self { coeffs }
    }

    pub const fn zero() -> Self {
        Self { coeffs: [0.0; N] }
    }

    pub fn constant(value: f64) -> Self {
        let mut coeffs = [0.0; N];
        coeffs[0] = value;
        Self { coeffs }
    }

    /// The independent variable itself, expanded around `t`.
    pub fn variable(t: f64) -> Self {
        let mut coeffs = [0.0; N];
        coeffs[0] = t;
        if N > 1 {
            coeffs[1] = 1.0;
        }
        Self { coeffs }
    }

    /// Builds a jet from derivative values `f, f', f'', ...`.
    pub fn from_derivatives(derivs: [f64; N]) -> Self {
        let mut coeffs = derivs;
        let mut fact = 1.0;
        for (k, c) in coeffs.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *c /= fact;
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64; N] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `k`-th derivative at the base point.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.coeffs[k] * fact
    }

    pub fn derivatives(&self) -> [f64; N] {
        let mut out = [0.0; N];
        for (k, d) in out.iter_mut().enumerate() {
            *d = self.derivative(k);
        }
        out
    }

    /// Series of the derivative, truncated to `M` coefficients (`M < N`).
    pub fn differentiate<const M: usize>(&self) -> Jet<M> {
        assert!(M < N, "derivative of a Jet<{N}> has at most {} terms", N - 1);
        let mut coeffs = [0.0; M];
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = (k + 1) as f64 * self.coeffs[k + 1];
        }
        Jet { coeffs }
    }

    /// Drops the highest-order terms, keeping `M <= N` coefficients.
    pub fn truncate<const M: usize>(&self) -> Jet<M> {
        assert!(M <= N);
        let mut coeffs = [0.0; M];
        coeffs.copy_from_slice(&self.coeffs[..M]);
        Jet { coeffs }
    }

    /// Evaluates `self(inner)`, where `self` is expanded around `inner.value()`.
    ///
    /// This is the chain rule for truncated series: if `self` describes
    /// `f(t0 + d)` and `inner` describes `t(s)` with `t(s0) = t0`, the result
    /// describes `f(t(s))` around `s0`.
    pub fn compose(&self, inner: &Jet<N>) -> Jet<N> {
        let mut delta = *inner;
        delta.coeffs[0] = 0.0;
        let mut acc = Jet::constant(self.coeffs[N - 1]);
        for k in (0..N - 1).rev() {
            acc = acc * delta;
            acc.coeffs[0] += self.coeffs[k];
        }
        acc
    }

    /// Series reversion: for `self = s(t)` with `s'(t0) != 0`, returns the
    /// series of `t(s)` around `s0 = self.value()` with base `t0`.
    pub fn invert(&self, t0: f64) -> Option<Jet<N>> {
        if N == 1 {
            return Some(Jet::constant(t0));
        }
        let slope = self.coeffs[1];
        if slope == 0.0 || !slope.is_finite() {
            return None;
        }
        // Fixed-point iteration gains one order per sweep.
        let sigma = {
            let mut c = [0.0; N];
            c[1] = 1.0;
            Jet { coeffs: c }
        };
        let mut r = sigma * (1.0 / slope);
        for _ in 0..N {
            let mut shifted = *self;
            shifted.coeffs[0] = 0.0;
            let s_of_r = shifted.compose(&r);
            r = r - (s_of_r - sigma) * (1.0 / slope);
        }
        r.coeffs[0] = t0;
        Some(r)
    }

    pub fn recip(&self) -> Jet<N> {
        Jet::constant(1.0) / *self
    }

    pub fn exp(&self) -> Jet<N> {
        let a = &self.coeffs;
        let mut e = [0.0; N];
        e[0] = a[0].exp();
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Jet { coeffs: e }
    }

    /// Natural logarithm; the caller guarantees a positive value.
    pub fn ln(&self) -> Jet<N> {
        let a = &self.coeffs;
        let mut l = [0.0; N];
        l[0] = a[0].ln();
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * l[j] * a[k - j];
            }
            l[k] = (a[k] - acc / k as f64) / a[0];
        }
        Jet { coeffs: l }
    }

    pub fn sin_cos(&self) -> (Jet<N>, Jet<N>) {
        let a = &self.coeffs;
        let mut s = [0.0; N];
        let mut c = [0.0; N];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..N {
            let mut acc_s = 0.0;
            let mut acc_c = 0.0;
            for j in 1..=k {
                acc_s += j as f64 * a[j] * c[k - j];
                acc_c += j as f64 * a[j] * s[k - j];
            }
            s[k] = acc_s / k as f64;
            c[k] = -acc_c / k as f64;
        }
        (Jet { coeffs: s }, Jet { coeffs: c })
    }

    pub fn sin(&self) -> Jet<N> {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Jet<N> {
        self.sin_cos().1
    }

    /// Square root; the caller guarantees a positive value.
    pub fn sqrt(&self) -> Jet<N> {
        let a = &self.coeffs;
        let mut r = [0.0; N];
        r[0] = a[0].sqrt();
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..k {
                acc += r[j] * r[k - j];
            }
            r[k] = (a[k] - acc) / (2.0 * r[0]);
        }
        Jet { coeffs: r }
    }

    /// Integer power by repeated squaring; valid for any base when `n >= 0`.
    pub fn powi(&self, n: i32) -> Jet<N> {
        let mut base = *self;
        let mut exp = n.unsigned_abs();
        let mut acc = Jet::constant(1.0);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }

    /// Real power `self^p`; the caller guarantees a positive value.
    pub fn powf(&self, p: f64) -> Jet<N> {
        let a = &self.coeffs;
        let mut y = [0.0; N];
        y[0] = a[0].powf(p);
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((p + 1.0) * j as f64 - k as f64) * a[j] * y[k - j];
            }
            y[k] = acc / (k as f64 * a[0]);
        }
        Jet { coeffs: y }
    }
}

impl Jet4 {
    pub fn d1(&self) -> f64 {
        self.derivative(1)
    }
    pub fn d2(&self) -> f64 {
        self.derivative(2)
    }
    pub fn d3(&self) -> f64 {
        self.derivative(3)
    }
    pub fn d4(&self) -> f64 {
        self.derivative(4)
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Jet<N>;
    fn add(mut self, rhs: Jet<N>) -> Jet<N> {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> AddAssign for Jet<N> {
    fn add_assign(&mut self, rhs: Jet<N>) {
        *self = *self + rhs;
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Jet<N>;
    fn sub(mut self, rhs: Jet<N>) -> Jet<N> {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Jet<N>;
    fn neg(mut self) -> Jet<N> {
        for a in self.coeffs.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Jet<N>;
    fn mul(self, rhs: Jet<N>) -> Jet<N> {
        let mut out = [0.0; N];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.coeffs[j] * rhs.coeffs[k - j];
            }
            *o = acc;
        }
        Jet { coeffs: out }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Jet<N>;
    fn div(self, rhs: Jet<N>) -> Jet<N> {
        let b = &rhs.coeffs;
        let mut c = [0.0; N];
        for k in 0..N {
            let mut acc = self.coeffs[k];
            for j in 1..=k {
                acc -= b[j] * c[k - j];
            }
            c[k] = acc / b[0];
        }
        Jet { coeffs: c }
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Jet<N>;
    fn add(mut self, rhs: f64) -> Jet<N> {
        self.coeffs[0] += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Jet<N> {
    type Output = Jet<N>;
    fn sub(mut self, rhs: f64) -> Jet<N> {
        self.coeffs[0] -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Jet<N>;
    fn mul(mut self, rhs: f64) -> Jet<N> {
        for a in self.coeffs.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

impl<const N: usize> Mul<Jet<N>> for f64 {
    type Output = Jet<N>;
    fn mul(self, rhs: Jet<N>) -> Jet<N> {
        rhs * self
    }
}

impl<const N: usize> Div<f64> for Jet<N> {
    type Output = Jet<N>;
    fn div(self, rhs: f64) -> Jet<N> {
        self * (1.0 / rhs)
    }
}

/// Three-component vector of jets, used for curve positions and frames.
pub type JetVec3<const N: usize> = [Jet<N>; 3];

pub fn dot<const N: usize>(a: &JetVec3<N>, b: &JetVec3<N>) -> Jet<N> {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<const N: usize>(a: &JetVec3<N>, b: &JetVec3<N>) -> JetVec3<N> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn scale<const N: usize>(a: &JetVec3<N>, k: Jet<N>) -> JetVec3<N> {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub fn add<const N: usize>(a: &JetVec3<N>, b: &JetVec3<N>) -> JetVec3<N> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn differentiate_vec<const N: usize, const M: usize>(a: &JetVec3<N>) -> JetVec3<M> {
    [a[0].differentiate(), a[1].differentiate(), a[2].differentiate()]
}

pub fn truncate_vec<const N: usize, const M: usize>(a: &JetVec3<N>) -> JetVec3<M> {
    [a[0].truncate(), a[1].truncate(), a[2].truncate()]
}

pub fn values<const N: usize>(a: &JetVec3<N>) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(a[0].value(), a[1].value(), a[2].value())
}
