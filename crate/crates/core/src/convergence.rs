//! Finite-difference and refinement-study helpers shared by the geometry and
//! operator checks.

use std::ops::{Add, Mul, Sub};

use serde::Serialize;

/// Observed convergence order from errors at two step sizes.
pub fn observed_order(err_coarse: f64, err_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (err_coarse / err_fine).ln() / (h_coarse / h_fine).ln()
}

/// Orders between consecutive levels of a refinement study.
pub fn observed_orders(errors: &[f64], steps: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .zip(steps.windows(2))
        .map(|(e, h)| observed_order(e[0], e[1], h[0], h[1]))
        .collect()
}

/// One level of a refinement study.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementLevel {
    pub n_grid: usize,
    pub step: f64,
    pub value: f64,
    /// Order against the previous (coarser) level; absent on the first level.
    pub observed_order: Option<f64>,
}

/// Residuals measured under successive refinement.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementStudy {
    pub quantity: String,
    pub levels: Vec<RefinementLevel>,
}

impl RefinementStudy {
    pub fn new(quantity: impl Into<String>, samples: &[(usize, f64, f64)]) -> Self {
        let mut levels: Vec<RefinementLevel> = Vec::with_capacity(samples.len());
        for (i, &(n_grid, step, value)) in samples.iter().enumerate() {
            let observed_order = (i > 0).then(|| {
                let prev = &samples[i - 1];
                observed_order(prev.2, value, prev.1, step)
            });
            levels.push(RefinementLevel { n_grid, step, value, observed_order });
        }
        Self { quantity: quantity.into(), levels }
    }

    pub fn finest(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.value)
    }

    pub fn last_order(&self) -> Option<f64> {
        self.levels.last().and_then(|l| l.observed_order)
    }

    /// True when every level is at or below `floor` (identity exact to rounding).
    pub fn is_exact(&self, floor: f64) -> bool {
        self.levels.iter().all(|l| l.value <= floor)
    }

    /// Every observed order lies within `target ± tol`.
    pub fn orders_within(&self, target: f64, tol: f64) -> bool {
        self.levels
            .iter()
            .filter_map(|l| l.observed_order)
            .all(|p| (p - target).abs() <= tol)
    }
}

/// Richardson-extrapolated central (or one-sided near an endpoint) first
/// derivative of `f` at `x` with base step `h`.
///
/// Points are kept inside `[lo, hi]`; the central stencil is used whenever it
/// fits. Both stencils are second order; one Richardson step lifts the
/// central estimate to fourth order and the one-sided one to third.
pub fn derivative<T, E, F>(mut f: F, x: f64, h: f64, lo: f64, hi: f64) -> Result<T, E>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    F: FnMut(f64) -> Result<T, E>,
{
    let mut stencil = |h: f64| -> Result<T, E> {
        if x - h >= lo && x + h <= hi {
            Ok((f(x + h)? - f(x - h)?) * (0.5 / h))
        } else if x + 2.0 * h <= hi {
            let (f0, f1, f2) = (f(x)?, f(x + h)?, f(x + 2.0 * h)?);
            Ok((f1 * 4.0 - f0 * 3.0 - f2) * (0.5 / h))
        } else {
            let (f0, f1, f2) = (f(x)?, f(x - h)?, f(x - 2.0 * h)?);
            Ok((f0 * 3.0 - f1 * 4.0 + f2) * (0.5 / h))
        }
    };
    let coarse = stencil(h)?;
    let fine = stencil(0.5 * h)?;
    Ok((fine * 4.0 - coarse) * (1.0 / 3.0))
}

/// Plain second-order central difference, no extrapolation.
pub fn central_difference<T, E, F>(mut f: F, x: f64, h: f64) -> Result<T, E>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    F: FnMut(f64) -> Result<T, E>,
{
    Ok((f(x + h)? - f(x - h)?) * (0.5 / h))
}
