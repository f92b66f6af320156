//! Small linear least-squares fits used for visibility and linewidth estimates.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Result of fitting `y = offset + c cos(phi) + s sin(phi)`, i.e.
/// `offset + amplitude * cos(phi + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineFit {
    pub offset: f64,
    pub cos_coef: f64,
    pub sin_coef: f64,
    /// Parameter covariance `(X^T W X)^-1`, meaningful when the weights are
    /// inverse variances.
    pub covariance: Matrix3<f64>,
}

impl CosineFit {
    pub fn amplitude(&self) -> f64 {
        self.cos_coef.hypot(self.sin_coef)
    }

    pub fn phase(&self) -> f64 {
        (-self.sin_coef).atan2(self.cos_coef)
    }

    /// Fringe contrast `amplitude / offset`.
    pub fn visibility(&self) -> Result<f64> {
        if !(self.offset > 0.0) {
            return Err(Error::Estimation(format!(
                "degenerate fringe fit: offset {} is not positive",
                self.offset
            )));
        }
        Ok(self.amplitude() / self.offset)
    }

    /// Standard error of [`visibility`](Self::visibility) by first-order
    /// propagation of the parameter covariance.
    pub fn visibility_std_err(&self) -> f64 {
        let a = self.offset;
        let b = self.amplitude();
        let grad = if b > 0.0 {
            Vector3::new(-b / (a * a), self.cos_coef / (a * b), self.sin_coef / (a * b))
        } else {
            // V = 0 is a cusp; fall back to the radial spread of (c, s).
            let spread = (self.covariance[(1, 1)] + self.covariance[(2, 2)]).max(0.0).sqrt();
            return spread / a;
        };
        (grad.transpose() * self.covariance * grad)[(0, 0)].max(0.0).sqrt()
    }
}

/// Number of phases that are distinct modulo 2 pi.
pub fn distinct_phase_count(phases: &[f64]) -> usize {
    let mut wrapped: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    wrapped.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut last: Option<f64> = None;
    for w in &wrapped {
        if last.is_none_or(|l| (w - l).abs() > 1e-9) {
            count += 1;
            last = Some(*w);
        }
    }
    // 0 and 2 pi - eps wrap onto each other.
    if count > 1 && (wrapped[0] + TAU - wrapped[wrapped.len() - 1]).abs() <= 1e-9 {
        count -= 1;
    }
    count
}

/// Weighted least-squares cosine fit. `weights` default to 1.
pub fn fit_cosine(phases: &[f64], values: &[f64], weights: Option<&[f64]>) -> Result<CosineFit> {
    if phases.len() != values.len() || weights.is_some_and(|w| w.len() != values.len()) {
        return Err(Error::Estimation("phase, value and weight lengths differ".into()));
    }
    if distinct_phase_count(phases) < 3 {
        return Err(Error::Estimation(
            "need at least 3 distinct phases to fit a fringe".into(),
        ));
    }
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (i, (&phi, &y)) in phases.iter().zip(values).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let row = Vector3::new(1.0, phi.cos(), phi.sin());
        normal += w * row * row.transpose();
        rhs += w * y * row;
    }
    let covariance = normal
        .try_inverse()
        .ok_or_else(|| Error::Estimation("singular fringe-fit normal matrix".into()))?;
    let p = covariance * rhs;
    Ok(CosineFit {
        offset: p[0],
        cos_coef: p[1],
        sin_coef: p[2],
        covariance,
    })
}

/// Lorentzian peak parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    pub center: f64,
    pub fwhm: f64,
    pub peak: f64,
}

/// Fits a single Lorentzian to the samples at or above `threshold * max(y)`.
///
/// A Lorentzian has a quadratic reciprocal, so this is a weighted quadratic
/// fit of `1/y` with weights `y^3` (Poisson variance propagated to `1/y`).
pub fn fit_lorentzian(x: &[f64], y: &[f64], threshold: f64) -> Result<LorentzianFit> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Estimation("lorentzian fit needs equal, non-empty inputs".into()));
    }
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if !(ymax > 0.0) {
        return Err(Error::Estimation("no positive samples".into()));
    }
    let origin = x[imax];
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    let mut used = 0;
    for (&xi, &yi) in x.iter().zip(y) {
        if yi < threshold * ymax || yi <= 0.0 {
            continue;
        }
        let u = xi - origin;
        let row = Vector3::new(u * u, u, 1.0);
        let w = (yi / ymax).powi(3);
        normal += w * row * row.transpose();
        rhs += w * (ymax / yi) * row;
        used += 1;
    }
    if used < 3 {
        return Err(Error::Estimation("fewer than 3 samples above threshold".into()));
    }
    let p = normal
        .try_inverse()
        .ok_or_else(|| Error::Estimation("singular lorentzian fit".into()))?
        * rhs;
    let (a, b, c) = (p[0], p[1], p[2]);
    if !(a > 0.0) {
        return Err(Error::Estimation("fitted curvature is not a peak".into()));
    }
    let shift = -b / (2.0 * a);
    let half_sq = c / a - shift * shift;
    if !(half_sq > 0.0) {
        return Err(Error::Estimation("fitted half-width is not real".into()));
    }
    Ok(LorentzianFit {
        center: origin + shift,
        fwhm: 2.0 * half_sq.sqrt(),
        peak: ymax / (a * half_sq),
    })
}
