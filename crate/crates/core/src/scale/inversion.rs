//! Numerical Laplace inversion: fixed Talbot contour and Euler summation.
//!
//! Both schemes invert the shifted transform `F(s + σ₀)`, where `σ₀` is the
//! abscissa of convergence, so they return `e^{-σ₀x} f(x)`. For scale
//! functions this is the bounded tilted function.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;

type TransformFn = dyn Fn(Complex64) -> Result<Complex64> + Send + Sync;

/// A Laplace transform together with its abscissa of convergence.
#[derive(Clone)]
pub struct LaplaceTransformHandle {
    f: Arc<TransformFn>,
    abscissa: f64,
    continues_left: bool,
}

impl fmt::Debug for LaplaceTransformHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LaplaceTransformHandle")
            .field("abscissa", &self.abscissa)
            .field("continues_left", &self.continues_left)
            .finish_non_exhaustive()
    }
}

impl LaplaceTransformHandle {
    /// `continues_left` states that the transform extends analytically to
    /// the left of its abscissa with singularities only on the real axis,
    /// which the deformed contour needs.
    pub fn new<F>(f: F, abscissa: f64, continues_left: bool) -> Self
    where
        F: Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static,
    {
        LaplaceTransformHandle {
            f: Arc::new(f),
            abscissa,
            continues_left,
        }
    }

    /// `λ ↦ 1/(ψ(λ) − q)`.
    pub fn scale(model: &LevyModel, q: f64) -> Result<Self> {
        let phi = model.phi(q)?;
        let m = model.clone();
        Ok(Self::new(
            move |s| Ok(1.0 / (m.laplace_exponent_complex(s)? - q)),
            phi,
            model.continues_left(),
        ))
    }

    /// `λ ↦ 1/(λ(ψ(λ) − q))`, the transform of `∫₀ˣ W^{(q)}`. Needs `Φ(q) > 0`.
    pub fn scale_integral(model: &LevyModel, q: f64) -> Result<Self> {
        let phi = model.phi(q)?;
        if phi <= 0.0 {
            return Err(Error::domain("integral transform needs a positive abscissa"));
        }
        let m = model.clone();
        Ok(Self::new(
            move |s| Ok(1.0 / (s * (m.laplace_exponent_complex(s)? - q))),
            phi,
            model.continues_left(),
        ))
    }

    /// `λ ↦ λ/(ψ(λ) − q) − W^{(q)}(0)`, the transform of `W^{(q)'}`.
    pub fn scale_derivative(model: &LevyModel, q: f64) -> Result<Self> {
        let phi = model.phi(q)?;
        let w0 = model.scale_initial_value();
        let m = model.clone();
        Ok(Self::new(
            move |s| Ok(s / (m.laplace_exponent_complex(s)? - q) - w0),
            phi,
            model.continues_left(),
        ))
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        (self.f)(s)
    }

    fn shifted(&self, s: Complex64) -> Result<Complex64> {
        (self.f)(s + self.abscissa)
    }
}

/// Parameters of the two inversion schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionSettings {
    /// Contour nodes of the fixed Talbot rule.
    pub talbot_nodes: usize,
    /// Damping parameter `A` of the Euler scheme.
    pub euler_a: f64,
    /// Terms summed before Euler averaging.
    pub euler_terms: usize,
    /// Order of binomial averaging.
    pub euler_averaging: usize,
    /// Allowed disagreement, relative to `max(1, |value|)` on the shifted scale.
    pub tol: f64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        InversionSettings {
            talbot_nodes: 24,
            euler_a: 23.0,
            euler_terms: 38,
            euler_averaging: 11,
            tol: 1e-8,
        }
    }
}

/// Result of an inversion at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    /// `f(x)`.
    pub value: f64,
    /// `e^{-σ₀x} f(x)`.
    pub shifted_value: f64,
    /// Disagreement between the two schemes on the shifted scale.
    pub error_estimate: f64,
}

fn talbot(handle: &LaplaceTransformHandle, t: f64, m: usize) -> Result<f64> {
    let mf = m as f64;
    let r = 2.0 * mf / (5.0 * t);
    let mut sum = 0.5 * (handle.shifted(Complex64::new(r, 0.0))?.re) * (r * t).exp();
    for k in 1..m {
        let theta = k as f64 * PI / mf;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * handle.shifted(s)? * Complex64::new(1.0, sigma);
        sum += term.re;
    }
    Ok(r / mf * sum)
}

fn euler(handle: &LaplaceTransformHandle, t: f64, a: f64, n: usize, m: usize) -> Result<f64> {
    let scale = (a / 2.0).exp() / t;
    let mut partial = Vec::with_capacity(n + m + 1);
    let mut acc = 0.5 * scale * handle.shifted(Complex64::new(a / (2.0 * t), 0.0))?.re;
    partial.push(acc);
    for k in 1..=(n + m) {
        let s = Complex64::new(a / (2.0 * t), k as f64 * PI / t);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * scale * handle.shifted(s)?.re;
        partial.push(acc);
    }
    let mut binom = 1.0;
    let mut total = 0.0;
    let weight = 0.5f64.powi(m as i32);
    for k in 0..=m {
        total += binom * weight * partial[n + k];
        binom = binom * (m - k) as f64 / (k + 1) as f64;
    }
    Ok(total)
}

/// Inverts the transform at `x > 0`.
///
/// With a left continuation the Talbot value is returned and the Euler value
/// serves as the check; otherwise two Euler runs with different damping are
/// compared. Disagreement beyond `tol` is reported, never averaged away.
pub fn invert_laplace(
    handle: &LaplaceTransformHandle,
    x: f64,
    settings: &InversionSettings,
) -> Result<Inversion> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("inversion needs x > 0, got {x}")));
    }
    let e1 = euler(
        handle,
        x,
        settings.euler_a,
        settings.euler_terms,
        settings.euler_averaging,
    )?;
    let (primary, check) = if handle.continues_left {
        (talbot(handle, x, settings.talbot_nodes)?, e1)
    } else {
        let e2 = euler(
            handle,
            x,
            settings.euler_a + 4.0,
            settings.euler_terms + 8,
            settings.euler_averaging,
        )?;
        (e1, e2)
    };
    let err = (primary - check).abs();
    if !primary.is_finite() || err > settings.tol * primary.abs().max(1.0) {
        return Err(Error::numeric(
            format!("Laplace inversion at x={x} (schemes disagree: {primary} vs {check})"),
            err,
        ));
    }
    Ok(Inversion {
        value: primary * (handle.abscissa * x).exp(),
        shifted_value: primary,
        error_estimate: err,
    })
}
