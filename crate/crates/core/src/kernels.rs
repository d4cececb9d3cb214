//! The convolution kernels `𝒲_a^{(p,q)}`, `𝒵_a^{(p,q)}`, `ℋ^{(p,q)}` and
//! their deflated composites.
//!
//! Every checked entry point evaluates two algebraically equal
//! representations and fails when they disagree; the unchecked variants use
//! the bounded-range representation only and are meant for inner loops.

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::quadrature::{QuadratureRule, QuadratureScheme};
use crate::scale::{InversionSettings, ScaleFunction, DEFAULT_GRID_NODES};

/// Accuracy knobs shared by the kernel and formula layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericSettings {
    /// Target relative accuracy of each quadrature.
    pub tol_quad: f64,
    /// Grid size for models without closed-form scale functions.
    pub grid_nodes: usize,
    pub inversion: InversionSettings,
    pub rule: QuadratureRule,
}

impl Default for NumericSettings {
    fn default() -> Self {
        NumericSettings {
            tol_quad: 1e-9,
            grid_nodes: DEFAULT_GRID_NODES,
            inversion: InversionSettings::default(),
            rule: QuadratureRule::GaussLegendreComposite { order: 20 },
        }
    }
}

impl NumericSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_quad >= 100.0 * f64::EPSILON) {
            return Err(Error::domain(format!(
                "tol_quad must be at least 100 machine epsilons, got {}",
                self.tol_quad
            )));
        }
        Ok(())
    }

    pub(crate) fn scheme(&self, max_panel: f64) -> QuadratureScheme {
        match self.rule {
            QuadratureRule::GaussLegendreComposite { order } => {
                QuadratureScheme::gauss_legendre(order, max_panel, self.tol_quad)
            }
            QuadratureRule::TrapezoidRomberg => QuadratureScheme::romberg(max_panel, self.tol_quad),
        }
    }

    pub(crate) fn scale(&self, model: &LevyModel, q: f64, x_max: f64) -> Result<ScaleFunction> {
        ScaleFunction::new(model, q, x_max, self.grid_nodes, &self.inversion)
    }

    /// Panel cap resolving every exponential rate of the given functions.
    pub(crate) fn panel_for(&self, fns: &[&ScaleFunction]) -> f64 {
        let len = fns
            .iter()
            .map(|f| f.length_scale())
            .fold(f64::INFINITY, f64::min);
        (8.0 * len).min(2.0)
    }
}

/// Relative agreement test allowing for cancellation in the subtractive
/// representation, whose terms have total size `magnitude`.
pub(crate) fn agree(a: f64, b: f64, magnitude: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= 10.0 * tol * scale + 64.0 * f64::EPSILON * magnitude
}

pub(crate) fn mismatch(what: &str, a: f64, b: f64) -> Error {
    Error::numeric(
        format!("{what}: representations disagree ({a} vs {b})"),
        (a - b).abs(),
    )
}

/// `ℋ^{(p,q)}(x)` from `Φ(p)` and `W^{(p+q)}`.
pub(crate) fn h_eval(
    phi_p: f64,
    w_pq: &ScaleFunction,
    q: f64,
    x: f64,
    scheme: &QuadratureScheme,
) -> f64 {
    if x <= 0.0 || q == 0.0 {
        return (phi_p * x).exp();
    }
    let phi_pq = w_pq.phi();
    // e^{-Φ(p)y} W^{(p+q)}(y) written through the tilted function.
    let gap = phi_pq - phi_p;
    let weighted = |y: f64| w_pq.w_tilted(y) * (gap * y).exp();
    if q > 0.0 || -gap * x < 3.0 {
        let int = scheme.integrate(0.0, x, &[], weighted);
        (phi_p * x).exp() * (1.0 + q * int)
    } else {
        // q < 0: 1 + q∫₀^∞ e^{-Φ(p)y} W^{(p+q)}(y) dy = 0, so only the tail
        // beyond x survives, which avoids cancelling two large numbers.
        let decay = -gap;
        let tail = scheme.integrate(0.0, 40.0 / decay, &[], |u| {
            w_pq.w_tilted(x + u) * (-decay * u).exp()
        });
        -q * (phi_pq * x).exp() * tail
    }
}

/// `ℋ^{(p,q)}` for `p ≥ 0` and `p + q ≥ 0`.
#[derive(Debug, Clone)]
pub struct HKernel {
    p: f64,
    q: f64,
    phi_p: f64,
    w_pq: ScaleFunction,
    scheme: QuadratureScheme,
}

impl HKernel {
    pub fn new(model: &LevyModel, p: f64, q: f64, x_max: f64, settings: &NumericSettings) -> Result<Self> {
        settings.validate()?;
        if !(p >= 0.0) || !(p + q >= 0.0) {
            return Err(Error::domain(format!(
                "H kernel needs p >= 0 and p + q >= 0, got p={p}, q={q}"
            )));
        }
        let w_pq = settings.scale(model, p + q, x_max)?;
        let phi_p = model.phi(p)?;
        let scheme = settings.scheme(settings.panel_for(&[&w_pq]));
        Ok(HKernel {
            p,
            q,
            phi_p,
            w_pq,
            scheme,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn phi_p(&self) -> f64 {
        self.phi_p
    }

    pub fn value(&self, x: f64) -> f64 {
        h_eval(self.phi_p, &self.w_pq, self.q, x, &self.scheme)
    }
}

/// `ℋ^{(p,q)}(x) = e^{Φ(p)x}(1 + q∫₀ˣ e^{-Φ(p)y} W^{(p+q)}(y) dy)`.
pub fn kernel_h(model: &LevyModel, p: f64, q: f64, x: f64) -> Result<f64> {
    let k = HKernel::new(model, p, q, x.abs().max(1.0) * 2.0, &NumericSettings::default())?;
    Ok(k.value(x))
}

/// Which kernel a deflated composite is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    W,
    Z,
    H,
}

/// Scale functions and quadrature for the kernels at fixed `(p, q, a)`.
#[derive(Debug, Clone)]
pub struct KernelContext {
    p: f64,
    q: f64,
    a: f64,
    phi_p: f64,
    w_p: ScaleFunction,
    w_pq: ScaleFunction,
    scheme: QuadratureScheme,
    tol: f64,
}

impl KernelContext {
    /// `x_max` bounds the arguments that will be queried; it sizes the grids
    /// of numeric models and is ignored for closed forms.
    pub fn new(
        model: &LevyModel,
        p: f64,
        q: f64,
        a: f64,
        x_max: f64,
        settings: &NumericSettings,
    ) -> Result<Self> {
        settings.validate()?;
        if !(p >= 0.0) || !(q >= 0.0) {
            return Err(Error::domain(format!(
                "kernel context needs p, q >= 0, got p={p}, q={q}"
            )));
        }
        if !a.is_finite() {
            return Err(Error::domain("kernel context needs a finite a"));
        }
        let w_p = settings.scale(model, p, x_max)?;
        let w_pq = settings.scale(model, p + q, x_max)?;
        let scheme = settings.scheme(settings.panel_for(&[&w_p, &w_pq]));
        Ok(KernelContext {
            p,
            q,
            a,
            phi_p: w_p.phi(),
            w_p,
            w_pq,
            scheme,
            tol: settings.tol_quad,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn phi_p(&self) -> f64 {
        self.phi_p
    }

    pub fn phi_pq(&self) -> f64 {
        self.w_pq.phi()
    }

    /// `W^{(p)}`.
    pub fn w_p(&self) -> &ScaleFunction {
        &self.w_p
    }

    /// `W^{(p+q)}`.
    pub fn w_pq(&self) -> &ScaleFunction {
        &self.w_pq
    }

    pub fn scheme(&self) -> &QuadratureScheme {
        &self.scheme
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `∫_lo^hi W^{(p+q)}(x − y) g(y) dy`.
    fn conv_pq<G: Fn(f64) -> f64>(&self, x: f64, lo: f64, hi: f64, g: G) -> f64 {
        self.scheme
            .integrate(lo, hi, &[0.0, x], |y| self.w_pq.w(x - y) * g(y))
    }

    /// `∫_lo^hi W^{(p)}(x − y) g(y) dy`.
    pub(crate) fn conv_p<G: Fn(f64) -> f64>(&self, x: f64, lo: f64, hi: f64, kinks: &[f64], g: G) -> f64 {
        let mut all = Vec::with_capacity(kinks.len() + 2);
        all.extend_from_slice(kinks);
        all.push(x);
        all.push(0.0);
        self.scheme.integrate(lo, hi, &all, |y| self.w_p.w(x - y) * g(y))
    }

    /// `𝒲_a^{(p,q)}(x)` from `W^{(p)}(x) + q∫_a^x W^{(p+q)}(x−y)W^{(p)}(y)dy`.
    pub fn w_kernel(&self, x: f64) -> f64 {
        let base = self.w_p.w(x);
        if x <= self.a || self.q == 0.0 {
            return base;
        }
        base + self.q * self.conv_pq(x, self.a, x, |y| self.w_p.w(y))
    }

    /// `𝒵_a^{(p,q)}(x)` from `Z^{(p)}(x) + q∫_a^x W^{(p+q)}(x−y)Z^{(p)}(y)dy`.
    pub fn z_kernel(&self, x: f64) -> f64 {
        let base = self.w_p.z(x);
        if x <= self.a || self.q == 0.0 {
            return base;
        }
        base + self.q * self.conv_pq(x, self.a, x, |y| self.w_p.z(y))
    }

    /// `ℋ^{(p,q)}(x)`.
    pub fn h_kernel(&self, x: f64) -> f64 {
        h_eval(self.phi_p, &self.w_pq, self.q, x, &self.scheme)
    }

    /// `𝒲_a^{(p,q)}(x)`, checked against `W^{(p+q)}(x) − q∫₀^a W^{(p+q)}(x−y)W^{(p)}(y)dy`.
    pub fn kernel_w(&self, x: f64) -> Result<f64> {
        self.checked_w(x).map(|r| r.0)
    }

    /// `kernel_w` together with the discrepancy between representations.
    pub(crate) fn checked_w(&self, x: f64) -> Result<(f64, f64)> {
        let additive = self.w_kernel(x);
        let head = self.w_pq.w(x);
        let tail = self.q * self.conv_pq(x, 0.0, self.a.min(x), |y| self.w_p.w(y));
        let subtractive = head - tail;
        if agree(additive, subtractive, head.abs() + tail.abs(), self.tol) {
            Ok((additive, (additive - subtractive).abs()))
        } else {
            Err(mismatch("W kernel", additive, subtractive))
        }
    }

    /// `𝒵_a^{(p,q)}(x)`, checked against `Z^{(p+q)}(x) − q∫₀^a W^{(p+q)}(x−y)Z^{(p)}(y)dy`.
    pub fn kernel_z(&self, x: f64) -> Result<f64> {
        self.checked_z(x).map(|r| r.0)
    }

    pub(crate) fn checked_z(&self, x: f64) -> Result<(f64, f64)> {
        let additive = self.z_kernel(x);
        let head = self.w_pq.z(x);
        let tail = self.q * self.conv_pq(x, 0.0, self.a.min(x), |y| self.w_p.z(y));
        let subtractive = head - tail;
        if agree(additive, subtractive, head.abs() + tail.abs(), self.tol) {
            Ok((additive, (additive - subtractive).abs()))
        } else {
            Err(mismatch("Z kernel", additive, subtractive))
        }
    }

    fn kernel_of(&self, kind: KernelKind, z: f64) -> f64 {
        match kind {
            KernelKind::W => self.w_kernel(z),
            KernelKind::Z => self.z_kernel(z),
            KernelKind::H => self.h_kernel(z - self.a),
        }
    }

    fn deflation_base(&self, kind: KernelKind, x: f64) -> f64 {
        match kind {
            KernelKind::W => self.w_p.w(x),
            KernelKind::Z => self.w_p.z(x),
            KernelKind::H => (self.phi_p * (x - self.a)).exp(),
        }
    }

    /// `K(x) − q∫_b^x W^{(p)}(x−z)K(z)dz` through the bounded-range form
    /// `base(x) + q∫_a^{b∧x} W^{(p)}(x−z)K(z)dz`.
    pub fn deflated(&self, kind: KernelKind, b: f64, x: f64) -> f64 {
        let base = self.deflation_base(kind, x);
        if self.q == 0.0 {
            return base;
        }
        let hi = b.min(x);
        base + self.q * self.conv_p(x, self.a, hi, &[b], |z| self.kernel_of(kind, z))
    }

    /// The defining form `K(x) − q∫_b^x W^{(p)}(x−z)K(z)dz` and the size of
    /// its two terms.
    fn deflated_defining(&self, kind: KernelKind, b: f64, x: f64) -> (f64, f64) {
        let head = self.kernel_of(kind, x);
        if x <= b || self.q == 0.0 {
            return (head, head.abs());
        }
        let tail = self.q * self.conv_p(x, b, x, &[self.a], |z| self.kernel_of(kind, z));
        (head - tail, head.abs() + tail.abs())
    }

    /// Deflated kernel with both representations compared.
    pub fn deflated_kernel(&self, kind: KernelKind, b: f64, x: f64) -> Result<f64> {
        self.checked_deflated(kind, b, x).map(|r| r.0)
    }

    pub(crate) fn checked_deflated(&self, kind: KernelKind, b: f64, x: f64) -> Result<(f64, f64)> {
        if b < self.a {
            return Err(Error::domain(format!(
                "deflated kernel needs b >= a, got a={}, b={b}",
                self.a
            )));
        }
        let alt = self.deflated(kind, b, x);
        let (def, magnitude) = self.deflated_defining(kind, b, x);
        if agree(alt, def, magnitude, self.tol) {
            Ok((alt, (alt - def).abs()))
        } else {
            Err(mismatch("deflated kernel", alt, def))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_kronrod;
    use crate::scale::{scale_w, scale_z};
    use approx::assert_abs_diff_eq;

    fn bm() -> LevyModel {
        LevyModel::brownian_drift(1.0, 2f64.sqrt()).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(1.5, 1.0, 1.0).unwrap()
    }

    fn ctx(m: &LevyModel, p: f64, q: f64, a: f64) -> KernelContext {
        KernelContext::new(m, p, q, a, 10.0, &NumericSettings::default()).unwrap()
    }

    #[test]
    fn zero_penalty_reduces_to_scale_functions() {
        for m in [bm(), cl()] {
            let c = ctx(&m, 0.3, 0.0, 0.5);
            for &x in &[0.2, 0.5, 1.7] {
                assert_eq!(c.kernel_w(x).unwrap(), scale_w(&m, 0.3, x).unwrap());
                assert_eq!(c.kernel_z(x).unwrap(), scale_z(&m, 0.3, x).unwrap());
            }
        }
    }

    #[test]
    fn kernels_at_a_are_plain_scale_functions() {
        for m in [bm(), cl()] {
            let c = ctx(&m, 0.2, 0.7, 0.8);
            assert_eq!(c.kernel_w(0.8).unwrap(), scale_w(&m, 0.2, 0.8).unwrap());
            assert_eq!(c.kernel_z(0.8).unwrap(), scale_z(&m, 0.2, 0.8).unwrap());
        }
    }

    #[test]
    fn w_kernel_against_adaptive_quadrature() {
        let m = bm();
        let c = ctx(&m, 0.0, 1.0, 0.5);
        let v = c.kernel_w(1.0).unwrap();
        let (conv, _) = gauss_kronrod(
            |y: f64| scale_w(&m, 1.0, 1.0 - y).unwrap() * scale_w(&m, 0.0, y).unwrap(),
            0.0,
            0.5,
            1e-15,
            1e-14,
            1000,
        )
        .unwrap();
        let direct = scale_w(&m, 1.0, 1.0).unwrap() - conv;
        assert_abs_diff_eq!(v, direct, epsilon = 1e-12);
    }

    #[test]
    fn z_kernel_with_zero_discount_is_shifted_z() {
        for m in [bm(), cl()] {
            let c = ctx(&m, 0.0, 0.6, 0.4);
            for &x in &[0.1, 0.4, 1.3, 3.0] {
                assert_abs_diff_eq!(
                    c.kernel_z(x).unwrap(),
                    scale_z(&m, 0.6, x - 0.4).unwrap(),
                    epsilon = 1e-11
                );
            }
        }
    }

    #[test]
    fn h_kernel_basics() {
        for m in [bm(), cl()] {
            let phi = m.phi(0.4).unwrap();
            assert_abs_diff_eq!(kernel_h(&m, 0.4, 0.3, -1.0).unwrap(), (-phi).exp(), epsilon = 1e-15);
            assert_abs_diff_eq!(kernel_h(&m, 0.4, 0.0, 1.5).unwrap(), (1.5 * phi).exp(), epsilon = 1e-13);
            for &x in &[0.3, 1.0, 2.5] {
                assert_abs_diff_eq!(
                    kernel_h(&m, 0.0, 0.8, x).unwrap(),
                    scale_z(&m, 0.8, x).unwrap(),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn h_kernel_laplace_transform() {
        // ∫ e^{-λx} ℋ(x) dx = (1 + q/(ψ(λ)−p−q)) / (λ − Φ(p)).
        for m in [bm(), cl()] {
            for &(p, q) in &[(0.3, 0.5), (0.8, -0.5)] {
                let k = HKernel::new(&m, p, q, 80.0, &NumericSettings::default()).unwrap();
                let lam = m.phi(p + q).unwrap().max(k.phi_p()) + 1.5;
                let (num, _) = gauss_kronrod(
                    |x: f64| (-lam * x).exp() * k.value(x),
                    0.0,
                    60.0,
                    1e-14,
                    1e-11,
                    2000,
                )
                .unwrap();
                let psi = m.laplace_exponent(lam).unwrap();
                let exact = (1.0 + q / (psi - p - q)) / (lam - k.phi_p());
                assert!(((num - exact) / exact).abs() < 1e-8, "{m:?} p={p} q={q}");
            }
        }
    }

    #[test]
    fn negative_second_parameter_uses_stable_tail() {
        // Both branches of ℋ with q < 0 must meet continuously.
        let m = bm();
        let k = HKernel::new(&m, 1.0, -0.6, 80.0, &NumericSettings::default()).unwrap();
        let gap = k.phi_p() - m.phi(0.4).unwrap();
        let x0 = 3.0 / gap;
        let below = k.value(x0 * (1.0 - 1e-9));
        let above = k.value(x0 * (1.0 + 1e-9));
        assert!((below - above).abs() < 1e-8 * below.abs(), "{below} {above}");
        assert!(k.value(5.0 * x0) > 0.0);
    }

    #[test]
    fn deflated_examples() {
        for m in [bm(), cl()] {
            let c = ctx(&m, 0.1, 0.4, 0.3);
            for kind in [KernelKind::W, KernelKind::Z, KernelKind::H] {
                for &x in &[0.1, 0.3, 0.5, 0.6] {
                    let v = c.deflated_kernel(kind, 0.6, x).unwrap();
                    let k = c.kernel_of(kind, x);
                    assert!((v - k).abs() < 1e-12 * k.abs().max(1.0), "{kind:?} x={x}");
                }
                c.deflated_kernel(kind, 0.6, 1.0).unwrap();
                c.deflated_kernel(kind, 0.6, 4.0).unwrap();
            }
            let c = ctx(&m, 0.1, 0.4, 0.7);
            assert_abs_diff_eq!(
                c.deflated_kernel(KernelKind::W, 0.7, 0.7).unwrap(),
                scale_w(&m, 0.1, 0.7).unwrap(),
                epsilon = 1e-14
            );
            assert!(c.deflated_kernel(KernelKind::W, 0.5, 1.0).is_err());
        }
    }

    #[test]
    fn numeric_model_kernels_match_closed_forms() {
        let m = LevyModel::jump_diffusion(0.4, 0.6, 1.2, 0.5).unwrap();
        let settings = NumericSettings {
            grid_nodes: 1025,
            ..NumericSettings::default()
        };
        let exact = KernelContext::new(&m, 0.2, 0.5, 0.3, 4.0, &settings).unwrap();
        let numeric = KernelContext::new(&m.as_general_numeric(), 0.2, 0.5, 0.3, 4.0, &settings).unwrap();
        for &x in &[0.5, 1.4, 3.0] {
            let a = exact.deflated(KernelKind::Z, 0.9, x);
            let b = numeric.deflated(KernelKind::Z, 0.9, x);
            assert!((a - b).abs() < 1e-6 * a.abs(), "x={x}: {a} vs {b}");
        }
    }
}
