//! Spectrally negative Lévy processes described by their triplet.
//!
//! Jump sizes are stored as positive magnitudes of downward jumps, so the
//! Lévy measure lives on `(0, ∞)`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::gauss_kronrod;

/// Absolute tolerance on `|ψ(Φ(q)) − q|`.
pub const TOL_ROOT: f64 = 1e-12;

const QUAD_ABS: f64 = 1e-14;
const QUAD_REL: f64 = 1e-12;
const QUAD_MAX_SUB: usize = 4000;

/// Tractability class: selects closed-form or numeric scale functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassTag {
    BrownianDrift,
    CramerLundbergExp,
    JumpDiffusionExp,
    GeneralNumeric,
}

/// Declared integrability of a tabulated Lévy density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrabilityFlags {
    /// `∫₀¹ z Π(dz) < ∞`.
    pub small_jumps_summable: bool,
    /// `∫₁^∞ z Π(dz) < ∞`.
    pub finite_mean: bool,
}

#[derive(Debug, Clone, Copy)]
struct TabulatedMoments {
    /// `∫₀¹ z Π(dz)`, infinite when the small jumps are not summable.
    small_first: f64,
    /// `Π((1, ∞))`.
    tail_mass: f64,
    /// `∫₁^∞ z Π(dz)`, infinite without a finite mean.
    tail_first: f64,
}

/// A Lévy density given as a function handle on `(0, support_max)`.
#[derive(Clone)]
pub struct TabulatedDensity {
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support_max: f64,
    flags: IntegrabilityFlags,
    moments: Arc<OnceLock<TabulatedMoments>>,
}

impl fmt::Debug for TabulatedDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedDensity")
            .field("support_max", &self.support_max)
            .field("flags", &self.flags)
            .finish_non_exhaustive()
    }
}

impl TabulatedDensity {
    /// Wraps a density handle. `support_max` may be `f64::INFINITY`.
    pub fn new<F>(density: F, support_max: f64, flags: IntegrabilityFlags) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(support_max > 0.0) {
            return Err(Error::InvalidModel("tabulated support must be positive".into()));
        }
        let upper = if support_max.is_finite() { support_max } else { 50.0 };
        for k in 1..=400 {
            let z = upper * k as f64 / 400.0;
            let v = density(z);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "tabulated density must be finite and nonnegative, got {v} at z={z}"
                )));
            }
        }
        Ok(TabulatedDensity {
            density: Arc::new(density),
            support_max,
            flags,
            moments: Arc::new(OnceLock::new()),
        })
    }

    /// Piecewise-linear density through `(nodes[i], values[i])`, zero outside.
    pub fn from_points(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidModel(
                "tabulated density needs at least two (node, value) pairs".into(),
            ));
        }
        if nodes[0] < 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidModel(
                "tabulated nodes must be nonnegative and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidModel("tabulated values must be nonnegative".into()));
        }
        let support = *nodes.last().expect("checked length");
        let density = move |z: f64| {
            if z < nodes[0] || z > nodes[nodes.len() - 1] {
                return 0.0;
            }
            let i = nodes.partition_point(|n| *n <= z).clamp(1, nodes.len() - 1);
            let (z0, z1) = (nodes[i - 1], nodes[i]);
            let t = (z - z0) / (z1 - z0);
            values[i - 1] + t * (values[i] - values[i - 1])
        };
        TabulatedDensity::new(
            density,
            support,
            IntegrabilityFlags {
                small_jumps_summable: true,
                finite_mean: true,
            },
        )
    }

    pub fn density(&self, z: f64) -> f64 {
        if z <= 0.0 || z > self.support_max {
            0.0
        } else {
            (self.density)(z)
        }
    }

    pub fn support_max(&self) -> f64 {
        self.support_max
    }

    pub fn flags(&self) -> IntegrabilityFlags {
        self.flags
    }

    fn moments(&self) -> Result<TabulatedMoments> {
        if let Some(m) = self.moments.get() {
            return Ok(*m);
        }
        let small_first = if self.flags.small_jumps_summable {
            real_integral(|z| z * self.density(z), 0.0, self.support_max.min(1.0))?
        } else {
            f64::INFINITY
        };
        let tail_mass = self.integrate_tail(|z| self.density(z))?;
        let tail_first = if self.flags.finite_mean {
            self.integrate_tail(|z| z * self.density(z))?
        } else {
            f64::INFINITY
        };
        let m = TabulatedMoments {
            small_first,
            tail_mass,
            tail_first,
        };
        let _ = self.moments.set(m);
        Ok(m)
    }

    /// `∫₁^S g(z) dz` with a compactifying map when `S = ∞`.
    fn integrate_tail<F: Fn(f64) -> f64>(&self, g: F) -> Result<f64> {
        if self.support_max <= 1.0 {
            return Ok(0.0);
        }
        if self.support_max.is_finite() {
            real_integral(g, 1.0, self.support_max)
        } else {
            real_integral(
                |t| {
                    if t >= 1.0 {
                        return 0.0;
                    }
                    let z = 1.0 + t / (1.0 - t);
                    g(z) / ((1.0 - t) * (1.0 - t))
                },
                0.0,
                1.0,
            )
        }
    }

    /// Jump part of ψ at complex `s` with `Re s ≥ 0`, or anywhere when the
    /// support is bounded:
    /// `∫₀¹ (e^{-sz} − 1 + sz) Π(dz) + ∫₁^S (e^{-sz} − 1) Π(dz)`.
    fn jump_exponent(&self, s: Complex64) -> Result<Complex64> {
        let m = self.moments()?;
        let support = self.support_max;
        let small_end = support.min(1.0);
        // Beyond `cut` the factor e^{-sz} is below e^{-40} and only the
        // polynomial compensator survives.
        let cut = if s.re > 0.0 { 40.0 / s.re } else { f64::INFINITY };

        let compensated = |z: f64| -> Complex64 {
            let w = s * z;
            let c = if w.norm() < 0.5 {
                let mut term = w * w * 0.5;
                let mut acc = term;
                for k in 3..20 {
                    term = -term * w / k as f64;
                    acc += term;
                }
                acc
            } else {
                (-w).exp() - 1.0 + w
            };
            c * self.density(z)
        };

        let mut total = Complex64::new(0.0, 0.0);
        let near_end = small_end.min(cut);
        total += complex_integral(compensated, 0.0, near_end)?;
        if cut < small_end {
            let m0 = real_integral(|z| self.density(z), cut, small_end)?;
            let m1 = real_integral(|z| z * self.density(z), cut, small_end)?;
            total += -m0 + s * m1;
        }
        if support > 1.0 {
            if cut > 1.0 {
                let far = support.min(cut);
                let decay = |z: f64| (-s * z).exp() * self.density(z);
                let part = if far.is_finite() {
                    complex_integral(decay, 1.0, far)?
                } else {
                    complex_integral(
                        |t| {
                            if t >= 1.0 {
                                return Complex64::new(0.0, 0.0);
                            }
                            let z = 1.0 + t / (1.0 - t);
                            decay(z) / ((1.0 - t) * (1.0 - t))
                        },
                        0.0,
                        1.0,
                    )?
                };
                total += part;
            }
            total -= m.tail_mass;
        }
        Ok(total)
    }
}

fn real_integral<F: Fn(f64) -> f64>(g: F, a: f64, b: f64) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    gauss_kronrod(g, a, b, QUAD_ABS, QUAD_REL, QUAD_MAX_SUB).map(|(v, _)| v)
}

fn complex_integral<F: Fn(f64) -> Complex64>(g: F, a: f64, b: f64) -> Result<Complex64> {
    if !(b > a) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    gauss_kronrod(g, a, b, QUAD_ABS, QUAD_REL, QUAD_MAX_SUB).map(|(v, _)| v)
}

/// The Lévy measure `Π` on `(0, ∞)`.
#[derive(Debug, Clone)]
pub enum JumpMeasure {
    None,
    /// Exponentially distributed jump sizes arriving at Poisson `rate`.
    CompoundPoissonExp { rate: f64, mean: f64 },
    Tabulated(TabulatedDensity),
}

impl JumpMeasure {
    /// Density of `Π` at `z > 0`.
    pub fn density(&self, z: f64) -> f64 {
        match self {
            JumpMeasure::None => 0.0,
            JumpMeasure::CompoundPoissonExp { rate, mean } => {
                if z <= 0.0 {
                    0.0
                } else {
                    rate / mean * (-z / mean).exp()
                }
            }
            JumpMeasure::Tabulated(t) => t.density(z),
        }
    }

    /// `∫₀¹ z Π(dz)`; infinite when the small jumps are not summable.
    pub fn small_jump_first_moment(&self) -> Result<f64> {
        match self {
            JumpMeasure::None => Ok(0.0),
            JumpMeasure::CompoundPoissonExp { rate, mean } => {
                let beta = 1.0 / mean;
                Ok(rate * (1.0 - (-beta).exp() * (1.0 + beta)) / beta)
            }
            JumpMeasure::Tabulated(t) => Ok(t.moments()?.small_first),
        }
    }
}

/// Path variation of the process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariationClass {
    Bounded { drift_d: f64 },
    Unbounded,
}

/// A spectrally negative Lévy process given by its triplet `(γ, σ, Π)`.
#[derive(Debug, Clone)]
pub struct LevyModel {
    gamma: f64,
    sigma: f64,
    jumps: JumpMeasure,
    class: ClassTag,
}

impl LevyModel {
    /// Validates the triplet against the class tag.
    pub fn new(gamma: f64, sigma: f64, jumps: JumpMeasure, class: ClassTag) -> Result<Self> {
        if !gamma.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidModel(format!(
                "need finite gamma and sigma >= 0, got gamma={gamma}, sigma={sigma}"
            )));
        }
        if let JumpMeasure::CompoundPoissonExp { rate, mean } = jumps {
            if !(rate > 0.0) || !(mean > 0.0) || !rate.is_finite() || !mean.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "exponential jumps need rate > 0 and mean > 0, got rate={rate}, mean={mean}"
                )));
            }
        }
        let consistent = match class {
            ClassTag::BrownianDrift => matches!(jumps, JumpMeasure::None),
            ClassTag::CramerLundbergExp => {
                sigma == 0.0 && matches!(jumps, JumpMeasure::CompoundPoissonExp { .. })
            }
            ClassTag::JumpDiffusionExp => {
                sigma > 0.0 && matches!(jumps, JumpMeasure::CompoundPoissonExp { .. })
            }
            ClassTag::GeneralNumeric => true,
        };
        if !consistent {
            return Err(Error::InvalidModel(format!(
                "jump specification and sigma do not match class {class:?}"
            )));
        }
        let model = LevyModel {
            gamma,
            sigma,
            jumps,
            class,
        };
        model.classify_variation()?;
        Ok(model)
    }

    /// Linear Brownian motion `γt + σB_t`.
    pub fn brownian_drift(gamma: f64, sigma: f64) -> Result<Self> {
        LevyModel::new(gamma, sigma, JumpMeasure::None, ClassTag::BrownianDrift)
    }

    /// Cramér–Lundberg surplus with premium rate `premium` and exponential claims.
    ///
    /// The premium is the bounded-variation drift `d`; the triplet's `γ` is
    /// recovered by subtracting `∫₀¹ z Π(dz)`.
    pub fn cramer_lundberg(premium: f64, rate: f64, mean: f64) -> Result<Self> {
        Self::with_exp_jumps(premium, 0.0, rate, mean, ClassTag::CramerLundbergExp)
    }

    /// Brownian motion with drift `d`, volatility `sigma` and exponential downward jumps.
    pub fn jump_diffusion(drift: f64, sigma: f64, rate: f64, mean: f64) -> Result<Self> {
        Self::with_exp_jumps(drift, sigma, rate, mean, ClassTag::JumpDiffusionExp)
    }

    /// Any triplet, always evaluated through the numeric scale-function path.
    pub fn general(gamma: f64, sigma: f64, jumps: JumpMeasure) -> Result<Self> {
        LevyModel::new(gamma, sigma, jumps, ClassTag::GeneralNumeric)
    }

    fn with_exp_jumps(drift: f64, sigma: f64, rate: f64, mean: f64, class: ClassTag) -> Result<Self> {
        let jumps = JumpMeasure::CompoundPoissonExp { rate, mean };
        if !(rate > 0.0) || !(mean > 0.0) {
            return Err(Error::InvalidModel(format!(
                "exponential jumps need rate > 0 and mean > 0, got rate={rate}, mean={mean}"
            )));
        }
        let gamma = drift - jumps.small_jump_first_moment()?;
        LevyModel::new(gamma, sigma, jumps, class)
    }

    /// The same triplet, forced onto the numeric scale-function path.
    pub fn as_general_numeric(&self) -> LevyModel {
        LevyModel {
            class: ClassTag::GeneralNumeric,
            ..self.clone()
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn jumps(&self) -> &JumpMeasure {
        &self.jumps
    }

    pub fn class(&self) -> ClassTag {
        self.class
    }

    /// True when the scale functions have an exponential-sum closed form.
    pub fn has_closed_form(&self) -> bool {
        matches!(
            self.class,
            ClassTag::BrownianDrift | ClassTag::CramerLundbergExp | ClassTag::JumpDiffusionExp
        )
    }

    /// Coefficient of `λ` once the compensator is folded in: `γ + ∫₀¹ zΠ(dz)`.
    /// Infinite when the small jumps are not summable.
    pub fn linear_coefficient(&self) -> Result<f64> {
        Ok(self.gamma + self.jumps.small_jump_first_moment()?)
    }

    pub fn classify_variation(&self) -> Result<VariationClass> {
        let small = self.jumps.small_jump_first_moment()?;
        if self.sigma == 0.0 && small.is_finite() {
            let d = self.gamma + small;
            if d > 0.0 {
                Ok(VariationClass::Bounded { drift_d: d })
            } else {
                Err(Error::InvalidModel(format!(
                    "bounded-variation drift d = {d} <= 0 gives decreasing paths"
                )))
            }
        } else {
            Ok(VariationClass::Unbounded)
        }
    }

    /// Initial value `W^{(q)}(0)`: `1/d` for bounded variation, else 0.
    pub fn scale_initial_value(&self) -> f64 {
        match self.classify_variation() {
            Ok(VariationClass::Bounded { drift_d }) => 1.0 / drift_d,
            _ => 0.0,
        }
    }

    /// `ψ(λ)` for `λ ≥ 0`.
    pub fn laplace_exponent(&self, lam: f64) -> Result<f64> {
        if !(lam >= 0.0) {
            return Err(Error::domain(format!("laplace_exponent needs lambda >= 0, got {lam}")));
        }
        if lam == 0.0 {
            return Ok(0.0);
        }
        let gauss = self.sigma * self.sigma * lam * lam * 0.5;
        match &self.jumps {
            JumpMeasure::None => Ok(self.gamma * lam + gauss),
            JumpMeasure::CompoundPoissonExp { rate, mean } => {
                let d = self.linear_coefficient()?;
                Ok(d * lam + gauss - rate * lam * mean / (1.0 + mean * lam))
            }
            JumpMeasure::Tabulated(t) => {
                Ok(self.gamma * lam + gauss + t.jump_exponent(Complex64::new(lam, 0.0))?.re)
            }
        }
    }

    /// `ψ` continued to complex arguments right of the abscissa `Re s > 0`,
    /// and further left when the continuation exists.
    pub fn laplace_exponent_complex(&self, s: Complex64) -> Result<Complex64> {
        let gauss = s * s * (self.sigma * self.sigma * 0.5);
        match &self.jumps {
            JumpMeasure::None => Ok(s * self.gamma + gauss),
            JumpMeasure::CompoundPoissonExp { rate, mean } => {
                let d = self.linear_coefficient()?;
                Ok(s * d + gauss - s * *rate * *mean / (s * *mean + 1.0))
            }
            JumpMeasure::Tabulated(t) => {
                if s.re < 0.0 && !t.support_max.is_finite() {
                    return Err(Error::domain(
                        "unbounded tabulated Levy density has no continuation to Re(s) < 0",
                    ));
                }
                Ok(s * self.gamma + gauss + t.jump_exponent(s)?)
            }
        }
    }

    /// True when `ψ` continues analytically to the whole left half-plane
    /// (apart from isolated poles), as needed by deformed-contour inversion.
    pub fn continues_left(&self) -> bool {
        match &self.jumps {
            JumpMeasure::Tabulated(t) => t.support_max.is_finite(),
            _ => true,
        }
    }

    /// `ψ(λ)` at real `λ` possibly below zero, where finite. Used for
    /// exponential martingale bounds; `None` outside the domain.
    pub fn laplace_exponent_extended(&self, lam: f64) -> Option<f64> {
        if lam >= 0.0 {
            return self.laplace_exponent(lam).ok();
        }
        let gauss = self.sigma * self.sigma * lam * lam * 0.5;
        match &self.jumps {
            JumpMeasure::None => Some(self.gamma * lam + gauss),
            JumpMeasure::CompoundPoissonExp { rate, mean } => {
                if lam * mean <= -1.0 {
                    return None;
                }
                let d = self.linear_coefficient().ok()?;
                Some(d * lam + gauss - rate * lam * mean / (1.0 + mean * lam))
            }
            JumpMeasure::Tabulated(t) if t.support_max.is_finite() => {
                let j = t.jump_exponent(Complex64::new(lam, 0.0)).ok()?;
                Some(self.gamma * lam + gauss + j.re)
            }
            JumpMeasure::Tabulated(_) => None,
        }
    }

    /// `ψ'(λ)` (order 1) or `ψ''(λ)` (order 2).
    pub fn laplace_exponent_derivative(&self, lam: f64, order: u8) -> Result<f64> {
        if order != 1 && order != 2 {
            return Err(Error::domain(format!("derivative order must be 1 or 2, got {order}")));
        }
        if lam < 0.0 || (lam == 0.0 && order == 2 && !matches!(self.jumps, JumpMeasure::None | JumpMeasure::CompoundPoissonExp { .. })) {
            return Err(Error::domain(format!(
                "derivative of order {order} needs lambda > 0 here, got {lam}"
            )));
        }
        let s2 = self.sigma * self.sigma;
        match &self.jumps {
            JumpMeasure::None => Ok(if order == 1 { self.gamma + s2 * lam } else { s2 }),
            JumpMeasure::CompoundPoissonExp { rate, mean } => {
                let d = self.linear_coefficient()?;
                let beta = 1.0 / mean;
                let den = beta + lam;
                if order == 1 {
                    Ok(d + s2 * lam - rate * beta / (den * den))
                } else {
                    Ok(s2 + 2.0 * rate * beta / (den * den * den))
                }
            }
            JumpMeasure::Tabulated(t) => {
                let m = t.moments()?;
                if order == 1 {
                    if lam == 0.0 {
                        if !t.flags.finite_mean {
                            return Err(Error::domain(
                                "psi'(0+) is infinite: the Levy measure has no finite mean",
                            ));
                        }
                        return Ok(self.gamma - m.tail_first);
                    }
                    let small = real_integral(
                        |z| z * (-(-lam * z).exp_m1()) * t.density(z),
                        0.0,
                        t.support_max.min(1.0),
                    )?;
                    let tail = t.integrate_tail(|z| z * (-lam * z).exp() * t.density(z))?;
                    Ok(self.gamma + s2 * lam + small - tail)
                } else {
                    let small = real_integral(
                        |z| z * z * (-lam * z).exp() * t.density(z),
                        0.0,
                        t.support_max.min(1.0),
                    )?;
                    let tail = t.integrate_tail(|z| z * z * (-lam * z).exp() * t.density(z))?;
                    Ok(s2 + small + tail)
                }
            }
        }
    }

    /// `ψ'(0+) = E[X₁]`.
    pub fn mean_slope(&self) -> Result<f64> {
        self.laplace_exponent_derivative(0.0, 1)
    }

    /// Right-inverse `Φ(q) = sup{λ ≥ 0 : ψ(λ) = q}`.
    ///
    /// Newton from the right of the root, which converges monotonically for a
    /// convex increasing function, with bisection whenever a step leaves the
    /// current bracket.
    pub fn phi(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return Err(Error::domain(format!("phi needs q >= 0, got {q}")));
        }
        let slope0 = match self.mean_slope() {
            Ok(s) => s,
            Err(Error::Domain(_)) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        if q == 0.0 && slope0 >= 0.0 {
            return Ok(0.0);
        }
        let g = |lam: f64| -> Result<f64> { Ok(self.laplace_exponent(lam)? - q) };

        let mut hi = 1.0;
        let mut iters = 0;
        while g(hi)? <= 0.0 {
            hi *= 2.0;
            iters += 1;
            if iters > 200 {
                return Err(Error::numeric("phi: bracketing", g(hi)?));
            }
        }
        let mut lo = 0.0;
        if q == 0.0 {
            // ψ < 0 just right of zero; find a point with ψ < 0.
            let mut t = hi;
            let mut k = 0;
            while g(t)? >= 0.0 {
                t *= 0.5;
                k += 1;
                if k > 200 {
                    return Err(Error::numeric("phi: negative region", g(t)?));
                }
            }
            lo = t;
        }
        let mut lam = hi;
        for _ in 0..200 {
            let val = g(lam)?;
            if val.abs() <= TOL_ROOT * 0.01 {
                return Ok(lam);
            }
            if val > 0.0 {
                hi = lam;
            } else {
                lo = lam;
            }
            let deriv = self.laplace_exponent_derivative(lam.max(f64::MIN_POSITIVE), 1)?;
            let mut next = lam - val / deriv;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - lam).abs() <= 1e-16 * lam.abs().max(1e-300) {
                lam = next;
                break;
            }
            lam = next;
        }
        let residual = g(lam)?.abs();
        if residual <= TOL_ROOT {
            Ok(lam)
        } else {
            Err(Error::numeric("phi: Newton iteration", residual))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bm() -> LevyModel {
        LevyModel::brownian_drift(1.0, 2f64.sqrt()).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(1.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn exponent_examples() {
        assert_abs_diff_eq!(bm().laplace_exponent(1.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(cl().laplace_exponent(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(cl().laplace_exponent(1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert!(bm().laplace_exponent(-1.0).is_err());
    }

    #[test]
    fn exponential_jumps_match_integral_definition() {
        // ψ(λ) = γλ + ∫(e^{-λz} − 1 + λz 1_{z≤1}) Π(dz) by direct quadrature.
        let m = cl();
        for &lam in &[0.3, 1.0, 4.0] {
            let (jump, _) = gauss_kronrod(
                |z: f64| {
                    let comp = if z <= 1.0 { lam * z } else { 0.0 };
                    ((-lam * z).exp() - 1.0 + comp) * (-z).exp()
                },
                0.0,
                60.0,
                1e-15,
                1e-14,
                2000,
            )
            .unwrap();
            let direct = m.gamma() * lam + jump;
            assert_abs_diff_eq!(m.laplace_exponent(lam).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_examples() {
        assert_abs_diff_eq!(bm().laplace_exponent_derivative(0.0, 1).unwrap(), 1.0);
        assert_abs_diff_eq!(bm().laplace_exponent_derivative(2.0, 2).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cl().laplace_exponent_derivative(0.0, 1).unwrap(), 0.5, epsilon = 1e-15);
        let h = 1e-6;
        let fd = (cl().laplace_exponent(h).unwrap() - 0.0) / h;
        assert!((fd - 0.5).abs() < 1e-5);
        assert!(bm().laplace_exponent_derivative(1.0, 3).is_err());
    }

    #[test]
    fn phi_examples() {
        assert_abs_diff_eq!(bm().phi(2.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(bm().phi(0.0).unwrap(), 0.0);
        assert_eq!(cl().phi(0.0).unwrap(), 0.0);
        let down = LevyModel::brownian_drift(-1.0, 2f64.sqrt()).unwrap();
        assert_abs_diff_eq!(down.phi(0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(bm().phi(-0.1).is_err());
    }

    #[test]
    fn variation_examples() {
        assert_eq!(bm().classify_variation().unwrap(), VariationClass::Unbounded);
        match cl().classify_variation().unwrap() {
            VariationClass::Bounded { drift_d } => assert_abs_diff_eq!(drift_d, 1.5, epsilon = 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        let drift = LevyModel::brownian_drift(0.1, 0.0).unwrap();
        assert_eq!(
            drift.classify_variation().unwrap(),
            VariationClass::Bounded { drift_d: 0.1 }
        );
    }

    #[test]
    fn decreasing_paths_rejected() {
        assert!(matches!(
            LevyModel::brownian_drift(-0.5, 0.0),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            LevyModel::cramer_lundberg(0.0, 1.0, 1.0),
            Err(Error::InvalidModel(_))
        ));
        assert!(LevyModel::new(1.0, 0.0, JumpMeasure::None, ClassTag::CramerLundbergExp).is_err());
    }

    #[test]
    fn tabulated_exponential_matches_closed_form() {
        let t = TabulatedDensity::new(
            |z: f64| (-z).exp(),
            f64::INFINITY,
            IntegrabilityFlags {
                small_jumps_summable: true,
                finite_mean: true,
            },
        )
        .unwrap();
        let closed = cl();
        let tab = LevyModel::general(closed.gamma(), 0.0, JumpMeasure::Tabulated(t)).unwrap();
        for &lam in &[0.2, 1.0, 3.0] {
            assert_abs_diff_eq!(
                tab.laplace_exponent(lam).unwrap(),
                closed.laplace_exponent(lam).unwrap(),
                epsilon = 1e-10
            );
            assert_abs_diff_eq!(
                tab.laplace_exponent_derivative(lam, 1).unwrap(),
                closed.laplace_exponent_derivative(lam, 1).unwrap(),
                epsilon = 1e-10
            );
        }
        assert_abs_diff_eq!(tab.mean_slope().unwrap(), 0.5, epsilon = 1e-10);
        let s = Complex64::new(0.7, 3.0);
        let a = tab.laplace_exponent_complex(s).unwrap();
        let b = closed.laplace_exponent_complex(s).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn heavy_tail_mean_is_a_domain_error() {
        let t = TabulatedDensity::new(
            |z: f64| if z > 1.0 { z.powf(-1.5) } else { 1.0 },
            f64::INFINITY,
            IntegrabilityFlags {
                small_jumps_summable: true,
                finite_mean: false,
            },
        )
        .unwrap();
        let m = LevyModel::general(1.0, 1.0, JumpMeasure::Tabulated(t)).unwrap();
        assert!(matches!(m.laplace_exponent_derivative(0.0, 1), Err(Error::Domain(_))));
        // Φ still exists for q > 0.
        let p = m.phi(1.0).unwrap();
        assert!((m.laplace_exponent(p).unwrap() - 1.0).abs() < TOL_ROOT);
    }
}
