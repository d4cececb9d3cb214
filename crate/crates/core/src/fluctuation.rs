//! Classical fluctuation identities: two-sided exit, discounted deficit,
//! killed potential density and the perturbation functional.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::NumericSettings;
use crate::levy_model::{JumpMeasure, LevyModel};
use crate::quadrature::gauss_kronrod;
use crate::scale::ScaleFunction;

fn scale(model: &LevyModel, q: f64, x_max: f64) -> Result<ScaleFunction> {
    NumericSettings::default().scale(model, q, x_max.max(1e-3))
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn check_interval(x: f64, c: f64) -> Result<()> {
    if (0.0..=c).contains(&x) && c.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("need 0 <= x <= c, got x={x}, c={c}")))
    }
}

/// `W(x)/W(c)` with the value 1 at `x = c`, including `c = 0`.
fn ratio(w: &ScaleFunction, x: f64, c: f64) -> f64 {
    if x == c {
        1.0
    } else {
        w.w(x) / w.w(c)
    }
}

/// `E_x[e^{-pτ_c⁺}; τ_c⁺ < τ_0⁻] = W^{(p)}(x)/W^{(p)}(c)`.
pub fn exit_above(model: &LevyModel, p: f64, x: f64, c: f64) -> Result<f64> {
    check_rate("p", p)?;
    check_interval(x, c)?;
    let w = scale(model, p, c)?;
    Ok(ratio(&w, x, c))
}

/// `E_x[e^{-pτ_0⁻}; τ_0⁻ < τ_c⁺] = Z^{(p)}(x) − Z^{(p)}(c) W^{(p)}(x)/W^{(p)}(c)`.
pub fn exit_below(model: &LevyModel, p: f64, x: f64, c: f64) -> Result<f64> {
    check_rate("p", p)?;
    check_interval(x, c)?;
    let w = scale(model, p, c)?;
    Ok(w.z(x) - w.z(c) * ratio(&w, x, c))
}

/// Density in `y` of the `p`-discounted potential of the process killed on
/// leaving `[0, c]`: `W^{(p)}(x)W^{(p)}(c−y)/W^{(p)}(c) − W^{(p)}(x−y)`.
pub fn killed_potential_density(model: &LevyModel, p: f64, x: f64, c: f64, y: f64) -> Result<f64> {
    check_rate("p", p)?;
    check_interval(x, c)?;
    check_interval(y, c)?;
    let w = scale(model, p, c)?;
    Ok(killed_density_with(&w, x, c, y))
}

pub(crate) fn killed_density_with(w: &ScaleFunction, x: f64, c: f64, y: f64) -> f64 {
    let wc = w.w(c);
    if wc == 0.0 {
        return 0.0;
    }
    (w.w(x) * w.w(c - y) / wc - w.w(x - y)).max(0.0)
}

/// A bounded payoff on `(−∞, a]` with its declared bound `M_f`.
#[derive(Clone)]
pub struct DeficitPayoff {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    bound: f64,
}

impl fmt::Debug for DeficitPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeficitPayoff")
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

impl DeficitPayoff {
    pub fn new<F>(f: F, bound: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::domain(format!("payoff bound must be finite and >= 0, got {bound}")));
        }
        Ok(DeficitPayoff {
            f: Arc::new(f),
            bound,
        })
    }

    /// `f ≡ c`.
    pub fn constant(c: f64) -> Self {
        DeficitPayoff {
            f: Arc::new(move |_| c),
            bound: c.abs(),
        }
    }

    /// `f(y) = e^{κ(y − a)}` with `κ ≥ 0`, bounded by 1 on `(−∞, a]`.
    pub fn exponential(kappa: f64, a: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::domain(format!("exponential payoff needs kappa >= 0, got {kappa}")));
        }
        Ok(DeficitPayoff {
            f: Arc::new(move |y| (kappa * (y - a)).exp()),
            bound: 1.0,
        })
    }

    pub fn eval(&self, y: f64) -> f64 {
        (self.f)(y)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Spot-checks `|f| ≤ M_f` on `[a − 20, a]`.
    fn check_bound(&self, a: f64) -> Result<()> {
        for k in 0..=200 {
            let y = a - 20.0 * k as f64 / 200.0;
            let v = self.eval(y);
            if !(v.abs() <= self.bound * (1.0 + 1e-12)) {
                return Err(Error::domain(format!(
                    "payoff value {v} at y={y} exceeds its declared bound {}",
                    self.bound
                )));
            }
        }
        Ok(())
    }
}

/// `E_x[e^{-qτ_a⁻} f(X_{τ_a⁻}); τ_a⁻ < τ_b⁺]`: a creeping term plus the
/// jump term `∫₀^{b−a} dy ∫_y^∞ f(y−θ+a) Π(dθ) [·]`.
pub fn discounted_deficit(
    model: &LevyModel,
    q: f64,
    a: f64,
    b: f64,
    x: f64,
    payoff: &DeficitPayoff,
) -> Result<f64> {
    check_rate("q", q)?;
    if !(a <= x && x <= b && a < b) {
        return Err(Error::domain(format!("need a <= x <= b with a < b, got a={a}, x={x}, b={b}")));
    }
    payoff.check_bound(a)?;
    let settings = NumericSettings::default();
    let w = settings.scale(model, q, b - a)?;
    let span = b - a;
    let u = x - a;
    let wb = w.w(span);

    let sigma = model.sigma();
    let creeping = if sigma > 0.0 {
        let w_prime = |z: f64| -> Result<f64> {
            if z == 0.0 {
                Ok(2.0 / (sigma * sigma))
            } else {
                w.w_prime(z)
            }
        };
        payoff.eval(a) * 0.5 * sigma * sigma * (w_prime(u)? - w.w(u) * w_prime(span)? / wb)
    } else {
        0.0
    };

    // J(y) = ∫₀^∞ f(a − v) π(y + v) dv, the payoff averaged over overshoots.
    let jump_weight: Box<dyn Fn(f64) -> Result<f64>> = match model.jumps() {
        JumpMeasure::None => Box::new(|_| Ok(0.0)),
        JumpMeasure::CompoundPoissonExp { rate, mean } => {
            let beta = 1.0 / mean;
            let (avg, _) = gauss_kronrod(
                |v: f64| payoff.eval(a - v) * beta * (-beta * v).exp(),
                0.0,
                60.0 / beta,
                1e-15,
                1e-13,
                2000,
            )?;
            let rate = *rate;
            Box::new(move |y| Ok(rate * (-beta * y).exp() * avg))
        }
        JumpMeasure::Tabulated(t) => {
            let t = t.clone();
            let f = payoff.clone();
            Box::new(move |y| {
                let upper = if t.support_max().is_finite() {
                    (t.support_max() - y).max(0.0)
                } else {
                    200.0
                };
                gauss_kronrod(
                    |v: f64| f.eval(a - v) * t.density(y + v),
                    0.0,
                    upper,
                    1e-14,
                    1e-11,
                    2000,
                )
                .map(|r| r.0)
            })
        }
    };
    let wu = w.w(u);
    let scheme = settings.scheme(settings.panel_for(&[&w]));
    let mut failure = None;
    let jumps = scheme.integrate(0.0, span, &[u], |y| {
        let weight = match jump_weight(y) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        weight * (w.w(span - y) / wb * wu - w.w(u - y))
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(creeping + jumps)
}

/// Test function `v^{(q)}` for the perturbation functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LemmaFunction {
    /// `W^{(q)}(x)`.
    Wq,
    /// `Z^{(q)}(x)`.
    Zq,
    /// `W^{(q)}(x − y)` for `0 ≤ y ≤ a`.
    WqShifted(f64),
}

/// `v(x) − (q−p)∫_a^x W^{(p)}(x−y)v(y)dy − W^{(p)}(x−a)/W^{(p)}(b−a) ·
/// (v(b) − (q−p)∫_a^b W^{(p)}(b−y)v(y)dy)`, which equals
/// `E_x[e^{-pτ_a⁻} v(X_{τ_a⁻}); τ_a⁻ < τ_b⁺]`.
pub fn lemma_functional(
    model: &LevyModel,
    p: f64,
    q: f64,
    a: f64,
    b: f64,
    x: f64,
    v_kind: LemmaFunction,
) -> Result<f64> {
    check_rate("p", p)?;
    check_rate("q", q)?;
    if !(0.0 <= a && a <= x && x <= b && a < b) {
        return Err(Error::domain(format!(
            "need 0 <= a <= x <= b with a < b, got a={a}, x={x}, b={b}"
        )));
    }
    let shift = match v_kind {
        LemmaFunction::WqShifted(y) => {
            if !(0.0..=a).contains(&y) {
                return Err(Error::domain(format!("shift must lie in [0, a], got {y}")));
            }
            y
        }
        _ => 0.0,
    };
    let settings = NumericSettings::default();
    let wq = settings.scale(model, q, b)?;
    let v = |z: f64| match v_kind {
        LemmaFunction::Wq => wq.w(z),
        LemmaFunction::Zq => wq.z(z),
        LemmaFunction::WqShifted(_) => wq.w(z - shift),
    };
    let ratio = |wp: &ScaleFunction| {
        if x == b {
            1.0
        } else {
            wp.w(x - a) / wp.w(b - a)
        }
    };
    if q == p {
        // The perturbation integrals vanish identically.
        let wp = &wq;
        return Ok(v(x) - ratio(wp) * v(b));
    }
    let wp = settings.scale(model, p, b)?;
    let scheme = settings.scheme(settings.panel_for(&[&wp, &wq]));
    let conv = |end: f64| {
        scheme.integrate(a, end, &[0.0, shift, end], |y| wp.w(end - y) * v(y))
    };
    let d = q - p;
    Ok(v(x) - d * conv(x) - ratio(&wp) * (v(b) - d * conv(b)))
}
