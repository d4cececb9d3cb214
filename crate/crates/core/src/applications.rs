//! Two applications: a perpetual double knock-out corridor option and
//! bankruptcy probabilities in a risk model with a three-level bankruptcy
//! rate.

use crate::error::{Error, Result};
use crate::fluctuation::killed_density_with;
use crate::kernels::{agree, NumericSettings};
use crate::levy_model::LevyModel;
use crate::quadrature::gauss_kronrod;
use crate::scale::ScaleFunction;

/// Corridor `(a, b)` in log-price, knock-out band `[0, c]`, rate `p` and
/// initial log-price `x`. The option pays the discounted time spent in the
/// corridor until knock-out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p: f64,
    pub x: f64,
}

impl CorridorSpec {
    pub fn validate(&self) -> Result<()> {
        let CorridorSpec { a, b, c, p, x } = *self;
        if !(0.0 <= a && a <= b && b <= c && c.is_finite()) {
            return Err(Error::domain(format!(
                "corridor needs 0 <= a <= b <= c < inf, got a={a}, b={b}, c={c}"
            )));
        }
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::domain(format!("rate must be finite and >= 0, got {p}")));
        }
        if !(0.0..=c).contains(&x) {
            return Err(Error::domain(format!("need 0 <= x <= c, got x={x}")));
        }
        Ok(())
    }
}

/// Corridor price with the discrepancy between its two assemblies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorPrice {
    pub value: f64,
    /// Value from integrating the exit transform against the killed
    /// potential density.
    pub potential_value: f64,
}

/// `V(x) = ∫_a^b (Z^{(p)}(y) − (Z^{(p)}(c)−1)W^{(p)}(y)/W^{(p)}(c)) ·
/// (W^{(p)}(x)W^{(p)}(c−y)/W^{(p)}(c) − W^{(p)}(x−y)) dy`.
///
/// The value is also assembled as `∫_a^b E_y[e^{-p(τ_0⁻∧τ_c⁺)}] u(x, y) dy`
/// with `u` the killed potential density, by adaptive quadrature; the two
/// must agree to within the quadrature tolerance.
pub fn price_corridor_option(
    model: &LevyModel,
    spec: &CorridorSpec,
    settings: &NumericSettings,
) -> Result<CorridorPrice> {
    spec.validate()?;
    settings.validate()?;
    let CorridorSpec { a, b, c, p, x } = *spec;
    if a == b || x == c {
        return Ok(CorridorPrice {
            value: 0.0,
            potential_value: 0.0,
        });
    }
    let w = settings.scale(model, p, c)?;
    let wc = w.w(c);
    let zc = w.z(c);
    let wx = w.w(x);
    let kinks = [a, b, x, c - x];

    let scheme = settings.scheme(settings.panel_for(&[&w]));
    let value = scheme.integrate(a, b, &kinks, |y| {
        let payoff = w.z(y) - (zc - 1.0) / wc * w.w(y);
        payoff * (wx / wc * w.w(c - y) - w.w(x - y))
    });

    let exit_transform = |y: f64| exit_transform(&w, y, c);
    let mut cuts: Vec<f64> = kinks.iter().copied().filter(|&k| a < k && k < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut potential_value = 0.0;
    for pair in cuts.windows(2) {
        let (part, _) = gauss_kronrod(
            |y: f64| exit_transform(y) * killed_density_with(&w, x, c, y),
            pair[0],
            pair[1],
            1e-15,
            0.1 * settings.tol_quad,
            4000,
        )?;
        potential_value += part;
    }
    if !agree(value, potential_value, value.abs(), settings.tol_quad) {
        return Err(Error::numeric(
            format!("corridor price: assemblies disagree ({value} vs {potential_value})"),
            (value - potential_value).abs(),
        ));
    }
    Ok(CorridorPrice {
        value,
        potential_value,
    })
}

/// `E_y[e^{-p(τ_0⁻∧τ_c⁺)}]` as the sum of the two exit transforms.
fn exit_transform(w: &ScaleFunction, y: f64, c: f64) -> f64 {
    let ratio = w.w(y) / w.w(c);
    (w.z(y) - w.z(c) * ratio) + ratio
}

/// Bankruptcy rate 0 on `[0, ∞)`, `q` on `[−b, 0)` and immediate
/// bankruptcy below `−b`, started from surplus `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaSpec {
    pub b: f64,
    pub q: f64,
    pub x: f64,
}

/// Probabilities of the three outcomes of the bankruptcy model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaDecomposition {
    /// Bankruptcy never occurs.
    pub survive: f64,
    /// Bankruptcy by dropping below `−b`.
    pub bankrupt_below: f64,
    /// Bankruptcy at rate `q` while in `[−b, 0)`.
    pub bankrupt_inside: f64,
}

/// Closed forms for the three outcome probabilities, evaluated in the
/// shifted coordinate `x + b`.
///
/// `bankrupt_inside` comes from its own explicit expression and is checked
/// against `1 − survive − bankrupt_below`.
pub fn omega_decomposition(
    model: &LevyModel,
    spec: &OmegaSpec,
    settings: &NumericSettings,
) -> Result<OmegaDecomposition> {
    settings.validate()?;
    let OmegaSpec { b, q, x } = *spec;
    if !(b > 0.0 && b.is_finite() && q > 0.0 && q.is_finite() && x.is_finite()) {
        return Err(Error::domain(format!(
            "omega model needs b, q > 0 and finite x, got b={b}, q={q}, x={x}"
        )));
    }
    let drift = match model.mean_slope() {
        Ok(d) if d > 0.0 => d,
        Ok(d) => {
            return Err(Error::domain(format!(
                "omega model needs a positive mean slope, got {d}"
            )))
        }
        Err(_) => return Err(Error::domain("omega model needs a finite positive mean slope")),
    };
    let s = x + b;
    let w0 = settings.scale(model, 0.0, s.max(b))?;
    let wq = settings.scale(model, q, s.max(b))?;
    let scheme = settings.scheme(settings.panel_for(&[&w0, &wq]));
    let kinks = [s];
    let conv_z = scheme.integrate(0.0, b, &kinks, |z| w0.w(s - z) * wq.z(z));
    let conv_w = scheme.integrate(0.0, b, &kinks, |z| w0.w(s - z) * wq.w(z));
    let int_z = scheme.integrate(0.0, b, &[], |y| wq.z(y));
    let zb = wq.z(b);
    let escape = w0.w(s) + q * conv_w;

    let survive = drift * escape / zb;
    let bankrupt_below = 1.0 + q * conv_z - (drift + q * int_z) / zb * escape;
    let bankrupt_inside = -q * conv_z + q * int_z / zb * escape;
    let complement = 1.0 - survive - bankrupt_below;
    if !agree(bankrupt_inside, complement, 1.0 + q * (conv_z + int_z / zb * escape), settings.tol_quad) {
        return Err(Error::numeric(
            format!("omega decomposition: inside probability {bankrupt_inside} vs complement {complement}"),
            (bankrupt_inside - complement).abs(),
        ));
    }
    let slack = 1e-7;
    for (name, v) in [
        ("survive", survive),
        ("bankrupt_below", bankrupt_below),
        ("bankrupt_inside", bankrupt_inside),
    ] {
        if !(v >= -slack && v <= 1.0 + slack) {
            return Err(Error::numeric(format!("omega decomposition: {name} = {v} outside [0, 1]"), v));
        }
    }
    Ok(OmegaDecomposition {
        survive,
        bankrupt_below,
        bankrupt_inside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluctuation::{exit_above, exit_below};
    use approx::assert_abs_diff_eq;

    fn bm() -> LevyModel {
        LevyModel::brownian_drift(1.0, 2f64.sqrt()).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(1.5, 1.0, 1.0).unwrap()
    }

    fn s() -> NumericSettings {
        NumericSettings::default()
    }

    #[test]
    fn corridor_degenerate_cases() {
        let spec = CorridorSpec { a: 0.8, b: 0.8, c: 2.0, p: 0.05, x: 1.0 };
        assert_eq!(price_corridor_option(&bm(), &spec, &s()).unwrap().value, 0.0);
        let spec = CorridorSpec { a: 0.5, b: 1.5, c: 2.0, p: 0.05, x: 2.0 };
        assert_eq!(price_corridor_option(&bm(), &spec, &s()).unwrap().value, 0.0);
        let spec = CorridorSpec { a: 1.5, b: 0.5, c: 2.0, p: 0.05, x: 1.0 };
        assert!(price_corridor_option(&bm(), &spec, &s()).is_err());
    }

    #[test]
    fn full_corridor_without_discount_is_expected_exit_time() {
        // a = 0, b = c, p → 0: V is E_x[τ_0⁻ ∧ τ_c⁺], which for Brownian
        // motion with drift μ and variance v is (c·P(up) − x)/μ.
        let (mu, c, x) = (1.0, 2.0, 0.7);
        let up = exit_above(&bm(), 0.0, x, c).unwrap();
        let expect = (c * up - x) / mu;
        let spec = CorridorSpec { a: 0.0, b: c, c, p: 0.0, x };
        let v = price_corridor_option(&bm(), &spec, &s()).unwrap();
        assert_abs_diff_eq!(v.value, expect, epsilon = 1e-10);
    }

    #[test]
    fn corridor_price_is_bounded_and_both_assemblies_agree() {
        for m in [bm(), cl()] {
            for &p in &[0.05, 0.5, 3.0] {
                let spec = CorridorSpec { a: 0.5, b: 1.5, c: 2.0, p, x: 1.0 };
                let v = price_corridor_option(&m, &spec, &s()).unwrap();
                assert!(v.value > 0.0 && v.value <= 1.0 / p);
                assert!((v.value - v.potential_value).abs() <= 1e-9 * v.value);
            }
        }
    }

    #[test]
    fn omega_components_sum_to_one() {
        for m in [bm(), cl()] {
            for &x in &[-2.0, -0.5, 0.0, 0.5, 3.0] {
                let d = omega_decomposition(&m, &OmegaSpec { b: 1.0, q: 0.5, x }, &s()).unwrap();
                assert_abs_diff_eq!(d.survive + d.bankrupt_below + d.bankrupt_inside, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn omega_below_band_is_immediate_bankruptcy() {
        let d = omega_decomposition(&cl(), &OmegaSpec { b: 1.0, q: 0.5, x: -1.5 }, &s()).unwrap();
        assert_eq!(d.survive, 0.0);
        assert_abs_diff_eq!(d.bankrupt_below, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn omega_with_tiny_rate_approaches_ruin_below_band() {
        // q → 0: bankruptcy only by dropping below −b, the classical ruin
        // event from level x + b.
        let m = bm();
        let d = omega_decomposition(&m, &OmegaSpec { b: 1.0, q: 1e-9, x: 0.5 }, &s()).unwrap();
        let ruin = 1.0 - m.mean_slope().unwrap() * crate::scale::scale_w(&m, 0.0, 1.5).unwrap();
        assert_abs_diff_eq!(d.bankrupt_below, ruin, epsilon = 1e-8);
        assert!(d.bankrupt_inside.abs() < 1e-8);
    }

    #[test]
    fn omega_survival_far_above_band() {
        let m = cl();
        let x = 20.0 / m.phi(0.5).unwrap();
        let d = omega_decomposition(&m, &OmegaSpec { b: 1.0, q: 0.5, x }, &s()).unwrap();
        assert!((d.survive - 1.0).abs() < 1e-4);
    }

    #[test]
    fn omega_rejects_nonpositive_drift() {
        let m = LevyModel::brownian_drift(-0.2, 1.0).unwrap();
        assert!(omega_decomposition(&m, &OmegaSpec { b: 1.0, q: 0.5, x: 0.0 }, &s()).is_err());
    }

    #[test]
    fn exit_transform_matches_fluctuation_identities() {
        let m = cl();
        let w = s().scale(&m, 0.4, 2.0).unwrap();
        let e = exit_transform(&w, 0.6, 2.0);
        let f = exit_below(&m, 0.4, 0.6, 2.0).unwrap() + exit_above(&m, 0.4, 0.6, 2.0).unwrap();
        assert_abs_diff_eq!(e, f, epsilon = 1e-14);
    }
}
