//! Laplace transforms of occupation times of a window, jointly with the
//! discounted exit or passage time.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernels::{HKernel, KernelContext, KernelKind, NumericSettings};
use crate::levy_model::LevyModel;

/// Arguments of an occupation query: start `x`, window `(a, b)`, optional
/// upper barrier `c`, time discount `p` and occupation penalty `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupationQuery {
    pub x: f64,
    pub a: f64,
    pub b: f64,
    pub c: Option<f64>,
    pub p: f64,
    pub q: f64,
}

impl OccupationQuery {
    /// Query with both barriers `0` and `c`.
    pub fn two_sided(x: f64, a: f64, b: f64, c: f64, p: f64, q: f64) -> Self {
        OccupationQuery {
            x,
            a,
            b,
            c: Some(c),
            p,
            q,
        }
    }

    /// Query killed only at the lower barrier 0.
    pub fn lower_only(x: f64, a: f64, b: f64, p: f64, q: f64) -> Self {
        OccupationQuery {
            x,
            a,
            b,
            c: None,
            p,
            q,
        }
    }

    fn check_rates(&self) -> Result<()> {
        check_rates(self.p, self.q)
    }

    fn barrier(&self) -> Result<f64> {
        self.c
            .ok_or_else(|| Error::domain("this formula needs an upper barrier c"))
    }
}

fn check_rates(p: f64, q: f64) -> Result<()> {
    if p >= 0.0 && q >= 0.0 && p.is_finite() && q.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("need finite p, q >= 0, got p={p}, q={q}")))
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::domain(msg()))
    }
}

/// The ten occupation formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formula {
    /// Exit below 0 before passage above `c`.
    ExitBelow,
    /// Passage above `c` before exit below 0.
    ExitAbove,
    /// Ruin with occupation of `(a, b)`.
    Ruin,
    /// Ruin with occupation of `(a, ∞)`.
    RuinHalfLine,
    /// Passage above `c` with occupation of `(a, b)`.
    PassageUp,
    /// Passage above `c` with occupation of `(−∞, b)`.
    PassageUpLowerHalfLine,
    /// Total occupation of `(a, b)` under positive drift.
    TotalInterval,
    /// Total occupation of `(−∞, b)` under positive drift.
    TotalLowerHalfLine,
    /// Total occupation of `(a, b)` under negative drift.
    TotalIntervalNegativeDrift,
    /// Total occupation of `(a, ∞)` under negative drift.
    TotalUpperHalfLine,
}

impl Formula {
    pub const ALL: [Formula; 10] = [
        Formula::ExitBelow,
        Formula::ExitAbove,
        Formula::Ruin,
        Formula::RuinHalfLine,
        Formula::PassageUp,
        Formula::PassageUpLowerHalfLine,
        Formula::TotalInterval,
        Formula::TotalLowerHalfLine,
        Formula::TotalIntervalNegativeDrift,
        Formula::TotalUpperHalfLine,
    ];

    /// Stable lowercase identifier.
    pub fn name(self) -> &'static str {
        match self {
            Formula::ExitBelow => "exit-below",
            Formula::ExitAbove => "exit-above",
            Formula::Ruin => "ruin",
            Formula::RuinHalfLine => "ruin-halfline",
            Formula::PassageUp => "passage-up",
            Formula::PassageUpLowerHalfLine => "passage-up-lower-halfline",
            Formula::TotalInterval => "total-interval",
            Formula::TotalLowerHalfLine => "total-lower-halfline",
            Formula::TotalIntervalNegativeDrift => "total-interval-negative-drift",
            Formula::TotalUpperHalfLine => "total-upper-halfline",
        }
    }

    pub fn from_name(s: &str) -> Option<Formula> {
        Formula::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Occupation over the whole path, with no stopping time.
    pub fn is_total(self) -> bool {
        matches!(
            self,
            Formula::TotalInterval
                | Formula::TotalLowerHalfLine
                | Formula::TotalIntervalNegativeDrift
                | Formula::TotalUpperHalfLine
        )
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Evaluates `formula` at `query`.
///
/// Half-line formulas ignore the unused end of the window; the
/// total-occupation formulas ignore `p` and `c` and require the drift sign
/// their shape is stated for.
pub fn evaluate(
    model: &LevyModel,
    formula: Formula,
    query: &OccupationQuery,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    let OccupationQuery { x, a, b, p, q, .. } = *query;
    let needs_c = || query.barrier();
    let drift_sign = |want_positive: bool| -> Result<()> {
        let d = model.mean_slope().unwrap_or(f64::NEG_INFINITY);
        if (d > ZERO_DRIFT) == want_positive && d.abs() > ZERO_DRIFT {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{formula} needs a {} mean slope, got {d}",
                if want_positive { "positive" } else { "negative" }
            )))
        }
    };
    match formula {
        Formula::ExitBelow => lt_exit_below_occupation(model, query, settings),
        Formula::ExitAbove => lt_exit_above_occupation(model, query, settings),
        Formula::Ruin => lt_ruin_occupation(model, query, settings),
        Formula::RuinHalfLine => lt_ruin_occupation_halfline(model, x, a, p, q, settings),
        Formula::PassageUp => lt_passage_up_occupation(model, x, a, b, needs_c()?, p, q, settings),
        Formula::PassageUpLowerHalfLine => {
            lt_passage_up_occupation_lower_halfline(model, x, b, needs_c()?, p, q, settings)
        }
        Formula::TotalInterval => {
            drift_sign(true)?;
            lt_total_occupation(model, x, Window::Interval { a, b }, q, settings)
        }
        Formula::TotalLowerHalfLine => {
            drift_sign(true)?;
            lt_total_occupation(model, x, Window::LowerHalfLine { b }, q, settings)
        }
        Formula::TotalIntervalNegativeDrift => {
            drift_sign(false)?;
            lt_total_occupation(model, x, Window::Interval { a, b }, q, settings)
        }
        Formula::TotalUpperHalfLine => {
            drift_sign(false)?;
            lt_total_occupation(model, x, Window::UpperHalfLine { a }, q, settings)
        }
    }
}

/// A formula value with assembly diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FormulaResult {
    pub value: f64,
    /// Which evaluation path produced the value.
    pub branch: &'static str,
    /// Largest relative disagreement between the two representations of any
    /// checked kernel used in the assembly.
    pub tol_achieved: f64,
}

/// Slack allowed outside `[0, 1]` before a result is treated as broken.
const RANGE_SLACK: f64 = 1e-7;

struct Assembly {
    worst: f64,
}

impl Assembly {
    fn new() -> Self {
        Assembly { worst: 0.0 }
    }

    fn take(&mut self, r: Result<(f64, f64)>) -> Result<f64> {
        let (v, err) = r?;
        let rel = if v != 0.0 { err / v.abs() } else { err };
        self.worst = self.worst.max(rel);
        Ok(v)
    }

    fn finish(self, value: f64, branch: &'static str) -> Result<FormulaResult> {
        finish(value, branch, self.worst)
    }
}

fn finish(value: f64, branch: &'static str, tol_achieved: f64) -> Result<FormulaResult> {
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&value) {
        return Err(Error::numeric(
            format!("{branch}: transform value {value} outside [0, 1]"),
            if value.is_finite() { (value - value.clamp(0.0, 1.0)).abs() } else { f64::INFINITY },
        ));
    }
    Ok(FormulaResult {
        value: value.clamp(0.0, 1.0),
        branch,
        tol_achieved,
    })
}

fn exact(value: f64, branch: &'static str) -> Result<FormulaResult> {
    finish(value, branch, 0.0)
}

/// `E_x[e^{-pτ_0⁻ − q∫1_{(a,b)}(X_s)ds}; τ_0⁻ < τ_c⁺]`.
pub fn lt_exit_below_occupation(
    model: &LevyModel,
    query: &OccupationQuery,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    let OccupationQuery { x, a, b, p, .. } = *query;
    query.check_rates()?;
    let c = query.barrier()?;
    two_sided_checks(x, a, b, c)?;
    if x == c {
        return exact(0.0, "started at upper barrier");
    }
    let q = if a == b { 0.0 } else { query.q };
    let ctx = KernelContext::new(model, p, q, a, c, settings)?;
    let mut asm = Assembly::new();
    let zx = asm.take(ctx.checked_deflated(KernelKind::Z, b, x))?;
    let wx = asm.take(ctx.checked_deflated(KernelKind::W, b, x))?;
    let zc = asm.take(ctx.checked_deflated(KernelKind::Z, b, c))?;
    let wc = asm.take(ctx.checked_deflated(KernelKind::W, b, c))?;
    let branch = if q == 0.0 { "no occupation penalty" } else { "deflated kernels" };
    asm.finish(zx - zc / wc * wx, branch)
}

/// `E_x[e^{-pτ_c⁺ − q∫1_{(a,b)}(X_s)ds}; τ_c⁺ < τ_0⁻]`.
pub fn lt_exit_above_occupation(
    model: &LevyModel,
    query: &OccupationQuery,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    let OccupationQuery { x, a, b, p, .. } = *query;
    query.check_rates()?;
    let c = query.barrier()?;
    two_sided_checks(x, a, b, c)?;
    if x == c {
        return exact(1.0, "started at upper barrier");
    }
    let q = if a == b { 0.0 } else { query.q };
    let ctx = KernelContext::new(model, p, q, a, c, settings)?;
    let mut asm = Assembly::new();
    let wx = asm.take(ctx.checked_deflated(KernelKind::W, b, x))?;
    let wc = asm.take(ctx.checked_deflated(KernelKind::W, b, c))?;
    let branch = if q == 0.0 { "no occupation penalty" } else { "deflated kernels" };
    asm.finish(wx / wc, branch)
}

fn two_sided_checks(x: f64, a: f64, b: f64, c: f64) -> Result<()> {
    require(0.0 <= a && a <= b && b <= c && c.is_finite(), || {
        format!("need 0 <= a <= b <= c < inf, got a={a}, b={b}, c={c}")
    })?;
    require((0.0..=c).contains(&x), || format!("need 0 <= x <= c, got x={x}, c={c}"))
}

/// `ψ'(0+) ∨ 0`, the limit of `p/Φ(p)` as `p → 0`.
fn drift_floor(model: &LevyModel) -> Result<f64> {
    match model.mean_slope() {
        Ok(s) => Ok(s.max(0.0)),
        Err(Error::Domain(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// `p/Φ(p)` with its limit at `p = 0`.
fn rate_over_phi(model: &LevyModel, p: f64) -> Result<f64> {
    if p == 0.0 {
        return drift_floor(model);
    }
    Ok(p / model.phi(p)?)
}

/// `E_x[e^{-pτ_0⁻ − q∫1_{(a,b)}(X_s)ds}; τ_0⁻ < ∞]`.
pub fn lt_ruin_occupation(
    model: &LevyModel,
    query: &OccupationQuery,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    let OccupationQuery { x, a, b, p, .. } = *query;
    query.check_rates()?;
    require(0.0 <= a && a <= b && b.is_finite(), || {
        format!("need 0 <= a <= b < inf, got a={a}, b={b}")
    })?;
    require(x >= 0.0 && x.is_finite(), || format!("need finite x >= 0, got {x}"))?;
    let q = if a == b { 0.0 } else { query.q };
    let ctx = KernelContext::new(model, p, q, a, x.max(b), settings)?;
    let phi = ctx.phi_p();
    let lead = rate_over_phi(model, p)?;
    let (num, den) = if q == 0.0 {
        (lead, 1.0)
    } else {
        let weighted = |kind: KernelKind| {
            ctx.scheme().integrate(a, b, &[], |y| {
                let k = match kind {
                    KernelKind::W => ctx.w_kernel(y),
                    _ => ctx.z_kernel(y),
                };
                (-phi * y).exp() * k
            })
        };
        (lead + q * weighted(KernelKind::Z), 1.0 + q * weighted(KernelKind::W))
    };
    let mut asm = Assembly::new();
    let zx = asm.take(ctx.checked_deflated(KernelKind::Z, b, x))?;
    let wx = asm.take(ctx.checked_deflated(KernelKind::W, b, x))?;
    let branch = match (p == 0.0, q == 0.0) {
        (true, true) => "zero discount limit, no occupation penalty",
        (true, false) => "zero discount limit",
        (false, true) => "no occupation penalty",
        (false, false) => "deflated kernels",
    };
    asm.finish(zx - num / den * wx, branch)
}

/// `E_x[e^{-pτ_0⁻ − q∫1_{(a,∞)}(X_s)ds}; τ_0⁻ < ∞]`.
pub fn lt_ruin_occupation_halfline(
    model: &LevyModel,
    x: f64,
    a: f64,
    p: f64,
    q: f64,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    check_rates(p, q)?;
    require(a >= 0.0 && a.is_finite(), || format!("need finite a >= 0, got {a}"))?;
    require(x >= 0.0 && x.is_finite(), || format!("need finite x >= 0, got {x}"))?;
    if q == 0.0 {
        let ctx = KernelContext::new(model, p, 0.0, a, x.max(1.0), settings)?;
        let lead = rate_over_phi(model, p)?;
        let w = ctx.w_p();
        return exact(w.z(x) - lead * w.w(x), "no occupation penalty");
    }
    let theta = model.phi(p + q)?;
    let phi_p = model.phi(p)?;
    let gap = theta - phi_p;
    let tail_len = 40.0 / gap;
    let ctx = KernelContext::new(model, p, q, a, x.max(a + tail_len), settings)?;
    let w = ctx.w_p();
    let scheme = ctx.scheme();
    // Numerator and denominator are tails of integrals whose totals are
    // (p+q)/Φ(p+q) and 1; the direct form loses digits once a is large.
    let z_weight = |y: f64| (-theta * y).exp() * w.z(y);
    let w_weight = |y: f64| w.w_tilted(y) * (-gap * y).exp();
    let (num, den, branch) = if gap * a < 3.0 {
        let num = (p + q) / theta - q * scheme.integrate(0.0, a, &[], z_weight);
        let den = 1.0 - q * scheme.integrate(0.0, a, &[], w_weight);
        (num, den, "head integrals")
    } else {
        let num = q * scheme.integrate(a, a + tail_len, &[], z_weight);
        let den = q * scheme.integrate(a, a + tail_len, &[], w_weight);
        (num, den, "tail integrals")
    };
    let mut asm = Assembly::new();
    let zx = asm.take(ctx.checked_z(x))?;
    let wx = asm.take(ctx.checked_w(x))?;
    asm.finish(zx - num / den * wx, branch)
}

/// `E_x[e^{-pτ_c⁺ − q∫1_{(a,b)}(X_s)ds}; τ_c⁺ < ∞]`, no lower barrier.
#[allow(clippy::too_many_arguments)]
pub fn lt_passage_up_occupation(
    model: &LevyModel,
    x: f64,
    a: f64,
    b: f64,
    c: f64,
    p: f64,
    q: f64,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    check_rates(p, q)?;
    require(a.is_finite() && a <= b && b <= c && c.is_finite(), || {
        format!("need a <= b <= c, all finite, got a={a}, b={b}, c={c}")
    })?;
    require(x <= c && x.is_finite(), || format!("need finite x <= c, got x={x}, c={c}"))?;
    if x == c {
        return exact(1.0, "started at upper barrier");
    }
    let q = if a == b { 0.0 } else { q };
    if q == 0.0 {
        let phi = model.phi(p)?;
        return exact((phi * (x - c)).exp(), "no occupation penalty");
    }
    let ctx = KernelContext::new(model, p, q, a, c - a, settings)?;
    let mut asm = Assembly::new();
    let hx = asm.take(ctx.checked_deflated(KernelKind::H, b, x))?;
    let hc = asm.take(ctx.checked_deflated(KernelKind::H, b, c))?;
    asm.finish(hx / hc, "deflated kernels")
}

/// `E_x[e^{-pτ_c⁺ − q∫1_{(−∞,b)}(X_s)ds}; τ_c⁺ < ∞]`.
pub fn lt_passage_up_occupation_lower_halfline(
    model: &LevyModel,
    x: f64,
    b: f64,
    c: f64,
    p: f64,
    q: f64,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    check_rates(p, q)?;
    require(b <= c && b.is_finite() && c.is_finite(), || {
        format!("need finite b <= c, got b={b}, c={c}")
    })?;
    require(x <= c && x.is_finite(), || format!("need finite x <= c, got x={x}, c={c}"))?;
    if x == c {
        return exact(1.0, "started at upper barrier");
    }
    if q == 0.0 {
        let phi = model.phi(p)?;
        return exact((phi * (x - c)).exp(), "no occupation penalty");
    }
    let h = HKernel::new(model, p + q, -q, (c - b).max(1.0), settings)?;
    let value = h.value(x - b) / h.value(c - b);
    exact(value, "negative-penalty kernel ratio")
}

/// Occupation window for total-occupation transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Interval { a: f64, b: f64 },
    LowerHalfLine { b: f64 },
    UpperHalfLine { a: f64 },
}

/// Drift below this magnitude counts as zero.
const ZERO_DRIFT: f64 = 1e-13;

/// `E_x[e^{-q∫₀^∞ 1_W(X_s)ds}]` for a window `W`.
///
/// Finite occupation requires the process to drift away from the window:
/// upwards for `(a, b)` and `(−∞, b)`, downwards for `(a, b)` and `(a, ∞)`.
/// With zero drift the occupation of any window is infinite, so the value is
/// 0 for `q > 0` and 1 for `q = 0`; a drift towards an unbounded window is
/// rejected.
pub fn lt_total_occupation(
    model: &LevyModel,
    x: f64,
    window: Window,
    q: f64,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    check_rates(0.0, q)?;
    require(x.is_finite(), || format!("need finite x, got {x}"))?;
    match window {
        Window::Interval { a, b } => require(a.is_finite() && b.is_finite() && a <= b, || {
            format!("need finite a <= b, got a={a}, b={b}")
        })?,
        Window::LowerHalfLine { b } => require(b.is_finite(), || format!("need finite b, got {b}"))?,
        Window::UpperHalfLine { a } => require(a.is_finite(), || format!("need finite a, got {a}"))?,
    }
    let drift = match model.mean_slope() {
        Ok(s) => s,
        Err(Error::Domain(_)) => f64::NEG_INFINITY,
        Err(e) => return Err(e),
    };
    if drift.abs() <= ZERO_DRIFT {
        return exact(if q == 0.0 { 1.0 } else { 0.0 }, "zero drift, infinite occupation");
    }
    if q == 0.0 {
        return exact(1.0, "no occupation penalty");
    }
    if let Window::Interval { a, b } = window {
        if a == b {
            return exact(1.0, "empty window");
        }
    }
    match (window, drift > 0.0) {
        (Window::Interval { a, b }, true) => total_interval_up(model, x, a, b, q, drift, settings),
        (Window::LowerHalfLine { b }, true) => {
            let phi = model.phi(q)?;
            let h = HKernel::new(model, q, -q, (x - b).max(1.0), settings)?;
            exact(drift * phi / q * h.value(x - b), "positive drift, lower half-line")
        }
        (Window::Interval { a, b }, false) => total_interval_down(model, x, a, b, q, settings),
        (Window::UpperHalfLine { a }, false) => {
            let ctx = KernelContext::new(model, 0.0, q, a, (x - a).max(1.0), settings)?;
            let phi_q = ctx.phi_pq();
            let ratio = (phi_q - ctx.phi_p()) / phi_q;
            let value = ctx.w_pq().z(x - a) - ratio * ctx.h_kernel(x - a);
            exact(value, "negative drift, upper half-line")
        }
        (Window::LowerHalfLine { .. }, false) => Err(Error::domain(
            "the occupation of a lower half-line is infinite a.s. when the process drifts to -inf",
        )),
        (Window::UpperHalfLine { .. }, true) => Err(Error::domain(
            "the occupation of an upper half-line is infinite a.s. when the process drifts to +inf",
        )),
    }
}

fn total_interval_up(
    model: &LevyModel,
    x: f64,
    a: f64,
    b: f64,
    q: f64,
    drift: f64,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    // With p = 0 the Z kernel based at a is Z^{(q)}(· − a), so the deflated
    // Z kernel is the numerator.
    let ctx = KernelContext::new(model, 0.0, q, a, (x - a).max(b - a), settings)?;
    let zq = ctx.w_pq();
    let mut asm = Assembly::new();
    let num = asm.take(ctx.checked_deflated(KernelKind::Z, b, x))?;
    let den = 1.0 + q / drift * ctx.scheme().integrate(0.0, b - a, &[], |y| zq.z(y));
    asm.finish(num / den, "positive drift, interval")
}

fn total_interval_down(
    model: &LevyModel,
    x: f64,
    a: f64,
    b: f64,
    q: f64,
    settings: &NumericSettings,
) -> Result<FormulaResult> {
    let ctx = KernelContext::new(model, 0.0, q, a, (x - a).max(b - a), settings)?;
    let phi0 = ctx.phi_p();
    let zq = ctx.w_pq();
    let slope = model.laplace_exponent_derivative(phi0, 1)?;
    let scheme = ctx.scheme();
    let num = q * scheme.integrate(0.0, b - a, &[], |y| (-phi0 * y).exp() * zq.z(y));
    let den = slope + q * scheme.integrate(0.0, b - a, &[], |y| (-phi0 * y).exp() * ctx.h_kernel(y));
    let mut asm = Assembly::new();
    let zx = asm.take(ctx.checked_deflated(KernelKind::Z, b, x))?;
    let hx = asm.take(ctx.checked_deflated(KernelKind::H, b, x))?;
    asm.finish(zx - num / den * hx, "negative drift, interval")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluctuation::{exit_above, exit_below};
    use crate::scale::{scale_w, scale_z};
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
    fn theorems_reduce_to_exit_identities_without_penalty() {
        for m in [bm(), cl()] {
            let qy = OccupationQuery::two_sided(1.0, 0.5, 1.5, 2.0, 0.3, 0.0);
            let below = lt_exit_below_occupation(&m, &qy, &s()).unwrap();
            let above = lt_exit_above_occupation(&m, &qy, &s()).unwrap();
            assert_abs_diff_eq!(below.value, exit_below(&m, 0.3, 1.0, 2.0).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(above.value, exit_above(&m, 0.3, 1.0, 2.0).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn theorem_boundary_values() {
        let qy = OccupationQuery::two_sided(0.0, 0.5, 1.5, 2.0, 0.1, 0.4);
        assert_eq!(lt_exit_below_occupation(&bm(), &qy, &s()).unwrap().value, 1.0);
        let qy = OccupationQuery::two_sided(2.0, 0.5, 1.5, 2.0, 0.1, 0.4);
        assert_eq!(lt_exit_above_occupation(&bm(), &qy, &s()).unwrap().value, 1.0);
        let qy = OccupationQuery::two_sided(1.0, 0.7, 0.7, 2.0, 0.1, 5.0);
        let v = lt_exit_above_occupation(&cl(), &qy, &s()).unwrap().value;
        assert_abs_diff_eq!(v, exit_above(&cl(), 0.1, 1.0, 2.0).unwrap(), epsilon = 1e-14);
        let bad = OccupationQuery::two_sided(1.0, 1.5, 0.5, 2.0, 0.1, 0.4);
        assert!(lt_exit_above_occupation(&bm(), &bad, &s()).is_err());
    }

    #[test]
    fn complementarity_without_discount() {
        for m in [bm(), cl()] {
            let qy = OccupationQuery::two_sided(1.2, 0.5, 1.5, 2.5, 0.0, 0.0);
            let sum = lt_exit_below_occupation(&m, &qy, &s()).unwrap().value
                + lt_exit_above_occupation(&m, &qy, &s()).unwrap().value;
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ruin_compact_display() {
        // p = 0, a = 0, x = b: Z^{(q)}(b) − ratio·W^{(q)}(b) with plain integrals.
        for m in [bm(), cl()] {
            let (b, q) = (1.3, 0.6);
            let r = lt_ruin_occupation(&m, &OccupationQuery::lower_only(b, 0.0, b, 0.0, q), &s()).unwrap();
            let drift = m.mean_slope().unwrap().max(0.0);
            let phi0 = m.phi(0.0).unwrap();
            let scheme = s().scheme(0.05);
            let iz = scheme.integrate(0.0, b, &[], |y| (-phi0 * y).exp() * scale_z(&m, q, y).unwrap());
            let iw = scheme.integrate(0.0, b, &[], |y| (-phi0 * y).exp() * scale_w(&m, q, y).unwrap());
            let expect = scale_z(&m, q, b).unwrap() - (drift + q * iz) / (1.0 + q * iw) * scale_w(&m, q, b).unwrap();
            assert_abs_diff_eq!(r.value, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn ruin_without_penalty_is_classical() {
        for m in [bm(), cl()] {
            let r = lt_ruin_occupation(&m, &OccupationQuery::lower_only(0.8, 0.2, 1.0, 0.0, 0.0), &s()).unwrap();
            let d = m.mean_slope().unwrap();
            assert_abs_diff_eq!(r.value, 1.0 - d * scale_w(&m, 0.0, 0.8).unwrap(), epsilon = 1e-13);
        }
    }

    #[test]
    fn ruin_approaches_large_barrier_limit() {
        let m = cl();
        let base = OccupationQuery::lower_only(0.8, 0.3, 1.2, 0.2, 0.7);
        let limit = lt_ruin_occupation(&m, &base, &s()).unwrap().value;
        let mut prev = f64::INFINITY;
        for c in [5.0, 10.0, 20.0] {
            let v = lt_exit_below_occupation(&m, &OccupationQuery { c: Some(c), ..base }, &s()).unwrap().value;
            let gap = (v - limit).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn halfline_ruin_reductions() {
        for m in [bm(), cl()] {
            // q = 0: Z^{(p)} − (p/Φ(p)) W^{(p)}.
            let r = lt_ruin_occupation_halfline(&m, 0.9, 0.4, 0.5, 0.0, &s()).unwrap();
            let phi = m.phi(0.5).unwrap();
            let expect = scale_z(&m, 0.5, 0.9).unwrap() - 0.5 / phi * scale_w(&m, 0.5, 0.9).unwrap();
            assert_abs_diff_eq!(r.value, expect, epsilon = 1e-13);
            // a = 0: the whole half-line is penalized, so p + q acts as a discount.
            let r = lt_ruin_occupation_halfline(&m, 0.9, 0.0, 0.2, 0.3, &s()).unwrap();
            let phi = m.phi(0.5).unwrap();
            let expect = scale_z(&m, 0.5, 0.9).unwrap() - 0.5 / phi * scale_w(&m, 0.5, 0.9).unwrap();
            assert_abs_diff_eq!(r.value, expect, epsilon = 1e-10);
        }
        let r = lt_ruin_occupation_halfline(&bm(), 0.0, 0.4, 0.1, 0.3, &s()).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn halfline_ruin_head_and_tail_forms_agree() {
        // Straddle the switch between the two forms in a.
        let m = cl();
        let gap = m.phi(0.8).unwrap() - m.phi(0.5).unwrap();
        let a0 = 3.0 / gap;
        let lo = lt_ruin_occupation_halfline(&m, a0 + 0.5, a0 * (1.0 - 1e-9), 0.5, 0.3, &s()).unwrap();
        let hi = lt_ruin_occupation_halfline(&m, a0 + 0.5, a0 * (1.0 + 1e-9), 0.5, 0.3, &s()).unwrap();
        assert_ne!(lo.branch, hi.branch);
        assert_abs_diff_eq!(lo.value, hi.value, epsilon = 1e-9);
    }

    #[test]
    fn passage_up_reductions() {
        for m in [bm(), cl()] {
            let phi = m.phi(0.3).unwrap();
            let v = lt_passage_up_occupation(&m, 0.0, -0.5, 0.5, 1.5, 0.3, 0.0, &s()).unwrap();
            assert_abs_diff_eq!(v.value, (-1.5 * phi).exp(), epsilon = 1e-15);
            let v = lt_passage_up_occupation(&m, 0.0, -0.5, 0.5, 1.5, 0.0, 0.0, &s()).unwrap();
            assert_eq!(v.value, 1.0);
            let v = lt_passage_up_occupation_lower_halfline(&m, 1.5, 0.0, 1.5, 0.2, 0.7, &s()).unwrap();
            assert_eq!(v.value, 1.0);
            let v = lt_passage_up_occupation_lower_halfline(&m, 0.5, 0.0, 1.5, 0.3, 0.0, &s()).unwrap();
            assert_abs_diff_eq!(v.value, (-phi).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn passage_up_window_below_start_matches_lower_halfline() {
        // A window reaching far below the start behaves like (−∞, b).
        for m in [bm(), cl()] {
            let half = lt_passage_up_occupation_lower_halfline(&m, 0.5, 1.0, 2.0, 0.1, 0.4, &s()).unwrap();
            let wide = lt_passage_up_occupation(&m, 0.5, -40.0, 1.0, 2.0, 0.1, 0.4, &s()).unwrap();
            assert_abs_diff_eq!(half.value, wide.value, epsilon = 1e-8);
        }
    }

    #[test]
    fn total_occupation_branches() {
        let up = bm();
        let down = LevyModel::brownian_drift(-1.0, 2f64.sqrt()).unwrap();
        let flat = LevyModel::brownian_drift(0.0, 1.0).unwrap();
        let iv = Window::Interval { a: 0.0, b: 1.0 };
        assert_eq!(lt_total_occupation(&up, 0.3, iv, 0.0, &s()).unwrap().value, 1.0);
        assert_eq!(lt_total_occupation(&flat, 0.3, iv, 0.5, &s()).unwrap().value, 0.0);
        assert!(lt_total_occupation(&down, 0.3, Window::LowerHalfLine { b: 1.0 }, 0.5, &s()).is_err());
        assert!(lt_total_occupation(&up, 0.3, Window::UpperHalfLine { a: 1.0 }, 0.5, &s()).is_err());
        let far = lt_total_occupation(&up, 1.0 + 10.0 / up.phi(0.5).unwrap() * 2.0, Window::LowerHalfLine { b: 1.0 }, 0.5, &s()).unwrap();
        assert!((far.value - 1.0).abs() < 1e-4);
        for x in [-1.0, 0.3, 2.0] {
            let v = lt_total_occupation(&down, x, iv, 0.5, &s()).unwrap().value;
            assert!(v > 0.0 && v < 1.0);
            let v = lt_total_occupation(&down, x, Window::UpperHalfLine { a: 0.0 }, 0.5, &s()).unwrap().value;
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn total_occupation_of_interval_reaches_half_line_limits() {
        // Widening (a, b) downward approaches (−∞, b); widening upward approaches (a, ∞).
        let up = cl();
        let half = lt_total_occupation(&up, 0.5, Window::LowerHalfLine { b: 1.0 }, 0.4, &s()).unwrap().value;
        let wide = lt_total_occupation(&up, 0.5, Window::Interval { a: -60.0, b: 1.0 }, 0.4, &s()).unwrap().value;
        assert_abs_diff_eq!(half, wide, epsilon = 1e-7);
        let down = LevyModel::jump_diffusion(-0.5, 0.8, 0.5, 0.6).unwrap();
        let half = lt_total_occupation(&down, 0.5, Window::UpperHalfLine { a: 0.0 }, 0.4, &s()).unwrap().value;
        let wide = lt_total_occupation(&down, 0.5, Window::Interval { a: 0.0, b: 25.0 }, 0.4, &s()).unwrap().value;
        assert_abs_diff_eq!(half, wide, epsilon = 1e-7);
    }

    #[test]
    fn formula_names_round_trip() {
        for f in Formula::ALL {
            assert_eq!(Formula::from_name(f.name()), Some(f));
        }
    }
}
