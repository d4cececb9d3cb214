//! Estimators pairing each closed-form functional with a path functional.

use crate::applications::{CorridorSpec, OmegaSpec};
use crate::error::{Error, Result};
use crate::fluctuation::{DeficitPayoff, LemmaFunction};
use crate::kernels::NumericSettings;
use crate::levy_model::LevyModel;
use crate::occupation::{Formula, OccupationQuery};

use super::{estimate, estimate_many, Exit, MonteCarloEstimate, PathOutcome, SimConfig, StopRule};

/// The positive root `θ` of `ψ(−θ) = 0` under positive drift, so that
/// `P_y(τ_0⁻ < ∞) ≤ e^{-θy}`.
pub fn adjustment_coefficient(model: &LevyModel) -> Result<f64> {
    let drift = model.mean_slope()?;
    if !(drift > 0.0) {
        return Err(Error::domain(format!(
            "adjustment coefficient needs a positive mean slope, got {drift}"
        )));
    }
    let g = |t: f64| model.laplace_exponent_extended(-t);
    let mut lo = 0.0;
    let mut hi = 1e-3;
    // Walk right until ψ(−θ) turns positive; if the exponent stops existing
    // first, close in on the edge of its domain from the left.
    loop {
        match g(hi) {
            Some(v) if v > 0.0 => break,
            Some(_) => {
                lo = hi;
                hi *= 2.0;
                if hi > 1e12 {
                    return Err(Error::numeric("adjustment coefficient: no sign change", hi));
                }
            }
            None => {
                let edge = hi;
                let mut found = None;
                for k in 1..60 {
                    let t = edge - (edge - lo) * 0.5f64.powi(k);
                    if let Some(v) = g(t) {
                        if v > 0.0 {
                            found = Some(t);
                            break;
                        }
                    }
                }
                match found {
                    Some(t) => {
                        hi = t;
                        break;
                    }
                    None => {
                        return Err(Error::Unsupported(
                            "no exponential bound on the probability of ruin for this model".into(),
                        ))
                    }
                }
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match g(mid) {
            Some(v) if v > 0.0 => hi = mid,
            _ => lo = mid,
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(lo)
}

/// Distance past a level beyond which an exponential bound with rate
/// `rate` falls below `eps`.
fn tail_distance(rate: f64, eps: f64) -> f64 {
    (1.0 / eps).ln() / rate
}

fn weight(o: &PathOutcome, p: f64, q: f64) -> f64 {
    (-p * o.time - q * o.occupation).exp()
}

/// Per-path payoff of a simulated outcome.
pub type Payoff = Box<dyn Fn(&PathOutcome) -> f64 + Send + Sync>;

/// Stop rule and the payoff of a path for an occupation formula.
///
/// Half-line windows ignore the unused end of `query`'s window, and the
/// total-occupation formulas ignore `p` and `c`.
pub fn occupation_rule(
    model: &LevyModel,
    formula: Formula,
    query: &OccupationQuery,
    config: &SimConfig,
) -> Result<(StopRule, Payoff)> {
    let OccupationQuery { x, a, b, p, q, .. } = *query;
    let eps = config.tail_eps;
    let c = || query.c.ok_or_else(|| Error::domain("this formula needs an upper barrier c"));
    let fade = if p > 0.0 || q > 0.0 { Some(eps) } else { None };
    let lundberg = |level: f64| -> Result<f64> {
        Ok(level + tail_distance(adjustment_coefficient(model)?, eps))
    };
    let positive_drift = model.mean_slope().map(|d| d > 0.0).unwrap_or(false);

    let window = match formula {
        Formula::RuinHalfLine | Formula::TotalUpperHalfLine => (a, f64::INFINITY),
        Formula::PassageUpLowerHalfLine | Formula::TotalLowerHalfLine => (f64::NEG_INFINITY, b),
        _ => (a, b),
    };
    let mut rule = StopRule::new(window);
    rule.discount = p;
    rule.penalty = q;
    rule.fade_below = fade;

    let payoff: Box<dyn Fn(&PathOutcome) -> f64 + Send + Sync> = match formula {
        Formula::ExitBelow | Formula::ExitAbove => {
            rule.lower = Some(0.0);
            rule.upper = Some(c()?);
            let target = if formula == Formula::ExitBelow { Exit::Lower } else { Exit::Upper };
            Box::new(move |o| if o.exit == target { weight(o, p, q) } else { 0.0 })
        }
        Formula::Ruin | Formula::RuinHalfLine => {
            rule.lower = Some(0.0);
            // Ruin from above the escape level has probability below eps.
            if positive_drift {
                rule.escape_above = Some(lundberg(0.0)?);
            }
            Box::new(move |o| if o.exit == Exit::Lower { weight(o, p, q) } else { 0.0 })
        }
        Formula::PassageUp | Formula::PassageUpLowerHalfLine => {
            let c = c()?;
            rule.upper = Some(c);
            let phi = model.phi(p)?;
            if phi > 0.0 {
                rule.escape_below = Some(c - tail_distance(phi, eps));
            }
            Box::new(move |o| if o.exit == Exit::Upper { weight(o, p, q) } else { 0.0 })
        }
        Formula::TotalInterval | Formula::TotalLowerHalfLine => {
            if !positive_drift {
                return Err(Error::domain("this total-occupation shape needs a positive mean slope"));
            }
            rule.discount = 0.0;
            rule.escape_above = Some(lundberg(b.max(x))?);
            Box::new(move |o| match o.exit {
                Exit::Faded => 0.0,
                _ => weight(o, 0.0, q),
            })
        }
        Formula::TotalIntervalNegativeDrift | Formula::TotalUpperHalfLine => {
            let phi0 = model.phi(0.0)?;
            if !(phi0 > 0.0) {
                return Err(Error::domain("this total-occupation shape needs a negative mean slope"));
            }
            rule.discount = 0.0;
            rule.return_to = Some((a, phi0));
            Box::new(move |o| match o.exit {
                Exit::Faded => 0.0,
                _ => weight(o, 0.0, q),
            })
        }
    };
    Ok((rule, payoff))
}

/// Estimates the occupation transform of `formula` at `query`.
pub fn estimate_occupation_lt(
    model: &LevyModel,
    formula: Formula,
    query: &OccupationQuery,
    config: &SimConfig,
) -> Result<MonteCarloEstimate> {
    let (rule, payoff) = occupation_rule(model, formula, query, config)?;
    estimate(model, config, &rule, query.x, payoff)
}

/// `[P-transform of passage above c first, of exit below 0 first]`.
pub fn estimate_exit(
    model: &LevyModel,
    p: f64,
    x: f64,
    c: f64,
    config: &SimConfig,
) -> Result<[MonteCarloEstimate; 2]> {
    let mut rule = StopRule::new((0.0, 0.0));
    rule.lower = Some(0.0);
    rule.upper = Some(c);
    rule.discount = p;
    if p > 0.0 {
        rule.fade_below = Some(config.tail_eps);
    }
    estimate_many(model, config, &rule, x, |o| {
        let w = (-p * o.time).exp();
        match o.exit {
            Exit::Upper => [w, 0.0],
            Exit::Lower => [0.0, w],
            _ => [0.0, 0.0],
        }
    })
}

/// `E_x[e^{-qτ_a⁻} f(X_{τ_a⁻}); τ_a⁻ < τ_b⁺]`.
pub fn estimate_deficit(
    model: &LevyModel,
    q: f64,
    a: f64,
    b: f64,
    x: f64,
    payoff: &DeficitPayoff,
    config: &SimConfig,
) -> Result<MonteCarloEstimate> {
    let mut rule = StopRule::new((a, b));
    rule.lower = Some(a);
    rule.upper = Some(b);
    rule.discount = q;
    if q > 0.0 {
        rule.fade_below = Some(config.tail_eps);
    }
    estimate(model, config, &rule, x, |o| {
        if o.exit == Exit::Lower {
            (-q * o.time).exp() * payoff.eval(o.position)
        } else {
            0.0
        }
    })
}

/// `E_x[e^{-pτ_a⁻} v(X_{τ_a⁻}); τ_a⁻ < τ_b⁺]` for the perturbation test
/// functions built on `W^{(q)}`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_lemma(
    model: &LevyModel,
    p: f64,
    q: f64,
    a: f64,
    b: f64,
    x: f64,
    v_kind: LemmaFunction,
    config: &SimConfig,
) -> Result<MonteCarloEstimate> {
    let wq = NumericSettings::default().scale(model, q, b)?;
    let mut rule = StopRule::new((a, b));
    rule.lower = Some(a);
    rule.upper = Some(b);
    rule.discount = p;
    if p > 0.0 {
        rule.fade_below = Some(config.tail_eps);
    }
    estimate(model, config, &rule, x, |o| {
        if o.exit != Exit::Lower {
            return 0.0;
        }
        let y = o.position;
        let v = match v_kind {
            LemmaFunction::Wq => wq.w(y),
            LemmaFunction::Zq => wq.z(y),
            LemmaFunction::WqShifted(s) => wq.w(y - s),
        };
        (-p * o.time).exp() * v
    })
}

/// `E_x[e^{-pτ} ∫₀^τ 1_{(a,b)}(X_s)ds]` with `τ` the exit time from `[0, c]`.
pub fn estimate_corridor(
    model: &LevyModel,
    spec: &CorridorSpec,
    config: &SimConfig,
) -> Result<MonteCarloEstimate> {
    spec.validate()?;
    let CorridorSpec { a, b, c, p, x } = *spec;
    let mut rule = StopRule::new((a, b));
    rule.lower = Some(0.0);
    rule.upper = Some(c);
    estimate(model, config, &rule, x, |o| match o.exit {
        Exit::Lower | Exit::Upper => (-p * o.time).exp() * o.occupation,
        _ => 0.0,
    })
}

/// `[survive, bankrupt_below, bankrupt_inside]` by simulating the
/// accumulated hazard against a unit exponential threshold.
pub fn estimate_omega(
    model: &LevyModel,
    spec: &OmegaSpec,
    config: &SimConfig,
) -> Result<[MonteCarloEstimate; 3]> {
    let OmegaSpec { b, q, x } = *spec;
    if !(b > 0.0 && q > 0.0) {
        return Err(Error::domain(format!("omega model needs b, q > 0, got b={b}, q={q}")));
    }
    let mut rule = StopRule::new((-b, 0.0));
    rule.lower = Some(-b);
    rule.hazard = Some(q);
    rule.escape_above = Some(tail_distance(adjustment_coefficient(model)?, config.tail_eps));
    estimate_many(model, config, &rule, x, |o| match o.exit {
        Exit::Lower => [0.0, 1.0, 0.0],
        Exit::Hazard => [0.0, 0.0, 1.0],
        _ => [1.0, 0.0, 0.0],
    })
}
