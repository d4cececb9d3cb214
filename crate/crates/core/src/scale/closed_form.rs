//! Scale functions of models whose Laplace exponent is rational.
//!
//! For Brownian motion with drift and for exponential jumps,
//! `1/(ψ(λ) − q) = N(λ)/P(λ)` with `N` of degree at most one and `P` a
//! polynomial of degree at most three whose roots are real. Partial fractions
//! then give `W^{(q)}` as a finite sum of exponentials.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy_model::{JumpMeasure, LevyModel};
use crate::quadrature::GaussLegendre;
use std::sync::OnceLock;

/// Roots closer than this are combined through a divided difference.
const PAIR_GAP: f64 = 1e-3;

fn pair_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// `(e^z − 1)/z`.
pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z * (0.5 + z / 6.0)
    } else {
        z.exp_m1() / z
    }
}

/// Derivative of [`phi1`].
fn phi1_prime(z: f64) -> f64 {
    if z.abs() < 0.5 {
        // Σ (j+1) z^j / (j+2)!
        let mut fact = 2.0;
        let mut pow = 1.0;
        let mut acc = 0.0;
        for j in 0..16 {
            acc += (j as f64 + 1.0) * pow / fact;
            pow *= z;
            fact *= j as f64 + 3.0;
        }
        acc
    } else {
        (z.exp() * (z - 1.0) + 1.0) / (z * z)
    }
}

#[derive(Debug, Clone)]
enum Term {
    Simple { coef: f64, rate: f64 },
    /// Two nearly equal roots `lo ≤ hi`; the remaining roots are `others`.
    Pair { lo: f64, hi: f64, others: Vec<f64> },
}

/// `W^{(q)}` as `Σ N(θᵢ)/P'(θᵢ) e^{θᵢ x}` over the roots of `P`.
#[derive(Debug, Clone)]
pub struct ExpPoly {
    lead: f64,
    /// `N(λ) = β + λ` when present, else `N ≡ 1`.
    numer_shift: Option<f64>,
    roots: Vec<f64>,
    terms: Vec<Term>,
    q: f64,
    phi: f64,
    initial: f64,
}

impl ExpPoly {
    /// Builds the closed form for `q ≥ 0`. Fails with `Unsupported` for models
    /// without a rational Laplace exponent.
    pub fn new(model: &LevyModel, q: f64) -> Result<Self> {
        if !(q >= 0.0) {
            return Err(Error::domain(format!("scale functions need q >= 0, got {q}")));
        }
        if !model.has_closed_form() {
            return Err(Error::Unsupported(
                "closed-form scale functions need a Brownian or exponential-jump model".into(),
            ));
        }
        let s2 = 0.5 * model.sigma() * model.sigma();
        let d = model.linear_coefficient()?;
        // Ascending coefficients of P.
        let (coeffs, numer_shift) = match model.jumps() {
            JumpMeasure::None => {
                if s2 > 0.0 {
                    (vec![-q, d, s2], None)
                } else {
                    (vec![-q, d], None)
                }
            }
            JumpMeasure::CompoundPoissonExp { rate, mean } => {
                let beta = 1.0 / mean;
                // (s2 λ² + dλ − q)(β + λ) − rate·λ
                let c = vec![-q * beta, d * beta - q - rate, s2 * beta + d, s2];
                let c = if s2 > 0.0 { c } else { c[..3].to_vec() };
                (c, Some(beta))
            }
            JumpMeasure::Tabulated(_) => {
                return Err(Error::Unsupported(
                    "tabulated jumps have no closed-form scale function".into(),
                ))
            }
        };
        let phi = model.phi(q)?;
        let roots = real_roots(&coeffs, phi)?;
        let lead = *coeffs.last().expect("nonempty");
        let terms = group_terms(lead, numer_shift, &roots)?;
        Ok(ExpPoly {
            lead,
            numer_shift,
            roots,
            terms,
            q,
            phi,
            initial: model.scale_initial_value(),
        })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Roots of `P` in decreasing order; the first is `Φ(q)`.
    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    /// Largest root magnitude; sets the length scale of the exponentials.
    pub fn rate_scale(&self) -> f64 {
        self.roots.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    fn numer(&self, lam: f64) -> f64 {
        self.numer_shift.map_or(1.0, |b| b + lam)
    }

    /// `h(λ) = N(λ) / (lead · Π (λ − θₖ))` and its derivative.
    fn h_and_prime(&self, lam: f64, others: &[f64]) -> (f64, f64) {
        let mut den = self.lead;
        let mut log_deriv = 0.0;
        for &t in others {
            den *= lam - t;
            log_deriv -= 1.0 / (lam - t);
        }
        let n = self.numer(lam);
        let h = n / den;
        let n_prime = if self.numer_shift.is_some() { 1.0 } else { 0.0 };
        (h, n_prime / den + h * log_deriv)
    }

    /// Integrates `g(λ)` over the segment `[lo, hi]` averaged, i.e. the
    /// Hermite–Genocchi form of a first divided difference.
    fn segment_average<F: Fn(f64) -> f64>(lo: f64, hi: f64, g: F) -> f64 {
        pair_rule().integrate(0.0, 1.0, |t| g(lo + t * (hi - lo)))
    }

    /// `W^{(q)}(x)` with the exact initial value at 0 and zero for `x < 0`.
    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return self.initial;
        }
        self.tilted_raw(x, 0.0)
    }

    /// `e^{-Φ(q)x} W^{(q)}(x)`.
    pub fn w_tilted(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return self.initial;
        }
        self.tilted_raw(x, self.phi)
    }

    fn tilted_raw(&self, x: f64, shift: f64) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            match term {
                Term::Simple { coef, rate } => acc += coef * ((rate - shift) * x).exp(),
                Term::Pair { lo, hi, others } => {
                    acc += Self::segment_average(*lo, *hi, |lam| {
                        let (h, hp) = self.h_and_prime(lam, others);
                        (hp + x * h) * ((lam - shift) * x).exp()
                    })
                }
            }
        }
        acc
    }

    /// `∫₀ˣ W^{(q)}(y) dy`.
    pub fn w_integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for term in &self.terms {
            match term {
                Term::Simple { coef, rate } => acc += coef * x * phi1(rate * x),
                Term::Pair { lo, hi, others } => {
                    acc += Self::segment_average(*lo, *hi, |lam| {
                        let (h, hp) = self.h_and_prime(lam, others);
                        hp * x * phi1(lam * x) + h * x * x * phi1_prime(lam * x)
                    })
                }
            }
        }
        acc
    }

    /// `Z^{(q)}(x) = 1 + q ∫₀ˣ W^{(q)}`.
    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 || self.q == 0.0 {
            1.0
        } else {
            1.0 + self.q * self.w_integral(x)
        }
    }

    /// `W^{(q)'}(x)` for `x > 0`.
    pub fn w_prime(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            match term {
                Term::Simple { coef, rate } => acc += coef * rate * (rate * x).exp(),
                Term::Pair { lo, hi, others } => {
                    acc += Self::segment_average(*lo, *hi, |lam| {
                        let (h, hp) = self.h_and_prime(lam, others);
                        (h * (1.0 + lam * x) + lam * hp) * (lam * x).exp()
                    })
                }
            }
        }
        acc
    }

    /// Laplace transform `∫ e^{-sx} W(x) dx` of the closed form.
    ///
    /// Summed from the partial fractions when all roots are simple, so it
    /// checks the coefficients rather than restating `N/P`.
    pub fn laplace(&self, s: Complex64) -> Complex64 {
        if self.terms.iter().any(|t| matches!(t, Term::Pair { .. })) {
            let mut den = Complex64::new(self.lead, 0.0);
            for &t in &self.roots {
                den *= s - t;
            }
            let n = self.numer_shift.map_or(Complex64::new(1.0, 0.0), |beta| s + beta);
            return n / den;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            if let Term::Simple { coef, rate } = term {
                acc += *coef / (s - rate);
            }
        }
        acc
    }
}

/// Real roots of the ascending polynomial `coeffs`, given its largest root `top`.
fn real_roots(coeffs: &[f64], top: f64) -> Result<Vec<f64>> {
    let degree = coeffs.len() - 1;
    let eval = |lam: f64| -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &c in coeffs.iter().rev() {
            dp = dp * lam + p;
            p = p * lam + c;
        }
        (p, dp)
    };
    // Synthetic division by (λ − top).
    let mut quotient = vec![0.0; degree];
    let mut carry = 0.0;
    for k in (1..=degree).rev() {
        carry = coeffs[k] + carry * top;
        quotient[k - 1] = carry;
    }
    let mut roots = vec![top];
    match degree {
        1 => {}
        2 => roots.push(-quotient[0] / quotient[1]),
        3 => {
            let (c, b, a) = (quotient[0], quotient[1], quotient[2]);
            let disc = b * b - 4.0 * a * c;
            let scale = b * b + (4.0 * a * c).abs();
            if disc < -1e-12 * scale {
                return Err(Error::Unsupported(
                    "scale-function exponent has complex roots".into(),
                ));
            }
            let sq = disc.max(0.0).sqrt();
            let r = -0.5 * (b + b.signum() * sq);
            if r == 0.0 {
                roots.push(0.0);
                roots.push(0.0);
            } else {
                roots.push(r / a);
                roots.push(c / r);
            }
        }
        _ => unreachable!("polynomial degree is between 1 and 3"),
    }
    // Newton polish against the undeflated polynomial.
    for r in roots.iter_mut().skip(1) {
        for _ in 0..3 {
            let (p, dp) = eval(*r);
            if dp == 0.0 {
                break;
            }
            let next = *r - p / dp;
            if eval(next).0.abs() < p.abs() {
                *r = next;
            } else {
                break;
            }
        }
    }
    roots.sort_by(|a, b| b.partial_cmp(a).expect("finite roots"));
    Ok(roots)
}

fn group_terms(lead: f64, numer_shift: Option<f64>, roots: &[f64]) -> Result<Vec<Term>> {
    let numer = |lam: f64| numer_shift.map_or(1.0, |b| b + lam);
    let mut terms = Vec::new();
    let mut i = 0;
    while i < roots.len() {
        if i + 1 < roots.len() && roots[i] - roots[i + 1] < PAIR_GAP {
            if i + 2 < roots.len() && roots[i + 1] - roots[i + 2] < PAIR_GAP {
                return Err(Error::Unsupported("triple root in scale-function exponent".into()));
            }
            let others = roots
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i && *k != i + 1)
                .map(|(_, r)| *r)
                .collect();
            terms.push(Term::Pair {
                lo: roots[i + 1],
                hi: roots[i],
                others,
            });
            i += 2;
        } else {
            let r = roots[i];
            let mut den = lead;
            for (k, t) in roots.iter().enumerate() {
                if k != i {
                    den *= r - t;
                }
            }
            terms.push(Term::Simple {
                coef: numer(r) / den,
                rate: r,
            });
            i += 1;
        }
    }
    Ok(terms)
}
