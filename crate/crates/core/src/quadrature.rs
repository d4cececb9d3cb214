//! Quadrature rules shared by the scale-function engine and the kernels.
//!
//! Integrands in this crate are piecewise smooth: scale functions are
//! analytic away from the origin, but `W(x - y)` switches on at `y = x` and
//! jumps there for bounded-variation processes. Every composite rule therefore
//! takes an explicit list of kink points and places panel boundaries on them.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the three-term Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 20-point rule used by the default composite scheme.
pub fn gauss_legendre_20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Which composite rule to apply on each panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureRule {
    /// Romberg extrapolation of the trapezoid rule, refined dyadically.
    TrapezoidRomberg,
    /// Fixed-order Gauss–Legendre on every panel.
    GaussLegendreComposite { order: usize },
}

/// Composite quadrature with kink-aligned panels.
#[derive(Debug, Clone)]
pub struct QuadratureScheme {
    pub rule: QuadratureRule,
    /// Longest panel allowed inside a smooth segment.
    pub max_panel: f64,
    /// Target relative accuracy.
    pub tol: f64,
    gl: Option<GaussLegendre>,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        QuadratureScheme::gauss_legendre(20, 1.0, 1e-9)
    }
}

impl QuadratureScheme {
    pub fn gauss_legendre(order: usize, max_panel: f64, tol: f64) -> Self {
        let gl = if order == 20 {
            gauss_legendre_20().clone()
        } else {
            GaussLegendre::new(order)
        };
        QuadratureScheme {
            rule: QuadratureRule::GaussLegendreComposite { order },
            max_panel,
            tol: tol.max(100.0 * f64::EPSILON),
            gl: Some(gl),
        }
    }

    pub fn romberg(max_panel: f64, tol: f64) -> Self {
        QuadratureScheme {
            rule: QuadratureRule::TrapezoidRomberg,
            max_panel,
            tol: tol.max(100.0 * f64::EPSILON),
            gl: None,
        }
    }

    /// Copy of this scheme with a different panel cap.
    pub fn with_max_panel(&self, max_panel: f64) -> Self {
        let mut s = self.clone();
        s.max_panel = max_panel;
        s
    }

    /// Integrates `f` over `[lo, hi]`, splitting at every kink inside the range.
    /// Returns 0 when `hi <= lo`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, kinks: &[f64], mut f: F) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        let mut cuts: Vec<f64> = Vec::with_capacity(kinks.len() + 2);
        cuts.push(lo);
        cuts.extend(kinks.iter().copied().filter(|k| *k > lo && *k < hi));
        cuts.push(hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));

        let mut total = 0.0;
        for seg in cuts.windows(2) {
            let (s0, s1) = (seg[0], seg[1]);
            let panels = ((s1 - s0) / self.max_panel).ceil().max(1.0) as usize;
            let h = (s1 - s0) / panels as f64;
            for k in 0..panels {
                let p0 = s0 + h * k as f64;
                let p1 = if k + 1 == panels { s1 } else { p0 + h };
                total += self.panel(p0, p1, &mut f);
            }
        }
        total
    }

    fn panel<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, f: &mut F) -> f64 {
        match self.rule {
            QuadratureRule::GaussLegendreComposite { .. } => {
                self.gl.as_ref().expect("rule initialised").integrate(lo, hi, f)
            }
            QuadratureRule::TrapezoidRomberg => romberg(lo, hi, self.tol, f),
        }
    }
}

fn romberg<F: FnMut(f64) -> f64>(lo: f64, hi: f64, tol: f64, f: &mut F) -> f64 {
    const MAX_LEVEL: usize = 20;
    let h0 = hi - lo;
    // Endpoints are nudged inward so one-sided limits are used at jumps.
    let nudge = 4.0 * f64::EPSILON * (lo.abs().max(hi.abs()).max(h0));
    let mut prev = vec![0.5 * h0 * (f(lo + nudge) + f(hi - nudge))];
    let mut h = h0;
    let mut points = 1usize;
    for level in 1..MAX_LEVEL {
        h *= 0.5;
        let mut mid = 0.0;
        for k in 0..points {
            mid += f(lo + h * (2 * k + 1) as f64);
        }
        points *= 2;
        let mut row = Vec::with_capacity(level + 1);
        row.push(0.5 * prev[0] + h * mid);
        let mut factor = 1.0;
        for j in 1..=level {
            factor *= 4.0;
            let r = row[j - 1] + (row[j - 1] - prev[j - 1]) / (factor - 1.0);
            row.push(r);
        }
        let best = row[level];
        let last = prev[level - 1];
        if level >= 3 && (best - last).abs() <= tol * best.abs().max(1e-300) {
            return best;
        }
        prev = row;
    }
    prev[prev.len() - 1]
}

/// Values that adaptive Gauss–Kronrod can integrate: reals and complex numbers.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

const GK_XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WGK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let dx = h * GK_XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron = kron + s * GK_WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * GK_WG[j / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    (kron, (kron - gauss).magnitude())
}

struct Interval<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Interval<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T> Eq for Interval<T> {}
impl<T> PartialOrd for Interval<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Interval<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive 15-point Gauss–Kronrod quadrature.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate drops below `max(abs_tol, rel_tol * |I|)`. Returns the value and
/// the final error estimate, or a numeric failure carrying the residual.
pub fn gauss_kronrod<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<(T, f64)> {
    if a == b {
        return Ok((T::zero(), 0.0));
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value: v, err: e });
    let mut total = v;
    let mut err = e;
    for _ in 0..max_subdivisions {
        if err <= abs_tol.max(rel_tol * total.magnitude()) {
            return Ok((total, err));
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&mut f, worst.a, m);
        let (v2, e2) = gk15(&mut f, m, worst.b);
        total = total - worst.value + v1 + v2;
        err = err - worst.err + e1 + e2;
        heap.push(Interval { a: worst.a, b: m, value: v1, err: e1 });
        heap.push(Interval { a: m, b: worst.b, value: v2, err: e2 });
    }
    // Recompute the sums from scratch to shed accumulated cancellation.
    let mut total = T::zero();
    let mut err = 0.0;
    for iv in heap.iter() {
        total = total + iv.value;
        err += iv.err;
    }
    if err <= abs_tol.max(rel_tol * total.magnitude()) {
        Ok((total, err))
    } else {
        Err(Error::numeric("adaptive Gauss-Kronrod quadrature", err))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(5);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-10);
        let w: f64 = GaussLegendre::new(20).weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn composite_handles_kinks() {
        let s = QuadratureScheme::default();
        // |x - 0.3| on [0, 1] has a kink at 0.3.
        let v = s.integrate(0.0, 1.0, &[0.3], |x| (x - 0.3).abs());
        let exact = 0.5 * 0.3 * 0.3 + 0.5 * 0.7 * 0.7;
        assert!((v - exact).abs() < 1e-14);
        // A jump at 0.5 is integrated exactly when aligned.
        let v = s.integrate(0.0, 1.0, &[0.5], |x| if x < 0.5 { 0.0 } else { 2.0 });
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn romberg_matches_exponential() {
        let s = QuadratureScheme::romberg(0.5, 1e-12);
        let v = s.integrate(0.0, 3.0, &[], |x| (-x).exp());
        assert!((v - (1.0 - (-3.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn reversed_range_is_zero() {
        let s = QuadratureScheme::default();
        assert_eq!(s.integrate(2.0, 1.0, &[], |_| 1.0), 0.0);
    }

    #[test]
    fn kronrod_real_and_complex() {
        let (v, _) = gauss_kronrod(|x: f64| x.sqrt(), 0.0, 1.0, 1e-13, 1e-13, 500).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        let s = Complex64::new(1.0, 5.0);
        let (v, _) = gauss_kronrod(|x: f64| (-s * x).exp(), 0.0, 10.0, 1e-13, 1e-13, 500).unwrap();
        let exact = (Complex64::new(1.0, 0.0) - (-s * 10.0).exp()) / s;
        assert!((v - exact).norm() < 1e-12);
    }

    #[test]
    fn kronrod_reports_failure() {
        let r = gauss_kronrod(|x: f64| (1.0 / x).sin() / x, 1e-9, 1.0, 1e-14, 1e-14, 5);
        assert!(matches!(r, Err(Error::NumericFailure { .. })));
    }
}
