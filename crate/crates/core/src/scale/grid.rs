//! Tabulated scale functions on a uniform grid.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::quadrature::GaussLegendre;
use crate::scale::closed_form::{phi1, ExpPoly};
use crate::scale::inversion::{invert_laplace, InversionSettings, LaplaceTransformHandle};
use std::sync::OnceLock;

/// Default node count.
pub const DEFAULT_GRID_NODES: usize = 4097;

fn cell_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// `W^{(q)}` and `Z^{(q)}` on `n` equally spaced nodes of `[0, x_max]`.
///
/// Between nodes the tilted values `e^{-Φ(q)x} W^{(q)}(x)` are interpolated
/// by a monotone cubic. Past `x_max` the tilted value is held at its last
/// node, which is accurate once the tilt has converged to its limit.
#[derive(Debug, Clone)]
pub struct ScaleGrid {
    q: f64,
    phi: f64,
    x_max: f64,
    h: f64,
    values_w: Vec<f64>,
    values_z: Vec<f64>,
    /// `∫₀^{xᵢ} W^{(q)}` at the nodes.
    cumulative: Vec<f64>,
    tilted: Vec<f64>,
    slopes: Vec<f64>,
    model: LevyModel,
}

/// Builds the grid, inverting the transform at every node for numeric
/// models and evaluating the closed form otherwise.
pub fn build_scale_grid(
    model: &LevyModel,
    q: f64,
    x_max: f64,
    n: usize,
    settings: &InversionSettings,
) -> Result<ScaleGrid> {
    if !(q >= 0.0) {
        return Err(Error::domain(format!("scale grid needs q >= 0, got {q}")));
    }
    if !(x_max > 0.0) || !x_max.is_finite() {
        return Err(Error::domain(format!("scale grid needs x_max > 0, got {x_max}")));
    }
    if n < 129 || !(n - 1).is_power_of_two() {
        return Err(Error::domain(format!(
            "scale grid needs n >= 129 with n - 1 a power of two, got {n}"
        )));
    }
    let h = x_max / (n - 1) as f64;
    let phi = model.phi(q)?;
    let initial = model.scale_initial_value();
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();

    let closed = if model.has_closed_form() {
        Some(ExpPoly::new(model, q)?)
    } else {
        None
    };
    let tilted: Vec<f64> = match &closed {
        Some(cf) => xs.iter().map(|&x| cf.w_tilted(x)).collect(),
        None => {
            let handle = LaplaceTransformHandle::scale(model, q)?;
            let mut rest: Vec<f64> = xs[1..]
                .par_iter()
                .map(|&x| invert_laplace(&handle, x, settings).map(|r| r.shifted_value))
                .collect::<Result<Vec<f64>>>()?;
            let mut all = Vec::with_capacity(n);
            all.push(initial);
            all.append(&mut rest);
            all
        }
    };
    let slopes = monotone_slopes(&tilted, h);
    let values_w: Vec<f64> = xs
        .iter()
        .zip(&tilted)
        .map(|(&x, &t)| if x == 0.0 { initial } else { t * (phi * x).exp() })
        .collect();

    let mut grid = ScaleGrid {
        q,
        phi,
        x_max,
        h,
        values_w,
        values_z: Vec::new(),
        cumulative: Vec::new(),
        tilted,
        slopes,
        model: model.clone(),
    };
    grid.cumulative = match &closed {
        Some(cf) => xs.iter().map(|&x| cf.w_integral(x)).collect(),
        None => {
            let mut cum = Vec::with_capacity(n);
            let mut acc = 0.0;
            cum.push(acc);
            for i in 1..n {
                acc += grid.cell_integral(i - 1, xs[i - 1], xs[i]);
                cum.push(acc);
            }
            cum
        }
    };
    grid.values_z = grid.cumulative.iter().map(|c| 1.0 + q * c).collect();
    Ok(grid)
}

/// Slopes for a monotone cubic Hermite interpolant: fourth-order finite
/// differences, then the Fritsch–Carlson limiter on intervals where they
/// would break monotonicity.
fn monotone_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    for i in 2..n - 2 {
        m[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h);
    }
    m[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h);
    m[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / (12.0 * h);
    m[n - 1] = (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4]
        + 3.0 * y[n - 5])
        / (12.0 * h);
    m[n - 2] = (3.0 * y[n - 1] + 10.0 * y[n - 2] - 18.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5])
        / (12.0 * h);
    for k in 0..n - 1 {
        let delta = (y[k + 1] - y[k]) / h;
        if delta == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        if m[k] * delta < 0.0 {
            m[k] = 0.0;
        }
        if m[k + 1] * delta < 0.0 {
            m[k + 1] = 0.0;
        }
        let (alpha, beta) = (m[k] / delta, m[k + 1] / delta);
        let r2 = alpha * alpha + beta * beta;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            m[k] = tau * alpha * delta;
            m[k + 1] = tau * beta * delta;
        }
    }
    m
}

impl ScaleGrid {
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.values_w.len()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn values_w(&self) -> &[f64] {
        &self.values_w
    }

    pub fn values_z(&self) -> &[f64] {
        &self.values_z
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n()).map(move |i| i as f64 * self.h)
    }

    fn cell(&self, x: f64) -> usize {
        ((x / self.h) as usize).min(self.n() - 2)
    }

    fn hermite(&self, i: usize, x: f64) -> f64 {
        let t = (x - i as f64 * self.h) / self.h;
        let (y0, y1) = (self.tilted[i], self.tilted[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.h, self.slopes[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    /// `e^{-Φ(q)x} W^{(q)}(x)`.
    pub fn w_tilted(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if x >= self.x_max {
            self.tilted[self.n() - 1]
        } else {
            self.hermite(self.cell(x), x)
        }
    }

    /// `W^{(q)}(x)`.
    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if x == 0.0 {
            self.values_w[0]
        } else {
            self.w_tilted(x) * (self.phi * x).exp()
        }
    }

    fn cell_integral(&self, i: usize, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        cell_rule().integrate(lo, hi, |y| self.hermite(i, y) * (self.phi * y).exp())
    }

    /// `∫₀ˣ W^{(q)}(y) dy` from the interpolant.
    pub fn w_integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let inside = x.min(self.x_max);
        let i = self.cell(inside);
        let base = self.cumulative[i] + self.cell_integral(i, i as f64 * self.h, inside);
        if x > self.x_max {
            let last = self.tilted[self.n() - 1];
            let span = x - self.x_max;
            base + last * (self.phi * self.x_max).exp() * span * phi1(self.phi * span)
        } else {
            base
        }
    }

    /// `Z^{(q)}(x)`.
    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 || self.q == 0.0 {
            1.0
        } else {
            1.0 + self.q * self.w_integral(x)
        }
    }

    /// Writes `x,W,Z` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,W,Z")?;
        for (i, x) in self.nodes().enumerate() {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e}",
                x, self.values_w[i], self.values_z[i]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn brownian_grid_matches_closed_form() {
        let m = LevyModel::brownian_drift(1.0, 2f64.sqrt()).unwrap();
        let g = build_scale_grid(&m, 0.0, 4.0, 4097, &InversionSettings::default()).unwrap();
        for (i, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(g.values_w()[i], 1.0 - (-x).exp(), epsilon = 1e-10);
        }
        assert_eq!(g.values_w()[0], 0.0);
        assert_eq!(g.values_z()[0], 1.0);
    }

    #[test]
    fn initial_value_is_exact() {
        let m = LevyModel::cramer_lundberg(1.5, 1.0, 1.0).unwrap();
        let g = build_scale_grid(&m, 0.5, 3.0, 129, &InversionSettings::default()).unwrap();
        assert_eq!(g.values_w()[0], 1.0 / 1.5);
        let n = m.as_general_numeric();
        let g = build_scale_grid(&n, 0.5, 3.0, 129, &InversionSettings::default()).unwrap();
        assert_eq!(g.values_w()[0], 1.0 / 1.5);
    }

    #[test]
    fn rejects_bad_node_counts() {
        let m = LevyModel::brownian_drift(1.0, 1.0).unwrap();
        let s = InversionSettings::default();
        assert!(build_scale_grid(&m, 0.0, 1.0, 100, &s).is_err());
        assert!(build_scale_grid(&m, 0.0, 1.0, 130, &s).is_err());
        assert!(build_scale_grid(&m, 0.0, 1.0, 65, &s).is_err());
    }

    #[test]
    fn numeric_grid_matches_closed_form() {
        let m = LevyModel::jump_diffusion(0.4, 0.6, 1.2, 0.5).unwrap();
        let exact = ExpPoly::new(&m, 0.5).unwrap();
        let g = build_scale_grid(&m.as_general_numeric(), 0.5, 4.0, 513, &InversionSettings::default())
            .unwrap();
        for (i, x) in g.nodes().enumerate().step_by(16) {
            assert!((g.values_w()[i] - exact.w(x)).abs() < 1e-8 * exact.w(x).max(1.0), "x={x}");
            assert!((g.values_z()[i] - exact.z(x)).abs() < 1e-7 * exact.z(x), "x={x}");
        }
        for &x in &[0.0137, 0.77, 2.3391] {
            assert!((g.w(x) - exact.w(x)).abs() < 1e-7 * exact.w(x).max(1.0));
        }
    }

    #[test]
    fn interpolation_error_shrinks_with_refinement() {
        let m = LevyModel::brownian_drift(0.3, 0.8).unwrap();
        let exact = ExpPoly::new(&m, 1.0).unwrap();
        let s = InversionSettings::default();
        let err = |n: usize| {
            let g = build_scale_grid(&m, 1.0, 3.0, n, &s).unwrap();
            (0..997)
                .map(|k| {
                    let x = 3.0 * (k as f64 + 0.37) / 997.0;
                    (g.w(x) - exact.w(x)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(129), err(257));
        assert!(e2 <= e1 / 4.0, "{e1} {e2}");
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let m = LevyModel::brownian_drift(1.0, 1.0).unwrap();
        let g = build_scale_grid(&m, 0.2, 1.0, 129, &InversionSettings::default()).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 130);
        assert!(text.starts_with("x,W,Z\n"));
    }
}
