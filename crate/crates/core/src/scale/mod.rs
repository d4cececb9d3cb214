//! q-scale functions `W^{(q)}`, `Z^{(q)}` and their derivatives.

pub mod closed_form;
pub mod grid;
pub mod inversion;

pub use closed_form::ExpPoly;
pub use grid::{build_scale_grid, ScaleGrid, DEFAULT_GRID_NODES};
pub use inversion::{invert_laplace, Inversion, InversionSettings, LaplaceTransformHandle};

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;

#[derive(Debug, Clone)]
enum Repr {
    Closed(ExpPoly),
    Grid(ScaleGrid),
}

/// A scale function ready for repeated evaluation: the exact exponential sum
/// for rational models, a tabulated grid otherwise.
#[derive(Debug, Clone)]
pub struct ScaleFunction {
    q: f64,
    repr: Repr,
    model: LevyModel,
    settings: InversionSettings,
}

impl ScaleFunction {
    /// Closed form when available, else a grid of `nodes` points on `[0, x_max]`.
    pub fn new(
        model: &LevyModel,
        q: f64,
        x_max: f64,
        nodes: usize,
        settings: &InversionSettings,
    ) -> Result<Self> {
        let repr = if model.has_closed_form() {
            Repr::Closed(ExpPoly::new(model, q)?)
        } else {
            Repr::Grid(build_scale_grid(model, q, x_max, nodes, settings)?)
        };
        Ok(ScaleFunction {
            q,
            repr,
            model: model.clone(),
            settings: *settings,
        })
    }

    /// Closed form only; `Unsupported` otherwise.
    pub fn closed(model: &LevyModel, q: f64) -> Result<Self> {
        Ok(ScaleFunction {
            q,
            repr: Repr::Closed(ExpPoly::new(model, q)?),
            model: model.clone(),
            settings: InversionSettings::default(),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn phi(&self) -> f64 {
        match &self.repr {
            Repr::Closed(c) => c.phi(),
            Repr::Grid(g) => g.phi(),
        }
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.repr, Repr::Closed(_))
    }

    /// Grid step for tabulated functions.
    pub fn grid_step(&self) -> Option<f64> {
        match &self.repr {
            Repr::Closed(_) => None,
            Repr::Grid(g) => Some(g.step()),
        }
    }

    /// Right end of the tabulated range; infinite for closed forms.
    pub fn domain_max(&self) -> f64 {
        match &self.repr {
            Repr::Closed(_) => f64::INFINITY,
            Repr::Grid(g) => g.x_max(),
        }
    }

    /// Length over which the function varies appreciably; used to size
    /// quadrature panels.
    pub fn length_scale(&self) -> f64 {
        match &self.repr {
            Repr::Closed(c) => {
                let k = c.rate_scale();
                if k > 0.0 {
                    1.0 / k
                } else {
                    f64::INFINITY
                }
            }
            Repr::Grid(g) => g.step(),
        }
    }

    pub fn w(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Closed(c) => c.w(x),
            Repr::Grid(g) => g.w(x),
        }
    }

    pub fn w_tilted(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Closed(c) => c.w_tilted(x),
            Repr::Grid(g) => g.w_tilted(x),
        }
    }

    /// `∫₀ˣ W^{(q)}`.
    pub fn w_integral(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Closed(c) => c.w_integral(x),
            Repr::Grid(g) => g.w_integral(x),
        }
    }

    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 || self.q == 0.0 {
            1.0
        } else {
            1.0 + self.q * self.w_integral(x)
        }
    }

    pub fn w_prime(&self, x: f64) -> Result<f64> {
        match &self.repr {
            Repr::Closed(c) => {
                if !(x > 0.0) {
                    return Err(Error::domain(format!("W' needs x > 0, got {x}")));
                }
                Ok(c.w_prime(x))
            }
            Repr::Grid(_) => numeric_w_prime(&self.model, self.q, x, &self.settings),
        }
    }
}

fn check_q(q: f64) -> Result<()> {
    if q >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("scale functions need q >= 0, got {q}")))
    }
}

/// `W^{(q)}(x)`: zero for `x < 0`, the exact initial value at 0.
pub fn scale_w(model: &LevyModel, q: f64, x: f64) -> Result<f64> {
    check_q(q)?;
    if x < 0.0 {
        return Ok(0.0);
    }
    if x == 0.0 {
        return Ok(model.scale_initial_value());
    }
    if model.has_closed_form() {
        return Ok(ExpPoly::new(model, q)?.w(x));
    }
    let handle = LaplaceTransformHandle::scale(model, q)?;
    Ok(invert_laplace(&handle, x, &InversionSettings::default())?.value)
}

/// `Z^{(q)}(x) = 1 + q ∫₀ˣ W^{(q)}`.
pub fn scale_z(model: &LevyModel, q: f64, x: f64) -> Result<f64> {
    check_q(q)?;
    if x <= 0.0 || q == 0.0 {
        return Ok(1.0);
    }
    if model.has_closed_form() {
        return Ok(ExpPoly::new(model, q)?.z(x));
    }
    let handle = LaplaceTransformHandle::scale_integral(model, q)?;
    Ok(1.0 + q * invert_laplace(&handle, x, &InversionSettings::default())?.value)
}

/// `W^{(q)'}(x)` for `x > 0`.
pub fn scale_w_prime(model: &LevyModel, q: f64, x: f64) -> Result<f64> {
    check_q(q)?;
    if !(x > 0.0) {
        return Err(Error::domain(format!("W' needs x > 0, got {x}")));
    }
    if model.has_closed_form() {
        return Ok(ExpPoly::new(model, q)?.w_prime(x));
    }
    numeric_w_prime(model, q, x, &InversionSettings::default())
}

fn numeric_w_prime(model: &LevyModel, q: f64, x: f64, settings: &InversionSettings) -> Result<f64> {
    if model.sigma() == 0.0 {
        return Err(Error::Unsupported(
            "W' of a numeric model without Gaussian part may not exist".into(),
        ));
    }
    if !(x > 0.0) {
        return Err(Error::domain(format!("W' needs x > 0, got {x}")));
    }
    let handle = LaplaceTransformHandle::scale_derivative(model, q)?;
    Ok(invert_laplace(&handle, x, settings)?.value)
}

/// `W_{Φ(q)}(x) = e^{-Φ(q)x} W^{(q)}(x)` for `x ≥ 0`.
pub fn scale_w_tilted(model: &LevyModel, q: f64, x: f64) -> Result<f64> {
    check_q(q)?;
    if x < 0.0 {
        return Err(Error::domain(format!("tilted W needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(model.scale_initial_value());
    }
    if model.has_closed_form() {
        return Ok(ExpPoly::new(model, q)?.w_tilted(x));
    }
    let handle = LaplaceTransformHandle::scale(model, q)?;
    Ok(invert_laplace(&handle, x, &InversionSettings::default())?.shifted_value)
}
