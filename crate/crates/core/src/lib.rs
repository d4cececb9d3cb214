//! Occupation-time Laplace transforms for spectrally negative Lévy processes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod levy_model;
pub mod quadrature;
pub mod scale;
pub mod kernels;
pub mod fluctuation;
pub mod occupation;
pub mod applications;
pub mod mc;
pub mod verification;

pub use error::{Error, Result};
pub use levy_model::{ClassTag, IntegrabilityFlags, JumpMeasure, LevyModel, TabulatedDensity, VariationClass};
