//! Monte Carlo oracle: path simulation and estimators for every functional
//! the closed forms evaluate.
//!
//! Each path draws from its own ChaCha8 streams indexed by the path id, and
//! partial sums are reduced in a fixed chunk order, so estimates do not
//! depend on the number of worker threads.

mod estimators;
mod path;

pub use estimators::{
    adjustment_coefficient, estimate_corridor, estimate_deficit, estimate_exit,
    estimate_lemma, estimate_occupation_lt, estimate_omega, occupation_rule,
};
pub use path::{simulate_path, Exit, Marker, PathModel, PathOutcome, PathSkeleton, StopRule};

use rayon::prelude::*;

use crate::error::{Error, Result};
use path::{run_path, Draws};

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Largest Gaussian step.
    pub dt: f64,
    /// Number of paths; rounded up to an even count with antithetic pairs.
    pub n_paths: usize,
    /// Hard time horizon.
    pub horizon: f64,
    pub seed: u64,
    /// Pair every path with its reflected partner.
    pub antithetic: bool,
    /// Detect barrier crossings between steps by the Brownian bridge law.
    pub bridge_correction: bool,
    /// Bound on the bias from stopping rules that cut paths short.
    pub tail_eps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            n_paths: 100_000,
            horizon: 1_000.0,
            seed: 7,
            antithetic: true,
            bridge_correction: true,
            tail_eps: 1e-4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths < 2 {
            return Err(Error::domain("at least two paths are needed for an error estimate"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.tail_eps > 0.0 && self.tail_eps < 1.0) {
            return Err(Error::domain(format!("tail_eps must lie in (0, 1), got {}", self.tail_eps)));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub dt: f64,
    /// Fraction of paths stopped by the horizon.
    pub truncated_fraction: f64,
}

impl MonteCarloEstimate {
    /// `(value − mean)/SE`; infinite when the error is zero and the values differ.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = value - self.mean;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    }
}

/// The Gaussian and jump streams of a path.
pub(crate) fn streams(config: &SimConfig, path_id: u64, flip: bool) -> (Draws, Draws) {
    (
        Draws::new(config.seed, 2 * path_id, flip),
        Draws::new(config.seed, 2 * path_id + 1, flip),
    )
}

const CHUNK: usize = 512;

/// Runs `n_paths` paths from `x` and averages the `N` payoffs of each.
///
/// With antithetic sampling the unit of averaging is the pair, which keeps
/// the standard error honest under the induced correlation.
pub fn estimate_many<const N: usize, F>(
    model: &crate::LevyModel,
    config: &SimConfig,
    rule: &StopRule,
    x: f64,
    payoff: F,
) -> Result<[MonteCarloEstimate; N]>
where
    F: Fn(&PathOutcome) -> [f64; N] + Sync,
{
    config.validate()?;
    let pm = PathModel::from_model(model)?;
    let units = if config.antithetic {
        config.n_paths.div_ceil(2)
    } else {
        config.n_paths
    };
    let per_unit = if config.antithetic { 2 } else { 1 };
    let chunks = units.div_ceil(CHUNK);
    let partials: Vec<([f64; N], [f64; N], usize)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut sum = [0.0; N];
            let mut sq = [0.0; N];
            let mut horizon_hits = 0;
            for unit in (k * CHUNK)..((k + 1) * CHUNK).min(units) {
                let mut acc = [0.0; N];
                for flip in 0..per_unit {
                    let (mut g, mut j) = streams(config, unit as u64, flip == 1);
                    let out = run_path(&pm, config, rule, x, &mut g, &mut j, None);
                    if out.exit == Exit::Horizon {
                        horizon_hits += 1;
                    }
                    for (a, v) in acc.iter_mut().zip(payoff(&out)) {
                        *a += v;
                    }
                }
                for i in 0..N {
                    let v = acc[i] / per_unit as f64;
                    sum[i] += v;
                    sq[i] += v * v;
                }
            }
            (sum, sq, horizon_hits)
        })
        .collect();
    let mut sum = [0.0; N];
    let mut sq = [0.0; N];
    let mut hits = 0;
    for (s, q, h) in partials {
        for i in 0..N {
            sum[i] += s[i];
            sq[i] += q[i];
        }
        hits += h;
    }
    let n = units as f64;
    Ok(std::array::from_fn(|i| {
        let mean = sum[i] / n;
        let var = ((sq[i] / n - mean * mean) * n / (n - 1.0)).max(0.0);
        MonteCarloEstimate {
            mean,
            std_error: (var / n).sqrt(),
            n_paths: units * per_unit,
            dt: config.dt,
            truncated_fraction: hits as f64 / (units * per_unit) as f64,
        }
    }))
}

/// Single-payoff form of [`estimate_many`].
pub fn estimate<F>(
    model: &crate::LevyModel,
    config: &SimConfig,
    rule: &StopRule,
    x: f64,
    payoff: F,
) -> Result<MonteCarloEstimate>
where
    F: Fn(&PathOutcome) -> f64 + Sync,
{
    let [e] = estimate_many(model, config, rule, x, |o| [payoff(o)])?;
    Ok(e)
}
