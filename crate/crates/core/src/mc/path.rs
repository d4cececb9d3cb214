//! Jump-adapted Euler simulation of finite-activity spectrally negative
//! Lévy paths with barrier, occupation and hazard bookkeeping.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::levy_model::{JumpMeasure, LevyModel};

use super::SimConfig;

/// The process as the simulator sees it: `X_t = x + d·t + σB_t − Σ jumps`,
/// with jumps arriving at `rate` with exponential sizes of mean `jump_mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathModel {
    pub drift: f64,
    pub sigma: f64,
    pub jump_rate: f64,
    pub jump_mean: f64,
}

impl PathModel {
    /// Only compound Poisson jumps with exponential sizes are simulated.
    pub fn from_model(model: &LevyModel) -> Result<Self> {
        let (jump_rate, jump_mean) = match model.jumps() {
            JumpMeasure::None => (0.0, 1.0),
            JumpMeasure::CompoundPoissonExp { rate, mean } => (*rate, *mean),
            JumpMeasure::Tabulated(_) => {
                return Err(Error::Unsupported(
                    "path simulation covers Brownian motion with exponential jumps only".into(),
                ))
            }
        };
        Ok(PathModel {
            drift: model.linear_coefficient()?,
            sigma: model.sigma(),
            jump_rate,
            jump_mean,
        })
    }
}

/// Random draws for one path; the antithetic partner reflects every draw.
pub(crate) struct Draws {
    rng: ChaCha8Rng,
    flip: bool,
}

impl Draws {
    pub(crate) fn new(seed: u64, stream: u64, flip: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Draws { rng, flip }
    }

    pub(crate) fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.flip {
            -z
        } else {
            z
        }
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        let u: f64 = self.rng.sample(Open01);
        if self.flip {
            1.0 - u
        } else {
            u
        }
    }

    pub(crate) fn exp1(&mut self) -> f64 {
        -self.uniform().ln()
    }
}

/// How a path is stopped and what it accumulates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Kill on passage below this level.
    pub lower: Option<f64>,
    /// Kill on passage above this level.
    pub upper: Option<f64>,
    /// Occupation window `(lo, hi)`; either end may be infinite.
    pub window: (f64, f64),
    /// Time discount `p` used for fading.
    pub discount: f64,
    /// Occupation penalty `q` used for fading.
    pub penalty: f64,
    /// Stop once `e^{-p·t − q·occupation}` falls below this weight.
    pub fade_below: Option<f64>,
    /// Stop once the path reaches this level, beyond which the remaining
    /// contribution is bounded separately.
    pub escape_above: Option<f64>,
    /// Stop once the path is below this level.
    pub escape_below: Option<f64>,
    /// `(a, Φ(0))`: whenever the path is below `a` it either returns to `a`,
    /// with probability `e^{-Φ(0)(a − x)}`, and restarts there, or never
    /// returns. Valid only for functionals that ignore elapsed time.
    pub return_to: Option<(f64, f64)>,
    /// Stop once the occupation exceeds an exponential threshold of this
    /// rate.
    pub hazard: Option<f64>,
}

impl StopRule {
    pub fn new(window: (f64, f64)) -> Self {
        StopRule {
            lower: None,
            upper: None,
            window,
            discount: 0.0,
            penalty: 0.0,
            fade_below: None,
            escape_above: None,
            escape_below: None,
            return_to: None,
            hazard: None,
        }
    }
}

/// Why a path stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    /// Passed below the lower barrier.
    Lower,
    /// Passed above the upper barrier.
    Upper,
    /// Reached the escape level above.
    EscapedUp,
    /// Reached the escape level below, or will never return to the window.
    EscapedDown,
    /// Weight fell below the fade threshold.
    Faded,
    /// Hazard threshold exceeded.
    Hazard,
    /// Horizon reached.
    Horizon,
}

/// Summary of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub exit: Exit,
    /// Stopping time; meaningless after a return jump.
    pub time: f64,
    pub occupation: f64,
    /// Position at the stopping time; equals the barrier after creeping.
    pub position: f64,
}

/// Event markers of a recorded path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marker {
    Jump { time: f64, size: f64 },
    Stop { time: f64, exit: Exit },
}

/// Recorded path: positions after each step and each jump, plus markers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathSkeleton {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub markers: Vec<Marker>,
}

/// Length of `[min(u, v), max(u, v)] ∩ (lo, hi)` as a fraction of `|v − u|`.
fn window_fraction(u: f64, v: f64, lo: f64, hi: f64) -> f64 {
    if u == v {
        return if lo < u && u < hi { 1.0 } else { 0.0 };
    }
    let (l, r) = if u < v { (u, v) } else { (v, u) };
    let overlap = (r.min(hi) - l.max(lo)).max(0.0);
    overlap / (r - l)
}

/// Probability that a Brownian bridge from `u` to `v` over time `var/σ²`
/// touches `level`, for endpoints on the same side of it.
fn bridge_touch(u: f64, v: f64, level: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return 0.0;
    }
    (-2.0 * (u - level) * (v - level) / var).exp()
}

/// Simulates one path from `x`.
pub(crate) fn run_path(
    pm: &PathModel,
    config: &SimConfig,
    rule: &StopRule,
    x: f64,
    gauss: &mut Draws,
    jumps: &mut Draws,
    mut record: Option<&mut PathSkeleton>,
) -> PathOutcome {
    let (lo, hi) = rule.window;
    let dt = config.dt;
    let threshold = rule.hazard.map(|rate| jumps.exp1() / rate);
    let mut next_jump = if pm.jump_rate > 0.0 {
        jumps.exp1() / pm.jump_rate
    } else {
        f64::INFINITY
    };
    let mut t = 0.0;
    let mut pos = x;
    let mut occ = 0.0;
    let push = |rec: &mut Option<&mut PathSkeleton>, t: f64, v: f64| {
        if let Some(r) = rec.as_deref_mut() {
            r.times.push(t);
            r.values.push(v);
        }
    };
    push(&mut record, t, pos);
    let stop = |rec: &mut Option<&mut PathSkeleton>, exit: Exit, time: f64, occupation: f64, position: f64| {
        if let Some(r) = rec.as_deref_mut() {
            r.markers.push(Marker::Stop { time, exit });
        }
        PathOutcome {
            exit,
            time,
            occupation,
            position,
        }
    };

    // Immediate stops at the start.
    if let Some(l) = rule.lower {
        if pos < l {
            return stop(&mut record, Exit::Lower, 0.0, 0.0, pos);
        }
    }
    if let Some(u) = rule.upper {
        if pos >= u {
            return stop(&mut record, Exit::Upper, 0.0, 0.0, pos);
        }
    }

    loop {
        if t >= config.horizon {
            return stop(&mut record, Exit::Horizon, t, occ, pos);
        }
        // Without a Gaussian part the path is linear between jumps.
        let h = if pm.sigma == 0.0 && pm.jump_rate > 0.0 {
            (next_jump - t).min(config.horizon - t)
        } else {
            dt.min(next_jump - t).min(config.horizon - t)
        };
        let var = pm.sigma * pm.sigma * h;
        let end = pos + pm.drift * h + var.sqrt() * gauss.normal();

        // Barrier crossings within the step, as a fraction of the step.
        // (exit, fraction of the step, barrier, end of the interpolated segment)
        let mut crossing: Option<(Exit, f64, f64, f64)> = None;
        if let Some(l) = rule.lower {
            if end <= l {
                let s = if pos > end { (pos - l) / (pos - end) } else { 0.0 };
                crossing = Some((Exit::Lower, s, l, l));
            } else if config.bridge_correction && pm.sigma > 0.0 {
                let pr = bridge_touch(pos, end, l, var);
                if pr > 1e-14 && gauss.uniform() < pr {
                    crossing = Some((Exit::Lower, 0.5, l, 0.5 * (pos + end)));
                }
            }
        }
        if crossing.is_none() {
            if let Some(u) = rule.upper {
                if end >= u {
                    let s = if end > pos { (u - pos) / (end - pos) } else { 0.0 };
                    crossing = Some((Exit::Upper, s, u, u));
                } else if config.bridge_correction && pm.sigma > 0.0 {
                    let pr = bridge_touch(pos, end, u, var);
                    if pr > 1e-14 && gauss.uniform() < pr {
                        crossing = Some((Exit::Upper, 0.5, u, 0.5 * (pos + end)));
                    }
                }
            }
        }

        let step_end = crossing.map_or(end, |c| c.3);
        let frac_time = crossing.map_or(1.0, |c| c.1);
        let in_window = h * frac_time * window_fraction(pos, step_end, lo, hi);

        if let Some(th) = threshold {
            if occ + in_window > th {
                let s = if in_window > 0.0 { (th - occ) / in_window } else { 0.0 };
                return stop(&mut record, Exit::Hazard, t + s * h * frac_time, th, pos);
            }
        }
        occ += in_window;
        if let Some((exit, s, level, _)) = crossing {
            t += s * h;
            push(&mut record, t, level);
            return stop(&mut record, exit, t, occ, level);
        }
        t += h;
        pos = end;
        push(&mut record, t, pos);

        if t >= next_jump {
            let size = pm.jump_mean * jumps.exp1();
            pos -= size;
            next_jump = t + jumps.exp1() / pm.jump_rate;
            if let Some(r) = record.as_deref_mut() {
                r.markers.push(Marker::Jump { time: t, size });
            }
            push(&mut record, t, pos);
            if let Some(l) = rule.lower {
                if pos < l {
                    return stop(&mut record, Exit::Lower, t, occ, pos);
                }
            }
        }

        if let Some(level) = rule.escape_above {
            if pos >= level {
                return stop(&mut record, Exit::EscapedUp, t, occ, pos);
            }
        }
        if let Some(level) = rule.escape_below {
            if pos <= level {
                return stop(&mut record, Exit::EscapedDown, t, occ, pos);
            }
        }
        if let Some((a, phi0)) = rule.return_to {
            if pos < a {
                if jumps.uniform() < (-phi0 * (a - pos)).exp() {
                    pos = a;
                    push(&mut record, t, pos);
                } else {
                    return stop(&mut record, Exit::EscapedDown, t, occ, pos);
                }
            }
        }
        if let Some(floor) = rule.fade_below {
            if -rule.discount * t - rule.penalty * occ < floor.ln() {
                return stop(&mut record, Exit::Faded, t, occ, pos);
            }
        }
    }
}

/// Records one path of the simulation with the given id.
pub fn simulate_path(
    model: &LevyModel,
    config: &SimConfig,
    rule: &StopRule,
    x: f64,
    path_id: u64,
) -> Result<(PathOutcome, PathSkeleton)> {
    config.validate()?;
    let pm = PathModel::from_model(model)?;
    let mut skeleton = PathSkeleton::default();
    let (mut g, mut j) = super::streams(config, path_id, false);
    let out = run_path(&pm, config, rule, x, &mut g, &mut j, Some(&mut skeleton));
    Ok((out, skeleton))
}
