//! Subcommand implementations. Each returns report rows; emission and exit
//! codes are handled by the caller.

use std::time::Instant;

use levy_occupation::applications::{omega_decomposition, price_corridor_option, CorridorSpec, OmegaSpec};
use levy_occupation::fluctuation::{exit_above, exit_below};
use levy_occupation::kernels::NumericSettings;
use levy_occupation::mc::SimConfig;
use levy_occupation::occupation::{evaluate, Formula, OccupationQuery};
use levy_occupation::scale::{build_scale_grid, DEFAULT_GRID_NODES};
use levy_occupation::verification::{canonical_cases, lemma_cases, run_case, CaseKind, CaseOutcome, VerificationCase};
use levy_occupation::LevyModel;
use serde::Serialize;

use crate::config::{ModelConfig, QueryConfig};
use crate::report::Report;
use crate::CliError;

/// Everything a command needs besides its own flags.
pub struct Context {
    pub model: LevyModel,
    pub model_name: &'static str,
    pub queries: Vec<QueryConfig>,
    pub settings: NumericSettings,
    pub sim: SimConfig,
    pub timing: bool,
}

impl Context {
    pub fn new(
        model: &ModelConfig,
        queries: Vec<QueryConfig>,
        settings: NumericSettings,
        sim: SimConfig,
        timing: bool,
    ) -> Result<Context, CliError> {
        Ok(Context {
            model: model.build()?,
            model_name: model.name(),
            queries,
            settings,
            sim,
            timing,
        })
    }

    fn row(&self, quantity: &str, q: &QueryConfig) -> Report {
        Report {
            quantity: quantity.to_string(),
            model: self.model_name.to_string(),
            x: q.x,
            a: q.a,
            b: q.b,
            c: q.c,
            p: q.p,
            q: q.q,
            ..Report::default()
        }
    }

    fn stamp(&self, rows: &mut [Report], start: Instant) {
        if self.timing {
            let ms = start.elapsed().as_secs_f64() * 1e3;
            for r in rows {
                r.ms = Some(ms);
            }
        }
    }
}

fn need(v: Option<f64>, name: &str, what: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Validation(format!("{what} needs --{name}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Side {
    Above,
    Below,
    Both,
}

pub fn exit(ctx: &Context, side: Side) -> Result<Vec<Report>, CliError> {
    let mut rows = Vec::new();
    for q in &ctx.queries {
        let start = Instant::now();
        let x = need(q.x, "x", "exit")?;
        let c = need(q.c, "c", "exit")?;
        let p = q.p.unwrap_or(0.0);
        let echo = QueryConfig { a: None, b: None, q: None, p: Some(p), ..q.clone() };
        let mut out = Vec::new();
        if side != Side::Below {
            let mut r = ctx.row("exit-above", &echo);
            r.value = Some(exit_above(&ctx.model, p, x, c)?);
            r.branch = "scale ratio".into();
            out.push(r);
        }
        if side != Side::Above {
            let mut r = ctx.row("exit-below", &echo);
            r.value = Some(exit_below(&ctx.model, p, x, c)?);
            r.branch = "scale ratio".into();
            out.push(r);
        }
        ctx.stamp(&mut out, start);
        rows.extend(out);
    }
    Ok(rows)
}

/// Resolves the formula of a query from the flags, then the config.
pub fn pick_formula(flag: Option<Formula>, q: &QueryConfig) -> Result<Formula, CliError> {
    if let Some(f) = flag {
        return Ok(f);
    }
    match &q.formula {
        Some(name) => Formula::from_name(name)
            .ok_or_else(|| CliError::Validation(format!("unknown formula '{name}'"))),
        None => Err(CliError::Validation("occupation needs --formula or --theorem".into())),
    }
}

/// Builds the query of `formula`, filling the open end of half-line
/// windows and rejecting fields the formula cannot use.
pub fn occupation_query(formula: Formula, q: &QueryConfig) -> Result<OccupationQuery, CliError> {
    let what = formula.name();
    let x = need(q.x, "x", what)?;
    let lower_open = matches!(formula, Formula::PassageUpLowerHalfLine | Formula::TotalLowerHalfLine);
    let upper_open = matches!(formula, Formula::RuinHalfLine | Formula::TotalUpperHalfLine);
    let a = if lower_open { f64::NEG_INFINITY } else { need(q.a, "a", what)? };
    let b = if upper_open { f64::INFINITY } else { need(q.b, "b", what)? };
    let needs_c = matches!(
        formula,
        Formula::ExitBelow | Formula::ExitAbove | Formula::PassageUp | Formula::PassageUpLowerHalfLine
    );
    let c = if needs_c { Some(need(q.c, "c", what)?) } else { None };
    let p = q.p.unwrap_or(0.0);
    if formula.is_total() && p != 0.0 {
        return Err(CliError::Validation(format!("{what} has no time discount; drop --p")));
    }
    Ok(OccupationQuery { x, a, b, c, p, q: q.q.unwrap_or(0.0) })
}

fn echo(quantity: Formula, oq: &OccupationQuery) -> QueryConfig {
    let finite = |v: f64| v.is_finite().then_some(v);
    QueryConfig {
        formula: Some(quantity.name().into()),
        x: Some(oq.x),
        a: finite(oq.a),
        b: finite(oq.b),
        c: oq.c,
        p: Some(oq.p),
        q: Some(oq.q),
    }
}

pub fn occupation(ctx: &Context, flag: Option<Formula>) -> Result<Vec<Report>, CliError> {
    let mut rows = Vec::new();
    for q in &ctx.queries {
        let start = Instant::now();
        let formula = pick_formula(flag, q)?;
        let oq = occupation_query(formula, q)?;
        let res = evaluate(&ctx.model, formula, &oq, &ctx.settings)?;
        let mut r = ctx.row(formula.name(), &echo(formula, &oq));
        r.value = Some(res.value);
        r.branch = res.branch.into();
        r.tol_achieved = Some(res.tol_achieved);
        let mut out = vec![r];
        ctx.stamp(&mut out, start);
        rows.extend(out);
    }
    Ok(rows)
}

fn corridor_spec(q: &QueryConfig) -> Result<CorridorSpec, CliError> {
    let w = "price-corridor";
    Ok(CorridorSpec {
        a: need(q.a, "a", w)?,
        b: need(q.b, "b", w)?,
        c: need(q.c, "c", w)?,
        p: need(q.p, "p", w)?,
        x: need(q.x, "x", w)?,
    })
}

fn omega_spec(q: &QueryConfig) -> Result<OmegaSpec, CliError> {
    let w = "omega";
    Ok(OmegaSpec { b: need(q.b, "b", w)?, q: need(q.q, "q", w)?, x: need(q.x, "x", w)? })
}

pub fn price_corridor(ctx: &Context) -> Result<Vec<Report>, CliError> {
    let mut rows = Vec::new();
    for q in &ctx.queries {
        let start = Instant::now();
        let spec = corridor_spec(q)?;
        let price = price_corridor_option(&ctx.model, &spec, &ctx.settings)?;
        let mut r = ctx.row("corridor", &QueryConfig { q: None, ..q.clone() });
        r.value = Some(price.value);
        r.branch = "direct integral".into();
        r.tol_achieved = Some((price.value - price.potential_value).abs());
        let mut out = vec![r];
        ctx.stamp(&mut out, start);
        rows.extend(out);
    }
    Ok(rows)
}

pub fn omega(ctx: &Context) -> Result<Vec<Report>, CliError> {
    let mut rows = Vec::new();
    for q in &ctx.queries {
        let start = Instant::now();
        let spec = omega_spec(q)?;
        let d = omega_decomposition(&ctx.model, &spec, &ctx.settings)?;
        let e = QueryConfig { x: Some(spec.x), b: Some(spec.b), q: Some(spec.q), ..QueryConfig::default() };
        let mut out = Vec::new();
        for (name, v) in [
            ("omega-survive", d.survive),
            ("omega-bankrupt-below", d.bankrupt_below),
            ("omega-bankrupt-inside", d.bankrupt_inside),
        ] {
            let mut r = ctx.row(name, &e);
            r.value = Some(v);
            r.branch = "explicit".into();
            out.push(r);
        }
        ctx.stamp(&mut out, start);
        rows.extend(out);
    }
    Ok(rows)
}

/// What `verify` compares for a user query.
#[derive(Debug, Clone, Copy)]
pub enum Target {
    Formula(Formula),
    Corridor,
    Omega,
}

impl std::str::FromStr for Target {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corridor" => Ok(Target::Corridor),
            "omega" => Ok(Target::Omega),
            other => Formula::from_name(other)
                .map(Target::Formula)
                .ok_or_else(|| format!("unknown target '{other}'")),
        }
    }
}

fn outcome_row(o: &CaseOutcome, mut r: Report, ms: Option<f64>) -> Report {
    r.quantity = o.name.clone();
    r.value = Some(o.closed_form);
    r.mc_mean = Some(o.mc.mean);
    r.mc_se = Some(o.mc.std_error);
    r.z = Some(o.z);
    r.branch = o.branch.clone();
    r.tol_achieved = Some(o.tol_achieved);
    r.flag = match o.invalid_reason() {
        Some(why) => format!("invalid: {why}"),
        None if !o.within_three_se() => "|z|>3".into(),
        None => String::new(),
    };
    r.ms = ms;
    r
}

fn case_echo(kind: &CaseKind) -> QueryConfig {
    match kind {
        CaseKind::Occupation { formula, query } => echo(*formula, query),
        CaseKind::Deficit { q, a, b, x, .. } => QueryConfig {
            x: Some(*x),
            a: Some(*a),
            b: Some(*b),
            q: Some(*q),
            ..QueryConfig::default()
        },
        CaseKind::Corridor(s) => QueryConfig {
            x: Some(s.x),
            a: Some(s.a),
            b: Some(s.b),
            c: Some(s.c),
            p: Some(s.p),
            ..QueryConfig::default()
        },
        CaseKind::Omega(s) => QueryConfig { x: Some(s.x), b: Some(s.b), q: Some(s.q), ..QueryConfig::default() },
        CaseKind::Lemma { p, q, a, b, x, .. } => QueryConfig {
            x: Some(*x),
            a: Some(*a),
            b: Some(*b),
            p: Some(*p),
            q: Some(*q),
            ..QueryConfig::default()
        },
    }
}

/// The built-in suite, independent of the configured model and queries.
pub fn verify_all(settings: &NumericSettings, sim: &SimConfig, timing: bool) -> Result<Vec<Report>, CliError> {
    let mut rows = Vec::new();
    for case in canonical_cases().iter().chain(lemma_cases().iter()) {
        let start = Instant::now();
        let outcomes = run_case(case, settings, sim)?;
        let ms = timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        let q = case_echo(&case.kind);
        for o in &outcomes {
            let r = Report {
                model: o.model_name.into(),
                x: q.x,
                a: q.a,
                b: q.b,
                c: q.c,
                p: q.p,
                q: q.q,
                ..Report::default()
            };
            rows.push(outcome_row(o, r, ms));
        }
    }
    Ok(rows)
}

/// Pairs each configured query with the estimator of its own shape.
pub fn verify_target(ctx: &Context, target: Target) -> Result<Vec<Report>, CliError> {
    let mut rows = Vec::new();
    for q in &ctx.queries {
        let start = Instant::now();
        let (name, kind) = match target {
            Target::Formula(f) => (f.name().to_string(), CaseKind::Occupation { formula: f, query: occupation_query(f, q)? }),
            Target::Corridor => ("corridor".into(), CaseKind::Corridor(corridor_spec(q)?)),
            Target::Omega => ("omega".into(), CaseKind::Omega(omega_spec(q)?)),
        };
        let echo = case_echo(&kind);
        let case = VerificationCase { name, model_name: ctx.model_name, model: ctx.model.clone(), kind };
        let outcomes = run_case(&case, &ctx.settings, &ctx.sim)?;
        let ms = ctx.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        for o in &outcomes {
            rows.push(outcome_row(o, ctx.row("", &echo), ms));
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
pub struct GridRow {
    pub x: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "Z")]
    pub z: f64,
}

/// Nodes of the tabulated `W^{(q)}` and `Z^{(q)}` on `[0, x_max]`.
pub fn grid_dump(
    ctx: &Context,
    q: f64,
    x_max: f64,
    nodes: Option<usize>,
) -> Result<Vec<GridRow>, CliError> {
    let n = nodes.unwrap_or(DEFAULT_GRID_NODES);
    let grid = build_scale_grid(&ctx.model, q, x_max, n, &ctx.settings.inversion)?;
    let h = grid.step();
    Ok(grid
        .values_w()
        .iter()
        .zip(grid.values_z())
        .enumerate()
        .map(|(i, (w, z))| GridRow { x: i as f64 * h, w: *w, z: *z })
        .collect())
}
