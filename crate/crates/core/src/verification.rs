//! Canonical closed-form versus Monte Carlo comparisons, shared by the
//! command-line `verify` command and the acceptance tests.

use crate::applications::{omega_decomposition, price_corridor_option, CorridorSpec, OmegaSpec};
use crate::error::Result;
use crate::fluctuation::{discounted_deficit, lemma_functional, DeficitPayoff, LemmaFunction};
use crate::kernels::NumericSettings;
use crate::levy_model::LevyModel;
use crate::mc::{
    estimate_corridor, estimate_deficit, estimate_lemma, estimate_occupation_lt, estimate_omega,
    MonteCarloEstimate, SimConfig,
};
use crate::occupation::{evaluate, Formula, OccupationQuery};

/// What a case compares.
#[derive(Debug, Clone)]
pub enum CaseKind {
    Occupation { formula: Formula, query: OccupationQuery },
    /// Discounted deficit with payoff `e^{κ(y − a)}`.
    Deficit { q: f64, a: f64, b: f64, x: f64, kappa: f64 },
    Corridor(CorridorSpec),
    Omega(OmegaSpec),
    Lemma { p: f64, q: f64, a: f64, b: f64, x: f64, v: LemmaFunction },
}

/// A model together with one query shape.
#[derive(Debug, Clone)]
pub struct VerificationCase {
    pub name: String,
    pub model_name: &'static str,
    pub model: LevyModel,
    pub kind: CaseKind,
}

/// One closed-form value against its estimate.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub name: String,
    pub model_name: &'static str,
    pub closed_form: f64,
    pub branch: String,
    pub tol_achieved: f64,
    pub mc: MonteCarloEstimate,
    pub z: f64,
    /// No time discount, so paths cut off by the horizon bias the estimate.
    pub undiscounted: bool,
}

/// Largest standard error a verification run accepts.
pub const MAX_STD_ERROR: f64 = 1e-2;
/// Largest horizon-truncated fraction accepted without a time discount.
pub const MAX_TRUNCATION: f64 = 0.01;

impl CaseOutcome {
    /// Within three standard errors.
    pub fn within_three_se(&self) -> bool {
        self.z.abs() <= 3.0
    }

    /// Why the comparison cannot be trusted, if it cannot.
    pub fn invalid_reason(&self) -> Option<String> {
        if !(self.mc.std_error <= MAX_STD_ERROR) {
            return Some(format!("standard error {:.3e} above {MAX_STD_ERROR}", self.mc.std_error));
        }
        if self.undiscounted && self.mc.truncated_fraction > MAX_TRUNCATION {
            return Some(format!(
                "{:.2}% of undiscounted paths hit the horizon",
                100.0 * self.mc.truncated_fraction
            ));
        }
        None
    }

    /// Valid and within three standard errors.
    pub fn passes(&self) -> bool {
        self.invalid_reason().is_none() && self.within_three_se()
    }
}

fn brownian() -> LevyModel {
    LevyModel::brownian_drift(1.0, 2f64.sqrt()).expect("valid parameters")
}

fn brownian_down() -> LevyModel {
    LevyModel::brownian_drift(-1.0, 2f64.sqrt()).expect("valid parameters")
}

fn cramer_lundberg() -> LevyModel {
    LevyModel::cramer_lundberg(1.5, 1.0, 1.0).expect("valid parameters")
}

fn jump_diffusion_down() -> LevyModel {
    LevyModel::jump_diffusion(0.2, 0.8, 1.0, 0.5).expect("valid parameters")
}

fn jump_diffusion() -> LevyModel {
    LevyModel::jump_diffusion(0.4, 0.6, 1.2, 0.5).expect("valid parameters")
}

fn occupation(
    model_name: &'static str,
    model: LevyModel,
    formula: Formula,
    query: OccupationQuery,
) -> VerificationCase {
    VerificationCase {
        name: formula.name().to_string(),
        model_name,
        model,
        kind: CaseKind::Occupation { formula, query },
    }
}

/// One case per occupation formula plus the deficit, corridor and
/// bankruptcy identities.
pub fn canonical_cases() -> Vec<VerificationCase> {
    let inf = f64::INFINITY;
    vec![
        occupation("brownian", brownian(), Formula::ExitBelow, OccupationQuery::two_sided(1.0, 0.5, 1.5, 2.0, 0.1, 0.4)),
        occupation("brownian", brownian(), Formula::ExitAbove, OccupationQuery::two_sided(1.0, 0.5, 1.5, 2.0, 0.1, 0.4)),
        occupation("brownian", brownian(), Formula::Ruin, OccupationQuery::lower_only(0.6, 0.3, 0.9, 0.2, 0.5)),
        occupation("cramer-lundberg", cramer_lundberg(), Formula::RuinHalfLine, OccupationQuery::lower_only(1.0, 0.5, inf, 0.1, 0.3)),
        occupation(
            "brownian",
            brownian(),
            Formula::PassageUp,
            OccupationQuery { x: 0.0, a: -0.5, b: 0.5, c: Some(1.5), p: 0.1, q: 0.3 },
        ),
        occupation(
            "cramer-lundberg",
            cramer_lundberg(),
            Formula::PassageUpLowerHalfLine,
            OccupationQuery { x: 1.0, a: -inf, b: 0.0, c: Some(2.0), p: 0.0, q: 0.5 },
        ),
        occupation("brownian", brownian(), Formula::TotalInterval, OccupationQuery::lower_only(0.0, 0.0, 1.0, 0.0, 0.5)),
        occupation("cramer-lundberg", cramer_lundberg(), Formula::TotalLowerHalfLine, OccupationQuery::lower_only(0.5, -inf, 1.0, 0.0, 0.5)),
        occupation(
            "brownian-down",
            brownian_down(),
            Formula::TotalIntervalNegativeDrift,
            OccupationQuery::lower_only(0.0, 0.0, 1.0, 0.0, 0.5),
        ),
        occupation(
            "jump-diffusion-down",
            jump_diffusion_down(),
            Formula::TotalUpperHalfLine,
            OccupationQuery::lower_only(0.5, 0.0, inf, 0.0, 0.5),
        ),
        VerificationCase {
            name: "discounted-deficit".into(),
            model_name: "jump-diffusion",
            model: jump_diffusion(),
            kind: CaseKind::Deficit { q: 0.2, a: 0.5, b: 2.0, x: 1.0, kappa: 1.0 },
        },
        VerificationCase {
            name: "corridor".into(),
            model_name: "brownian",
            model: brownian(),
            kind: CaseKind::Corridor(CorridorSpec { a: 0.5, b: 1.5, c: 2.0, p: 0.05, x: 1.0 }),
        },
        VerificationCase {
            name: "omega".into(),
            model_name: "cramer-lundberg",
            model: cramer_lundberg(),
            kind: CaseKind::Omega(OmegaSpec { b: 1.0, q: 0.5, x: 0.5 }),
        },
    ]
}

/// Three perturbation-functional cases with distinct discount and test
/// function.
pub fn lemma_cases() -> Vec<VerificationCase> {
    vec![
        VerificationCase {
            name: "lemma-w".into(),
            model_name: "brownian",
            model: brownian(),
            kind: CaseKind::Lemma { p: 0.1, q: 0.6, a: 0.5, b: 2.0, x: 1.0, v: LemmaFunction::Wq },
        },
        VerificationCase {
            name: "lemma-z".into(),
            model_name: "cramer-lundberg",
            model: cramer_lundberg(),
            kind: CaseKind::Lemma { p: 0.2, q: 0.8, a: 0.3, b: 1.8, x: 1.0, v: LemmaFunction::Zq },
        },
        VerificationCase {
            name: "lemma-w-shifted".into(),
            model_name: "jump-diffusion",
            model: jump_diffusion(),
            kind: CaseKind::Lemma {
                p: 0.1,
                q: 0.5,
                a: 0.4,
                b: 1.5,
                x: 0.8,
                v: LemmaFunction::WqShifted(0.2),
            },
        },
    ]
}

/// Evaluates the closed form and the estimate of a case. Bankruptcy cases
/// yield one outcome per component.
pub fn run_case(
    case: &VerificationCase,
    settings: &NumericSettings,
    config: &SimConfig,
) -> Result<Vec<CaseOutcome>> {
    let m = &case.model;
    let undiscounted = match &case.kind {
        CaseKind::Occupation { formula, query } => query.p == 0.0 || formula.is_total(),
        CaseKind::Deficit { q, .. } => *q == 0.0,
        CaseKind::Corridor(spec) => spec.p == 0.0,
        CaseKind::Omega(_) => true,
        CaseKind::Lemma { p, .. } => *p == 0.0,
    };
    let out = |name: String, closed: f64, branch: String, tol: f64, mc: MonteCarloEstimate| CaseOutcome {
        name,
        model_name: case.model_name,
        closed_form: closed,
        branch,
        tol_achieved: tol,
        z: mc.z_score(closed),
        mc,
        undiscounted,
    };
    match &case.kind {
        CaseKind::Occupation { formula, query } => {
            let r = evaluate(m, *formula, query, settings)?;
            let mc = estimate_occupation_lt(m, *formula, query, config)?;
            Ok(vec![out(case.name.clone(), r.value, r.branch.to_string(), r.tol_achieved, mc)])
        }
        CaseKind::Deficit { q, a, b, x, kappa } => {
            let f = DeficitPayoff::exponential(*kappa, *a)?;
            let v = discounted_deficit(m, *q, *a, *b, *x, &f)?;
            let mc = estimate_deficit(m, *q, *a, *b, *x, &f, config)?;
            Ok(vec![out(case.name.clone(), v, "creeping and jump terms".into(), 0.0, mc)])
        }
        CaseKind::Corridor(spec) => {
            let v = price_corridor_option(m, spec, settings)?;
            let mc = estimate_corridor(m, spec, config)?;
            let tol = (v.value - v.potential_value).abs() / v.value.abs().max(f64::MIN_POSITIVE);
            Ok(vec![out(case.name.clone(), v.value, "two assemblies".into(), tol, mc)])
        }
        CaseKind::Omega(spec) => {
            let d = omega_decomposition(m, spec, settings)?;
            let [s, below, inside] = estimate_omega(m, spec, config)?;
            Ok(vec![
                out(format!("{}-survive", case.name), d.survive, "explicit".into(), 0.0, s),
                out(format!("{}-bankrupt-below", case.name), d.bankrupt_below, "explicit".into(), 0.0, below),
                out(format!("{}-bankrupt-inside", case.name), d.bankrupt_inside, "explicit".into(), 0.0, inside),
            ])
        }
        CaseKind::Lemma { p, q, a, b, x, v } => {
            let value = lemma_functional(m, *p, *q, *a, *b, *x, *v)?;
            let mc = estimate_lemma(m, *p, *q, *a, *b, *x, *v, config)?;
            Ok(vec![out(case.name.clone(), value, "perturbation integrals".into(), 0.0, mc)])
        }
    }
}

/// Runs every canonical and perturbation case in order.
pub fn run_suite(settings: &NumericSettings, config: &SimConfig) -> Result<Vec<CaseOutcome>> {
    let mut all = Vec::new();
    for case in canonical_cases().iter().chain(lemma_cases().iter()) {
        all.extend(run_case(case, settings, config)?);
    }
    Ok(all)
}
