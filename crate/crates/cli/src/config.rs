//! The declarative run file: model, queries, numerics, simulation and output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer};

use levy_occupation::kernels::NumericSettings;
use levy_occupation::mc::SimConfig;
use levy_occupation::quadrature::QuadratureRule;
use levy_occupation::{JumpMeasure, LevyModel, TabulatedDensity};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelConfig>,
    /// One table or an array of tables.
    #[serde(default, deserialize_with = "one_or_many")]
    pub query: Vec<QueryConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum ModelConfig {
    BrownianDrift(BrownianDrift),
    CramerLundberg(CramerLundberg),
    JumpDiffusion(JumpDiffusion),
    /// Piecewise-linear Lévy density through the given points.
    Tabulated(Tabulated),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrownianDrift {
    pub gamma: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CramerLundberg {
    pub premium: f64,
    pub rate: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpDiffusion {
    pub drift: f64,
    pub sigma: f64,
    pub rate: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tabulated {
    pub gamma: f64,
    pub sigma: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::BrownianDrift(_) => "brownian-drift",
            ModelConfig::CramerLundberg(_) => "cramer-lundberg",
            ModelConfig::JumpDiffusion(_) => "jump-diffusion",
            ModelConfig::Tabulated(_) => "tabulated",
        }
    }

    pub fn build(&self) -> Result<LevyModel, CliError> {
        let m = match self.clone() {
            ModelConfig::BrownianDrift(m) => LevyModel::brownian_drift(m.gamma, m.sigma),
            ModelConfig::CramerLundberg(m) => LevyModel::cramer_lundberg(m.premium, m.rate, m.mean),
            ModelConfig::JumpDiffusion(m) => LevyModel::jump_diffusion(m.drift, m.sigma, m.rate, m.mean),
            ModelConfig::Tabulated(m) => TabulatedDensity::from_points(m.nodes, m.values)
                .and_then(|t| LevyModel::general(m.gamma, m.sigma, JumpMeasure::Tabulated(t))),
        };
        m.map_err(CliError::from)
    }
}

/// Query fields; any of them may be overridden on the command line.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    pub formula: Option<String>,
    pub x: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub tol_quad: Option<f64>,
    pub grid_nodes: Option<usize>,
    /// `gauss-legendre` or `romberg`.
    pub rule: Option<String>,
    pub gauss_legendre_order: Option<usize>,
    #[serde(default)]
    pub inversion: InversionConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    pub talbot_nodes: Option<usize>,
    pub euler_a: Option<f64>,
    pub euler_terms: Option<usize>,
    pub euler_averaging: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dt: Option<f64>,
    pub paths: Option<usize>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub antithetic: Option<bool>,
    pub bridge_correction: Option<bool>,
    pub tail_eps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<QueryConfig>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(QueryConfig),
        Many(Vec<QueryConfig>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(q) => vec![q],
        OneOrMany::Many(v) => v,
    })
}

impl RunConfig {
    /// Reads a `.json` or `.toml` file, chosen by extension.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let bad = |e: String| CliError::Validation(format!("{}: {e}", path.display()));
        match ext.to_ascii_lowercase().as_str() {
            "json" => serde_json::from_str(&text).map_err(|e| bad(e.to_string())),
            "toml" => toml::from_str(&text).map_err(|e| bad(e.to_string())),
            other => Err(CliError::Validation(format!(
                "config extension must be .json or .toml, got '{other}'"
            ))),
        }
    }

    pub fn numeric_settings(&self) -> Result<NumericSettings, CliError> {
        let n = &self.numerics;
        let mut s = NumericSettings::default();
        if let Some(t) = n.tol_quad {
            s.tol_quad = t;
        }
        if let Some(g) = n.grid_nodes {
            s.grid_nodes = g;
        }
        let order = n.gauss_legendre_order.unwrap_or(20);
        s.rule = match n.rule.as_deref() {
            None | Some("gauss-legendre") => QuadratureRule::GaussLegendreComposite { order },
            Some("romberg") => QuadratureRule::TrapezoidRomberg,
            Some(other) => {
                return Err(CliError::Validation(format!(
                    "numerics.rule must be gauss-legendre or romberg, got '{other}'"
                )))
            }
        };
        let inv = &n.inversion;
        let i = &mut s.inversion;
        if let Some(v) = inv.talbot_nodes {
            i.talbot_nodes = v;
        }
        if let Some(v) = inv.euler_a {
            i.euler_a = v;
        }
        if let Some(v) = inv.euler_terms {
            i.euler_terms = v;
        }
        if let Some(v) = inv.euler_averaging {
            i.euler_averaging = v;
        }
        if let Some(v) = inv.tol {
            i.tol = v;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn sim_config(&self, seed: Option<u64>, paths: Option<usize>) -> Result<SimConfig, CliError> {
        let m = &self.mc;
        let d = SimConfig::default();
        let c = SimConfig {
            dt: m.dt.unwrap_or(d.dt),
            n_paths: paths.or(m.paths).unwrap_or(d.n_paths),
            horizon: m.horizon.unwrap_or(d.horizon),
            seed: seed.or(m.seed).unwrap_or(d.seed),
            antithetic: m.antithetic.unwrap_or(d.antithetic),
            bridge_correction: m.bridge_correction.unwrap_or(d.bridge_correction),
            tail_eps: m.tail_eps.unwrap_or(d.tail_eps),
        };
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_query_array() {
        let c: RunConfig = toml::from_str(
            r#"
            [model]
            class = "brownian-drift"
            gamma = 1.0
            sigma = 1.5

            [[query]]
            x = 1.0
            c = 2.0

            [[query]]
            x = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(c.query.len(), 2);
        assert_eq!(c.model.unwrap().name(), "brownian-drift");
    }

    #[test]
    fn single_query_table_in_json() {
        let c: RunConfig = serde_json::from_str(
            r#"{"model": {"class": "cramer-lundberg", "premium": 1.5, "rate": 1, "mean": 1},
                "query": {"x": 1, "c": 2}}"#,
        )
        .unwrap();
        assert_eq!(c.query.len(), 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let top: Result<RunConfig, _> = serde_json::from_str(r#"{"modle": {}}"#);
        assert!(top.is_err());
        let in_model: Result<RunConfig, _> = serde_json::from_str(
            r#"{"model": {"class": "brownian-drift", "gamma": 1, "sigma": 1, "mu": 2}}"#,
        );
        assert!(in_model.is_err());
        let in_mc: Result<RunConfig, _> = toml::from_str("[mc]\nsteps = 3\n");
        assert!(in_mc.is_err());
    }
}
