//! `levy-occ`: evaluate occupation-time transforms, corridor prices and
//! bankruptcy decompositions from a declarative config, and check them
//! against Monte Carlo.
//!
//! Exit codes: 0 success, 2 invalid input or unwritable output, 3 numeric
//! failure, 4 a verification outside three standard errors.

mod commands;
mod config;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Context, Side, Target};
use config::{Format, QueryConfig, RunConfig};
use levy_occupation::occupation::Formula;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(String),
    /// Number of failed comparisons.
    Breach(usize),
}

impl From<levy_occupation::Error> for CliError {
    fn from(e: levy_occupation::Error) -> Self {
        match e {
            levy_occupation::Error::NumericFailure { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Breach(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "levy-occ", version, about = "Occupation-time transforms for spectrally negative Levy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Run file, `.json` or `.toml`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fill the `ms` column with wall time.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Two-sided exit transforms from `[0, c]`.
    Exit {
        #[arg(long, value_enum, default_value = "above")]
        side: Side,
        #[command(flatten)]
        common: Common,
    },
    /// One of the ten occupation-time transforms.
    Occupation {
        /// Formula name, e.g. `ruin` or `passage-up-lower-halfline`.
        #[arg(long, value_parser = parse_formula, conflicts_with = "theorem")]
        formula: Option<Formula>,
        /// Shorthand for the two-sided shapes: 1 exits below, 2 exits above.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        theorem: Option<u8>,
        #[command(flatten)]
        common: Common,
    },
    /// Corridor option paying the discounted time spent in `(a, b)` before
    /// leaving `[0, c]`.
    PriceCorridor {
        #[command(flatten)]
        common: Common,
    },
    /// Survival and bankruptcy probabilities under a hazard `q` on `(−b, 0)`.
    Omega {
        #[command(flatten)]
        common: Common,
    },
    /// Compare closed forms with Monte Carlo estimates.
    Verify {
        /// Run the built-in suite covering every formula.
        #[arg(long, conflicts_with = "target")]
        all: bool,
        /// A formula name, `corridor` or `omega`, evaluated at the configured queries.
        #[arg(long)]
        target: Option<Target>,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulated `W^{(q)}` and `Z^{(q)}` nodes as `x, W, Z`.
    GridDump {
        #[arg(long = "x-max")]
        x_max: f64,
        /// Number of grid intervals.
        #[arg(long)]
        nodes: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_formula(s: &str) -> Result<Formula, String> {
    Formula::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = Formula::ALL.iter().map(|f| f.name()).collect();
        format!("unknown formula '{s}', expected one of: {}", names.join(", "))
    })
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        match &self.config {
            Some(path) => RunConfig::load(path),
            None => Ok(RunConfig::default()),
        }
    }

    /// Config queries with the flag overrides applied, or a single query
    /// built from the flags alone.
    fn queries(&self, cfg: &RunConfig) -> Vec<QueryConfig> {
        let mut qs = if cfg.query.is_empty() { vec![QueryConfig::default()] } else { cfg.query.clone() };
        for q in &mut qs {
            for (slot, flag) in [
                (&mut q.x, self.x),
                (&mut q.a, self.a),
                (&mut q.b, self.b),
                (&mut q.c, self.c),
                (&mut q.p, self.p),
                (&mut q.q, self.q),
            ] {
                if flag.is_some() {
                    *slot = flag;
                }
            }
        }
        qs
    }

    fn context(&self, cfg: &RunConfig) -> Result<Context, CliError> {
        let model = cfg
            .model
            .as_ref()
            .ok_or_else(|| CliError::Validation("a model block is required; pass --config".into()))?;
        Context::new(
            model,
            self.queries(cfg),
            cfg.numeric_settings()?,
            cfg.sim_config(self.seed, self.paths)?,
            self.timing,
        )
    }

    fn sink(&self, cfg: &RunConfig) -> (Format, Option<PathBuf>) {
        (
            self.format.or(cfg.output.format).unwrap_or(Format::Csv),
            self.out.clone().or_else(|| cfg.output.path.clone()),
        )
    }
}

fn write_out(bytes: &[u8], path: Option<PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(&p, bytes)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Validation(format!("cannot write output: {e}"))),
    }
}

fn emit_grid(rows: &[commands::GridRow], format: Format) -> Result<Vec<u8>, CliError> {
    let fail = |e: String| CliError::Validation(format!("cannot render grid: {e}"));
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| fail(e.to_string()))?;
            }
            w.into_inner().map_err(|e| fail(e.to_string()))
        }
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(rows).map_err(|e| fail(e.to_string()))?;
            v.push(b'\n');
            Ok(v)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    // Rows are written even when verification fails, so the status travels
    // alongside them.
    let (common, rows, status) = match cli.command {
        Command::Exit { side, common } => {
            let cfg = common.load()?;
            let rows = commands::exit(&common.context(&cfg)?, side)?;
            (common, rows, Ok(()))
        }
        Command::Occupation { formula, theorem, common } => {
            let cfg = common.load()?;
            let flag = formula.or(theorem.map(|t| if t == 1 { Formula::ExitBelow } else { Formula::ExitAbove }));
            let rows = commands::occupation(&common.context(&cfg)?, flag)?;
            (common, rows, Ok(()))
        }
        Command::PriceCorridor { common } => {
            let cfg = common.load()?;
            let rows = commands::price_corridor(&common.context(&cfg)?)?;
            (common, rows, Ok(()))
        }
        Command::Omega { common } => {
            let cfg = common.load()?;
            let rows = commands::omega(&common.context(&cfg)?)?;
            (common, rows, Ok(()))
        }
        Command::Verify { all, target, common } => {
            let cfg = common.load()?;
            let rows = match (all, target) {
                (true, _) => commands::verify_all(
                    &cfg.numeric_settings()?,
                    &cfg.sim_config(common.seed, common.paths)?,
                    common.timing,
                )?,
                (false, Some(t)) => commands::verify_target(&common.context(&cfg)?, t)?,
                (false, None) => {
                    return Err(CliError::Validation("verify needs --all or --target".into()))
                }
            };
            let mut failed = 0;
            for r in rows.iter().filter(|r| !r.flag.is_empty()) {
                eprintln!("verify: {} on {}: {}", r.quantity, r.model, r.flag);
                failed += 1;
            }
            let status = if failed > 0 { Err(CliError::Breach(failed)) } else { Ok(()) };
            (common, rows, status)
        }
        Command::GridDump { x_max, nodes, common } => {
            let cfg = common.load()?;
            let ctx = common.context(&cfg)?;
            let grid = commands::grid_dump(&ctx, common.q.unwrap_or(0.0), x_max, nodes)?;
            let (format, out) = common.sink(&cfg);
            return write_out(&emit_grid(&grid, format)?, out);
        }
    };
    let (format, out) = common.sink(&common.load()?);
    let mut buf = Vec::new();
    report::emit(&rows, format, &mut buf)?;
    write_out(&buf, out)?;
    status
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Validation(m) => eprintln!("error: {m}"),
                CliError::Numeric(m) => eprintln!("numeric failure: {m}"),
                CliError::Breach(n) => eprintln!("verify: {n} comparison(s) failed"),
            }
            ExitCode::from(e.code())
        }
    }
}
