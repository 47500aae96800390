//! `scir` command-line entry point. Every command prints one JSON object on
//! stdout; failures print `{"status": "error", ...}` and exit non-zero.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use scir_core::harness::config::{builtin_source, OptimizeSpec, Policy};
use scir_core::harness::{builtin_names, run_scenario, Engine, HarnessError, Scenario};
use scir_core::sgp::CostFamily;

#[derive(Parser, Debug)]
#[command(name = "scir", version, about = "SCIR epidemics on two-layer networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long)]
    config: String,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Apply the scenario's full-size overrides.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo prevalence.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Mean-field steady-state prevalence.
    Meanfield {
        #[command(flatten)]
        common: Common,
    },
    /// Reproduction numbers and stability case (homogeneous networks).
    Threshold {
        #[command(flatten)]
        common: Common,
    },
    /// Budgeted activation-rate allocation.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Total budget; repeatable.
        #[arg(long)]
        budget: Vec<f64>,
        #[arg(long)]
        budget_points: Option<usize>,
        /// sgp, degree or closeness; repeatable.
        #[arg(long, value_parser = parse_policy)]
        policy: Vec<Policy>,
        #[arg(long)]
        lower: Option<f64>,
        #[arg(long)]
        upper: Option<f64>,
        /// Cost terms as `coef:exponent` pairs, e.g. `1:-1` for `1/gamma`.
        #[arg(long, value_delimiter = ',')]
        cost: Vec<String>,
    },
    /// Run every engine of a scenario.
    Scenario {
        /// Built-in name or path to a scenario file.
        name: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        paper_scale: bool,
    },
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    match s {
        "sgp" => Ok(Policy::Sgp),
        "degree" => Ok(Policy::Degree),
        "closeness" => Ok(Policy::Closeness),
        _ => Err(format!("unknown policy {s:?}")),
    }
}

fn parse_cost(terms: &[String]) -> Result<CostFamily, HarnessError> {
    let terms = terms
        .iter()
        .map(|t| {
            let (c, e) = t.split_once(':').ok_or_else(|| HarnessError::Config(format!("cost term {t:?} is not coef:exponent")))?;
            let num = |x: &str| x.trim().parse::<f64>().map_err(|e| HarnessError::Config(format!("cost term {t:?}: {e}")));
            Ok((num(c)?, num(e)?))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let cost = CostFamily { terms };
    cost.validate().map_err(HarnessError::Config)?;
    Ok(cost)
}

fn load(config: &str, paper_scale: bool) -> Result<Scenario, HarnessError> {
    if builtin_source(config).is_some() {
        return Scenario::builtin(config, paper_scale);
    }
    let path = Path::new(config);
    if !path.exists() {
        return Err(HarnessError::UnknownScenario(config.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    Scenario::parse(&text, paper_scale)
}

/// Restricts `s` to a single engine and re-validates it, including every series.
fn only(mut s: Scenario, engine: Engine) -> Result<Scenario, HarnessError> {
    s.engines = vec![engine];
    s.source.insert("engines".into(), toml::Value::Array(vec![toml::Value::String(engine_key(engine).into())]));
    s.validate()?;
    Ok(s)
}

fn engine_key(e: Engine) -> &'static str {
    match e {
        Engine::Meanfield => "meanfield",
        Engine::Gillespie => "gillespie",
        Engine::Timeseries => "timeseries",
        Engine::Threshold => "threshold",
        Engine::Optimize => "optimize",
        Engine::Rates => "rates",
    }
}

/// Replaces a top-level key in the source table and re-reads the scenario,
/// so series overlays see the change too.
fn set_source(s: &mut Scenario, key: &str, value: toml::Value) -> Result<(), HarnessError> {
    s.source.insert(key.into(), value);
    let fresh = Scenario::from_table(s.source.clone())?;
    *s = fresh;
    Ok(())
}

fn to_toml<T: serde::Serialize>(v: &T) -> Result<toml::Value, HarnessError> {
    toml::Value::try_from(v).map_err(|e| HarnessError::Config(e.to_string()))
}

fn execute(cli: Cli) -> Result<serde_json::Value, HarnessError> {
    let (scenario, out_dir) = match cli.command {
        Command::Scenario { list: true, .. } => {
            let items: Vec<_> = builtin_names()
                .into_iter()
                .map(|n| {
                    let s = Scenario::builtin(n, false)?;
                    Ok(json!({"name": n, "description": s.description, "engines": s.engines}))
                })
                .collect::<Result<_, HarnessError>>()?;
            return Ok(json!({"status": "ok", "command": "scenario", "scenarios": items}));
        }
        Command::Scenario { name, seed, out_dir, paper_scale, .. } => {
            let name = name.ok_or_else(|| HarnessError::Config("scenario needs a name, a path or --list".into()))?;
            (with_seed(load(&name, paper_scale)?, seed)?, out_dir)
        }
        Command::Simulate { common, runs } => {
            let mut s = only(load(&common.config, common.paper_scale)?, Engine::Gillespie)?;
            if let Some(r) = runs {
                let mut sim = s.simulation.clone();
                sim.runs = r;
                set_source(&mut s, "simulation", to_toml(&sim)?)?;
            }
            (with_seed(s, common.seed)?, common.out_dir)
        }
        Command::Meanfield { common } => (with_seed(only(load(&common.config, common.paper_scale)?, Engine::Meanfield)?, common.seed)?, common.out_dir),
        Command::Threshold { common } => (with_seed(only(load(&common.config, common.paper_scale)?, Engine::Threshold)?, common.seed)?, common.out_dir),
        Command::Optimize { common, budget, budget_points, policy, lower, upper, cost } => {
            let mut s = load(&common.config, common.paper_scale)?;
            let mut spec: OptimizeSpec = s.optimize.clone().unwrap_or_default();
            if !budget.is_empty() {
                spec.budgets = budget;
            }
            if let Some(m) = budget_points {
                spec.budget_points = m;
            }
            if !policy.is_empty() {
                spec.policies = policy;
            }
            if let Some(l) = lower {
                spec.lower = l;
            }
            if let Some(u) = upper {
                spec.upper = u;
            }
            if !cost.is_empty() {
                spec.cost = parse_cost(&cost)?;
            }
            set_source(&mut s, "optimize", to_toml(&spec)?)?;
            (with_seed(only(s, Engine::Optimize)?, common.seed)?, common.out_dir)
        }
    };
    let report = run_scenario(&scenario, &out_dir)?;
    Ok(json!({
        "status": "ok",
        "scenario": report.name,
        "outputs": report.outputs,
        "results": report.results,
        "summary": report.summary,
    }))
}

fn with_seed(mut s: Scenario, seed: Option<u64>) -> Result<Scenario, HarnessError> {
    if let Some(seed) = seed {
        // toml integers are i64
        let v = i64::try_from(seed).map_err(|_| HarnessError::Config(format!("seed {seed} exceeds the toml integer range")))?;
        set_source(&mut s, "seed", toml::Value::Integer(v))?;
    }
    Ok(s)
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = write!(std::io::stdout().lock(), "{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            emit(&json!({"status": "error", "kind": "usage", "message": e.to_string()}).to_string());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(v) => {
            emit(&serde_json::to_string_pretty(&v).expect("json output"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            emit(&json!({"status": "error", "kind": e.kind(), "message": e.to_string()}).to_string());
            ExitCode::FAILURE
        }
    }
}
