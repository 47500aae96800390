//! Runs every engine of a scenario and writes one CSV per engine plus a JSON
//! summary. Every random stream is derived from the scenario seed, so the
//! CSVs are byte-identical across runs and thread counts.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{Engine, NetworkSpec, Policy, Scenario};
use super::network::build_network;
use super::rates::{run_rate_study, sgp_config};
use super::HarnessError;
use crate::gillespie::{run_ensemble, RunConfig, Seeding};
use crate::meanfield::{integrate_homogeneous, integrate_network, HomoMfState, MfSolution, MfState};
use crate::netgen::LayeredNetwork;
use crate::ode::OdeOptions;
use crate::params::{Compartment, ModelParams};
use crate::qmatrix::{build_q, lambda1, PowerOptions};
use crate::seeds::derive_seed;
use crate::sgp::{allocate_by_centrality, sgp_optimize, Centrality};
use crate::threshold::classify_stability;

const GILLESPIE_STREAM: u64 = 0x7363_6e67;
const TIMESERIES_STREAM: u64 = 0x7363_6e74;

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub outputs: Vec<PathBuf>,
    pub summary: serde_json::Value,
    /// Each engine's table as a list of row objects.
    pub results: serde_json::Map<String, serde_json::Value>,
}

struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new() }
    }

    fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> serde_json::Value {
        let cell = |c: &str| match c {
            "" => serde_json::Value::Null,
            "true" => true.into(),
            "false" => false.into(),
            _ => match c.parse::<i64>() {
                Ok(i) => i.into(),
                Err(_) => c.parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or_else(|| c.trim_matches('"').into(), Into::into),
            },
        };
        self.rows
            .iter()
            .map(|r| self.header.iter().zip(r).map(|(h, c)| (h.to_string(), cell(c))).collect::<serde_json::Map<_, _>>().into())
            .collect::<Vec<serde_json::Value>>()
            .into()
    }
}

fn quote(label: &str) -> String {
    if label.contains([',', '"', '\n']) {
        format!("\"{}\"", label.replace('"', "\"\""))
    } else {
        label.to_string()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

fn variant_label(v: &Scenario, k: usize) -> String {
    if v.label.is_empty() {
        format!("series{k}")
    } else {
        v.label.clone()
    }
}

/// Per-variant concrete network; `None` for homogeneous variants.
fn networks(s: &Scenario, variants: &[Scenario]) -> Result<Vec<Option<LayeredNetwork>>, HarnessError> {
    variants
        .iter()
        .map(|v| match v.network {
            NetworkSpec::Homogeneous { .. } => Ok(None),
            _ => build_network(&v.network, s.seed).map(|b| Some(b.net)),
        })
        .collect()
}

fn model_params(v: &Scenario, n: usize) -> Result<ModelParams, HarnessError> {
    Ok(ModelParams { epi: v.epidemic_params(), rates: v.rates.activity_rates(n)? })
}

fn seed_fraction(v: &Scenario, net: Option<&LayeredNetwork>) -> f64 {
    v.meanfield.seed_fraction.unwrap_or_else(|| match net {
        Some(g) => v.simulation.seed_nodes as f64 / g.n() as f64,
        None => 1e-4,
    })
}

fn solve_mf(v: &Scenario, net: Option<&LayeredNetwork>, opts: &OdeOptions) -> Result<MfSolution, HarnessError> {
    let frac = seed_fraction(v, net);
    let eng = |e: &dyn std::fmt::Display| HarnessError::engine(&v.name, "meanfield", e);
    match net {
        None => {
            let hp = v.homogeneous_params()?;
            integrate_homogeneous(&HomoMfState::seeded(&hp, frac), &hp, opts).map_err(|e| eng(&e))
        }
        Some(g) => {
            let params = model_params(v, g.n())?;
            let init = MfState::seeded(&params.rates, frac).map_err(|e| eng(&e))?;
            integrate_network(&init, g, &params, opts).map_err(|e| eng(&e))
        }
    }
}

/// `(variant index, sweep value)` for every point; a variant without a sweep
/// contributes one point at its base parameters.
fn sweep_points(variants: &[Scenario]) -> Vec<(usize, Option<f64>)> {
    variants
        .iter()
        .enumerate()
        .flat_map(|(k, v)| match &v.sweep {
            Some(sw) => sw.values.iter().map(|&x| (k, Some(x))).collect(),
            None => vec![(k, None)],
        })
        .collect()
}

fn at_point(base: &Scenario, x: Option<f64>) -> Scenario {
    match (&base.sweep, x) {
        (Some(sw), Some(x)) => base.at(sw.variable, x),
        _ => base.clone(),
    }
}

fn run_meanfield(variants: &[Scenario], nets: &[Option<LayeredNetwork>]) -> Result<Table, HarnessError> {
    let points = sweep_points(variants);
    let rows = points
        .par_iter()
        .map(|&(k, x)| {
            let base = &variants[k];
            let v = at_point(base, x);
            let opts = OdeOptions { horizon: v.meanfield.horizon, ..OdeOptions::default() };
            let sol = solve_mf(&v, nets[k].as_ref(), &opts)?;
            Ok(vec![quote(&variant_label(base, k)), opt_num(x), sol.prevalence.to_string(), sol.converged.to_string()])
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(Table { rows, ..Table::new(&["series", "x", "prevalence", "converged"]) })
}

fn run_gillespie(s: &Scenario, variants: &[Scenario], nets: &[Option<LayeredNetwork>]) -> Result<Table, HarnessError> {
    let points = sweep_points(variants);
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(idx, &(k, x))| {
            let base = &variants[k];
            let v = at_point(base, x);
            let net = nets[k].as_ref().expect("gillespie runs on a concrete network");
            let params = model_params(&v, net.n())?;
            let cfg = RunConfig {
                seeding: Seeding::Random(v.simulation.seed_nodes),
                seed_compartment: Compartment::C,
                horizon: v.simulation.horizon,
                ..RunConfig::default()
            };
            let seed = derive_seed(s.seed, GILLESPIE_STREAM, idx as u64);
            let e = run_ensemble(net, &params, &cfg, v.simulation.runs, seed).map_err(|e| HarnessError::engine(&s.name, "gillespie", e))?;
            Ok(vec![
                quote(&variant_label(base, k)),
                opt_num(x),
                e.prevalence_mean.to_string(),
                e.prevalence_stderr.to_string(),
                e.prevalence_ci95.0.to_string(),
                e.prevalence_ci95.1.to_string(),
                e.runs.to_string(),
            ])
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(Table { rows, ..Table::new(&["series", "x", "mean", "stderr", "ci_low", "ci_high", "runs"]) })
}

fn fractions(counts: [f64; 4], n: f64) -> [String; 4] {
    counts.map(|c| (c / n).to_string())
}

fn run_timeseries(s: &Scenario, variants: &[Scenario], nets: &[Option<LayeredNetwork>]) -> Result<Table, HarnessError> {
    let per_variant = (0..variants.len())
        .into_par_iter()
        .map(|k| {
            let v = &variants[k];
            let ts = v.timeseries.as_ref().expect("timeseries checked");
            let label = quote(&variant_label(v, k));
            let net = nets[k].as_ref();
            let opts = OdeOptions { horizon: ts.t_end, steady_tol: 0.0, output_dt: Some(ts.dt), ..OdeOptions::default() };
            let sol = solve_mf(v, net, &opts)?;
            let mut rows = Vec::new();
            for (t, m) in sol.times.iter().zip(&sol.mean_states) {
                let c = [m[0] + m[1], m[2] + m[3], m[4] + m[5], m[6] + m[7]];
                let mut row = vec![label.clone(), "meanfield".into(), t.to_string()];
                row.extend(fractions(c, 1.0));
                rows.push(row);
            }
            if let Some(net) = net {
                let steps = (ts.t_end / ts.dt).round() as usize;
                let times: Vec<f64> = (0..=steps).map(|j| j as f64 * ts.dt).collect();
                let cfg = RunConfig {
                    seeding: Seeding::Random(v.simulation.seed_nodes),
                    horizon: Some(ts.t_end),
                    output_times: times.clone(),
                    ..RunConfig::default()
                };
                let params = model_params(v, net.n())?;
                let seed = derive_seed(s.seed, TIMESERIES_STREAM, k as u64);
                let e = run_ensemble(net, &params, &cfg, v.simulation.runs, seed)
                    .map_err(|e| HarnessError::engine(&s.name, "timeseries", e))?;
                for (t, c) in times.iter().zip(&e.mean_counts) {
                    let mut row = vec![label.clone(), "simulation".into(), t.to_string()];
                    row.extend(fractions(*c, net.n() as f64));
                    rows.push(row);
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(Table { rows: per_variant.concat(), ..Table::new(&["series", "source", "t", "S", "C", "I", "R"]) })
}

fn run_threshold(s: &Scenario, variants: &[Scenario]) -> Result<Table, HarnessError> {
    let rows = sweep_points(variants)
        .into_iter()
        .map(|(k, x)| {
            let base = &variants[k];
            let v = at_point(base, x);
            let r = classify_stability(&v.homogeneous_params()?).map_err(|e| HarnessError::engine(&s.name, "threshold", e))?;
            let case = serde_json::to_value(r.case).expect("case serializes").as_str().unwrap_or_default().to_string();
            Ok(vec![
                quote(&variant_label(base, k)),
                opt_num(x),
                r.r0.to_string(),
                r.r0_1.to_string(),
                r.r0_2.to_string(),
                case,
                opt_num(r.gamma1_star),
            ])
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(Table { rows, ..Table::new(&["series", "x", "r0", "r0_1", "r0_2", "case", "gamma1_star"]) })
}

/// Budgets to evaluate: the explicit list, or `budget_points` values evenly
/// spanning `[N cost(upper), N cost(lower)]`.
pub fn budget_grid(spec: &super::config::OptimizeSpec, n: usize) -> Vec<f64> {
    if !spec.budgets.is_empty() {
        return spec.budgets.clone();
    }
    let lo = n as f64 * spec.cost.eval(spec.upper);
    let hi = n as f64 * spec.cost.eval(spec.lower);
    match spec.budget_points {
        0 => Vec::new(),
        1 => vec![lo],
        m => (0..m).map(|j| lo + (hi - lo) * j as f64 / (m - 1) as f64).collect(),
    }
}

fn run_optimize(s: &Scenario, variants: &[Scenario], nets: &[Option<LayeredNetwork>]) -> Result<Table, HarnessError> {
    let mut jobs = Vec::new();
    for (k, v) in variants.iter().enumerate() {
        let spec = v.optimize.as_ref().expect("optimize checked");
        let n = nets[k].as_ref().expect("optimize runs on a concrete network").n();
        for b in budget_grid(spec, n) {
            for &p in &spec.policies {
                jobs.push((k, b, p));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(k, budget, policy)| {
            let v = &variants[k];
            let spec = v.optimize.as_ref().expect("optimize checked");
            let net = nets[k].as_ref().expect("optimize runs on a concrete network");
            let params = model_params(v, net.n())?;
            let cfg = sgp_config(spec, net.n(), budget);
            let eng = |e: &dyn std::fmt::Display| HarnessError::engine(&s.name, "optimize", e);
            let (gamma, lam, iters) = match policy {
                Policy::Sgp => {
                    let r = sgp_optimize(net, &params.epi, &params.rates, &cfg).map_err(|e| eng(&e))?;
                    (r.gamma1, r.lambda1, r.iterations)
                }
                Policy::Degree | Policy::Closeness => {
                    let kind = if policy == Policy::Degree { Centrality::Degree } else { Centrality::Closeness };
                    let g = allocate_by_centrality(net, &cfg, kind).map_err(|e| eng(&e))?;
                    let q = build_q(net, &params.epi, &params.rates.with_gamma1(&g), None).map_err(|e| eng(&e))?;
                    let l = lambda1(&q, net, &PowerOptions::default()).map_err(|e| eng(&e))?;
                    (g, l.value, 0)
                }
            };
            let name = serde_json::to_value(policy).expect("policy serializes").as_str().unwrap_or_default().to_string();
            Ok(vec![
                quote(&variant_label(v, k)),
                budget.to_string(),
                name,
                lam.to_string(),
                spec.cost.total(&gamma).to_string(),
                iters.to_string(),
            ])
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(Table { rows, ..Table::new(&["series", "budget", "policy", "lambda1", "spend", "iterations"]) })
}

fn run_rates(variants: &[Scenario], metrics: &mut Vec<serde_json::Value>) -> Result<Table, HarnessError> {
    let mut table = Table::new(&["series", "node", "class", "is_seed", "average_degree", "gamma1"]);
    for (k, v) in variants.iter().enumerate() {
        let study = run_rate_study(v)?;
        let label = quote(&variant_label(v, k));
        for r in &study.rows {
            table.rows.push(vec![
                label.clone(),
                r.node.to_string(),
                r.class.map(|c| c.to_string()).unwrap_or_default(),
                r.is_seed.to_string(),
                r.average_degree.to_string(),
                r.gamma1.to_string(),
            ]);
        }
        metrics.push(json!({
            "series": variant_label(v, k),
            "budget": study.budget,
            "lambda1": study.lambda1,
            "iterations": study.iterations,
            "converged": study.converged,
            "spearman_degree_rate": study.spearman,
            "seeds_at_lower": study.seeds_at_lower,
        }));
    }
    Ok(table)
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Meanfield => "meanfield",
        Engine::Gillespie => "gillespie",
        Engine::Timeseries => "timeseries",
        Engine::Threshold => "threshold",
        Engine::Optimize => "optimize",
        Engine::Rates => "rates",
    }
}

/// Runs all engines of `s`, writing `<name>_<engine>.csv` and
/// `<name>_summary.json` into `out_dir`.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<ScenarioReport, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io { path: out_dir.to_path_buf(), source })?;
    let variants = s.variants()?;
    let nets = networks(s, &variants)?;
    let mut outputs = Vec::new();
    let mut rate_metrics = Vec::new();
    let mut results = serde_json::Map::new();
    for &engine in &s.engines {
        let table = match engine {
            Engine::Meanfield => run_meanfield(&variants, &nets)?,
            Engine::Gillespie => run_gillespie(s, &variants, &nets)?,
            Engine::Timeseries => run_timeseries(s, &variants, &nets)?,
            Engine::Threshold => run_threshold(s, &variants)?,
            Engine::Optimize => run_optimize(s, &variants, &nets)?,
            Engine::Rates => run_rates(&variants, &mut rate_metrics)?,
        };
        let path = out_dir.join(format!("{}_{}.csv", s.name, engine_name(engine)));
        write_file(&path, &table.to_csv())?;
        results.insert(engine_name(engine).to_string(), table.to_json());
        outputs.push(path);
    }

    let resolved: Vec<serde_json::Value> = variants
        .iter()
        .zip(&nets)
        .enumerate()
        .map(|(k, (v, net))| {
            json!({
                "series": variant_label(v, k),
                "network": v.network,
                "nodes": net.as_ref().map(LayeredNetwork::n),
                "epidemic": v.epidemic_params(),
                "rates": v.rates,
                "sweep": v.sweep,
                "simulation": v.simulation,
                "meanfield": v.meanfield,
                "timeseries": v.timeseries,
                "optimize": v.optimize,
            })
        })
        .collect();
    let summary = json!({
        "scenario": s.name,
        "description": s.description,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": s.seed,
        "engines": s.engines,
        "outputs": outputs.iter().map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        "variants": resolved,
        "rates": rate_metrics,
    });
    let path = out_dir.join(format!("{}_summary.json", s.name));
    let text = serde_json::to_string_pretty(&summary).map_err(|e| HarnessError::Config(e.to_string()))?;
    write_file(&path, &(text + "\n"))?;
    outputs.push(path);
    Ok(ScenarioReport { name: s.name.clone(), outputs, summary, results })
}
