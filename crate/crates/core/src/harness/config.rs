//! Declarative scenario files.
//!
//! A scenario is a TOML table. `[paper_scale]` and every `[[series]]` entry
//! are partial tables deep-merged over the base before it is deserialized, so
//! any field can be overridden per curve or for full-size runs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::params::{ActivityRates, EpidemicParams, HomogeneousParams};
use crate::sgp::CostFamily;

const BUILTIN: &[(&str, &str)] = &[
    ("fig3", include_str!("../../scenarios/fig3.toml")),
    ("fig4", include_str!("../../scenarios/fig4.toml")),
    ("fig5", include_str!("../../scenarios/fig5.toml")),
    ("fig6", include_str!("../../scenarios/fig6.toml")),
    ("fig7", include_str!("../../scenarios/fig7.toml")),
    ("fig8", include_str!("../../scenarios/fig8.toml")),
    ("fig9", include_str!("../../scenarios/fig9.toml")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Steady-state mean-field prevalence over the sweep.
    Meanfield,
    /// Monte Carlo prevalence over the sweep.
    Gillespie,
    /// Compartment sizes over time, from both engines.
    Timeseries,
    /// Reproduction numbers and stability case over the sweep.
    Threshold,
    /// Spectral abscissa against budget for each allocation policy.
    Optimize,
    /// Per-node optimal rates against average degree.
    Rates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// Activity probability `gamma1 / (gamma1 + gamma2)`, holding `gamma2`.
    S2,
    Gamma1,
    Gamma2,
    Kappa,
    BetaC,
    BetaI,
    /// Carrier exit rate; `eta` follows when a ratio is configured.
    EtaPrime,
    Delta,
    /// Uniform temporal link probability.
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Empty,
    RandomRegular { degree: usize },
    ErdosRenyi { prob: f64 },
    ErdosRenyiEdges { edges: usize },
    BarabasiAlbert { seed_size: usize, attach: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    /// Link-forming probability of each class; `p_ij = p_i p_j`.
    #[serde(default = "default_class_probs")]
    pub probs: [f64; 3],
    /// Class (0-based) that receives the Barabasi-Albert seed nodes.
    #[serde(default = "default_seed_class")]
    pub seed_class: usize,
}

fn default_class_probs() -> [f64; 3] {
    [0.1, 0.2, 0.8]
}

fn default_seed_class() -> usize {
    1
}

impl Default for ClassSpec {
    fn default() -> Self {
        Self { probs: default_class_probs(), seed_class: default_seed_class() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    /// No graph: the homogeneous closed-form model with the given degrees.
    Homogeneous { d1: f64, d2: f64, p: f64 },
    Generated {
        n: usize,
        static_layer: LayerSpec,
        temporal_layer: LayerSpec,
        #[serde(default)]
        p: Option<f64>,
        #[serde(default)]
        classes: Option<ClassSpec>,
    },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicSpec {
    #[serde(default = "d_beta_c")]
    pub beta_c: f64,
    #[serde(default = "d_beta_i")]
    pub beta_i: f64,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    #[serde(default = "d_eta")]
    pub eta: f64,
    #[serde(default = "d_eta_prime")]
    pub eta_prime: f64,
    #[serde(default = "d_delta")]
    pub delta: f64,
    /// When set, `beta_c = ratio * beta_i`.
    #[serde(default)]
    pub beta_c_ratio: Option<f64>,
    /// When set, `eta = ratio * eta_prime`.
    #[serde(default)]
    pub eta_ratio: Option<f64>,
}

fn d_beta_c() -> f64 {
    EpidemicParams::standard().beta_c
}
fn d_beta_i() -> f64 {
    EpidemicParams::standard().beta_i
}
fn d_kappa() -> f64 {
    EpidemicParams::standard().kappa
}
fn d_eta() -> f64 {
    EpidemicParams::standard().eta
}
fn d_eta_prime() -> f64 {
    EpidemicParams::standard().eta_prime
}
fn d_delta() -> f64 {
    EpidemicParams::standard().delta
}

impl Default for EpidemicSpec {
    fn default() -> Self {
        let t = EpidemicParams::standard();
        Self {
            beta_c: t.beta_c,
            beta_i: t.beta_i,
            kappa: t.kappa,
            eta: t.eta,
            eta_prime: t.eta_prime,
            delta: t.delta,
            beta_c_ratio: None,
            eta_ratio: None,
        }
    }
}

impl EpidemicSpec {
    pub fn resolve(&self) -> EpidemicParams {
        EpidemicParams {
            beta_c: self.beta_c_ratio.map_or(self.beta_c, |r| r * self.beta_i),
            beta_i: self.beta_i,
            kappa: self.kappa,
            eta: self.eta_ratio.map_or(self.eta, |r| r * self.eta_prime),
            eta_prime: self.eta_prime,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    #[serde(default)]
    pub gamma1: Option<f64>,
    /// Activity probability; overrides `gamma1` when set.
    #[serde(default)]
    pub s2: Option<f64>,
    pub gamma2: f64,
    #[serde(default)]
    pub gamma1_i: f64,
    #[serde(default = "d_gamma2_i")]
    pub gamma2_i: f64,
}

fn d_gamma2_i() -> f64 {
    1.0
}

impl RateSpec {
    pub fn gamma1(&self) -> Result<f64, HarnessError> {
        match (self.s2, self.gamma1) {
            (Some(s), _) if (0.0..1.0).contains(&s) => Ok(self.gamma2 * s / (1.0 - s)),
            (Some(s), _) => Err(HarnessError::Config(format!("activity probability {s} must lie in [0, 1)"))),
            (None, Some(g)) => Ok(g),
            (None, None) => Err(HarnessError::Config("rates need either gamma1 or s2".into())),
        }
    }

    pub fn activity_rates(&self, n: usize) -> Result<ActivityRates, HarnessError> {
        Ok(ActivityRates::uniform(n, self.gamma1()?, self.gamma2, self.gamma1_i, self.gamma2_i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "d_runs")]
    pub runs: usize,
    /// Nodes seeded as carriers in each run.
    #[serde(default = "d_seed_nodes")]
    pub seed_nodes: usize,
    #[serde(default)]
    pub horizon: Option<f64>,
}

fn d_runs() -> usize {
    100
}
fn d_seed_nodes() -> usize {
    1
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { runs: d_runs(), seed_nodes: d_seed_nodes(), horizon: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldSpec {
    /// Initial carrier fraction; defaults to `seed_nodes / N`, or 1e-4 without a graph.
    #[serde(default)]
    pub seed_fraction: Option<f64>,
    #[serde(default = "d_mf_horizon")]
    pub horizon: f64,
}

fn d_mf_horizon() -> f64 {
    1e4
}

impl Default for MeanFieldSpec {
    fn default() -> Self {
        Self { seed_fraction: None, horizon: d_mf_horizon() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeseriesSpec {
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Sgp,
    Degree,
    Closeness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    #[serde(default = "d_lower")]
    pub lower: f64,
    #[serde(default = "d_upper")]
    pub upper: f64,
    /// Explicit total budgets.
    #[serde(default)]
    pub budgets: Vec<f64>,
    /// Otherwise this many budgets evenly spanning the feasible range.
    #[serde(default = "d_budget_points")]
    pub budget_points: usize,
    /// For the per-node rate table: total budget as a multiple of `N`.
    #[serde(default)]
    pub budget_per_node: Option<f64>,
    #[serde(default = "d_policies")]
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub cost: CostFamily,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
}

fn d_lower() -> f64 {
    0.08
}
fn d_upper() -> f64 {
    0.3
}
fn d_budget_points() -> usize {
    5
}
fn d_policies() -> Vec<Policy> {
    vec![Policy::Sgp, Policy::Degree, Policy::Closeness]
}
fn d_tol() -> f64 {
    1e-6
}
fn d_max_iter() -> usize {
    50
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        Self {
            lower: d_lower(),
            upper: d_upper(),
            budgets: Vec::new(),
            budget_points: d_budget_points(),
            budget_per_node: None,
            policies: d_policies(),
            cost: CostFamily::default(),
            tol: d_tol(),
            max_iter: d_max_iter(),
        }
    }
}

fn d_seed() -> u64 {
    20_240_601
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    pub engines: Vec<Engine>,
    pub network: NetworkSpec,
    #[serde(default)]
    pub epidemic: EpidemicSpec,
    pub rates: RateSpec,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub meanfield: MeanFieldSpec,
    #[serde(default)]
    pub timeseries: Option<TimeseriesSpec>,
    #[serde(default)]
    pub optimize: Option<OptimizeSpec>,
    /// Curve label; set by series overlays.
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub series: Vec<toml::Table>,
    #[serde(default)]
    pub paper_scale: Option<toml::Table>,
    /// The merged table this scenario was read from.
    #[serde(skip)]
    pub source: toml::Table,
}

/// Recursively overlays `top` onto `base`; tables merge, everything else
/// replaces. A table that switches its `model` or `kind` tag replaces the old
/// one outright, since the old variant's fields would not fit.
pub fn deep_merge(base: &mut toml::Table, top: &toml::Table) {
    let retags = |b: &toml::Table, t: &toml::Table| {
        ["model", "kind"].iter().any(|tag| t.get(*tag).is_some_and(|v| b.get(*tag) != Some(v)))
    };
    for (k, v) in top {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) if !retags(b, t) => deep_merge(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

impl Scenario {
    pub fn parse(text: &str, paper_scale: bool) -> Result<Self, HarnessError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if paper_scale {
            if let Some(toml::Value::Table(ps)) = table.get("paper_scale").cloned() {
                deep_merge(&mut table, &ps);
            }
        }
        Self::from_table(table)
    }

    pub fn builtin(name: &str, paper_scale: bool) -> Result<Self, HarnessError> {
        let src = builtin_source(name).ok_or_else(|| HarnessError::UnknownScenario(name.to_string()))?;
        Self::parse(src, paper_scale)
    }

    pub fn from_table(table: toml::Table) -> Result<Self, HarnessError> {
        let mut s: Scenario =
            toml::Value::Table(table.clone()).try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        s.source = table;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(format!("scenario {}: {m}", self.name)));
        if self.engines.is_empty() {
            return bad("no engines selected".into());
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return bad("sweep grid is empty".into());
            }
        }
        if self.engines.contains(&Engine::Timeseries) && self.timeseries.is_none() {
            return bad("timeseries engine needs a [timeseries] table".into());
        }
        if self.engines.iter().any(|e| matches!(e, Engine::Optimize | Engine::Rates)) && self.optimize.is_none() {
            return bad("optimize and rates engines need an [optimize] table".into());
        }
        let graph_only = self.engines.iter().any(|e| matches!(e, Engine::Gillespie | Engine::Optimize | Engine::Rates));
        if graph_only && matches!(self.network, NetworkSpec::Homogeneous { .. }) {
            return bad("gillespie, optimize and rates engines need a concrete network".into());
        }
        if self.engines.contains(&Engine::Threshold) && !matches!(self.network, NetworkSpec::Homogeneous { .. }) {
            return bad("the threshold engine needs a homogeneous network".into());
        }
        if self.simulation.runs == 0 {
            return bad("simulation.runs must be positive".into());
        }
        Ok(())
    }

    /// One scenario per `[[series]]` entry (or just this one when there are none).
    pub fn variants(&self) -> Result<Vec<Scenario>, HarnessError> {
        if self.series.is_empty() {
            return Ok(vec![self.clone()]);
        }
        self.series
            .iter()
            .map(|overlay| {
                let mut t = self.source.clone();
                t.remove("series");
                t.remove("paper_scale");
                deep_merge(&mut t, overlay);
                Scenario::from_table(t)
            })
            .collect()
    }

    pub fn epidemic_params(&self) -> EpidemicParams {
        self.epidemic.resolve()
    }

    pub fn homogeneous_params(&self) -> Result<HomogeneousParams, HarnessError> {
        match self.network {
            NetworkSpec::Homogeneous { d1, d2, p } => Ok(HomogeneousParams {
                d1,
                d2,
                p,
                gamma1: self.rates.gamma1()?,
                gamma2: self.rates.gamma2,
                gamma1_i: self.rates.gamma1_i,
                gamma2_i: self.rates.gamma2_i,
                epi: self.epidemic_params(),
            }),
            _ => Err(HarnessError::Config(format!("scenario {} has no homogeneous network", self.name))),
        }
    }

    /// Copy with the sweep variable set to `value`.
    pub fn at(&self, var: SweepVar, value: f64) -> Scenario {
        let mut s = self.clone();
        match var {
            SweepVar::S2 => s.rates.s2 = Some(value),
            SweepVar::Gamma1 => {
                s.rates.gamma1 = Some(value);
                s.rates.s2 = None;
            }
            SweepVar::Gamma2 => s.rates.gamma2 = value,
            SweepVar::Kappa => s.epidemic.kappa = value,
            SweepVar::BetaC => {
                s.epidemic.beta_c = value;
                s.epidemic.beta_c_ratio = None;
            }
            SweepVar::BetaI => s.epidemic.beta_i = value,
            SweepVar::EtaPrime => s.epidemic.eta_prime = value,
            SweepVar::Delta => s.epidemic.delta = value,
            SweepVar::P => match &mut s.network {
                NetworkSpec::Homogeneous { p, .. } => *p = value,
                NetworkSpec::Generated { p, .. } => *p = Some(value),
                NetworkSpec::File { .. } => {}
            },
        }
        s
    }
}
