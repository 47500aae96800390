//! Exact event-driven simulation of the networked SCIR process.
//!
//! Each node carries an epidemic compartment and an activity flag. Static
//! links transmit all the time; a temporal link is realized with probability
//! `p_ij` when one endpoint activates while the other is active, and it is
//! dropped as soon as either endpoint deactivates.
//!
//! Per-node hazards live in a sum tree, and an event only touches the hazards
//! of the node itself and of its static neighbors and live partners.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgen::LayeredNetwork;
use crate::params::{Compartment, ModelParams, ParamErrors};
use crate::seeds::derive_seed;

#[derive(Debug, Error)]
pub enum GillespieError {
    #[error(transparent)]
    Params(#[from] ParamErrors),
    #[error("ensemble needs at least one run")]
    ZeroRuns,
    #[error("seed node {node} out of range for {n} nodes")]
    SeedOutOfRange { node: usize, n: usize },
    #[error("cannot seed {k} nodes in a network of {n}")]
    TooManySeeds { k: usize, n: usize },
    #[error("seeds must start as carriers or infected, not {0:?}")]
    SeedCompartment(Compartment),
    #[error("output times must be finite, non-negative and sorted")]
    OutputTimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Activate,
    Deactivate,
    /// Susceptible node infected, entering the given compartment.
    Infect(Compartment),
    CarrierToInfected,
    CarrierRecover,
    InfectedRecover,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub node: usize,
    pub kind: EventKind,
}

/// Snapshot of the process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub epi: Vec<Compartment>,
    pub active: Vec<bool>,
    /// Realized temporal links, each stored once as `(i, j)` with `i < j`.
    pub live_links: Vec<(usize, usize)>,
    pub t: f64,
}

impl SimState {
    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for x in &self.epi {
            c[x.index()] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    Nodes(Vec<usize>),
    /// `k` distinct nodes drawn uniformly.
    Random(usize),
}

/// Initial condition: seeded nodes in `seed_compartment`, everyone else
/// susceptible, activity flags drawn from each node's stationary activity
/// probability, and temporal links between active pairs realized with `p_ij`.
pub fn initial_state<R: Rng>(
    net: &LayeredNetwork,
    params: &ModelParams,
    seeding: &Seeding,
    seed_compartment: Compartment,
    rng: &mut R,
) -> Result<SimState, GillespieError> {
    let n = net.n();
    params.validate_for(n)?;
    if !matches!(seed_compartment, Compartment::C | Compartment::I) {
        return Err(GillespieError::SeedCompartment(seed_compartment));
    }
    let mut epi = vec![Compartment::S; n];
    match seeding {
        Seeding::Nodes(nodes) => {
            for &v in nodes {
                if v >= n {
                    return Err(GillespieError::SeedOutOfRange { node: v, n });
                }
                epi[v] = seed_compartment;
            }
        }
        Seeding::Random(k) => {
            if *k > n {
                return Err(GillespieError::TooManySeeds { k: *k, n });
            }
            for v in sample(rng, n, *k) {
                epi[v] = seed_compartment;
            }
        }
    }
    let mut active = vec![false; n];
    for i in 0..n {
        let g1 = params.rates.switch_rate(i, epi[i], false);
        let g2 = params.rates.switch_rate(i, epi[i], true);
        // a frozen switch starts inactive
        let prob = if g1 + g2 > 0.0 { g1 / (g1 + g2) } else { 0.0 };
        active[i] = rng.gen::<f64>() < prob;
    }
    let mut live_links = Vec::new();
    for i in 0..n {
        for &(j, p) in net.temporal_neighbors(i) {
            if i < j && active[i] && active[j] && rng.gen::<f64>() < p {
                live_links.push((i, j));
            }
        }
    }
    Ok(SimState { epi, active, live_links, t: 0.0 })
}

/// Binary sum tree over non-negative leaf weights.
#[derive(Debug, Clone)]
struct SumTree {
    size: usize,
    tree: Vec<f64>,
}

impl SumTree {
    fn new(n: usize) -> Self {
        let size = n.next_power_of_two().max(1);
        Self { size, tree: vec![0.0; 2 * size] }
    }

    fn set(&mut self, i: usize, w: f64) {
        let mut k = i + self.size;
        self.tree[k] = w;
        while k > 1 {
            k /= 2;
            self.tree[k] = self.tree[2 * k] + self.tree[2 * k + 1];
        }
    }

    fn total(&self) -> f64 {
        self.tree[1]
    }

    fn leaf(&self, i: usize) -> f64 {
        self.tree[i + self.size]
    }

    /// Leaf whose cumulative interval contains `u`, skipping zero-weight leaves.
    fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.size {
            let left = self.tree[2 * k];
            if (u < left && left > 0.0) || self.tree[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.size
    }
}

/// Running simulation bound to a network and parameter set.
pub struct Simulator<'a> {
    net: &'a LayeredNetwork,
    params: &'a ModelParams,
    epi: Vec<Compartment>,
    active: Vec<bool>,
    live: Vec<Vec<usize>>,
    static_c: Vec<u32>,
    static_i: Vec<u32>,
    live_c: Vec<u32>,
    live_i: Vec<u32>,
    hazards: SumTree,
    counts: [usize; 4],
    t: f64,
    rng: ChaCha8Rng,
}

impl<'a> Simulator<'a> {
    pub fn new(net: &'a LayeredNetwork, params: &'a ModelParams, state: SimState, rng: ChaCha8Rng) -> Result<Self, GillespieError> {
        let n = net.n();
        params.validate_for(n)?;
        let mut live = vec![Vec::new(); n];
        for &(i, j) in &state.live_links {
            live[i].push(j);
            live[j].push(i);
        }
        let mut sim = Self {
            net,
            params,
            epi: state.epi,
            active: state.active,
            live,
            static_c: vec![0; n],
            static_i: vec![0; n],
            live_c: vec![0; n],
            live_i: vec![0; n],
            hazards: SumTree::new(n),
            counts: [0; 4],
            t: state.t,
            rng,
        };
        for i in 0..n {
            sim.counts[sim.epi[i].index()] += 1;
            for &k in net.static_neighbors(i) {
                match sim.epi[k] {
                    Compartment::C => sim.static_c[i] += 1,
                    Compartment::I => sim.static_i[i] += 1,
                    _ => {}
                }
            }
            for &k in &sim.live[i] {
                match sim.epi[k] {
                    Compartment::C => sim.live_c[i] += 1,
                    Compartment::I => sim.live_i[i] += 1,
                    _ => {}
                }
            }
        }
        for i in 0..n {
            sim.refresh(i);
        }
        Ok(sim)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn counts(&self) -> [usize; 4] {
        self.counts
    }

    /// True when no carrier or infected node remains.
    pub fn is_disease_free(&self) -> bool {
        self.counts[1] + self.counts[2] == 0
    }

    pub fn state(&self) -> SimState {
        let mut live_links = Vec::new();
        for (i, partners) in self.live.iter().enumerate() {
            for &j in partners {
                if i < j {
                    live_links.push((i, j));
                }
            }
        }
        live_links.sort_unstable();
        SimState { epi: self.epi.clone(), active: self.active.clone(), live_links, t: self.t }
    }

    /// Total infection pressure on node `i` given its current activity.
    pub fn infection_pressure(&self, i: usize) -> f64 {
        let e = &self.params.epi;
        let mut b = e.beta_c * self.static_c[i] as f64 + e.beta_i * self.static_i[i] as f64;
        if self.active[i] {
            b += e.beta_c * self.live_c[i] as f64 + e.beta_i * self.live_i[i] as f64;
        }
        b
    }

    /// Enabled transitions of node `i` with their rates.
    pub fn node_events(&self, i: usize) -> Vec<(EventKind, f64)> {
        let e = &self.params.epi;
        let x = self.epi[i];
        let toggle = self.params.rates.switch_rate(i, x, self.active[i]);
        let kind = if self.active[i] { EventKind::Deactivate } else { EventKind::Activate };
        let mut out = vec![(kind, toggle)];
        match x {
            Compartment::S => {
                let b = self.infection_pressure(i);
                out.push((EventKind::Infect(Compartment::C), e.kappa * b));
                out.push((EventKind::Infect(Compartment::I), e.kappa_bar() * b));
            }
            Compartment::C => {
                out.push((EventKind::CarrierToInfected, e.eta));
                out.push((EventKind::CarrierRecover, e.carrier_recovery()));
            }
            Compartment::I => out.push((EventKind::InfectedRecover, e.delta)),
            Compartment::R => {}
        }
        out.retain(|&(_, r)| r > 0.0);
        out
    }

    /// Every enabled transition in the network.
    pub fn total_hazards(&self) -> Vec<(usize, EventKind, f64)> {
        (0..self.net.n()).flat_map(|i| self.node_events(i).into_iter().map(move |(k, r)| (i, k, r))).collect()
    }

    pub fn total_rate(&self) -> f64 {
        self.hazards.total()
    }

    fn refresh(&mut self, i: usize) {
        let rate = self.node_events(i).iter().map(|&(_, r)| r).sum();
        self.hazards.set(i, rate);
    }

    fn adjust(counter_c: &mut u32, counter_i: &mut u32, x: Compartment, delta: i32) {
        match x {
            Compartment::C => *counter_c = (*counter_c as i32 + delta) as u32,
            Compartment::I => *counter_i = (*counter_i as i32 + delta) as u32,
            _ => {}
        }
    }

    fn change_compartment(&mut self, i: usize, to: Compartment) {
        let from = self.epi[i];
        self.counts[from.index()] -= 1;
        self.counts[to.index()] += 1;
        self.epi[i] = to;
        let net = self.net;
        for &k in net.static_neighbors(i) {
            Self::adjust(&mut self.static_c[k], &mut self.static_i[k], from, -1);
            Self::adjust(&mut self.static_c[k], &mut self.static_i[k], to, 1);
            self.refresh(k);
        }
        for idx in 0..self.live[i].len() {
            let k = self.live[i][idx];
            Self::adjust(&mut self.live_c[k], &mut self.live_i[k], from, -1);
            Self::adjust(&mut self.live_c[k], &mut self.live_i[k], to, 1);
            self.refresh(k);
        }
        self.refresh(i);
    }

    fn link(&mut self, i: usize, k: usize) {
        self.live[i].push(k);
        self.live[k].push(i);
        let (xi, xk) = (self.epi[i], self.epi[k]);
        Self::adjust(&mut self.live_c[i], &mut self.live_i[i], xk, 1);
        Self::adjust(&mut self.live_c[k], &mut self.live_i[k], xi, 1);
        self.refresh(k);
    }

    fn activate(&mut self, i: usize) {
        self.active[i] = true;
        let net = self.net;
        for &(k, p) in net.temporal_neighbors(i) {
            if self.active[k] && self.rng.gen::<f64>() < p {
                self.link(i, k);
            }
        }
        self.refresh(i);
    }

    fn deactivate(&mut self, i: usize) {
        self.active[i] = false;
        let partners = std::mem::take(&mut self.live[i]);
        let xi = self.epi[i];
        for k in partners {
            let pos = self.live[k].iter().position(|&v| v == i).expect("live links are symmetric");
            self.live[k].swap_remove(pos);
            Self::adjust(&mut self.live_c[k], &mut self.live_i[k], xi, -1);
            self.refresh(k);
        }
        self.live_c[i] = 0;
        self.live_i[i] = 0;
        self.refresh(i);
    }

    /// Fires one event; `None` when every hazard is zero.
    pub fn step(&mut self) -> Option<Event> {
        let total = self.hazards.total();
        if !(total > 0.0) {
            return None;
        }
        let wait: f64 = self.rng.sample::<f64, _>(Exp1) / total;
        let node = self.hazards.find(self.rng.gen::<f64>() * total);
        let events = self.node_events(node);
        let node_total = self.hazards.leaf(node);
        let mut u = self.rng.gen::<f64>() * node_total;
        let mut kind = events.last().expect("selected node has a positive hazard").0;
        for &(k, r) in &events {
            if u < r {
                kind = k;
                break;
            }
            u -= r;
        }
        self.t += wait;
        match kind {
            EventKind::Activate => self.activate(node),
            EventKind::Deactivate => self.deactivate(node),
            EventKind::Infect(to) => self.change_compartment(node, to),
            EventKind::CarrierToInfected => self.change_compartment(node, Compartment::I),
            EventKind::CarrierRecover | EventKind::InfectedRecover => self.change_compartment(node, Compartment::R),
        }
        Some(Event { t: self.t, node, kind })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seeding: Seeding,
    pub seed_compartment: Compartment,
    /// Stop time; `None` runs until no carrier or infected node remains.
    pub horizon: Option<f64>,
    /// Times at which compartment counts are sampled.
    pub output_times: Vec<f64>,
    pub record_events: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeding: Seeding::Random(1),
            seed_compartment: Compartment::C,
            horizon: None,
            output_times: Vec::new(),
            record_events: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub events: Vec<Event>,
    /// Counts `[S, C, I, R]` at each configured output time.
    pub samples: Vec<[usize; 4]>,
    pub final_counts: [usize; 4],
    pub final_time: f64,
    pub n_events: usize,
}

impl Trajectory {
    /// Final fraction recovered.
    pub fn prevalence(&self) -> f64 {
        let n: usize = self.final_counts.iter().sum();
        if n == 0 {
            0.0
        } else {
            self.final_counts[3] as f64 / n as f64
        }
    }
}

fn check_output_times(times: &[f64]) -> Result<(), GillespieError> {
    let ok = times.iter().all(|t| t.is_finite() && *t >= 0.0) && times.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(GillespieError::OutputTimes)
    }
}

/// One realization from a fresh initial state.
pub fn run_single(net: &LayeredNetwork, params: &ModelParams, cfg: &RunConfig, seed: u64) -> Result<Trajectory, GillespieError> {
    check_output_times(&cfg.output_times)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = initial_state(net, params, &cfg.seeding, cfg.seed_compartment, &mut rng)?;
    let mut sim = Simulator::new(net, params, state, rng)?;
    let horizon = cfg.horizon.unwrap_or(f64::INFINITY);
    let mut samples = Vec::with_capacity(cfg.output_times.len());
    let mut next = 0;
    let mut events = Vec::new();
    let mut n_events = 0;
    let mut final_counts = sim.counts();
    let mut final_time = sim.t();
    while !sim.is_disease_free() && sim.t() < horizon {
        let before = sim.counts();
        let Some(ev) = sim.step() else { break };
        // counts hold on [previous event, ev.t)
        while next < cfg.output_times.len() && cfg.output_times[next] < ev.t.min(horizon) {
            samples.push(before);
            next += 1;
        }
        if ev.t > horizon {
            final_time = horizon;
            break;
        }
        final_counts = sim.counts();
        final_time = ev.t;
        n_events += 1;
        if cfg.record_events {
            events.push(ev);
        }
    }
    samples.resize(cfg.output_times.len(), final_counts);
    Ok(Trajectory { events, samples, final_counts, final_time, n_events })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub runs: usize,
    pub seed: u64,
    pub prevalence_mean: f64,
    pub prevalence_stderr: f64,
    /// Normal-approximation 95% band around the mean.
    pub prevalence_ci95: (f64, f64),
    pub prevalences: Vec<f64>,
    pub output_times: Vec<f64>,
    /// Mean compartment sizes `[S, C, I, R]` at each output time.
    pub mean_counts: Vec<[f64; 4]>,
}

const ENSEMBLE_STREAM: u64 = 0x6769_6c6c;

/// Independent runs in parallel; run `k` uses a seed derived from `(seed, k)`,
/// so results do not depend on scheduling.
pub fn run_ensemble(
    net: &LayeredNetwork,
    params: &ModelParams,
    cfg: &RunConfig,
    runs: usize,
    seed: u64,
) -> Result<EnsembleSummary, GillespieError> {
    if runs == 0 {
        return Err(GillespieError::ZeroRuns);
    }
    let cfg = RunConfig { record_events: false, ..cfg.clone() };
    let trajectories: Vec<Trajectory> = (0..runs)
        .into_par_iter()
        .map(|k| run_single(net, params, &cfg, derive_seed(seed, ENSEMBLE_STREAM, k as u64)))
        .collect::<Result<_, _>>()?;
    let prevalences: Vec<f64> = trajectories.iter().map(Trajectory::prevalence).collect();
    // shifted sums keep the variance exactly zero for identical runs
    let shift = prevalences[0];
    let (sd, sd2) = prevalences.iter().fold((0.0, 0.0), |(a, b), p| (a + (p - shift), b + (p - shift).powi(2)));
    let mean = shift + sd / runs as f64;
    let stderr = if runs > 1 {
        let var = ((sd2 - sd * sd / runs as f64) / (runs - 1) as f64).max(0.0);
        (var / runs as f64).sqrt()
    } else {
        0.0
    };
    let mut mean_counts = vec![[0.0; 4]; cfg.output_times.len()];
    for tr in &trajectories {
        for (acc, s) in mean_counts.iter_mut().zip(&tr.samples) {
            for k in 0..4 {
                acc[k] += s[k] as f64;
            }
        }
    }
    for acc in &mut mean_counts {
        for v in acc.iter_mut() {
            *v /= runs as f64;
        }
    }
    Ok(EnsembleSummary {
        runs,
        seed,
        prevalence_mean: mean,
        prevalence_stderr: stderr,
        prevalence_ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
        prevalences,
        output_times: cfg.output_times.clone(),
        mean_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{gen_random_regular, Layer};
    use crate::params::{ActivityRates, EpidemicParams};

    fn params(n: usize) -> ModelParams {
        ModelParams { epi: EpidemicParams::standard(), rates: ActivityRates::uniform(n, 0.2, 0.2, 0.0, 1.0) }
    }

    fn state(epi: Vec<Compartment>, active: Vec<bool>, live_links: Vec<(usize, usize)>) -> SimState {
        SimState { epi, active, live_links, t: 0.0 }
    }

    #[test]
    fn only_toggles_without_infection() {
        let net = LayeredNetwork::with_uniform_p(gen_random_regular(10, 2, 1).unwrap(), &Layer::empty(10), 0.3).unwrap();
        let p = params(10);
        let sim = Simulator::new(&net, &p, state(vec![Compartment::S; 10], vec![false; 10], vec![]), ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(sim.total_hazards().iter().all(|(_, k, _)| *k == EventKind::Activate));
        assert!((sim.total_rate() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn static_pressure_split() {
        use Compartment::*;
        let a = Layer::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let net = LayeredNetwork::with_uniform_p(a, &Layer::empty(4), 0.3).unwrap();
        let mut p = params(4);
        p.epi.kappa = 0.6;
        let sim = Simulator::new(&net, &p, state(vec![S, C, I, I], vec![false; 4], vec![]), ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((sim.infection_pressure(0) - 0.5).abs() < 1e-15);
        let ev = sim.node_events(0);
        let to_c = ev.iter().find(|e| e.0 == EventKind::Infect(C)).unwrap().1;
        let to_i = ev.iter().find(|e| e.0 == EventKind::Infect(I)).unwrap().1;
        assert!((to_c - 0.3).abs() < 1e-15 && (to_i - 0.2).abs() < 1e-15);
    }

    #[test]
    fn live_link_pressure() {
        use Compartment::*;
        let b = Layer::from_edges(2, &[(0, 1)]).unwrap();
        let net = LayeredNetwork::with_uniform_p(Layer::empty(2), &b, 0.3).unwrap();
        let p = params(2);
        let sim = Simulator::new(&net, &p, state(vec![S, C], vec![true, true], vec![(0, 1)]), ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((sim.infection_pressure(0) - 0.1).abs() < 1e-15);
        let sim = Simulator::new(&net, &p, state(vec![S, C], vec![true, true], vec![]), ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(sim.infection_pressure(0), 0.0);
    }

    #[test]
    fn activation_with_certain_links() {
        use Compartment::*;
        let b = Layer::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let net = LayeredNetwork::with_uniform_p(Layer::empty(4), &b, 1.0).unwrap();
        let mut p = params(4);
        // only node 0 can switch, and only on
        p.rates = ActivityRates::uniform(4, 0.0, 0.0, 0.0, 0.0);
        p.rates.gamma1[0] = 1.0;
        p.rates.gamma2 = vec![1e-300; 4];
        let mut sim = Simulator::new(&net, &p, state(vec![S; 4], vec![false, true, true, true], vec![]), ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ev = sim.step().unwrap();
        assert_eq!((ev.node, ev.kind), (0, EventKind::Activate));
        assert_eq!(sim.state().live_links, vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn deactivation_dissolves_links() {
        use Compartment::*;
        let b = Layer::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let net = LayeredNetwork::with_uniform_p(Layer::empty(3), &b, 1.0).unwrap();
        let mut p = params(3);
        p.rates = ActivityRates::uniform(3, 0.0, 0.0, 0.0, 0.0);
        p.rates.gamma2[0] = 1.0;
        p.rates.gamma1 = vec![1e-300; 3];
        p.rates.gamma1[0] = 0.0;
        let mut sim = Simulator::new(&net, &p, state(vec![S, C, S], vec![true; 3], vec![(0, 1), (0, 2)]), ChaCha8Rng::seed_from_u64(0)).unwrap();
        while let Some(ev) = sim.step() {
            if ev.kind == EventKind::Deactivate {
                break;
            }
        }
        let st = sim.state();
        assert!(!st.active[0]);
        assert!(st.live_links.is_empty());
        assert_eq!(sim.infection_pressure(0), 0.0);
    }

    #[test]
    fn invariants_hold_along_run() {
        let a = gen_random_regular(60, 3, 2).unwrap();
        let b = gen_random_regular(60, 10, 3).unwrap();
        let net = LayeredNetwork::with_uniform_p(a, &b, 0.3).unwrap();
        let p = params(60);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let init = initial_state(&net, &p, &Seeding::Random(5), Compartment::C, &mut rng).unwrap();
        let mut sim = Simulator::new(&net, &p, init, rng).unwrap();
        let mut last_t = 0.0;
        let mut last_r = 0;
        for _ in 0..5000 {
            let Some(ev) = sim.step() else { break };
            assert!(ev.t > last_t);
            last_t = ev.t;
            let st = sim.state();
            assert_eq!(st.counts().iter().sum::<usize>(), 60);
            assert_eq!(st.counts(), sim.counts());
            for &(i, j) in &st.live_links {
                assert!(st.active[i] && st.active[j] && net.b(i, j) == 1);
            }
            assert!(sim.counts()[3] >= last_r);
            last_r = sim.counts()[3];
        }
    }

    #[test]
    fn no_transmission_means_seeds_recover() {
        let net = LayeredNetwork::with_uniform_p(gen_random_regular(50, 4, 5).unwrap(), &gen_random_regular(50, 6, 6).unwrap(), 0.3).unwrap();
        let mut p = params(50);
        p.epi.beta_c = 0.0;
        p.epi.beta_i = 0.0;
        let cfg = RunConfig { seeding: Seeding::Random(7), ..Default::default() };
        let summary = run_ensemble(&net, &p, &cfg, 200, 1).unwrap();
        assert!(summary.prevalences.iter().all(|&x| x == 7.0 / 50.0));
        assert_eq!(summary.prevalence_stderr, 0.0);
    }

    #[test]
    fn isolated_layers_never_spread() {
        let net = LayeredNetwork::with_uniform_p(Layer::empty(30), &gen_random_regular(30, 4, 8).unwrap(), 0.0).unwrap();
        let cfg = RunConfig { seeding: Seeding::Nodes(vec![0, 1]), ..Default::default() };
        let s = run_ensemble(&net, &params(30), &cfg, 50, 2).unwrap();
        assert!(s.prevalences.iter().all(|&x| x == 2.0 / 30.0));
    }

    #[test]
    fn single_event_waiting_time() {
        // one inactive susceptible node that can only activate, rate 2
        let net = LayeredNetwork::with_uniform_p(Layer::empty(1), &Layer::empty(1), 0.3).unwrap();
        let mut p = params(1);
        p.rates = ActivityRates::uniform(1, 2.0, 0.0, 0.0, 0.0);
        let mut total = 0.0;
        let runs = 20_000;
        for s in 0..runs {
            let mut sim = Simulator::new(&net, &p, state(vec![Compartment::S], vec![false], vec![]), ChaCha8Rng::seed_from_u64(s)).unwrap();
            let ev = sim.step().unwrap();
            assert_eq!(ev.kind, EventKind::Activate);
            total += ev.t;
        }
        let mean = total / runs as f64;
        // Exp(2): mean 0.5, sd 0.5
        assert!((mean - 0.5).abs() < 3.0 * 0.5 / (runs as f64).sqrt(), "{mean}");
    }

    #[test]
    fn ensemble_is_reproducible() {
        let net = LayeredNetwork::with_uniform_p(gen_random_regular(40, 4, 1).unwrap(), &gen_random_regular(40, 8, 2).unwrap(), 0.3).unwrap();
        let cfg = RunConfig { seeding: Seeding::Random(2), output_times: vec![0.0, 5.0, 10.0], ..Default::default() };
        let a = run_ensemble(&net, &params(40), &cfg, 30, 77).unwrap();
        let b = run_ensemble(&net, &params(40), &cfg, 30, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean_counts[0][1], 2.0);
    }

    #[test]
    fn zero_runs_rejected() {
        let net = LayeredNetwork::with_uniform_p(Layer::empty(2), &Layer::empty(2), 0.3).unwrap();
        assert!(matches!(run_ensemble(&net, &params(2), &RunConfig::default(), 0, 1), Err(GillespieError::ZeroRuns)));
    }
}
