//! First-order mean-field equations, per node (8N) and homogeneous (8).
//!
//! States are stored node-major with the slot order of [`Slot`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgen::LayeredNetwork;
use crate::ode::{integrate, OdeOptions, OdeSolution};
use crate::params::{activity_probability, ActivityRates, EpidemicParams, HomogeneousParams, ModelParams, ParamErrors};

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error(transparent)]
    Params(#[from] ParamErrors),
    #[error("state has {got} entries, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("seed fraction {0} outside [0, 1]")]
    SeedFraction(f64),
}

/// Position of each compartment/activity pair inside a node's 8 slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Slot {
    S1 = 0,
    S2,
    C1,
    C2,
    I1,
    I2,
    R1,
    R2,
}

pub const SLOT_NAMES: [&str; 8] = ["S1", "S2", "C1", "C2", "I1", "I2", "R1", "R2"];

/// Per-node probabilities, `8 * n` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfState {
    pub values: Vec<f64>,
}

impl MfState {
    pub fn n(&self) -> usize {
        self.values.len() / 8
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[8 * i..8 * i + 8]
    }

    pub fn get(&self, i: usize, slot: Slot) -> f64 {
        self.values[8 * i + slot as usize]
    }

    /// Disease-free equilibrium for the given activity rates.
    pub fn dfe(rates: &ActivityRates) -> Result<Self, MeanFieldError> {
        Self::seeded(rates, 0.0)
    }

    /// Disease-free equilibrium with a fraction of every node's susceptible
    /// mass moved into the carrier compartment, keeping the activity split.
    pub fn seeded(rates: &ActivityRates, fraction: f64) -> Result<Self, MeanFieldError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(MeanFieldError::SeedFraction(fraction));
        }
        let n = rates.n();
        let mut values = vec![0.0; 8 * n];
        for i in 0..n {
            let s2 = activity_probability(rates.gamma1[i], rates.gamma2[i])?;
            let v = &mut values[8 * i..8 * i + 8];
            v[Slot::S1 as usize] = (1.0 - fraction) * (1.0 - s2);
            v[Slot::S2 as usize] = (1.0 - fraction) * s2;
            v[Slot::C1 as usize] = fraction * (1.0 - s2);
            v[Slot::C2 as usize] = fraction * s2;
        }
        Ok(Self { values })
    }

    /// Mean over nodes of `R1 + R2`.
    pub fn prevalence(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        (0..n).map(|i| self.get(i, Slot::R1) + self.get(i, Slot::R2)).sum::<f64>() / n as f64
    }

    /// Mean over nodes of each slot.
    pub fn node_mean(&self) -> [f64; 8] {
        node_mean(&self.values)
    }
}

fn node_mean(values: &[f64]) -> [f64; 8] {
    let n = values.len() / 8;
    let mut out = [0.0; 8];
    for chunk in values.chunks_exact(8) {
        for k in 0..8 {
            out[k] += chunk[k];
        }
    }
    if n > 0 {
        for v in &mut out {
            *v /= n as f64;
        }
    }
    out
}

/// Shared state of the homogeneous model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomoMfState(pub [f64; 8]);

impl HomoMfState {
    pub fn dfe(hp: &HomogeneousParams) -> Self {
        Self::seeded(hp, 0.0)
    }

    pub fn seeded(hp: &HomogeneousParams, fraction: f64) -> Self {
        let s2 = hp.s2();
        let mut v = [0.0; 8];
        v[Slot::S1 as usize] = (1.0 - fraction) * (1.0 - s2);
        v[Slot::S2 as usize] = (1.0 - fraction) * s2;
        v[Slot::C1 as usize] = fraction * (1.0 - s2);
        v[Slot::C2 as usize] = fraction * s2;
        Self(v)
    }

    pub fn prevalence(&self) -> f64 {
        self.0[Slot::R1 as usize] + self.0[Slot::R2 as usize]
    }
}

/// Expected infection pressure on node `i` while inactive and while active.
pub fn expected_beta(i: usize, values: &[f64], net: &LayeredNetwork, epi: &EpidemicParams) -> (f64, f64) {
    let mut b1 = 0.0;
    for &k in net.static_neighbors(i) {
        let x = &values[8 * k..8 * k + 8];
        b1 += epi.beta_c * (x[2] + x[3]) + epi.beta_i * (x[4] + x[5]);
    }
    let mut ba = 0.0;
    for &(k, p) in net.temporal_neighbors(i) {
        let x = &values[8 * k..8 * k + 8];
        ba += p * (epi.beta_c * x[3] + epi.beta_i * x[5]);
    }
    (b1, b1 + ba)
}

/// Right-hand side for one node given its infection pressures and switching rates.
#[allow(clippy::too_many_arguments)]
fn node_rhs(
    x: &[f64],
    out: &mut [f64],
    b1: f64,
    b2: f64,
    epi: &EpidemicParams,
    (g1, g2): (f64, f64),
    (g1i, g2i): (f64, f64),
    (g1r, g2r): (f64, f64),
) {
    let (k, kb) = (epi.kappa, epi.kappa_bar());
    let (eta, ep, delta) = (epi.eta, epi.eta_prime, epi.delta);
    let [s1, s2, c1, c2, i1, i2, r1, r2] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]];
    out[0] = -(g1 + b1) * s1 + g2 * s2;
    out[1] = -(g2 + b2) * s2 + g1 * s1;
    out[2] = -(g1 + ep) * c1 + g2 * c2 + k * b1 * s1;
    out[3] = -(g2 + ep) * c2 + g1 * c1 + k * b2 * s2;
    out[4] = -(g1i + delta) * i1 + g2i * i2 + eta * c1 + kb * b1 * s1;
    out[5] = -(g2i + delta) * i2 + g1i * i1 + eta * c2 + kb * b2 * s2;
    out[6] = -g1r * r1 + g2r * r2 + delta * i1 + (ep - eta) * c1;
    out[7] = -g2r * r2 + g1r * r1 + delta * i2 + (ep - eta) * c2;
}

/// Time derivative of the per-node system, written into `out`.
pub fn derivative_into(values: &[f64], out: &mut [f64], net: &LayeredNetwork, params: &ModelParams) {
    let r = &params.rates;
    for i in 0..net.n() {
        let (b1, b2) = expected_beta(i, values, net, &params.epi);
        node_rhs(
            &values[8 * i..8 * i + 8],
            &mut out[8 * i..8 * i + 8],
            b1,
            b2,
            &params.epi,
            (r.gamma1[i], r.gamma2[i]),
            (r.gamma1_i[i], r.gamma2_i[i]),
            (r.gamma1_r[i], r.gamma2_r[i]),
        );
    }
}

pub fn derivative(state: &MfState, net: &LayeredNetwork, params: &ModelParams) -> MfState {
    let mut out = vec![0.0; state.values.len()];
    derivative_into(&state.values, &mut out, net, params);
    MfState { values: out }
}

/// Expected pressures in the homogeneous model.
pub fn expected_beta_homogeneous(x: &[f64; 8], hp: &HomogeneousParams) -> (f64, f64) {
    let e = &hp.epi;
    let b1 = hp.d1 * (e.beta_c * (x[2] + x[3]) + e.beta_i * (x[4] + x[5]));
    let b2 = b1 + hp.p * hp.d2 * (e.beta_c * x[3] + e.beta_i * x[5]);
    (b1, b2)
}

pub fn derivative_homogeneous(state: &HomoMfState, hp: &HomogeneousParams) -> HomoMfState {
    let mut out = [0.0; 8];
    let (b1, b2) = expected_beta_homogeneous(&state.0, hp);
    let g = (hp.gamma1, hp.gamma2);
    node_rhs(&state.0, &mut out, b1, b2, &hp.epi, g, (hp.gamma1_i, hp.gamma2_i), g);
    HomoMfState(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfSolution {
    pub times: Vec<f64>,
    /// Per-node mean of each slot at the recorded times.
    pub mean_states: Vec<[f64; 8]>,
    pub final_state: Vec<f64>,
    pub final_time: f64,
    pub converged: bool,
    pub prevalence: f64,
    /// Largest deviation of a node's probability sum from one along the recorded trajectory.
    pub max_mass_error: f64,
}

fn mass_error(values: &[f64]) -> f64 {
    values.chunks_exact(8).map(|c| (c.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
}

fn finish(sol: OdeSolution) -> MfSolution {
    let max_mass_error = sol.states.iter().map(|s| mass_error(s)).fold(mass_error(&sol.final_state), f64::max);
    let mean_states = sol.states.iter().map(|s| node_mean(s)).collect();
    let m = node_mean(&sol.final_state);
    MfSolution {
        times: sol.times,
        mean_states,
        prevalence: m[6] + m[7],
        final_state: sol.final_state,
        final_time: sol.final_time,
        converged: sol.converged,
        max_mass_error,
    }
}

pub fn integrate_network(
    initial: &MfState,
    net: &LayeredNetwork,
    params: &ModelParams,
    opts: &OdeOptions,
) -> Result<MfSolution, MeanFieldError> {
    params.validate_for(net.n())?;
    if initial.values.len() != 8 * net.n() {
        return Err(MeanFieldError::Shape { got: initial.values.len(), expected: 8 * net.n() });
    }
    let sol = integrate(|y, dy| derivative_into(y, dy, net, params), &initial.values, opts);
    Ok(finish(sol))
}

pub fn integrate_homogeneous(
    initial: &HomoMfState,
    hp: &HomogeneousParams,
    opts: &OdeOptions,
) -> Result<MfSolution, MeanFieldError> {
    hp.validate()?;
    let sol = integrate(
        |y, dy| {
            let x: [f64; 8] = y.try_into().expect("eight slots");
            dy.copy_from_slice(&derivative_homogeneous(&HomoMfState(x), hp).0);
        },
        &initial.0,
        opts,
    );
    Ok(finish(sol))
}

/// Steady-state homogeneous prevalence for each activity probability in `s2_values`,
/// holding the deactivation rate fixed.
pub fn prevalence_sweep_homogeneous(
    hp: &HomogeneousParams,
    s2_values: &[f64],
    seed_fraction: f64,
    opts: &OdeOptions,
) -> Result<Vec<f64>, MeanFieldError> {
    s2_values
        .par_iter()
        .map(|&s2| {
            let point = hp.with_s2(s2);
            integrate_homogeneous(&HomoMfState::seeded(&point, seed_fraction), &point, opts).map(|s| s.prevalence)
        })
        .collect()
}
