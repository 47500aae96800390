//! Epidemic and activity-rate parameters.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Epidemic state of a node, ignoring activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Compartment {
    S,
    C,
    I,
    R,
}

impl Compartment {
    pub const ALL: [Compartment; 4] = [Compartment::S, Compartment::C, Compartment::I, Compartment::R];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid parameters: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ParamErrors(pub Vec<Violation>);

impl ParamErrors {
    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|v| v.message.contains(needle) || v.field.contains(needle))
    }
}

#[derive(Default)]
struct Checker(Vec<Violation>);

impl Checker {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation { field: field.into(), message: message.into() });
    }

    fn non_negative(&mut self, field: &str, v: f64) {
        if !(v >= 0.0) || !v.is_finite() {
            self.push(field, format!("{field} must be finite and non-negative (got {v})"));
        }
    }

    fn positive(&mut self, field: &str, v: f64) {
        if !(v > 0.0) || !v.is_finite() {
            self.push(field, format!("{field} must be finite and positive (got {v})"));
        }
    }

    fn unit(&mut self, field: &str, v: f64) {
        if !(0.0..=1.0).contains(&v) {
            self.push(field, format!("{field} in [0,1] required (got {v})"));
        }
    }

    fn finish(self) -> Result<(), ParamErrors> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ParamErrors(self.0))
        }
    }
}

/// Transmission and progression rates shared by every node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub beta_c: f64,
    pub beta_i: f64,
    /// Probability that a new infection starts as a carrier.
    pub kappa: f64,
    /// Carrier to infected.
    pub eta: f64,
    /// Total carrier exit rate; carriers recover at `eta_prime - eta`.
    pub eta_prime: f64,
    pub delta: f64,
}

impl EpidemicParams {
    /// Baseline epidemic constants, with `kappa = 1`.
    pub fn standard() -> Self {
        Self { beta_c: 0.1, beta_i: 0.2, kappa: 1.0, eta: 0.56, eta_prime: 0.8, delta: 1.5 }
    }

    pub fn kappa_bar(&self) -> f64 {
        1.0 - self.kappa
    }

    pub fn carrier_recovery(&self) -> f64 {
        self.eta_prime - self.eta
    }

    pub fn validate(&self) -> Result<(), ParamErrors> {
        let mut c = Checker::default();
        self.check(&mut c);
        c.finish()
    }

    fn check(&self, c: &mut Checker) {
        c.non_negative("beta_c", self.beta_c);
        c.non_negative("beta_i", self.beta_i);
        c.unit("kappa", self.kappa);
        c.positive("eta", self.eta);
        c.positive("delta", self.delta);
        if !(self.eta_prime > self.eta) {
            c.push("eta_prime", format!("eta_prime must exceed eta ({} <= {})", self.eta_prime, self.eta));
        }
    }
}

/// Per-node activation (`*1*`) and deactivation (`*2*`) rates.
///
/// Carriers share the susceptible rates, so there is a single pair for both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityRates {
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub gamma1_i: Vec<f64>,
    pub gamma2_i: Vec<f64>,
    pub gamma1_r: Vec<f64>,
    pub gamma2_r: Vec<f64>,
}

impl ActivityRates {
    /// Every node with the same rates; recovered nodes follow the susceptible rates.
    pub fn uniform(n: usize, gamma1: f64, gamma2: f64, gamma1_i: f64, gamma2_i: f64) -> Self {
        Self {
            gamma1: vec![gamma1; n],
            gamma2: vec![gamma2; n],
            gamma1_i: vec![gamma1_i; n],
            gamma2_i: vec![gamma2_i; n],
            gamma1_r: vec![gamma1; n],
            gamma2_r: vec![gamma2; n],
        }
    }

    pub fn n(&self) -> usize {
        self.gamma1.len()
    }

    /// Rate at which node `i` in compartment `x` leaves its current activity
    /// state: activation if `active == false`, deactivation otherwise.
    pub fn switch_rate(&self, i: usize, x: Compartment, active: bool) -> f64 {
        use Compartment::*;
        match (x, active) {
            (S | C, false) => self.gamma1[i],
            (S | C, true) => self.gamma2[i],
            (I, false) => self.gamma1_i[i],
            (I, true) => self.gamma2_i[i],
            (R, false) => self.gamma1_r[i],
            (R, true) => self.gamma2_r[i],
        }
    }

    /// Stationary probability of being active in compartment `x`.
    pub fn active_probability(&self, i: usize, x: Compartment) -> Result<f64, ParamErrors> {
        activity_probability(self.switch_rate(i, x, false), self.switch_rate(i, x, true))
    }

    pub fn with_gamma1(&self, gamma1: &[f64]) -> Self {
        let mut out = self.clone();
        out.gamma1 = gamma1.to_vec();
        out
    }

    pub fn validate(&self) -> Result<(), ParamErrors> {
        let mut c = Checker::default();
        self.check(&mut c);
        c.finish()
    }

    fn check(&self, c: &mut Checker) {
        let n = self.n();
        let fields: [(&str, &Vec<f64>); 6] = [
            ("gamma1", &self.gamma1),
            ("gamma2", &self.gamma2),
            ("gamma1_i", &self.gamma1_i),
            ("gamma2_i", &self.gamma2_i),
            ("gamma1_r", &self.gamma1_r),
            ("gamma2_r", &self.gamma2_r),
        ];
        for (name, v) in fields {
            if v.len() != n {
                c.push(name, format!("{name} has {} entries, expected {n}", v.len()));
                continue;
            }
            for (i, &x) in v.iter().enumerate() {
                if !(x >= 0.0) || !x.is_finite() {
                    c.push(format!("{name}[{i}]"), format!("{name}[{i}] must be finite and non-negative (got {x})"));
                }
            }
        }
        if self.gamma1.len() == n && self.gamma2.len() == n {
            for i in 0..n {
                if self.gamma1[i] + self.gamma2[i] <= 0.0 {
                    c.push(format!("gamma1[{i}]"), format!("gamma1 + gamma2 must be positive at node {i}"));
                }
            }
        }
    }
}

/// Parameters of the homogeneous model on regular layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousParams {
    pub d1: f64,
    pub d2: f64,
    pub p: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma1_i: f64,
    pub gamma2_i: f64,
    pub epi: EpidemicParams,
}

impl HomogeneousParams {
    /// Activity probability of susceptible and carrier nodes at the DFE.
    pub fn s2(&self) -> f64 {
        self.gamma1 / (self.gamma1 + self.gamma2)
    }

    pub fn s1(&self) -> f64 {
        self.gamma2 / (self.gamma1 + self.gamma2)
    }

    pub fn with_gamma1(mut self, gamma1: f64) -> Self {
        self.gamma1 = gamma1;
        self
    }

    /// Sets `gamma1` so that the stationary activity probability equals `s2`.
    pub fn with_s2(mut self, s2: f64) -> Self {
        self.gamma1 = self.gamma2 * s2 / (1.0 - s2);
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.epi.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<(), ParamErrors> {
        let mut c = Checker::default();
        self.epi.check(&mut c);
        c.non_negative("d1", self.d1);
        c.non_negative("d2", self.d2);
        c.unit("p", self.p);
        c.non_negative("gamma1", self.gamma1);
        c.non_negative("gamma2", self.gamma2);
        c.non_negative("gamma1_i", self.gamma1_i);
        c.non_negative("gamma2_i", self.gamma2_i);
        if self.gamma1 + self.gamma2 <= 0.0 {
            c.push("gamma1", "gamma1 + gamma2 must be positive");
        }
        c.finish()
    }

    /// Per-node rates equivalent to this homogeneous setting.
    pub fn activity_rates(&self, n: usize) -> ActivityRates {
        ActivityRates::uniform(n, self.gamma1, self.gamma2, self.gamma1_i, self.gamma2_i)
    }
}

/// Everything a heterogeneous model needs besides the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epi: EpidemicParams,
    pub rates: ActivityRates,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ParamErrors> {
        let mut c = Checker::default();
        self.epi.check(&mut c);
        self.rates.check(&mut c);
        c.finish()
    }

    /// Validates and additionally checks that the rates cover `n` nodes.
    pub fn validate_for(&self, n: usize) -> Result<(), ParamErrors> {
        let mut c = Checker::default();
        self.epi.check(&mut c);
        self.rates.check(&mut c);
        if self.rates.n() != n {
            c.push("gamma1", format!("rates cover {} nodes but the network has {n}", self.rates.n()));
        }
        c.finish()
    }
}

/// Stationary probability of being active for a two-state switch with
/// activation rate `gamma1` and deactivation rate `gamma2`.
pub fn activity_probability(gamma1: f64, gamma2: f64) -> Result<f64, ParamErrors> {
    if !(gamma1 + gamma2 > 0.0) || gamma1 < 0.0 || gamma2 < 0.0 {
        return Err(ParamErrors(vec![Violation {
            field: "gamma".into(),
            message: format!("activation and deactivation rates must be non-negative with a positive sum (got {gamma1}, {gamma2})"),
        }]));
    }
    Ok(gamma1 / (gamma1 + gamma2))
}
