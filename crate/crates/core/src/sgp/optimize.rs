//! Successive geometric programming over per-node activation rates.
//!
//! Each round linearizes the spectral problem around the previous rates:
//! `lambda` is minimized subject to `Q~(g) u <= lambda u`, where `Q~` is the
//! shifted Jacobian with every `gamma1 + gamma2` denominator and every
//! `psi - eta' - gamma1` diagonal entry replaced by a monomial that
//! over-estimates it and is exact at the anchor. The previous rates with the
//! previous Perron pair stay feasible, and any feasible point bounds the true
//! Perron root from above, so the exact `lambda1(Q)` never increases.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cost::{uniform_allocation, CostFamily};
use super::gp::{gp_solve, Bounds, GpError, GpOptions, GpProblem};
use super::posynomial::{monomial_approx, Monomial, Posynomial};
use crate::netgen::LayeredNetwork;
use crate::params::{ActivityRates, EpidemicParams};
use crate::qmatrix::{self, build_q, lambda1, EntryFactor, PowerOptions, QEntry, QError};

#[derive(Debug, Error)]
pub enum SgpError {
    #[error(transparent)]
    Q(#[from] QError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("budget {budget} is below the minimum spend {min_spend}")]
    InfeasibleBudget { budget: f64, min_spend: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgpConfig {
    pub budget: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cost: CostFamily,
    /// Multiplicative trust-region factor around the previous rates.
    pub trust_region: f64,
    /// Stop once the relative decrease of the shifted Perron root is below this
    /// and the last step stayed well inside the trust region.
    pub tol: f64,
    pub max_iter: usize,
    /// Added to the shift so the diagonal entries stay positive at the bounds.
    pub psi_margin: f64,
    pub gp: GpOptions,
    pub power: PowerOptions,
}

impl SgpConfig {
    pub fn uniform(n: usize, budget: f64, lower: f64, upper: f64) -> Self {
        Self {
            budget,
            lower: vec![lower; n],
            upper: vec![upper; n],
            cost: CostFamily::reciprocal(),
            trust_region: 1.1,
            tol: 1e-6,
            max_iter: 50,
            psi_margin: 0.1,
            // rounds only use the primal point
            gp: GpOptions { gap_tol: 1e-9, refine_duals: false, ..GpOptions::default() },
            power: PowerOptions::default(),
        }
    }

    pub fn min_spend(&self) -> f64 {
        self.cost.total(&self.upper)
    }

    pub fn max_spend(&self) -> f64 {
        self.cost.total(&self.lower)
    }

    pub fn validate(&self, n: usize) -> Result<(), SgpError> {
        let bad = |m: String| Err(SgpError::Config(m));
        if self.lower.len() != n || self.upper.len() != n {
            return bad(format!("bounds cover {}/{} nodes, network has {n}", self.lower.len(), self.upper.len()));
        }
        if let Some(i) = (0..n).find(|&i| !(self.lower[i] > 0.0 && self.lower[i] < self.upper[i] && self.upper[i].is_finite())) {
            return bad(format!("node {i} needs 0 < lower < upper < inf, got [{}, {}]", self.lower[i], self.upper[i]));
        }
        self.cost.validate().map_err(SgpError::Config)?;
        if !(self.trust_region > 1.0) {
            return bad(format!("trust-region factor {} must exceed 1", self.trust_region));
        }
        if !(self.tol >= 0.0) || self.max_iter == 0 {
            return bad("tolerance must be non-negative and max_iter positive".into());
        }
        if !(self.psi_margin > 0.0) {
            return bad(format!("shift margin {} must be positive", self.psi_margin));
        }
        if !(self.budget.is_finite()) {
            return bad(format!("budget {} is not finite", self.budget));
        }
        let min_spend = self.min_spend();
        if self.budget < min_spend * (1.0 - 1e-9) {
            return Err(SgpError::InfeasibleBudget { budget: self.budget, min_spend });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgpResult {
    pub gamma1: Vec<f64>,
    /// Exact spectral abscissa of `Q` at `gamma1`.
    pub lambda1: f64,
    /// Exact `lambda1(Q)` at the start and after every accepted round.
    pub trace: Vec<f64>,
    /// GP objective of every round, shifted back to a `lambda1(Q)` scale.
    pub surrogate_trace: Vec<f64>,
    /// Perron vector of the shifted Jacobian, unit max-norm.
    pub u: Vec<f64>,
    /// `psi - eta' - gamma1_i` at the solution.
    pub zeta: Vec<f64>,
    pub psi: f64,
    pub spend: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

struct Evaluation {
    lambda: f64,
    vector: Vec<f64>,
}

fn evaluate(
    net: &LayeredNetwork,
    epi: &EpidemicParams,
    rates: &ActivityRates,
    gamma: &[f64],
    cfg: &SgpConfig,
) -> Result<Evaluation, SgpError> {
    let q = build_q(net, epi, &rates.with_gamma1(gamma), Some(&cfg.upper))?;
    let l = lambda1(&q, net, &cfg.power)?;
    let vector = l.vector.unwrap_or_else(|| vec![1.0; q.dim()]);
    Ok(Evaluation { lambda: l.value, vector })
}

/// Entries with identical row, column and factor merged into one.
fn merged_entries(net: &LayeredNetwork, epi: &EpidemicParams, rates: &ActivityRates) -> Vec<QEntry> {
    let mut entries = qmatrix::off_diagonal_entries(net, epi, rates);
    entries.sort_by(|a, b| (a.row, a.col, a.factor).cmp(&(b.row, b.col, b.factor)));
    let mut out: Vec<QEntry> = Vec::with_capacity(entries.len());
    for e in entries {
        match out.last_mut() {
            Some(last) if (last.row, last.col, last.factor) == (e.row, e.col, e.factor) => last.coef += e.coef,
            _ => out.push(e),
        }
    }
    out
}

struct Round {
    problem: GpProblem,
    bounds: Bounds,
    start: Vec<f64>,
}

/// Variable layout: rates `0..n`, `lambda` at `n`, then the Perron vector with
/// its largest entry pinned to 1 and left out.
struct Layout {
    n: usize,
    pin: usize,
}

impl Layout {
    fn n_vars(&self) -> usize {
        5 * self.n
    }

    fn lambda(&self) -> usize {
        self.n
    }

    fn u(&self, r: usize) -> Option<usize> {
        match r.cmp(&self.pin) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Less => Some(self.n + 1 + r),
            std::cmp::Ordering::Greater => Some(self.n + r),
        }
    }

    fn u_power(&self, r: usize, power: f64) -> Monomial {
        match self.u(r) {
            Some(v) => Monomial::var(v, 1.0, power),
            None => Monomial::constant(1.0),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_round(
    entries: &[QEntry],
    diag: &[(f64, bool)],
    rates: &ActivityRates,
    epi: &EpidemicParams,
    cfg: &SgpConfig,
    shift: f64,
    anchor: &[f64],
    perron: &[f64],
) -> Result<Round, SgpError> {
    let n = anchor.len();
    let dim = 4 * n;
    let umax = perron.iter().cloned().fold(0.0, f64::max);
    let u0: Vec<f64> = perron.iter().map(|&v| (v / umax).max(1e-12)).collect();
    let pin = (0..dim).max_by(|&a, &b| u0[a].total_cmp(&u0[b])).unwrap_or(0);
    let layout = Layout { n, pin };

    let mut x0 = vec![1.0; layout.n_vars()];
    x0[..n].copy_from_slice(anchor);
    for r in 0..dim {
        if let Some(v) = layout.u(r) {
            x0[v] = u0[r] / u0[pin];
        }
    }

    // condensed 1 / (gamma1 + gamma2) and the eliminated diagonal variable
    let mut inv_den = Vec::with_capacity(n);
    let mut zeta = Vec::with_capacity(n);
    for i in 0..n {
        let sum = Posynomial::new(vec![Monomial::var(i, 1.0, 1.0), Monomial::constant(rates.gamma2[i])]);
        inv_den.push(monomial_approx(&sum, &x0).map_err(|e| SgpError::Config(e.to_string()))?.powf(-1.0));
        let z0 = shift - epi.eta_prime - anchor[i];
        let ratio = anchor[i] / z0;
        zeta.push(Monomial::var(i, z0 * anchor[i].powf(ratio), -ratio));
    }
    let factor = |f: EntryFactor| match f {
        EntryFactor::One => Monomial::constant(1.0),
        EntryFactor::InactiveShare(i) => inv_den[i].clone().scale(rates.gamma2[i]),
        EntryFactor::ActiveShare(i) => inv_den[i].mul(&Monomial::var(i, 1.0, 1.0)),
        EntryFactor::Activation(i) => Monomial::var(i, 1.0, 1.0),
    };

    let inv_lambda = Monomial::var(layout.lambda(), 1.0, -1.0);
    let mut rows: Vec<Posynomial> = vec![Posynomial::default(); dim];
    for (r, &(c, with_gamma)) in diag.iter().enumerate() {
        let term = if with_gamma {
            Some(zeta[r % n].clone())
        } else if shift - c > 0.0 {
            Some(Monomial::constant(shift - c))
        } else {
            None
        };
        if let Some(t) = term {
            rows[r].push(t.mul(&inv_lambda));
        }
    }
    for e in entries {
        let t = factor(e.factor)
            .scale(e.coef)
            .mul(&layout.u_power(e.col, 1.0))
            .mul(&layout.u_power(e.row, -1.0))
            .mul(&inv_lambda);
        rows[e.row].push(t);
    }

    // start strictly inside the Perron constraints
    let mut lam = 0.0f64;
    let mut probe = x0.clone();
    probe[layout.lambda()] = 1.0;
    for row in &rows {
        lam = lam.max(row.eval(&probe));
    }
    x0[layout.lambda()] = lam * (1.0 + 1e-3);

    let mut budget = Posynomial::default();
    for i in 0..n {
        for m in cfg.cost.monomials(i, 1.0 / cfg.budget) {
            budget.push(m);
        }
    }
    let mut inequalities: Vec<Posynomial> = rows.into_iter().filter(|p| !p.terms.is_empty()).collect();
    inequalities.push(budget);

    let mut bounds = Bounds::none(layout.n_vars());
    let tr = cfg.trust_region;
    for i in 0..n {
        let g = anchor[i];
        let z0 = shift - epi.eta_prime - g;
        let zeta_factor = tr.powf(z0 / g);
        bounds.lower[i] = cfg.lower[i].max(g / tr).max(g / zeta_factor);
        bounds.upper[i] = cfg.upper[i].min(g * tr).min(g * zeta_factor);
    }
    for r in 0..dim {
        if let Some(v) = layout.u(r) {
            bounds.lower[v] = 1e-30;
            bounds.upper[v] = 1e30;
        }
    }
    let problem = GpProblem {
        n_vars: layout.n_vars(),
        objective: Monomial::var(layout.lambda(), 1.0, 1.0).into(),
        inequalities,
        equalities: Vec::new(),
    };
    Ok(Round { problem, bounds, start: x0 })
}

/// Minimizes `lambda1(Q)` over per-node activation rates under a budget.
pub fn sgp_optimize(
    net: &LayeredNetwork,
    epi: &EpidemicParams,
    rates: &ActivityRates,
    cfg: &SgpConfig,
) -> Result<SgpResult, SgpError> {
    let n = net.n();
    epi.validate().map_err(QError::from)?;
    rates.validate().map_err(QError::from)?;
    if rates.n() != n {
        return Err(QError::SizeMismatch { rates: rates.n(), n }.into());
    }
    cfg.validate(n)?;
    let shift = qmatrix::psi(epi, rates, &cfg.upper) + cfg.psi_margin;
    let finish = |gamma: Vec<f64>, ev: Evaluation, trace, surrogate_trace, iterations, converged, warnings| SgpResult {
        zeta: gamma.iter().map(|g| shift - epi.eta_prime - g).collect(),
        spend: cfg.cost.total(&gamma),
        gamma1: gamma,
        lambda1: ev.lambda,
        trace,
        surrogate_trace,
        u: ev.vector,
        psi: shift,
        iterations,
        converged,
        warnings,
    };

    if cfg.budget <= cfg.min_spend() * (1.0 + 1e-9) {
        let gamma = cfg.upper.clone();
        let ev = evaluate(net, epi, rates, &gamma, cfg)?;
        let trace = vec![ev.lambda];
        return Ok(finish(gamma, ev, trace, Vec::new(), 0, true, Vec::new()));
    }

    let entries = merged_entries(net, epi, rates);
    let diag = qmatrix::v_minus_entries(epi, rates);
    let mut gamma = uniform_allocation(&cfg.cost, cfg.budget, &cfg.lower, &cfg.upper);
    let mut ev = evaluate(net, epi, rates, &gamma, cfg)?;
    let mut trace = vec![ev.lambda];
    let mut surrogate_trace = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let round = build_round(&entries, &diag, rates, epi, cfg, shift, &gamma, &ev.vector)?;
        let opts = GpOptions { initial: Some(round.start), ..cfg.gp.clone() };
        let sol = match gp_solve(&round.problem, &round.bounds, &opts) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("round {}: geometric program failed ({e}); keeping the previous rates", iterations + 1));
                break;
            }
        };
        iterations += 1;
        surrogate_trace.push(sol.x[n] - shift);
        let candidate: Vec<f64> = (0..n).map(|i| sol.x[i].clamp(cfg.lower[i], cfg.upper[i])).collect();
        let next = evaluate(net, epi, rates, &candidate, cfg)?;
        let scale = ev.lambda + shift;
        if next.lambda > ev.lambda + 1e-10 * scale {
            // only solver noise can push the exact value up; stay put
            converged = true;
            break;
        }
        let improvement = (ev.lambda - next.lambda) / scale;
        let step = gamma.iter().zip(&candidate).map(|(a, b)| (b / a).ln().abs()).fold(0.0, f64::max);
        gamma = candidate;
        ev = next;
        trace.push(ev.lambda);
        // a step pressed against the trust region means the rates are still travelling
        if improvement < cfg.tol && step < 0.5 * cfg.trust_region.ln() {
            converged = true;
            break;
        }
    }
    Ok(finish(gamma, ev, trace, surrogate_trace, iterations, converged, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{gen_erdos_renyi, gen_random_regular};

    fn setup(n: usize, seed: u64) -> (LayeredNetwork, EpidemicParams, ActivityRates) {
        let a = gen_random_regular(n, 4, seed).unwrap();
        let b = gen_erdos_renyi(n, 0.2, seed + 1).unwrap();
        let net = LayeredNetwork::with_uniform_p(a, &b, 0.3).unwrap();
        let epi = EpidemicParams { beta_c: 0.15, delta: 0.2, kappa: 1.0, ..EpidemicParams::standard() };
        let rates = ActivityRates::uniform(n, 0.2, 0.2, 0.0, 1.0);
        (net, epi, rates)
    }

    #[test]
    fn minimum_spend_pins_upper_bounds() {
        let (net, epi, rates) = setup(20, 3);
        let cfg = SgpConfig::uniform(20, 20.0 / 0.3, 0.08, 0.3);
        let r = sgp_optimize(&net, &epi, &rates, &cfg).unwrap();
        assert!(r.gamma1.iter().all(|&g| g == 0.3));
        assert!(r.iterations <= 2);
        let q = build_q(&net, &epi, &rates.with_gamma1(&[0.3; 20]), None).unwrap();
        assert!((r.lambda1 - qmatrix::lambda1_dense(&q)).abs() < 1e-9);
    }

    #[test]
    fn maximum_spend_reaches_lower_bounds() {
        let (net, epi, rates) = setup(20, 4);
        let cfg = SgpConfig::uniform(20, 20.0 / 0.08, 0.08, 0.3);
        let r = sgp_optimize(&net, &epi, &rates, &cfg).unwrap();
        assert!(r.gamma1.iter().all(|&g| (g - 0.08).abs() < 1e-6), "{:?}", r.gamma1);
    }

    #[test]
    fn trace_is_monotone_and_feasible() {
        let (net, epi, rates) = setup(30, 5);
        let cfg = SgpConfig::uniform(30, 30.0 / 0.15, 0.08, 0.3);
        let r = sgp_optimize(&net, &epi, &rates, &cfg).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{:?}", r.trace);
        }
        assert!(r.spend <= cfg.budget * (1.0 + 1e-6));
        assert!(r.gamma1.iter().all(|&g| (0.08..=0.3).contains(&g)));
        assert!(r.trace.len() > 1, "{r:?}");
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    }

    #[test]
    fn infeasible_budget_rejected() {
        let (net, epi, rates) = setup(10, 6);
        let cfg = SgpConfig::uniform(10, 10.0, 0.08, 0.3);
        assert!(matches!(sgp_optimize(&net, &epi, &rates, &cfg), Err(SgpError::InfeasibleBudget { .. })));
    }
}
