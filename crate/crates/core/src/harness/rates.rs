//! Per-node optimal activation rates against network position.

use serde::{Deserialize, Serialize};

use super::config::{OptimizeSpec, Scenario};
use super::network::build_network;
use super::HarnessError;
use crate::sgp::{sgp_optimize, SgpConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub node: usize,
    pub class: Option<usize>,
    /// Whether the node seeded the Barabasi-Albert layer.
    pub is_seed: bool,
    pub average_degree: f64,
    pub gamma1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudy {
    pub rows: Vec<RateRow>,
    pub budget: f64,
    pub lambda1: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Rank correlation between average degree and optimal rate.
    pub spearman: f64,
    /// Fraction of seed nodes within 1% of the lower bound.
    pub seeds_at_lower: f64,
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && x[idx[end + 1]] == x[idx[k]] {
            end += 1;
        }
        // ties share the average rank
        let avg = 0.5 * (k + end) as f64 + 1.0;
        for &i in &idx[k..=end] {
            r[i] = avg;
        }
        k = end + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn sgp_config(opt: &OptimizeSpec, n: usize, budget: f64) -> SgpConfig {
    SgpConfig {
        cost: opt.cost.clone(),
        tol: opt.tol,
        max_iter: opt.max_iter,
        ..SgpConfig::uniform(n, budget, opt.lower, opt.upper)
    }
}

pub fn run_rate_study(s: &Scenario) -> Result<RateStudy, HarnessError> {
    let opt = s.optimize.as_ref().ok_or_else(|| HarnessError::Config("rate study needs an [optimize] table".into()))?;
    let built = build_network(&s.network, s.seed)?;
    let n = built.net.n();
    let per_node = opt
        .budget_per_node
        .ok_or_else(|| HarnessError::Config("rate study needs optimize.budget_per_node".into()))?;
    let budget = per_node * n as f64;
    let rates = s.rates.activity_rates(n)?;
    let cfg = sgp_config(opt, n, budget);
    let res = sgp_optimize(&built.net, &s.epidemic_params(), &rates, &cfg).map_err(|e| HarnessError::engine(&s.name, "sgp", e))?;

    let mut is_seed = vec![false; n];
    for &h in &built.hubs {
        is_seed[h] = true;
    }
    let rows: Vec<RateRow> = (0..n)
        .map(|i| {
            Ok(RateRow {
                node: i,
                class: built.classes.as_ref().map(|c| c[i]),
                is_seed: is_seed[i],
                average_degree: built.net.average_degree(i)?,
                gamma1: res.gamma1[i],
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    let degrees: Vec<f64> = rows.iter().map(|r| r.average_degree).collect();
    let seeds_at_lower = if built.hubs.is_empty() {
        0.0
    } else {
        built.hubs.iter().filter(|&&h| res.gamma1[h] <= opt.lower * 1.01).count() as f64 / built.hubs.len() as f64
    };
    Ok(RateStudy {
        spearman: spearman(&degrees, &res.gamma1),
        rows,
        budget,
        lambda1: res.lambda1,
        iterations: res.iterations,
        converged: res.converged,
        seeds_at_lower,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_known_values() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // ranks with ties: x -> 1, 2.5, 2.5, 4; Pearson of ranks by hand
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]);
        let (rx, ry) = ([1.0, 2.5, 2.5, 4.0], [1.0, 3.0, 2.0, 4.0]);
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - 2.5) * (b - 2.5)).sum();
        let vx: f64 = rx.iter().map(|a| (a - 2.5f64).powi(2)).sum();
        let vy: f64 = ry.iter().map(|a| (a - 2.5f64).powi(2)).sum();
        assert!((r - cov / (vx * vy).sqrt()).abs() < 1e-15);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_nan());
    }
}
