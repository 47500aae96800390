//! Per-node activation cost `f(g) = sum_k c_k g^(-p_k)` with `c_k, p_k > 0`.
//!
//! Every member is a posynomial in `1 / g`, strictly decreasing in `g`, so the
//! budget constraint stays GP-compatible and the inverse is well defined.

use serde::{Deserialize, Serialize};

use super::posynomial::Monomial;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFamily {
    /// `(coefficient, power)` pairs.
    pub terms: Vec<(f64, f64)>,
}

impl Default for CostFamily {
    fn default() -> Self {
        Self::reciprocal()
    }
}

impl CostFamily {
    /// `f(g) = 1 / g`.
    pub fn reciprocal() -> Self {
        Self { terms: vec![(1.0, 1.0)] }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.terms.is_empty() {
            return Err("cost family has no terms".into());
        }
        for &(c, p) in &self.terms {
            if !(c > 0.0 && c.is_finite() && p > 0.0 && p.is_finite()) {
                return Err(format!("cost term {c} * g^-{p} needs positive finite coefficient and power"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, g: f64) -> f64 {
        self.terms.iter().map(|&(c, p)| c * g.powf(-p)).sum()
    }

    pub fn total(&self, rates: &[f64]) -> f64 {
        rates.iter().map(|&g| self.eval(g)).sum()
    }

    /// The rate whose cost equals `value`.
    pub fn inverse(&self, value: f64) -> f64 {
        if let [(c, p)] = self.terms[..] {
            return (c / value).powf(1.0 / p);
        }
        let (mut lo, mut hi) = (1e-300f64.ln(), 1e300f64.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid.exp()) > value {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    /// Monomial terms of `f(x_var) * scale`.
    pub fn monomials(&self, var: usize, scale: f64) -> impl Iterator<Item = Monomial> + '_ {
        self.terms.iter().map(move |&(c, p)| Monomial::var(var, c * scale, -p))
    }
}

/// Rates `clamp(g, lower_i, upper_i)` with a common `g` chosen so the total
/// cost equals `budget` (or the closest feasible value).
pub fn uniform_allocation(cost: &CostFamily, budget: f64, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let at = |g: f64| -> Vec<f64> { lower.iter().zip(upper).map(|(&lo, &hi)| g.clamp(lo, hi)).collect() };
    let lo_all = lower.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_all = upper.iter().cloned().fold(0.0, f64::max);
    if cost.total(&at(lo_all)) <= budget {
        return at(lo_all);
    }
    if cost.total(&at(hi_all)) >= budget {
        return at(hi_all);
    }
    let (mut a, mut b) = (lo_all.ln(), hi_all.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if cost.total(&at(mid.exp())) > budget {
            a = mid;
        } else {
            b = mid;
        }
    }
    // the upper end of the bracket never overspends
    at(b.exp())
}
