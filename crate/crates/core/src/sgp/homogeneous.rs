//! Scalar budget problem on homogeneous networks: pick the single activation
//! rate that minimizes the reproduction number within the affordable range.

use serde::{Deserialize, Serialize};

use super::cost::CostFamily;
use super::optimize::SgpError;
use crate::params::HomogeneousParams;
use crate::threshold;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousOptimum {
    pub gamma1: f64,
    pub r0: f64,
    /// The feasible interval that was searched.
    pub interval: (f64, f64),
}

fn r0_at(hp: &HomogeneousParams, g: f64) -> Result<f64, SgpError> {
    threshold::r0(&hp.with_gamma1(g)).map_err(|e| SgpError::Config(e.to_string()))
}

/// Minimizes `r0` over `gamma1` in `[max(lower, f^-1(budget)), upper]`, where
/// `budget` is the per-node spend. A grid scan finds the best bracket and a
/// golden-section search refines it.
pub fn solve_homogeneous(
    hp: &HomogeneousParams,
    cost: &CostFamily,
    budget: f64,
    lower: f64,
    upper: f64,
) -> Result<HomogeneousOptimum, SgpError> {
    hp.validate().map_err(|e| SgpError::Config(e.to_string()))?;
    cost.validate().map_err(SgpError::Config)?;
    if !(lower > 0.0 && lower <= upper && upper.is_finite()) {
        return Err(SgpError::Config(format!("bounds [{lower}, {upper}] are invalid")));
    }
    let lo = lower.max(cost.inverse(budget));
    if lo > upper * (1.0 + 1e-12) {
        return Err(SgpError::InfeasibleBudget { budget, min_spend: cost.eval(upper) });
    }
    let lo = lo.min(upper);
    if upper - lo <= 1e-12 * upper {
        return Ok(HomogeneousOptimum { gamma1: upper, r0: r0_at(hp, upper)?, interval: (lo, upper) });
    }

    const GRID: usize = 200;
    let at = |k: usize| lo + (upper - lo) * k as f64 / GRID as f64;
    let mut best = (0, f64::INFINITY);
    for k in 0..=GRID {
        let v = r0_at(hp, at(k))?;
        if v < best.1 {
            best = (k, v);
        }
    }
    let (mut a, mut b) = (at(best.0.saturating_sub(1)), at((best.0 + 1).min(GRID)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (r0_at(hp, c)?, r0_at(hp, d)?);
    while b - a > 1e-12 * upper {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = r0_at(hp, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = r0_at(hp, d)?;
        }
    }
    let mut out = (best.1, at(best.0));
    for g in [a, b, 0.5 * (a + b)] {
        let v = r0_at(hp, g)?;
        if v < out.0 {
            out = (v, g);
        }
    }
    Ok(HomogeneousOptimum { gamma1: out.1, r0: out.0, interval: (lo, upper) })
}
