//! Monomials, posynomials and their best local monomial approximation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PosyError {
    #[error("anchor must be strictly positive (variable {index} is {value})")]
    NonPositiveAnchor { index: usize, value: f64 },
    #[error("term {0} vanishes at the anchor")]
    VanishingTerm(usize),
    #[error("empty posynomial")]
    Empty,
}

/// `coef * prod_j x_j^e_j` with a sparse exponent list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exps: Vec<(usize, f64)>,
}

impl Monomial {
    pub fn new(coef: f64, exps: Vec<(usize, f64)>) -> Self {
        Self { coef, exps }
    }

    pub fn constant(coef: f64) -> Self {
        Self { coef, exps: Vec::new() }
    }

    /// `coef * x_var^power`.
    pub fn var(var: usize, coef: f64, power: f64) -> Self {
        Self { coef, exps: vec![(var, power)] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exps.iter().fold(self.coef, |acc, &(j, e)| acc * x[j].powf(e))
    }

    /// Product of two monomials, merging repeated variables.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut exps = self.exps.clone();
        for &(j, e) in &other.exps {
            match exps.iter_mut().find(|(k, _)| *k == j) {
                Some(slot) => slot.1 += e,
                None => exps.push((j, e)),
            }
        }
        exps.retain(|&(_, e)| e != 0.0);
        Monomial { coef: self.coef * other.coef, exps }
    }

    pub fn powf(&self, p: f64) -> Monomial {
        Monomial { coef: self.coef.powf(p), exps: self.exps.iter().map(|&(j, e)| (j, e * p)).collect() }
    }

    pub fn scale(mut self, s: f64) -> Monomial {
        self.coef *= s;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn push(&mut self, m: Monomial) {
        self.terms.push(m);
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Posynomial { terms: vec![m] }
    }
}

/// Monomial `g~` with `g~(x0) = g(x0)` and `g~ <= g` everywhere, built from
/// the weighted AM-GM inequality with weights `u_k(x0) / g(x0)`.
pub fn monomial_approx(g: &Posynomial, anchor: &[f64]) -> Result<Monomial, PosyError> {
    if g.terms.is_empty() {
        return Err(PosyError::Empty);
    }
    for (index, &value) in anchor.iter().enumerate() {
        if !(value > 0.0) {
            return Err(PosyError::NonPositiveAnchor { index, value });
        }
    }
    let values: Vec<f64> = g.terms.iter().map(|t| t.eval(anchor)).collect();
    if let Some(k) = values.iter().position(|&v| !(v > 0.0)) {
        return Err(PosyError::VanishingTerm(k));
    }
    let total: f64 = values.iter().sum();
    let mut out = Monomial::constant(1.0);
    let mut log_coef = 0.0;
    for (term, &v) in g.terms.iter().zip(&values) {
        let alpha = v / total;
        log_coef += alpha * (term.coef.ln() - alpha.ln());
        out = out.mul(&Monomial { coef: 1.0, exps: term.exps.iter().map(|&(j, e)| (j, e * alpha)).collect() });
    }
    out.coef = log_coef.exp();
    // fix the anchor value exactly against rounding in the exponent algebra
    let at_anchor = out.eval(anchor);
    out.coef *= total / at_anchor;
    Ok(out)
}
