//! Geometric programs solved in log space by a barrier method.
//!
//! With `y = log x` every posynomial becomes a log-sum-exp function, which
//! is convex, and every monomial equality becomes a linear equation. Linear
//! equalities are eliminated through a null-space basis, so the barrier
//! iterations only see inequality constraints. A strictly feasible start is
//! found by a phase-I program in the same form, with one extra slack
//! variable that relaxes every constraint.

use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::{Mat, Side};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::posynomial::{Monomial, Posynomial};

#[derive(Debug, Error, PartialEq)]
pub enum GpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("problem has no strictly feasible point")]
    Infeasible,
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("barrier method did not converge: {0}")]
    NonConvergence(String),
}

/// `minimize objective` subject to `inequalities[k] <= 1` and `equalities[k] = 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GpProblem {
    pub n_vars: usize,
    pub objective: Posynomial,
    pub inequalities: Vec<Posynomial>,
    pub equalities: Vec<Monomial>,
}

/// Box on the original variables; `0` and `inf` mean unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn none(n: usize) -> Self {
        Self { lower: vec![0.0; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn uniform(n: usize, lower: f64, upper: f64) -> Self {
        Self { lower: vec![lower; n], upper: vec![upper; n] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpOptions {
    /// Stop once the duality-gap bound `m / t` drops below this.
    pub gap_tol: f64,
    pub mu: f64,
    /// Initial barrier weight per constraint, so the first duality-gap bound is `1 / t0`.
    pub t0: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Optional starting point, used when strictly feasible.
    pub initial: Option<Vec<f64>>,
    /// Refit the multipliers of nearly active constraints after the barrier
    /// path. Only the reported duals and KKT residual change.
    pub refine_duals: bool,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-10, mu: 20.0, t0: 1.0, newton_tol: 1e-12, max_newton: 5000, initial: None, refine_duals: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of the log-space constraints `log g_k(x) <= 0`.
    pub ineq_duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub eq_duals: Vec<f64>,
    /// Max of stationarity, complementarity and primal violation in log space.
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

/// Half-width, in log space, of the box phase I searches around the start.
const PHASE1_RADIUS: f64 = 40.0;

/// `log sum_k exp(b_k + a_k . w)` over a sparse support.
#[derive(Debug, Clone)]
struct Lse {
    support: Vec<usize>,
    offsets: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f64>,
    b: Vec<f64>,
}

impl Lse {
    fn from_terms(terms: impl IntoIterator<Item = (f64, Vec<(usize, f64)>)>) -> Self {
        let terms: Vec<_> = terms.into_iter().collect();
        let mut support: Vec<usize> = terms.iter().flat_map(|(_, e)| e.iter().map(|&(j, _)| j)).collect();
        support.sort_unstable();
        support.dedup();
        let mut offsets = vec![0];
        let mut idx = Vec::new();
        let mut val = Vec::new();
        let mut b = Vec::new();
        for (logc, exps) in terms {
            b.push(logc);
            let mut local: Vec<(u32, f64)> = Vec::new();
            for (j, e) in exps {
                if e == 0.0 {
                    continue;
                }
                let l = support.binary_search(&j).expect("support holds every index") as u32;
                match local.iter_mut().find(|(k, _)| *k == l) {
                    Some(s) => s.1 += e,
                    None => local.push((l, e)),
                }
            }
            for (l, e) in local {
                idx.push(l);
                val.push(e);
            }
            offsets.push(idx.len());
        }
        Self { support, offsets, idx, val, b }
    }

    fn from_posynomial(p: &Posynomial) -> Self {
        Self::from_terms(p.terms.iter().map(|t| (t.coef.ln(), t.exps.clone())))
    }

    fn n_terms(&self) -> usize {
        self.b.len()
    }

    fn exponents(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.offsets[k]..self.offsets[k + 1]).map(|p| (self.support[self.idx[p] as usize], self.val[p]))
    }

    /// Rewrites `w = shift + basis * z` in terms of `z`.
    fn reduce(&self, shift: &[f64], basis: &DMatrix<f64>) -> Lse {
        let m = basis.ncols();
        Lse::from_terms((0..self.n_terms()).map(|k| {
            let mut b = self.b[k];
            let mut dense = vec![0.0; m];
            for (j, e) in self.exponents(k) {
                b += e * shift[j];
                for (c, d) in dense.iter_mut().enumerate() {
                    *d += e * basis[(j, c)];
                }
            }
            (b, dense.into_iter().enumerate().filter(|(_, v)| v.abs() > 1e-15).collect())
        }))
    }

    fn exponents_dot(&self, k: usize, w: &[f64]) -> f64 {
        let mut z = self.b[k];
        for p in self.offsets[k]..self.offsets[k + 1] {
            z += self.val[p] * w[self.support[self.idx[p] as usize]];
        }
        z
    }

    fn value(&self, w: &[f64], z: &mut Vec<f64>) -> f64 {
        z.clear();
        z.extend((0..self.n_terms()).map(|k| self.exponents_dot(k, w)));
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if zmax == f64::NEG_INFINITY {
            return zmax;
        }
        zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln()
    }

    /// Value, and softmax weights left in `z`.
    fn value_weights(&self, w: &[f64], z: &mut Vec<f64>) -> f64 {
        let f = self.value(w, z);
        for v in z.iter_mut() {
            *v = (*v - f).exp();
        }
        f
    }

    /// Local gradient (indexed like `support`) from weights in `z`.
    fn local_grad(&self, z: &[f64], g: &mut Vec<f64>) {
        g.clear();
        g.resize(self.support.len(), 0.0);
        for (k, &wk) in z.iter().enumerate() {
            for p in self.offsets[k]..self.offsets[k + 1] {
                g[self.idx[p] as usize] += wk * self.val[p];
            }
        }
    }

    /// Adds `alpha * sum_k w_k a_k a_k^T + beta * g g^T` to the lower triangle of `h`.
    fn add_hessian(&self, z: &[f64], g: &[f64], alpha: f64, beta: f64, h: &mut Mat<f64>) {
        if alpha != 0.0 {
            for (k, &wk) in z.iter().enumerate() {
                let s = alpha * wk;
                if s == 0.0 {
                    continue;
                }
                let range = self.offsets[k]..self.offsets[k + 1];
                for p in range.clone() {
                    let gp = self.support[self.idx[p] as usize];
                    for q in range.clone() {
                        let gq = self.support[self.idx[q] as usize];
                        if gp >= gq {
                            h[(gp, gq)] += s * self.val[p] * self.val[q];
                        }
                    }
                }
            }
        }
        if beta != 0.0 {
            for (a, &ga) in g.iter().enumerate() {
                if ga == 0.0 {
                    continue;
                }
                let ia = self.support[a];
                for (c, &gc) in g.iter().enumerate().take(a + 1) {
                    h[(ia, self.support[c])] += beta * ga * gc;
                }
            }
        }
    }
}

/// Barrier problem `min t f0(w) - sum log(-f_c(w))`.
struct Barrier {
    dim: usize,
    objective: Lse,
    constraints: Vec<Lse>,
}

struct Scratch {
    z: Vec<f64>,
    g: Vec<f64>,
}

enum CenterOutcome {
    Centered,
    EarlyStop,
}

impl Barrier {
    fn phi(&self, t: f64, w: &[f64], s: &mut Scratch) -> Option<f64> {
        let mut acc = t * self.objective.value(w, &mut s.z);
        for c in &self.constraints {
            let f = c.value(w, &mut s.z);
            if !(f < 0.0) {
                return None;
            }
            acc -= (-f).ln();
        }
        acc.is_finite().then_some(acc)
    }

    fn strictly_feasible(&self, w: &[f64], s: &mut Scratch) -> bool {
        self.constraints.iter().all(|c| c.value(w, &mut s.z) < 0.0)
    }

    fn system(&self, t: f64, w: &[f64], grad: &mut [f64], h: &mut Mat<f64>, s: &mut Scratch) {
        grad.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.dim {
            for i in j..self.dim {
                h[(i, j)] = 0.0;
            }
        }
        self.objective.value_weights(w, &mut s.z);
        self.objective.local_grad(&s.z, &mut s.g);
        for (a, &ga) in s.g.iter().enumerate() {
            grad[self.objective.support[a]] += t * ga;
        }
        self.objective.add_hessian(&s.z, &s.g, t, -t, h);
        for c in &self.constraints {
            let f = c.value_weights(w, &mut s.z);
            c.local_grad(&s.z, &mut s.g);
            let inv = 1.0 / (-f);
            for (a, &ga) in s.g.iter().enumerate() {
                grad[c.support[a]] += inv * ga;
            }
            c.add_hessian(&s.z, &s.g, inv, inv * inv - inv, h);
        }
    }

    /// Newton centering at fixed `t`; `stop` may end it early.
    fn center(
        &self,
        t: f64,
        w: &mut [f64],
        opts: &GpOptions,
        steps: &mut usize,
        stop: &dyn Fn(&[f64]) -> bool,
    ) -> Result<CenterOutcome, GpError> {
        let n = self.dim;
        let mut s = Scratch { z: Vec::new(), g: Vec::new() };
        let mut grad = vec![0.0; n];
        let mut h = Mat::<f64>::zeros(n, n);
        let mut trial = vec![0.0; n];
        let mut phi = self.phi(t, w, &mut s).ok_or_else(|| GpError::NonConvergence("centering from an infeasible point".into()))?;
        loop {
            if stop(w) {
                return Ok(CenterOutcome::EarlyStop);
            }
            if *steps >= opts.max_newton {
                return Err(GpError::NonConvergence(format!("Newton step limit {} reached", opts.max_newton)));
            }
            *steps += 1;
            self.system(t, w, &mut grad, &mut h, &mut s);
            let dw = solve_spd(&h, &grad);
            let dec2: f64 = -grad.iter().zip(&dw).map(|(g, d)| g * d).sum::<f64>();
            if !(dec2 >= 0.0) || dec2 / 2.0 <= opts.newton_tol {
                return Ok(CenterOutcome::Centered);
            }
            let mut alpha = 1.0;
            let stalled;
            let slope = -dec2;
            loop {
                for i in 0..n {
                    trial[i] = w[i] + alpha * dw[i];
                }
                if let Some(p) = self.phi(t, &trial, &mut s) {
                    if p <= phi + 0.25 * alpha * slope {
                        stalled = phi - p <= 8.0 * f64::EPSILON * phi.abs().max(1.0);
                        phi = p;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-20 {
                    // no progress possible at working precision
                    return Ok(CenterOutcome::Centered);
                }
            }
            w.copy_from_slice(&trial);
            if w.iter().any(|v| v.abs() > 700.0) {
                return Err(GpError::Unbounded);
            }
            if stalled {
                return Ok(CenterOutcome::Centered);
            }
        }
    }

    /// Full barrier path; returns the final `t`.
    fn solve(&self, w: &mut [f64], opts: &GpOptions, steps: &mut usize, stop: &dyn Fn(&[f64]) -> bool) -> Result<(f64, bool), GpError> {
        let m = self.constraints.len() as f64;
        let mut t = opts.t0 * m.max(1.0);
        loop {
            if let CenterOutcome::EarlyStop = self.center(t, w, opts, steps, stop)? {
                return Ok((t, true));
            }
            if m == 0.0 || m / t < opts.gap_tol {
                return Ok((t, false));
            }
            t *= opts.mu;
        }
    }
}

/// Stationarity below which the central-path multipliers are kept as they are.
const REFIT_ABOVE: f64 = 1e-9;

/// Solves `h x = -g` for symmetric positive (semi)definite `h` given by its
/// lower triangle, adding diagonal regularization if the factorization fails.
fn solve_spd(h: &Mat<f64>, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    loop {
        let attempt = if reg == 0.0 {
            h.llt(Side::Lower).ok()
        } else {
            let mut hr = h.clone();
            for i in 0..n {
                hr[(i, i)] += reg;
            }
            hr.llt(Side::Lower).ok()
        };
        if let Some(llt) = attempt {
            let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| -g[i]);
            llt.solve_in_place(&mut rhs);
            let x: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
            if x.iter().all(|v| v.is_finite()) {
                return x;
            }
        }
        reg = if reg == 0.0 { scale * 1e-14 } else { reg * 100.0 };
        if reg > scale * 1e6 {
            return vec![0.0; n];
        }
    }
}

fn validate(problem: &GpProblem, bounds: &Bounds) -> Result<(), GpError> {
    let n = problem.n_vars;
    let bad = |msg: String| Err(GpError::Invalid(msg));
    if bounds.lower.len() != n || bounds.upper.len() != n {
        return bad(format!("bounds cover {} / {} variables, expected {n}", bounds.lower.len(), bounds.upper.len()));
    }
    if problem.objective.terms.is_empty() {
        return bad("empty objective".into());
    }
    let check = |m: &Monomial, what: &str| -> Result<(), GpError> {
        if !(m.coef > 0.0) || !m.coef.is_finite() {
            return Err(GpError::Invalid(format!("{what} has non-positive coefficient {}", m.coef)));
        }
        if let Some(&(j, e)) = m.exps.iter().find(|(j, e)| *j >= n || !e.is_finite()) {
            return Err(GpError::Invalid(format!("{what} has bad exponent {e} on variable {j}")));
        }
        Ok(())
    };
    for t in &problem.objective.terms {
        check(t, "objective")?;
    }
    for (k, p) in problem.inequalities.iter().enumerate() {
        if p.terms.is_empty() {
            return bad(format!("inequality {k} is empty"));
        }
        for t in &p.terms {
            check(t, &format!("inequality {k}"))?;
        }
    }
    for (k, m) in problem.equalities.iter().enumerate() {
        check(m, &format!("equality {k}"))?;
    }
    for j in 0..n {
        let (lo, hi) = (bounds.lower[j], bounds.upper[j]);
        if !(lo >= 0.0) || !(hi > 0.0) || lo >= hi {
            return bad(format!("variable {j} has empty or invalid bounds [{lo}, {hi}]"));
        }
    }
    Ok(())
}

/// Null-space parametrization `y = shift + basis z` of the equalities `E y = d`.
fn equality_space(problem: &GpProblem) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>, Vec<f64>), GpError> {
    let n = problem.n_vars;
    let p = problem.equalities.len();
    let mut e = DMatrix::<f64>::zeros(n.max(p), n);
    let mut d = vec![0.0; p];
    for (r, m) in problem.equalities.iter().enumerate() {
        for &(j, v) in &m.exps {
            e[(r, j)] += v;
        }
        d[r] = -m.coef.ln();
    }
    let svd = e.clone().svd(true, true);
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * 1e-12 * n as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let e_rows = e.rows(0, p).into_owned();
    let d_vec = nalgebra::DVector::from_vec(d.clone());
    let shift = if p > 0 {
        let pinv = e_rows.clone().pseudo_inverse(tol).map_err(|m| GpError::Invalid(m.to_string()))?;
        let s = &pinv * &d_vec;
        if (&e_rows * &s - &d_vec).amax() > 1e-9 * (1.0 + d_vec.amax()) {
            return Err(GpError::Infeasible);
        }
        s.iter().cloned().collect()
    } else {
        vec![0.0; n]
    };
    // rows of V^T beyond the rank span the null space
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let null: Vec<usize> = order[rank..].to_vec();
    let basis = DMatrix::from_fn(n, null.len(), |i, c| vt[(null[c], i)]);
    Ok((shift, basis, e_rows, d))
}

fn start_point(bounds: &Bounds, initial: Option<&[f64]>) -> Vec<f64> {
    (0..bounds.lower.len())
        .map(|j| {
            let (lo, hi) = (bounds.lower[j], bounds.upper[j]);
            let (llo, lhi) = (lo.ln(), hi.ln());
            let center = match (lo > 0.0, hi.is_finite()) {
                (true, true) => 0.5 * (llo + lhi),
                (true, false) => llo + 1.0,
                (false, true) => lhi - 1.0,
                (false, false) => 0.0,
            };
            match initial {
                Some(x) if x[j] > 0.0 => {
                    let y = x[j].ln();
                    // keep the guess but pull it off an active bound
                    let margin = if lo > 0.0 && hi.is_finite() { 1e-6 * (lhi - llo) } else { 1e-6 };
                    let y = if lo > 0.0 { y.max(llo + margin) } else { y };
                    if hi.is_finite() {
                        y.min(lhi - margin)
                    } else {
                        y
                    }
                }
                _ => center,
            }
        })
        .collect()
}

/// Solves a geometric program. The returned duals refer to the log-space form.
pub fn gp_solve(problem: &GpProblem, bounds: &Bounds, opts: &GpOptions) -> Result<GpSolution, GpError> {
    validate(problem, bounds)?;
    let n = problem.n_vars;
    if let Some(init) = &opts.initial {
        if init.len() != n {
            return Err(GpError::Invalid(format!("initial point has {} entries, expected {n}", init.len())));
        }
    }
    let (shift, basis, e_rows, d) = if problem.equalities.is_empty() {
        (vec![0.0; n], DMatrix::identity(n, n), DMatrix::zeros(0, n), Vec::new())
    } else {
        equality_space(problem)?
    };
    let reduced = !problem.equalities.is_empty();
    let dim = basis.ncols();

    // every constraint in full log space: inequalities, then lower, then upper bounds
    let mut full: Vec<Lse> = problem.inequalities.iter().map(Lse::from_posynomial).collect();
    let mut lower_idx = Vec::new();
    let mut upper_idx = Vec::new();
    for j in 0..n {
        if bounds.lower[j] > 0.0 {
            lower_idx.push((j, full.len()));
            full.push(Lse::from_terms([(bounds.lower[j].ln(), vec![(j, -1.0)])]));
        }
    }
    for j in 0..n {
        if bounds.upper[j].is_finite() {
            upper_idx.push((j, full.len()));
            full.push(Lse::from_terms([(-bounds.upper[j].ln(), vec![(j, 1.0)])]));
        }
    }
    let objective_full = Lse::from_posynomial(&problem.objective);
    let to_space = |l: &Lse| if reduced { l.reduce(&shift, &basis) } else { l.clone() };
    let phase2 = Barrier { dim, objective: to_space(&objective_full), constraints: full.iter().map(to_space).collect() };

    let y_start = start_point(bounds, opts.initial.as_deref());
    let mut w: Vec<f64> = if reduced {
        (0..dim).map(|c| (0..n).map(|j| basis[(j, c)] * (y_start[j] - shift[j])).sum()).collect()
    } else {
        y_start
    };
    let mut steps = 0;
    let mut scratch = Scratch { z: Vec::new(), g: Vec::new() };

    if !phase2.strictly_feasible(&w, &mut scratch) {
        // phase I: minimize s subject to f_c(w) <= s and s >= -1
        let s_index = dim;
        let worst = phase2.constraints.iter().map(|c| c.value(&w, &mut scratch.z)).fold(f64::NEG_INFINITY, f64::max);
        let lift = |l: &Lse| {
            Lse::from_terms((0..l.n_terms()).map(|k| {
                let mut e: Vec<(usize, f64)> = l.exponents(k).collect();
                e.push((s_index, -1.0));
                (l.b[k], e)
            }))
        };
        let mut constraints: Vec<Lse> = phase2.constraints.iter().map(lift).collect();
        constraints.push(Lse::from_terms([(-1.0, vec![(s_index, -1.0)])]));
        // keep the search near the start; otherwise directions that only add
        // slack can run off before the slack variable turns negative
        for j in 0..dim {
            constraints.push(Lse::from_terms([(-(w[j] + PHASE1_RADIUS), vec![(j, 1.0)])]));
            constraints.push(Lse::from_terms([(w[j] - PHASE1_RADIUS, vec![(j, -1.0)])]));
        }
        let phase1 = Barrier { dim: dim + 1, objective: Lse::from_terms([(0.0, vec![(s_index, 1.0)])]), constraints };
        let mut ws = w.clone();
        ws.push(worst.max(-0.5) + 1.0);
        let p1_opts = GpOptions { gap_tol: 1e-12, ..opts.clone() };
        let (_, early) = phase1.solve(&mut ws, &p1_opts, &mut steps, &|v: &[f64]| v[s_index] < 0.0)?;
        w.copy_from_slice(&ws[..dim]);
        if !early || !phase2.strictly_feasible(&w, &mut scratch) {
            return Err(GpError::Infeasible);
        }
    }

    let (t, _) = phase2.solve(&mut w, opts, &mut steps, &|_: &[f64]| false)?;

    let y: Vec<f64> = if reduced {
        (0..n).map(|j| shift[j] + (0..dim).map(|c| basis[(j, c)] * w[c]).sum::<f64>()).collect()
    } else {
        w.clone()
    };
    let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let objective = problem.objective.eval(&x);
    if !(objective > 0.0) || !objective.is_finite() {
        return Err(GpError::Unbounded);
    }

    // multipliers from the central path, then KKT residual in full log space
    let dense_grad = |l: &Lse, s: &mut Scratch| -> nalgebra::DVector<f64> {
        let mut out = nalgebra::DVector::zeros(n);
        l.value_weights(&y, &mut s.z);
        l.local_grad(&s.z, &mut s.g);
        for (a, &g) in s.g.iter().enumerate() {
            out[l.support[a]] += g;
        }
        out
    };
    let values: Vec<f64> = full.iter().map(|c| c.value(&y, &mut scratch.z)).collect();
    let mut duals: Vec<f64> = values.iter().map(|f| 1.0 / (t * -f)).collect();
    // stationarity is measured after projecting out the equality normals
    let project = if reduced {
        let et = e_rows.transpose();
        let pinv = (&e_rows * &et).pseudo_inverse(1e-14).map_err(|m| GpError::Invalid(m.to_string()))?;
        Some((et, pinv))
    } else {
        None
    };
    let projected = |v: nalgebra::DVector<f64>| match &project {
        Some((et, pinv)) => &v - et * (pinv * (&e_rows * &v)),
        None => v,
    };
    let obj_grad = dense_grad(&objective_full, &mut scratch);
    let grads: Vec<nalgebra::DVector<f64>> = full.iter().map(|c| dense_grad(c, &mut scratch)).collect();
    let residual_of = |lams: &[f64]| {
        let mut r = obj_grad.clone();
        for (g, &lam) in grads.iter().zip(lams) {
            r.axpy(lam, g, 1.0);
        }
        r
    };
    let station_of = |lams: &[f64]| projected(residual_of(lams)).amax();

    // 1/(t|f|) loses accuracy on nearly active constraints; refit those
    // multipliers by least squares on the stationarity equation
    let active: Vec<usize> = (0..full.len()).filter(|&c| -values[c] < 1e-6).collect();
    if opts.refine_duals && !active.is_empty() && station_of(&duals) > REFIT_ABOVE {
        let cols: Vec<_> = active.iter().map(|&c| projected(grads[c].clone())).collect();
        let mut fixed = duals.clone();
        for &c in &active {
            fixed[c] = 0.0;
        }
        let rhs = -projected(residual_of(&fixed));
        let fit: Vec<f64> = if cols.len() <= n {
            let a = Mat::<f64>::from_fn(n, cols.len(), |i, k| cols[k][i]);
            let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
            let z = a.col_piv_qr().solve_lstsq(&b);
            (0..cols.len()).map(|k| z[(k, 0)]).collect()
        } else {
            let a = nalgebra::DMatrix::from_columns(&cols);
            a.svd(true, true).solve(&rhs, 1e-14).map_err(|m| GpError::Invalid(m.to_string()))?.iter().cloned().collect()
        };
        let mut refit = fixed;
        for (k, &c) in active.iter().enumerate() {
            refit[c] = if fit[k].is_finite() { fit[k].max(0.0) } else { duals[c] };
        }
        if station_of(&refit) < station_of(&duals) {
            duals = refit;
        }
    }

    let mut eq_duals = Vec::new();
    let mut eq_violation: f64 = 0.0;
    if let Some((_, pinv)) = &project {
        let nu = pinv * (&e_rows * residual_of(&duals));
        eq_duals = nu.iter().map(|v| -v).collect();
        let yv = nalgebra::DVector::from_vec(y.clone());
        let resid = &e_rows * yv - nalgebra::DVector::from_vec(d);
        eq_violation = resid.amax();
    }
    let stationarity = station_of(&duals);
    let mut complementarity: f64 = 0.0;
    let mut primal: f64 = eq_violation;
    for (&f, &lam) in values.iter().zip(&duals) {
        complementarity = complementarity.max((lam * f).abs());
        primal = primal.max(f);
    }
    let kkt_residual = stationarity.max(complementarity).max(primal);

    let m_ineq = problem.inequalities.len();
    let mut lower_duals = vec![0.0; n];
    let mut upper_duals = vec![0.0; n];
    for &(j, c) in &lower_idx {
        lower_duals[j] = duals[c];
    }
    for &(j, c) in &upper_idx {
        upper_duals[j] = duals[c];
    }
    Ok(GpSolution {
        x,
        objective,
        ineq_duals: duals[..m_ineq].to_vec(),
        lower_duals,
        upper_duals,
        eq_duals,
        kkt_residual,
        newton_steps: steps,
    })
}
