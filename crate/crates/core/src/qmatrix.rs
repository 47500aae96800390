//! Jacobian of the infected subsystem at the disease-free equilibrium.
//!
//! `Q = F + V+ - V-` acts on the `4N` infected coordinates ordered in blocks
//! `C1, C2, I1, I2`. `F + V+` is non-negative with zero diagonal and `V-` is
//! diagonal, so `Q^ = Q + psi I` is non-negative once `psi` dominates `V-`,
//! and its Perron root is `lambda1(Q) + psi`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::spectral_abscissa;
use crate::netgen::LayeredNetwork;
use crate::params::{ActivityRates, EpidemicParams, ParamErrors};

#[derive(Debug, Error)]
pub enum QError {
    #[error(transparent)]
    Params(#[from] ParamErrors),
    #[error("rates cover {rates} nodes but the network has {n}")]
    SizeMismatch { rates: usize, n: usize },
    #[error("node {0} has gamma1 + gamma2 = 0")]
    DegenerateRates(usize),
    #[error("shift {psi} is below diagonal entry {entry} of V-")]
    ShiftTooSmall { psi: f64, entry: f64 },
    #[error("power iteration did not converge after {0} iterations")]
    NonConvergence(usize),
}

/// Non-negative sparse matrix: CSR off-diagonal part plus a dense diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseNonneg {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
    pub diag: Vec<f64>,
}

impl SparseNonneg {
    /// From `(row, col, value)` triplets; duplicates are summed and diagonal
    /// triplets go to `diag`.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>, diag: Vec<f64>) -> Self {
        let mut diag = diag;
        diag.resize(n, 0.0);
        triplets.retain(|&(r, c, v)| {
            if r == c {
                diag[r] += v;
                false
            } else {
                v != 0.0
            }
        });
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col = Vec::with_capacity(triplets.len());
        let mut val: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *val.last_mut().expect("previous entry") += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col.push(c);
            val.push(v);
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, col, val, diag }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, Vec::new(), vec![1.0; n])
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col[k], self.val[k]))
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = self.diag[r] * x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            y[r] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            m[(r, r)] += self.diag[r];
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Principal submatrix on `rows` (in the given order).
    pub fn submatrix(&self, rows: &[usize]) -> SparseNonneg {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &r) in rows.iter().enumerate() {
            pos[r] = k;
        }
        let mut triplets = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    triplets.push((k, pos[c], v));
                }
            }
        }
        SparseNonneg::from_triplets(rows.len(), triplets, rows.iter().map(|&r| self.diag[r]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAssembly {
    pub n_nodes: usize,
    /// `F + V+` as a sparse matrix with zero diagonal.
    pub offdiag: SparseNonneg,
    /// Diagonal of `V-`.
    pub v_minus: Vec<f64>,
    pub psi: f64,
}

/// Row/column of node `i` in block `b` (0: C1, 1: C2, 2: I1, 3: I2).
pub fn q_index(n: usize, block: usize, i: usize) -> usize {
    block * n + i
}

/// The shift: the largest diagonal entry of `V-` when every activation rate
/// sits at its upper bound.
pub fn psi(epi: &EpidemicParams, rates: &ActivityRates, gamma1_upper: &[f64]) -> f64 {
    (0..rates.n())
        .map(|i| {
            (gamma1_upper[i] + epi.eta_prime)
                .max(rates.gamma2[i] + epi.eta_prime)
                .max(rates.gamma1_i[i] + epi.delta)
                .max(rates.gamma2_i[i] + epi.delta)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// What an off-diagonal entry of `Q` is multiplied by, besides its constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntryFactor {
    One,
    /// Inactive susceptible probability `S1_i = gamma2_i / (gamma1_i + gamma2_i)`.
    InactiveShare(usize),
    /// Active susceptible probability `S2_i = gamma1_i / (gamma1_i + gamma2_i)`.
    ActiveShare(usize),
    /// The activation rate `gamma1_i` itself.
    Activation(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub row: usize,
    pub col: usize,
    pub coef: f64,
    pub factor: EntryFactor,
}

/// Symbolic off-diagonal entries of `F + V+`. Only `gamma1` enters through
/// the factors; the other rates are folded into the coefficients.
pub fn off_diagonal_entries(net: &LayeredNetwork, epi: &EpidemicParams, rates: &ActivityRates) -> Vec<QEntry> {
    use EntryFactor::*;
    let n = net.n();
    let (k, kb) = (epi.kappa, epi.kappa_bar());
    let idx = |b: usize, i: usize| q_index(n, b, i);
    let mut out = Vec::new();
    let mut push = |row: usize, col: usize, coef: f64, factor: EntryFactor| {
        if coef != 0.0 {
            out.push(QEntry { row, col, coef, factor });
        }
    };
    for i in 0..n {
        let rows = [(0, k, InactiveShare(i)), (1, k, ActiveShare(i)), (2, kb, InactiveShare(i)), (3, kb, ActiveShare(i))];
        for &j in net.static_neighbors(i) {
            for (row, w, f) in rows {
                push(idx(row, i), idx(0, j), w * epi.beta_c, f);
                push(idx(row, i), idx(1, j), w * epi.beta_c, f);
                push(idx(row, i), idx(2, j), w * epi.beta_i, f);
                push(idx(row, i), idx(3, j), w * epi.beta_i, f);
            }
        }
        for &(j, p) in net.temporal_neighbors(i) {
            for (row, w) in [(1, k * p), (3, kb * p)] {
                push(idx(row, i), idx(1, j), w * epi.beta_c, ActiveShare(i));
                push(idx(row, i), idx(3, j), w * epi.beta_i, ActiveShare(i));
            }
        }
        push(idx(0, i), idx(1, i), rates.gamma2[i], One);
        push(idx(1, i), idx(0, i), 1.0, Activation(i));
        push(idx(2, i), idx(0, i), epi.eta, One);
        push(idx(2, i), idx(3, i), rates.gamma2_i[i], One);
        push(idx(3, i), idx(1, i), epi.eta, One);
        push(idx(3, i), idx(2, i), rates.gamma1_i[i], One);
    }
    out
}

/// Diagonal of `V-` as `(constant, carries gamma1)` per row.
pub fn v_minus_entries(epi: &EpidemicParams, rates: &ActivityRates) -> Vec<(f64, bool)> {
    let n = rates.n();
    let mut out = vec![(0.0, false); 4 * n];
    for i in 0..n {
        out[q_index(n, 0, i)] = (epi.eta_prime, true);
        out[q_index(n, 1, i)] = (rates.gamma2[i] + epi.eta_prime, false);
        out[q_index(n, 2, i)] = (rates.gamma1_i[i] + epi.delta, false);
        out[q_index(n, 3, i)] = (rates.gamma2_i[i] + epi.delta, false);
    }
    out
}

/// Assembles `Q`. `gamma1_upper` sets the shift; `None` uses the current rates.
pub fn build_q(
    net: &LayeredNetwork,
    epi: &EpidemicParams,
    rates: &ActivityRates,
    gamma1_upper: Option<&[f64]>,
) -> Result<QAssembly, QError> {
    epi.validate()?;
    rates.validate()?;
    let n = net.n();
    if rates.n() != n {
        return Err(QError::SizeMismatch { rates: rates.n(), n });
    }
    for i in 0..n {
        if !(rates.gamma1[i] + rates.gamma2[i] > 0.0) {
            return Err(QError::DegenerateRates(i));
        }
    }
    let factor = |f: EntryFactor| match f {
        EntryFactor::One => 1.0,
        EntryFactor::InactiveShare(i) => rates.gamma2[i] / (rates.gamma1[i] + rates.gamma2[i]),
        EntryFactor::ActiveShare(i) => rates.gamma1[i] / (rates.gamma1[i] + rates.gamma2[i]),
        EntryFactor::Activation(i) => rates.gamma1[i],
    };
    let triplets = off_diagonal_entries(net, epi, rates).into_iter().map(|e| (e.row, e.col, e.coef * factor(e.factor))).collect();
    let v_minus: Vec<f64> = v_minus_entries(epi, rates)
        .into_iter()
        .enumerate()
        .map(|(r, (c, with_gamma))| if with_gamma { c + rates.gamma1[r % n.max(1)] } else { c })
        .collect();
    let upper = gamma1_upper.unwrap_or(&rates.gamma1);
    let shift = psi(epi, rates, upper);
    if let Some(&entry) = v_minus.iter().find(|&&v| v > shift * (1.0 + 1e-12)) {
        return Err(QError::ShiftTooSmall { psi: shift, entry });
    }
    Ok(QAssembly { n_nodes: n, offdiag: SparseNonneg::from_triplets(4 * n, triplets, vec![0.0; 4 * n]), v_minus, psi: shift })
}

impl QAssembly {
    pub fn dim(&self) -> usize {
        4 * self.n_nodes
    }

    /// `Q^ = F + V+ + (psi I - V-)`.
    pub fn qhat(&self) -> SparseNonneg {
        let mut m = self.offdiag.clone();
        m.diag = self.v_minus.iter().map(|v| (self.psi - v).max(0.0)).collect();
        m
    }

    pub fn q_dense(&self) -> DMatrix<f64> {
        let mut m = self.offdiag.to_dense();
        for (r, v) in self.v_minus.iter().enumerate() {
            m[(r, r)] -= v;
        }
        m
    }

    /// Coordinate triplets of `Q`, one `row col value` line each.
    pub fn triplet_dump(&self) -> String {
        let mut out = String::new();
        for r in 0..self.dim() {
            let mut entries: Vec<(usize, f64)> = self.offdiag.row(r).collect();
            entries.push((r, -self.v_minus[r]));
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                out.push_str(&format!("{r} {c} {v:e}\n"));
            }
        }
        out
    }

    /// Node sets of the connected components, mapped to `Q` rows.
    fn component_rows(&self, net: &LayeredNetwork) -> Vec<Vec<usize>> {
        net.components()
            .into_iter()
            .map(|comp| (0..4).flat_map(|b| comp.iter().map(move |&i| q_index(self.n_nodes, b, i))).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Components up to this many nodes fall back to a dense eigensolver.
    pub dense_fallback_nodes: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 100_000, dense_fallback_nodes: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronResult {
    pub root: f64,
    /// Non-negative eigenvector normalized to unit max-norm; absent when the
    /// dense fallback produced the root.
    pub vector: Option<Vec<f64>>,
    pub iterations: usize,
}

/// Perron root of a non-negative matrix by shifted power iteration, with
/// Collatz–Wielandt bounds as the stopping test.
pub fn perron_root(m: &SparseNonneg, opts: &PowerOptions) -> Result<PerronResult, QError> {
    let n = m.n;
    if n == 0 {
        return Ok(PerronResult { root: 0.0, vector: Some(Vec::new()), iterations: 0 });
    }
    // a positive diagonal already makes an irreducible matrix primitive; a
    // small shift covers the rest without slowing convergence much
    let scale = (0..n).map(|r| m.diag[r] + m.row(r).map(|(_, v)| v).sum::<f64>()).fold(0.0, f64::max);
    let shift = if m.diag.iter().all(|&d| d > 0.0) { 0.0 } else { 0.05 * scale.max(1e-300) };
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    for it in 1..=opts.max_iter {
        m.mul_vec(&x, &mut y);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        let mut all_positive = true;
        for r in 0..n {
            if x[r] > 0.0 {
                let ratio = y[r] / x[r];
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            } else {
                all_positive = false;
            }
        }
        if all_positive && hi - lo <= opts.tol * hi.max(1.0) {
            return Ok(PerronResult { root: 0.5 * (lo + hi), vector: Some(x), iterations: it });
        }
        let mut norm: f64 = 0.0;
        for r in 0..n {
            y[r] += shift * x[r];
            norm = norm.max(y[r]);
        }
        if norm == 0.0 {
            return Ok(PerronResult { root: 0.0, vector: Some(x), iterations: it });
        }
        for r in 0..n {
            x[r] = y[r] / norm;
            // keep the iterate strictly positive so the bounds stay defined
            if x[r] < 1e-280 {
                x[r] = 1e-280;
            }
        }
    }
    Err(QError::NonConvergence(opts.max_iter))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda1 {
    /// Spectral abscissa of `Q`.
    pub value: f64,
    /// Perron vector of `Q^` over all `4N` rows when every component converged.
    pub vector: Option<Vec<f64>>,
    pub iterations: usize,
}

/// Spectral abscissa of `Q`, computed component by component as the Perron
/// root of `Q^` minus the shift.
pub fn lambda1(q: &QAssembly, net: &LayeredNetwork, opts: &PowerOptions) -> Result<Lambda1, QError> {
    let qhat = q.qhat();
    let mut best = f64::NEG_INFINITY;
    let mut vector = Some(vec![0.0; q.dim()]);
    let mut iterations = 0;
    for rows in q.component_rows(net) {
        let sub = qhat.submatrix(&rows);
        let (root, vec) = match perron_root(&sub, opts) {
            Ok(r) => {
                iterations += r.iterations;
                (r.root, r.vector)
            }
            Err(e) => {
                if rows.len() / 4 > opts.dense_fallback_nodes {
                    return Err(e);
                }
                (spectral_abscissa(&sub.to_dense()), None)
            }
        };
        best = best.max(root - q.psi);
        match (vector.as_mut(), vec) {
            (Some(v), Some(sv)) => {
                for (k, &r) in rows.iter().enumerate() {
                    v[r] = sv[k];
                }
            }
            _ => vector = None,
        }
    }
    Ok(Lambda1 { value: best, vector, iterations })
}

/// Spectral abscissa of `Q` from a dense eigen-decomposition.
pub fn lambda1_dense(q: &QAssembly) -> f64 {
    spectral_abscissa(&q.q_dense())
}
