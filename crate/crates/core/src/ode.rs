//! Adaptive Dormand–Prince 5(4) integrator for autonomous systems.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Stop once the max-norm of the derivative drops below this.
    pub steady_tol: f64,
    pub horizon: f64,
    /// Record the state every `output_dt` time units; `None` keeps only the endpoints.
    pub output_dt: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { atol: 1e-8, rtol: 1e-6, steady_tol: 1e-9, horizon: 1e4, output_dt: None, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    /// True when the steady-state test passed before the horizon.
    pub converged: bool,
    pub steps: usize,
}

const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// difference between the 5th- and 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Integrates `y' = f(y)` from `t = 0`.
pub fn integrate<F>(mut f: F, y0: &[f64], opts: &OdeOptions) -> OdeSolution
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut y6 = vec![0.0; n];
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    let mut next_out = opts.output_dt.map(|dt| dt.min(opts.horizon));

    f(&y, &mut k[0]);
    if max_norm(&k[0]) < opts.steady_tol || n == 0 {
        return OdeSolution { times, states, final_time: 0.0, final_state: y, converged: true, steps: 0 };
    }

    // initial step from the derivative scale
    let scale = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect::<Vec<_>>();
    let d0 = (y.iter().zip(&scale).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (k[0].iter().zip(&scale).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(opts.horizon);

    let mut steps = 0;
    let mut converged = false;
    while t < opts.horizon && steps < opts.max_steps {
        let mut stop_at = opts.horizon;
        if let Some(o) = next_out {
            stop_at = stop_at.min(o);
        }
        let clipped = t + h >= stop_at;
        let step = if clipped { stop_at - t } else { h };

        for s in 0..6 {
            for j in 0..n {
                let mut acc = 0.0;
                for (m, a) in A[s].iter().enumerate() {
                    acc += a * k[m][j];
                }
                tmp[j] = y[j] + step * acc;
            }
            f(&tmp, &mut k[s + 1]);
            if s == 4 {
                y6.copy_from_slice(&tmp);
            }
            if s == 5 {
                y_new.copy_from_slice(&tmp);
            }
        }

        let mut err = 0.0;
        for j in 0..n {
            let mut e = 0.0;
            for (m, w) in E.iter().enumerate() {
                e += w * k[m][j];
            }
            let sc = opts.atol + opts.rtol * y[j].abs().max(y_new[j].abs());
            err += (step * e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        steps += 1;

        // Dominant decay rate |k7 - k6| / |y7 - y6|; keeping h below 1.5 / rate
        // damps the error that otherwise hovers at the stability boundary
        // near equilibrium.
        let dk: f64 = k[6].iter().zip(&k[5]).map(|(a, b)| (a - b).powi(2)).sum();
        let dy: f64 = y_new.iter().zip(&y6).map(|(a, b)| (a - b).powi(2)).sum();
        let h_stable = if dk > 0.0 && dy > 0.0 { 1.5 / (dk / dy).sqrt() } else { f64::INFINITY };

        if err <= 1.0 {
            t = if clipped { stop_at } else { t + step };
            std::mem::swap(&mut y, &mut y_new);
            // first-same-as-last: stage 7 is f(y_new)
            let last = k.pop().expect("seven stages");
            k.insert(0, last);
            if let (Some(o), Some(dt)) = (next_out, opts.output_dt) {
                if t >= o {
                    times.push(t);
                    states.push(y.clone());
                    next_out = Some((o + dt).min(opts.horizon));
                }
            }
            if max_norm(&k[0]) < opts.steady_tol {
                converged = true;
                break;
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        let proposed = step * factor;
        h = if clipped && err <= 1.0 { h.max(proposed) } else { proposed };
        h = h.min(h_stable.max(0.2 * step));
        if h < 1e-14 * t.max(1.0) {
            break;
        }
    }

    if times.last() != Some(&t) {
        times.push(t);
        states.push(y.clone());
    }
    OdeSolution { times, states, final_time: t, final_state: y, converged, steps }
}
