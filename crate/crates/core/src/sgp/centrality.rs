//! Greedy centrality-ranked allocation baselines.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::optimize::{SgpConfig, SgpError};
use crate::netgen::{Layer, LayeredNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centrality {
    Degree,
    Closeness,
}

fn bfs_distances(layer: &Layer, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; layer.n()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].expect("queued nodes have a distance");
        for &v in layer.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Closeness `(N - 1) / sum of distances` on the union graph, or harmonic
/// centrality `sum of 1 / distance` when the union graph is disconnected.
pub fn closeness(net: &LayeredNetwork) -> Vec<f64> {
    let union = net.union_layer();
    let n = net.n();
    let all: Vec<Vec<Option<usize>>> = (0..n).map(|s| bfs_distances(&union, s)).collect();
    let connected = all.iter().all(|d| d.iter().all(Option::is_some));
    all.iter()
        .map(|d| {
            if connected {
                let total: usize = d.iter().map(|x| x.unwrap_or(0)).sum();
                if total == 0 {
                    0.0
                } else {
                    (n - 1) as f64 / total as f64
                }
            } else {
                d.iter().filter_map(|&x| x.filter(|&k| k > 0)).map(|k| 1.0 / k as f64).sum()
            }
        })
        .collect()
}

pub fn centrality_scores(net: &LayeredNetwork, kind: Centrality) -> Vec<f64> {
    match kind {
        Centrality::Degree => (0..net.n()).map(|i| net.average_degree(i).expect("node in range")).collect(),
        Centrality::Closeness => closeness(net),
    }
}

/// Walks nodes from most to least central, giving each the lowest rate while
/// the rest can still be paid at their upper bounds. The boundary node takes
/// whatever rate spends the remainder; the others stay at the upper bound.
pub fn allocate_by_centrality(net: &LayeredNetwork, cfg: &SgpConfig, kind: Centrality) -> Result<Vec<f64>, SgpError> {
    let n = net.n();
    cfg.validate(n)?;
    let scores = centrality_scores(net, kind);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut rates = cfg.upper.clone();
    let mut remaining = cfg.budget;
    let mut tail: f64 = cfg.min_spend();
    for &i in &order {
        let floor_cost = cfg.cost.eval(cfg.upper[i]);
        tail -= floor_cost;
        let available = remaining - tail.max(0.0);
        let lowest_cost = cfg.cost.eval(cfg.lower[i]);
        if available >= lowest_cost {
            rates[i] = cfg.lower[i];
            remaining -= lowest_cost;
        } else {
            if available > floor_cost * (1.0 + 1e-12) {
                rates[i] = cfg.cost.inverse(available).clamp(cfg.lower[i], cfg.upper[i]);
            }
            break;
        }
    }
    Ok(rates)
}
