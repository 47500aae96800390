//! Two-layer network topologies.
//!
//! The static layer holds always-on contacts. The temporal layer holds
//! potential links that are only realized while both endpoints are active,
//! each with its own activation probability `p_ij`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("infeasible regular graph: n={n}, degree={degree} ({reason})")]
    InfeasibleRegular { n: usize, degree: usize, reason: &'static str },
    #[error("random regular generation failed after {0} attempts")]
    RegularAttemptsExhausted(usize),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("invalid Barabasi-Albert parameters: {0}")]
    BadAttachment(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("network file contains no links")]
    EmptyNetwork,
    #[error("node {node} out of range for network of size {n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("layer size mismatch: static has {0} nodes, temporal has {1}")]
    SizeMismatch(usize, usize),
    #[error("class assignment covers {got} nodes, network has {expected}")]
    ClassSize { got: usize, expected: usize },
    #[error("io error: {0}")]
    Io(String),
}

/// Simple undirected graph stored as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    adj: Vec<Vec<usize>>,
}

impl Layer {
    pub fn empty(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n] }
    }

    /// Builds a layer from an edge list, dropping duplicates. Self-loops and
    /// out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, NetError> {
        let mut sets = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(NetError::NodeOutOfRange { node, n });
                }
            }
            if u == v {
                return Err(NetError::Parse { line: 0, msg: format!("self-loop at node {u}") });
            }
            sets[u].insert(v);
            sets[v].insert(u);
        }
        Ok(Self { adj: sets.into_iter().map(|s| s.into_iter().collect()).collect() })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Each undirected edge once, as `(lo, hi)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let n = self.n();
        let mut m = vec![vec![0u8; n]; n];
        for (i, nb) in self.adj.iter().enumerate() {
            for &j in nb {
                m[i][j] = 1;
            }
        }
        m
    }
}

/// Static layer `A`, temporal layer `B`, and per-link activation
/// probabilities. `p(i, j)` is zero wherever `B` has no link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredNetwork {
    static_layer: Layer,
    /// Temporal neighbors with their activation probability, sorted by id.
    temporal: Vec<Vec<(usize, f64)>>,
}

impl LayeredNetwork {
    /// Temporal layer with the same probability on every link.
    pub fn with_uniform_p(static_layer: Layer, temporal_layer: &Layer, p: f64) -> Result<Self, NetError> {
        check_prob(p)?;
        Self::with_link_probability(static_layer, temporal_layer, |_, _| p)
    }

    /// Temporal layer whose link `(i, j)` gets probability `prob(i, j)`.
    /// `prob` must be symmetric; it is evaluated once per edge with `i < j`.
    pub fn with_link_probability<F>(static_layer: Layer, temporal_layer: &Layer, mut prob: F) -> Result<Self, NetError>
    where
        F: FnMut(usize, usize) -> f64,
    {
        if static_layer.n() != temporal_layer.n() {
            return Err(NetError::SizeMismatch(static_layer.n(), temporal_layer.n()));
        }
        let mut temporal = vec![Vec::new(); temporal_layer.n()];
        for (i, j) in temporal_layer.edges() {
            let p = prob(i, j);
            check_prob(p)?;
            temporal[i].push((j, p));
            temporal[j].push((i, p));
        }
        for nb in &mut temporal {
            nb.sort_by_key(|&(j, _)| j);
        }
        Ok(Self { static_layer, temporal })
    }

    pub fn n(&self) -> usize {
        self.static_layer.n()
    }

    pub fn static_layer(&self) -> &Layer {
        &self.static_layer
    }

    pub fn static_neighbors(&self, i: usize) -> &[usize] {
        self.static_layer.neighbors(i)
    }

    pub fn temporal_neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.temporal[i]
    }

    pub fn a(&self, i: usize, j: usize) -> u8 {
        self.static_layer.has_edge(i, j) as u8
    }

    pub fn b(&self, i: usize, j: usize) -> u8 {
        self.temporal_index(i, j).is_some() as u8
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.temporal_index(i, j).map_or(0.0, |k| self.temporal[i][k].1)
    }

    fn temporal_index(&self, i: usize, j: usize) -> Option<usize> {
        self.temporal[i].binary_search_by_key(&j, |&(k, _)| k).ok()
    }

    /// Unweighted temporal layer (the `B` matrix).
    pub fn temporal_layer(&self) -> Layer {
        Layer { adj: self.temporal.iter().map(|nb| nb.iter().map(|&(j, _)| j).collect()).collect() }
    }

    pub fn temporal_edge_count(&self) -> usize {
        self.temporal.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Weighted temporal adjacency `[p_ij * b_ij]` as a dense matrix.
    pub fn weighted_temporal_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n]; n];
        for (i, nb) in self.temporal.iter().enumerate() {
            for &(j, p) in nb {
                m[i][j] = p;
            }
        }
        m
    }

    /// Expected number of contacts of `node`: static links plus temporal
    /// links weighted by their activation probability.
    pub fn average_degree(&self, node: usize) -> Result<f64, NetError> {
        if node >= self.n() {
            return Err(NetError::NodeOutOfRange { node, n: self.n() });
        }
        let temporal: f64 = self.temporal[node].iter().map(|&(_, p)| p).sum();
        Ok(self.static_layer.degree(node) as f64 + temporal)
    }

    /// Union of both layers, ignoring probabilities.
    pub fn union_layer(&self) -> Layer {
        let adj = (0..self.n())
            .map(|i| {
                let mut s: BTreeSet<usize> = self.static_layer.neighbors(i).iter().copied().collect();
                s.extend(self.temporal[i].iter().map(|&(j, _)| j));
                s.into_iter().collect()
            })
            .collect();
        Layer { adj }
    }

    /// Connected components of the union graph, each sorted by node id.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let union = self.union_layer();
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut k = 0;
            while k < members.len() {
                let u = members[k];
                k += 1;
                for &v in union.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Restriction to `nodes` (which must be sorted), relabelled `0..nodes.len()`.
    pub fn subnetwork(&self, nodes: &[usize]) -> LayeredNetwork {
        let index: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let static_adj = nodes
            .iter()
            .map(|&v| self.static_layer.neighbors(v).iter().filter_map(|u| index.get(u).copied()).collect())
            .collect();
        let temporal = nodes
            .iter()
            .map(|&v| self.temporal[v].iter().filter_map(|&(u, p)| index.get(&u).map(|&k| (k, p))).collect())
            .collect();
        LayeredNetwork { static_layer: Layer { adj: static_adj }, temporal }
    }
}

fn check_prob(p: f64) -> Result<(), NetError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(NetError::BadProbability(p))
    }
}

const REGULAR_MAX_ATTEMPTS: usize = 1000;

/// Uniform-ish random `degree`-regular simple graph.
///
/// Stubs are paired in shuffled rounds; a round keeps every pair that forms
/// a new simple edge and reshuffles the leftovers. The whole construction
/// restarts when the leftovers can no longer be paired.
pub fn gen_random_regular(n: usize, degree: usize, seed: u64) -> Result<Layer, NetError> {
    if (n * degree) % 2 != 0 {
        return Err(NetError::InfeasibleRegular { n, degree, reason: "n * degree must be even" });
    }
    if degree >= n && !(n == 0 || degree == 0) {
        return Err(NetError::InfeasibleRegular { n, degree, reason: "degree must be below n" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if degree == 0 {
        return Ok(Layer::empty(n));
    }
    for _ in 0..REGULAR_MAX_ATTEMPTS {
        if let Some(edges) = try_pair_stubs(n, degree, &mut rng) {
            return Layer::from_edges(n, &edges);
        }
    }
    Err(NetError::RegularAttemptsExhausted(REGULAR_MAX_ATTEMPTS))
}

fn try_pair_stubs(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(degree)).collect();
    while !stubs.is_empty() {
        stubs.shuffle(rng);
        let mut leftover = Vec::new();
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u != v && edges.insert((u, v)) {
                continue;
            }
            leftover.extend_from_slice(pair);
        }
        if leftover.len() == stubs.len() {
            // no progress this round; give up if no valid pair remains at all
            if !has_suitable_pair(&leftover, &edges) {
                return None;
            }
        }
        stubs = leftover;
    }
    Some(edges.into_iter().collect())
}

fn has_suitable_pair(stubs: &[usize], edges: &BTreeSet<(usize, usize)>) -> bool {
    let nodes: BTreeSet<usize> = stubs.iter().copied().collect();
    let nodes: Vec<usize> = nodes.into_iter().collect();
    for (k, &u) in nodes.iter().enumerate() {
        for &v in &nodes[k + 1..] {
            if !edges.contains(&(u, v)) {
                return true;
            }
        }
    }
    false
}

/// G(n, p): every unordered pair is linked independently with probability `prob`.
pub fn gen_erdos_renyi(n: usize, prob: f64, seed: u64) -> Result<Layer, NetError> {
    check_prob(prob)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < prob {
                edges.push((i, j));
            }
        }
    }
    Layer::from_edges(n, &edges)
}

/// G(n, m): exactly `m` distinct edges chosen uniformly.
pub fn gen_erdos_renyi_edges(n: usize, m: usize, seed: u64) -> Result<Layer, NetError> {
    let max = n * n.saturating_sub(1) / 2;
    if m > max {
        return Err(NetError::BadAttachment(format!("{m} edges do not fit in {n} nodes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    while edges.len() < m {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    Layer::from_edges(n, &edges.into_iter().collect::<Vec<_>>())
}

/// How the initial Barabasi-Albert seed nodes are wired together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedWiring {
    #[default]
    Complete,
    Ring,
}

/// Barabasi-Albert growth. Returns the layer and the seed nodes `0..seed_size`.
pub fn gen_barabasi_albert(
    n: usize,
    seed_size: usize,
    attach: usize,
    seed: u64,
) -> Result<(Layer, Vec<usize>), NetError> {
    gen_barabasi_albert_with(n, seed_size, attach, SeedWiring::Complete, seed)
}

pub fn gen_barabasi_albert_with(
    n: usize,
    seed_size: usize,
    attach: usize,
    wiring: SeedWiring,
    seed: u64,
) -> Result<(Layer, Vec<usize>), NetError> {
    if attach < 1 {
        return Err(NetError::BadAttachment("attach must be at least 1".into()));
    }
    if seed_size < attach {
        return Err(NetError::BadAttachment(format!("attach ({attach}) exceeds seed size ({seed_size})")));
    }
    if n <= seed_size {
        return Err(NetError::BadAttachment(format!("n ({n}) must exceed seed size ({seed_size})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    match wiring {
        SeedWiring::Complete => {
            for i in 0..seed_size {
                for j in i + 1..seed_size {
                    edges.push((i, j));
                }
            }
        }
        SeedWiring::Ring => {
            if seed_size >= 2 {
                for i in 0..seed_size {
                    let j = (i + 1) % seed_size;
                    if i < j || seed_size > 2 {
                        edges.push((i.min(j), i.max(j)));
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    // each node appears once per incident edge end, so uniform picks are degree-proportional
    let mut ends: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    if ends.is_empty() {
        ends.extend(0..seed_size);
    }
    for new in seed_size..n {
        let mut targets = BTreeSet::new();
        while targets.len() < attach {
            targets.insert(ends[rng.gen_range(0..ends.len())]);
        }
        for t in targets {
            edges.push((t, new));
            ends.push(t);
            ends.push(new);
        }
    }
    Ok((Layer::from_edges(n, &edges)?, (0..seed_size).collect()))
}

/// Class-based link probabilities: `p_ij = p_class(i) * p_class(j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeClassAssignment {
    pub class_of: Vec<usize>,
    pub p_class: Vec<f64>,
}

impl NodeClassAssignment {
    pub fn node_p(&self, i: usize) -> f64 {
        self.p_class[self.class_of[i]]
    }

    pub fn link_p(&self, i: usize, j: usize) -> f64 {
        self.node_p(i) * self.node_p(j)
    }

    pub fn apply(&self, static_layer: Layer, temporal_layer: &Layer) -> Result<LayeredNetwork, NetError> {
        if self.class_of.len() != static_layer.n() {
            return Err(NetError::ClassSize { got: self.class_of.len(), expected: static_layer.n() });
        }
        LayeredNetwork::with_link_probability(static_layer, temporal_layer, |i, j| self.link_p(i, j))
    }
}

/// Parses the two-layer edge-list format:
///
/// ```text
/// #default_p 0.5
/// 1 0 1        # static link
/// 2 0 2 0.7    # temporal link with its own probability
/// ```
pub fn parse_two_layer_edge_list(text: &str) -> Result<LayeredNetwork, NetError> {
    let mut default_p = 1.0;
    let mut static_edges = Vec::new();
    let mut temporal: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut max_id: Option<usize> = None;

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let err = |msg: String| NetError::Parse { line: line_no, msg };
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            if parts.next() == Some("default_p") {
                let v = parts.next().ok_or_else(|| err("#default_p needs a value".into()))?;
                default_p = v.parse::<f64>().map_err(|e| err(format!("bad default_p {v:?}: {e}")))?;
                if !(0.0..=1.0).contains(&default_p) {
                    return Err(err(format!("default_p {default_p} outside [0, 1]")));
                }
            }
            continue;
        }
        let content = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(err(format!("expected `<layer> <src> <dst> [p]`, got {} fields", fields.len())));
        }
        let node = |s: &str| s.parse::<u32>().map(|v| v as usize).map_err(|e| err(format!("bad node id {s:?}: {e}")));
        let (u, v) = (node(fields[1])?, node(fields[2])?);
        if u == v {
            return Err(err(format!("self-loop at node {u}")));
        }
        max_id = Some(max_id.unwrap_or(0).max(u).max(v));
        let key = (u.min(v), u.max(v));
        match fields[0] {
            "1" => {
                if fields.len() == 4 {
                    return Err(err("probability is only allowed on layer 2".into()));
                }
                static_edges.push(key);
            }
            "2" => {
                let p = match fields.get(3) {
                    Some(s) => s.parse::<f64>().map_err(|e| err(format!("bad probability {s:?}: {e}")))?,
                    None => default_p,
                };
                if !(0.0..=1.0).contains(&p) {
                    return Err(err(format!("probability {p} outside [0, 1]")));
                }
                if let Some(&old) = temporal.get(&key) {
                    if old != p {
                        return Err(err(format!("link {}-{} repeated with conflicting p ({old} vs {p})", key.0, key.1)));
                    }
                }
                temporal.insert(key, p);
            }
            other => return Err(err(format!("unknown layer tag {other:?}"))),
        }
    }

    let n = max_id.map(|m| m + 1).ok_or(NetError::EmptyNetwork)?;
    let static_layer = Layer::from_edges(n, &static_edges)?;
    let keys: Vec<(usize, usize)> = temporal.keys().copied().collect();
    let temporal_layer = Layer::from_edges(n, &keys)?;
    LayeredNetwork::with_link_probability(static_layer, &temporal_layer, |i, j| temporal[&(i.min(j), i.max(j))])
}

pub fn load_two_layer_edge_list(path: impl AsRef<Path>) -> Result<LayeredNetwork, NetError> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| NetError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_two_layer_edge_list(&text)
}

/// Writes a network in the format read by [`parse_two_layer_edge_list`].
pub fn write_two_layer_edge_list(net: &LayeredNetwork) -> String {
    let mut out = String::new();
    for (i, j) in net.static_layer().edges() {
        out.push_str(&format!("1 {i} {j}\n"));
    }
    for i in 0..net.n() {
        for &(j, p) in net.temporal_neighbors(i) {
            if j > i {
                out.push_str(&format!("2 {i} {j} {p}\n"));
            }
        }
    }
    out
}
