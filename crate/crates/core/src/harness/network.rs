//! Turns a [`NetworkSpec`] into a concrete two-layer network.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ClassSpec, LayerSpec, NetworkSpec};
use super::HarnessError;
use crate::netgen::{
    gen_barabasi_albert, gen_erdos_renyi, gen_erdos_renyi_edges, gen_random_regular, load_two_layer_edge_list, Layer,
    LayeredNetwork, NodeClassAssignment,
};
use crate::seeds::derive_seed;

const NETWORK_STREAM: u64 = 0x6e65_7477;

#[derive(Debug, Clone)]
pub struct BuiltNetwork {
    pub net: LayeredNetwork,
    /// Class of each node when link probabilities are class-based.
    pub classes: Option<Vec<usize>>,
    /// Seed nodes of a Barabasi-Albert second layer.
    pub hubs: Vec<usize>,
}

fn build_layer(spec: &LayerSpec, n: usize, seed: u64) -> Result<(Layer, Vec<usize>), HarnessError> {
    Ok(match *spec {
        LayerSpec::Empty => (Layer::empty(n), Vec::new()),
        LayerSpec::RandomRegular { degree } => (gen_random_regular(n, degree, seed)?, Vec::new()),
        LayerSpec::ErdosRenyi { prob } => (gen_erdos_renyi(n, prob, seed)?, Vec::new()),
        LayerSpec::ErdosRenyiEdges { edges } => (gen_erdos_renyi_edges(n, edges, seed)?, Vec::new()),
        LayerSpec::BarabasiAlbert { seed_size, attach } => gen_barabasi_albert(n, seed_size, attach, seed)?,
    })
}

/// Class sizes `floor(N/6)`, the rest, `floor(N/6)`. Hubs go to
/// `spec.seed_class`; the other nodes are shuffled and dealt out to fill
/// the remaining slots.
pub fn assign_classes(n: usize, hubs: &[usize], spec: &ClassSpec, seed: u64) -> Result<NodeClassAssignment, HarnessError> {
    let small = n / 6;
    let sizes = [small, n - 2 * small, small];
    if spec.seed_class > 2 {
        return Err(HarnessError::Config(format!("seed class {} out of range", spec.seed_class)));
    }
    if hubs.len() > sizes[spec.seed_class] {
        return Err(HarnessError::Config(format!(
            "{} seed nodes do not fit in class {} of size {}",
            hubs.len(),
            spec.seed_class,
            sizes[spec.seed_class]
        )));
    }
    let mut class_of = vec![usize::MAX; n];
    let mut left = sizes;
    for &h in hubs {
        class_of[h] = spec.seed_class;
        left[spec.seed_class] -= 1;
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| class_of[i] == usize::MAX).collect();
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut it = rest.into_iter();
    for (class, &count) in left.iter().enumerate() {
        for node in it.by_ref().take(count) {
            class_of[node] = class;
        }
    }
    Ok(NodeClassAssignment { class_of, p_class: spec.probs.to_vec() })
}

pub fn build_network(spec: &NetworkSpec, master_seed: u64) -> Result<BuiltNetwork, HarnessError> {
    match spec {
        NetworkSpec::Homogeneous { .. } => Err(HarnessError::Config("a homogeneous spec has no concrete network".into())),
        NetworkSpec::File { path } => Ok(BuiltNetwork { net: load_two_layer_edge_list(path)?, classes: None, hubs: Vec::new() }),
        NetworkSpec::Generated { n, static_layer, temporal_layer, p, classes } => {
            let (a, _) = build_layer(static_layer, *n, derive_seed(master_seed, NETWORK_STREAM, 0))?;
            let (b, hubs) = build_layer(temporal_layer, *n, derive_seed(master_seed, NETWORK_STREAM, 1))?;
            match (classes, p) {
                (Some(cs), _) => {
                    let assignment = assign_classes(*n, &hubs, cs, derive_seed(master_seed, NETWORK_STREAM, 2))?;
                    let net = assignment.apply(a, &b)?;
                    Ok(BuiltNetwork { net, classes: Some(assignment.class_of), hubs })
                }
                (None, Some(p)) => Ok(BuiltNetwork { net: LayeredNetwork::with_uniform_p(a, &b, *p)?, classes: None, hubs }),
                (None, None) => Err(HarnessError::Config("generated network needs p or classes".into())),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_sizes_and_hubs() {
        let hubs: Vec<usize> = (0..20).collect();
        let a = assign_classes(200, &hubs, &ClassSpec::default(), 9).unwrap();
        let count = |c| a.class_of.iter().filter(|&&k| k == c).count();
        assert_eq!((count(0), count(1), count(2)), (33, 134, 33));
        assert!(hubs.iter().all(|&h| a.class_of[h] == 1));
        assert!((a.link_p(0, 1) - 0.2 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn deterministic_generation() {
        let spec = NetworkSpec::Generated {
            n: 60,
            static_layer: LayerSpec::RandomRegular { degree: 4 },
            temporal_layer: LayerSpec::BarabasiAlbert { seed_size: 5, attach: 3 },
            p: None,
            classes: Some(ClassSpec::default()),
        };
        let x = build_network(&spec, 1).unwrap();
        let y = build_network(&spec, 1).unwrap();
        assert_eq!(x.net, y.net);
        assert_eq!(x.hubs, (0..5).collect::<Vec<_>>());
        assert_ne!(x.net, build_network(&spec, 2).unwrap().net);
    }
}
