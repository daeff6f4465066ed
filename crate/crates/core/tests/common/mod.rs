#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tscausal::graph::{MixedGraph, Node, NodeId, NodeSet};
use tscausal::var::{self, VarModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn label(i: usize) -> NodeId {
    NodeId::from(format!("v{i}"))
}

/// Random mixed graph on `n` nodes; parallel edges in both directions and
/// dashed edges are drawn independently.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p_directed: f64, p_dashed: f64) -> MixedGraph {
    let nodes = (0..n).map(|i| Node { id: label(i), observed: true }).collect();
    let mut directed = Vec::new();
    let mut dashed = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p_directed) {
                directed.push((label(i), label(j)));
            }
            if i < j && rng.random_bool(p_dashed) {
                dashed.push((label(i), label(j)));
            }
        }
    }
    MixedGraph::new(nodes, directed, dashed).expect("generated graph is valid")
}

pub fn subsets(g: &MixedGraph) -> Vec<NodeSet> {
    let ids: Vec<NodeId> = g.node_ids().into_iter().collect();
    (0..1usize << ids.len())
        .map(|mask| ids.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x.clone()).collect())
        .collect()
}

/// Sparse stationary VAR with spectral radius at most `max_radius`.
/// Innovation correlations are drawn on a few random pairs; `latent` marks
/// the last component unobserved.
pub fn random_var(rng: &mut ChaCha8Rng, d: usize, p: usize, latent: bool, max_radius: f64) -> VarModel {
    loop {
        let coefs: Vec<DMatrix<f64>> = (0..p)
            .map(|_| {
                DMatrix::from_fn(d, d, |_, _| {
                    if rng.random_bool(0.35) {
                        rng.random_range(-0.8..0.8)
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        let mut sigma = DMatrix::<f64>::identity(d, d);
        for i in 0..d {
            sigma[(i, i)] = rng.random_range(0.5..1.5);
        }
        for i in 0..d {
            for j in i + 1..d {
                if rng.random_bool(0.2) {
                    let rho = rng.random_range(-0.5..0.5);
                    let c = rho * (sigma[(i, i)] * sigma[(j, j)]).sqrt() / d as f64;
                    sigma[(i, j)] = c;
                    sigma[(j, i)] = c;
                }
            }
        }
        let labels = (0..d).map(label).collect();
        let mut observed = vec![true; d];
        if latent {
            observed[d - 1] = false;
        }
        let Ok(m) = VarModel::new(labels, coefs, sigma, observed) else { continue };
        let radius = var::spectral_radius(&m.companion());
        if radius <= max_radius {
            return m;
        }
    }
}
