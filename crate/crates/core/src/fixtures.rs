//! Small reference graphs and models used in tests, examples and the CLI docs.

use nalgebra::DMatrix;

use crate::graph::{MixedGraph, NodeId};
use crate::var::VarModel;

/// Latent `z` drives `1` (at lag 2) and `2` (at lag 1); `2 -> 1`, `2 <-> 3` feedback.
pub fn lagged_latent_graph() -> MixedGraph {
    MixedGraph::from_edges(
        &["1", "2", "3", "z"],
        &[("z", "1"), ("z", "2"), ("2", "1"), ("3", "2"), ("2", "3")],
        &[],
    )
    .and_then(|g| g.with_latent(&["z"]))
    .expect("fixture is valid")
}

/// `a -> c -> b` with `b --- c`.
pub fn dual_role_graph() -> MixedGraph {
    MixedGraph::from_edges(&["a", "b", "c"], &[("a", "c"), ("c", "b")], &[("b", "c")]).expect("fixture is valid")
}

/// `d` confounds `a` and `c`, `a -> c -> b`, and `c --- d`.
///
/// The smallest edge set consistent with every separation statement the
/// unit tests make about it.
pub fn mediated_confounding_graph() -> MixedGraph {
    MixedGraph::from_edges(
        &["a", "b", "c", "d"],
        &[("d", "a"), ("d", "c"), ("a", "c"), ("c", "b")],
        &[("c", "d")],
    )
    .expect("fixture is valid")
}

/// `3 -> 2 -> 1`, latent `z -> 1`, and `z --- 3`.
pub fn frontdoor_graph() -> MixedGraph {
    MixedGraph::from_edges(&["1", "2", "3", "z"], &[("z", "1"), ("3", "2"), ("2", "1")], &[("z", "3")])
        .and_then(|g| g.with_latent(&["z"]))
        .expect("fixture is valid")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaggedLatentParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta12: f64,
    pub beta23: f64,
    pub beta32: f64,
    pub sigma2: f64,
}

impl Default for LaggedLatentParams {
    fn default() -> Self {
        LaggedLatentParams { alpha1: 0.4, alpha2: 0.3, beta12: 0.5, beta23: -0.4, beta32: 0.3, sigma2: 1.0 }
    }
}

fn labels() -> Vec<NodeId> {
    ["1", "2", "3", "z"].into_iter().map(NodeId::from).collect()
}

/// Components ordered `1, 2, 3, z`; `z` is latent white noise.
pub fn lagged_latent_model(p: &LaggedLatentParams) -> VarModel {
    let mut a1 = DMatrix::zeros(4, 4);
    a1[(0, 1)] = p.beta12;
    a1[(1, 3)] = p.alpha2;
    a1[(1, 2)] = p.beta23;
    a1[(2, 1)] = p.beta32;
    let mut a2 = DMatrix::zeros(4, 4);
    a2[(0, 3)] = p.alpha1;
    VarModel::new(labels(), vec![a1, a2], DMatrix::identity(4, 4) * p.sigma2, vec![true, true, true, false])
        .expect("fixture is valid")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontdoorParams {
    pub alpha: f64,
    pub rho: f64,
    pub beta12: f64,
    pub beta23: f64,
    pub sigma2: f64,
}

impl Default for FrontdoorParams {
    fn default() -> Self {
        FrontdoorParams { alpha: 0.6, rho: 0.5, beta12: 0.5, beta23: -0.4, sigma2: 1.0 }
    }
}

/// Components ordered `1, 2, 3, z`; the innovations of `z` and `3` are correlated.
pub fn frontdoor_model(p: &FrontdoorParams) -> VarModel {
    let mut a1 = DMatrix::zeros(4, 4);
    a1[(0, 1)] = p.beta12;
    a1[(1, 2)] = p.beta23;
    let mut a2 = DMatrix::zeros(4, 4);
    a2[(0, 3)] = p.alpha;
    let mut sigma = DMatrix::identity(4, 4) * p.sigma2;
    sigma[(2, 3)] = p.rho * p.sigma2;
    sigma[(3, 2)] = p.rho * p.sigma2;
    VarModel::new(labels(), vec![a1, a2], sigma, vec![true, true, true, false]).expect("fixture is valid")
}
