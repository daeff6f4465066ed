//! Causal reasoning for multivariate time series: mixed-graph separation,
//! graphical non-causality and adjustment criteria, vector-autoregressive
//! subprocess representations, and intervention effect estimation.

pub mod cli;
pub mod criteria;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod intervene;
pub mod separation;
pub mod var;

pub use error::{Error, Result};
pub use graph::{ancestors, node_set, parse_graph, serialize_graph, EdgeKind, MixedGraph, Node, NodeId, NodeSet};
pub use separation::{exists_connecting_walk, m_connection, m_separated, Verdict, Walk, WalkQuery};
