//! Mixed graphs for time series path diagrams.
//!
//! Nodes stand for component processes. A directed edge `a -> b` records
//! that the past of `a` carries information about the next value of `b`; a
//! dashed edge `a --- b` records contemporaneous dependence. Up to three
//! edges may join a pair of nodes (`a -> b`, `b -> a`, `a --- b`).
//!
//! Internally nodes are kept in lexicographic order and addressed by index,
//! so iteration order and serialization are canonical.

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque node label, unique within a graph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

pub type NodeSet = BTreeSet<NodeId>;

/// Builds a [`NodeSet`] from string labels.
pub fn node_set<I, S>(ids: I) -> NodeSet
where
    I: IntoIterator<Item = S>,
    S: Into<NodeId>,
{
    ids.into_iter().map(Into::into).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub observed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Directed,
    Dashed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedGraph {
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
    directed: BTreeSet<(usize, usize)>,
    dashed: BTreeSet<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    spouses: Vec<Vec<usize>>,
}

impl MixedGraph {
    /// Builds a graph, rejecting self-loops, duplicate edges and edges with
    /// undeclared endpoints.
    pub fn new<D, U>(nodes: Vec<Node>, directed: D, dashed: U) -> Result<Self>
    where
        D: IntoIterator<Item = (NodeId, NodeId)>,
        U: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut nodes = nodes;
        for (i, n) in nodes.iter().enumerate() {
            if n.id.as_str().is_empty() {
                return Err(Error::InvalidGraph {
                    location: format!("nodes[{i}]"),
                    reason: "empty node id".into(),
                });
            }
        }
        nodes.sort_by(|x, y| x.id.cmp(&y.id));
        for w in nodes.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::InvalidGraph {
                    location: "nodes".into(),
                    reason: format!("duplicate node `{}`", w[0].id),
                });
            }
        }
        let index: HashMap<NodeId, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let lookup = |id: &NodeId, location: String| -> Result<usize> {
            index.get(id).copied().ok_or_else(|| Error::InvalidGraph {
                location,
                reason: format!("undeclared endpoint `{id}`"),
            })
        };

        let mut dir = BTreeSet::new();
        for (k, (t, h)) in directed.into_iter().enumerate() {
            let loc = format!("directed[{k}]");
            let (ti, hi) = (lookup(&t, loc.clone())?, lookup(&h, loc.clone())?);
            if ti == hi {
                return Err(Error::InvalidGraph { location: loc, reason: format!("self-loop on `{t}`") });
            }
            if !dir.insert((ti, hi)) {
                return Err(Error::InvalidGraph {
                    location: loc,
                    reason: format!("duplicate directed edge `{t}` -> `{h}`"),
                });
            }
        }
        let mut das = BTreeSet::new();
        for (k, (x, y)) in dashed.into_iter().enumerate() {
            let loc = format!("dashed[{k}]");
            let (xi, yi) = (lookup(&x, loc.clone())?, lookup(&y, loc.clone())?);
            if xi == yi {
                return Err(Error::InvalidGraph { location: loc, reason: format!("self-loop on `{x}`") });
            }
            if !das.insert((xi.min(yi), xi.max(yi))) {
                return Err(Error::InvalidGraph {
                    location: loc,
                    reason: format!("duplicate dashed edge `{x}` --- `{y}`"),
                });
            }
        }

        let n = nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut spouses = vec![Vec::new(); n];
        for &(t, h) in &dir {
            children[t].push(h);
            parents[h].push(t);
        }
        for &(x, y) in &das {
            spouses[x].push(y);
            spouses[y].push(x);
        }
        for v in parents.iter_mut().chain(children.iter_mut()).chain(spouses.iter_mut()) {
            v.sort_unstable();
        }

        Ok(MixedGraph { nodes, index, directed: dir, dashed: das, parents, children, spouses })
    }

    /// Convenience constructor with all nodes observed.
    pub fn from_edges(node_ids: &[&str], directed: &[(&str, &str)], dashed: &[(&str, &str)]) -> Result<Self> {
        Self::new(
            node_ids.iter().map(|&id| Node { id: id.into(), observed: true }).collect(),
            directed.iter().map(|&(t, h)| (NodeId::from(t), NodeId::from(h))),
            dashed.iter().map(|&(x, y)| (NodeId::from(x), NodeId::from(y))),
        )
    }

    /// Returns a copy with the given nodes marked latent.
    pub fn with_latent(mut self, latent: &[&str]) -> Result<Self> {
        for id in latent {
            let i = self.idx(&NodeId::from(*id))?;
            self.nodes[i].observed = false;
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_ids(&self) -> NodeSet {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    pub fn latent_ids(&self) -> NodeSet {
        self.nodes.iter().filter(|n| !n.observed).map(|n| n.id.clone()).collect()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> + '_ {
        self.directed.iter().map(move |&(t, h)| (&self.nodes[t].id, &self.nodes[h].id))
    }

    pub fn dashed_edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> + '_ {
        self.dashed.iter().map(move |&(x, y)| (&self.nodes[x].id, &self.nodes[y].id))
    }

    pub fn num_directed(&self) -> usize {
        self.directed.len()
    }

    pub fn num_dashed(&self) -> usize {
        self.dashed.len()
    }

    pub fn has_directed(&self, tail: &str, head: &str) -> bool {
        match (self.index.get(tail), self.index.get(head)) {
            (Some(&t), Some(&h)) => self.directed.contains(&(t, h)),
            _ => false,
        }
    }

    pub fn has_dashed(&self, x: &str, y: &str) -> bool {
        match (self.index.get(x), self.index.get(y)) {
            (Some(&a), Some(&b)) => self.dashed.contains(&(a.min(b), a.max(b))),
            _ => false,
        }
    }

    /// Copy of the graph with every dashed edge removed.
    pub fn without_dashed(&self) -> MixedGraph {
        let mut g = self.clone();
        g.dashed.clear();
        g.spouses.iter_mut().for_each(Vec::clear);
        g
    }

    pub(crate) fn idx(&self, id: &NodeId) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub(crate) fn indices(&self, set: &NodeSet) -> Result<Vec<usize>> {
        set.iter().map(|id| self.idx(id)).collect()
    }

    pub(crate) fn mask(&self, set: &NodeSet) -> Result<Vec<bool>> {
        let mut m = vec![false; self.len()];
        for i in self.indices(set)? {
            m[i] = true;
        }
        Ok(m)
    }

    pub(crate) fn id(&self, i: usize) -> &NodeId {
        &self.nodes[i].id
    }

    pub(crate) fn parents_of(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn children_of(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub(crate) fn spouses_of(&self, i: usize) -> &[usize] {
        &self.spouses[i]
    }

    pub(crate) fn ancestors_mask(&self, seeds: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack = Vec::with_capacity(seeds.len());
        for &s in seeds {
            if !mask[s] {
                mask[s] = true;
                stack.push(s);
            }
        }
        while let Some(u) = stack.pop() {
            for &p in &self.parents[u] {
                if !mask[p] {
                    mask[p] = true;
                    stack.push(p);
                }
            }
        }
        mask
    }

    pub(crate) fn set_from_mask(&self, mask: &[bool]) -> NodeSet {
        mask.iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.nodes[i].id.clone())
            .collect()
    }
}

/// Reflexive ancestors: `A` together with every node that has a directed
/// path into some member of `A`.
pub fn ancestors(g: &MixedGraph, set: &NodeSet) -> Result<NodeSet> {
    let seeds = g.indices(set)?;
    Ok(g.set_from_mask(&g.ancestors_mask(&seeds)))
}

pub fn is_ancestral(g: &MixedGraph, set: &NodeSet) -> Result<bool> {
    Ok(ancestors(g, set)? == *set)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    nodes: Vec<Node>,
    #[serde(default)]
    directed: Vec<(NodeId, NodeId)>,
    #[serde(default)]
    dashed: Vec<(NodeId, NodeId)>,
}

pub fn parse_graph(text: &str) -> Result<MixedGraph> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        reason: e.to_string(),
    })?;
    MixedGraph::new(doc.nodes, doc.directed, doc.dashed)
}

/// Canonical JSON form: nodes sorted by id, edges sorted, dashed pairs with
/// the smaller id first. Newline-terminated.
pub fn serialize_graph(g: &MixedGraph) -> String {
    let doc = GraphDoc {
        nodes: g.nodes.clone(),
        directed: g.directed_edges().map(|(t, h)| (t.clone(), h.clone())).collect(),
        dashed: g.dashed_edges().map(|(x, y)| (x.clone(), y.clone())).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("graph document serializes");
    s.push('\n');
    s
}
