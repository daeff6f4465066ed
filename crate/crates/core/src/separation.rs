//! m-connection over walks in mixed graphs.
//!
//! A walk may repeat nodes and edges. An intermediate occurrence of a node is
//! an m-collider when both adjacent edge ends at it are arrowheads or dashed
//! tails, and an m-non-collider otherwise. A walk is m-connecting given `S`
//! when every collider occurrence lies in `S` and every non-collider
//! occurrence lies outside `S`; endpoints are never classified.
//!
//! [`exists_connecting_walk`] decides connection by reachability over states
//! `(node, mark by which the node was entered)`. Whether a walk can be
//! extended depends only on that state, so a connecting walk exists iff one
//! exists that visits no state twice. [`brute_force_connecting_walk`]
//! enumerates walks directly and is kept as a test oracle.

use std::fmt;

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{MixedGraph, NodeId, NodeSet};

/// Edge-end mark at a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mark {
    Tail,
    Arrowhead,
    DashedTail,
}

impl Mark {
    fn index(self) -> usize {
        match self {
            Mark::Tail => 0,
            Mark::Arrowhead => 1,
            Mark::DashedTail => 2,
        }
    }

    fn from_index(i: usize) -> Mark {
        [Mark::Tail, Mark::Arrowhead, Mark::DashedTail][i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Occurrence {
    Collider,
    NonCollider,
}

pub fn classify_occurrence(incoming: Mark, outgoing: Mark) -> Occurrence {
    let head_like = |m: Mark| matches!(m, Mark::Arrowhead | Mark::DashedTail);
    if head_like(incoming) && head_like(outgoing) {
        Occurrence::Collider
    } else {
        Occurrence::NonCollider
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstEdgeConstraint {
    Any,
    /// First edge is anything but `source -> v1`.
    BackDoorOnly,
    /// First edge is `source -> v1`.
    FrontDoorOnly,
    /// First edge is `source <- v1`.
    ArrowheadAtSource,
}

impl FirstEdgeConstraint {
    fn admits(self, mark_at_source: Mark) -> bool {
        match self {
            FirstEdgeConstraint::Any => true,
            FirstEdgeConstraint::BackDoorOnly => mark_at_source != Mark::Tail,
            FirstEdgeConstraint::FrontDoorOnly => mark_at_source == Mark::Tail,
            FirstEdgeConstraint::ArrowheadAtSource => mark_at_source == Mark::Arrowhead,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LastEdgeConstraint {
    Any,
    /// Final edge is `v_{n-1} -> target`.
    PointingIntoTarget,
}

impl LastEdgeConstraint {
    fn admits(self, mark_at_target: Mark) -> bool {
        match self {
            LastEdgeConstraint::Any => true,
            LastEdgeConstraint::PointingIntoTarget => mark_at_target == Mark::Arrowhead,
        }
    }
}

/// One traversed edge, oriented along the walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    /// `u -> v`
    Forward,
    /// `u <- v`
    Backward,
    /// `u --- v`
    Dashed,
}

impl Step {
    /// Marks at the node the step leaves and at the node it enters.
    pub fn marks(self) -> (Mark, Mark) {
        match self {
            Step::Forward => (Mark::Tail, Mark::Arrowhead),
            Step::Backward => (Mark::Arrowhead, Mark::Tail),
            Step::Dashed => (Mark::DashedTail, Mark::DashedTail),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Step::Forward => "->",
            Step::Backward => "<-",
            Step::Dashed => "---",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Walk {
    pub nodes: Vec<NodeId>,
    pub steps: Vec<Step>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn source(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn target(&self) -> &NodeId {
        self.nodes.last().expect("walk has a source")
    }

    pub fn uses_dashed(&self) -> bool {
        self.steps.contains(&Step::Dashed)
    }

    /// Alternating node / edge-symbol sequence, e.g. `["a", "->", "c"]`.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.nodes.len() + self.steps.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                out.push(self.steps[i - 1].symbol());
            }
            out.push(n.as_str());
        }
        out
    }

    /// Checks the walk against `g` and `q` edge by edge, independently of the
    /// search that produced it.
    pub fn replays(&self, g: &MixedGraph, q: &WalkQuery) -> bool {
        if self.steps.is_empty() || self.nodes.len() != self.steps.len() + 1 {
            return false;
        }
        for (k, step) in self.steps.iter().enumerate() {
            let (u, v) = (self.nodes[k].as_str(), self.nodes[k + 1].as_str());
            let present = match step {
                Step::Forward => g.has_directed(u, v),
                Step::Backward => g.has_directed(v, u),
                Step::Dashed => g.has_dashed(u, v),
            };
            if !present {
                return false;
            }
        }
        let (src, tgt) = (self.source(), self.target());
        if !q.sources.contains(src) || !q.targets.contains(tgt) {
            return false;
        }
        if src == tgt && !q.allow_source_equals_target {
            return false;
        }
        if !q.first.admits(self.steps[0].marks().0) || !q.last.admits(self.steps[self.len() - 1].marks().1) {
            return false;
        }
        (1..self.nodes.len() - 1).all(|k| {
            let occ = classify_occurrence(self.steps[k - 1].marks().1, self.steps[k].marks().0);
            (occ == Occurrence::Collider) == q.given.contains(&self.nodes[k])
        })
    }
}

impl fmt::Display for Walk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens().join(" "))
    }
}

impl Serialize for Walk {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let tokens = self.tokens();
        let mut seq = serializer.serialize_seq(Some(tokens.len()))?;
        for t in tokens {
            seq.serialize_element(t)?;
        }
        seq.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkQuery {
    pub sources: NodeSet,
    pub targets: NodeSet,
    pub given: NodeSet,
    pub first: FirstEdgeConstraint,
    pub last: LastEdgeConstraint,
    pub allow_source_equals_target: bool,
}

impl WalkQuery {
    pub fn new(sources: NodeSet, targets: NodeSet, given: NodeSet) -> Self {
        WalkQuery {
            sources,
            targets,
            given,
            first: FirstEdgeConstraint::Any,
            last: LastEdgeConstraint::Any,
            allow_source_equals_target: false,
        }
    }

    pub fn first(mut self, c: FirstEdgeConstraint) -> Self {
        self.first = c;
        self
    }

    pub fn last(mut self, c: LastEdgeConstraint) -> Self {
        self.last = c;
        self
    }

    pub fn allow_source_equals_target(mut self, allow: bool) -> Self {
        self.allow_source_equals_target = allow;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub connected: bool,
    pub witness: Option<Walk>,
}

impl Verdict {
    fn blocked() -> Self {
        Verdict { connected: false, witness: None }
    }

    fn found(w: Walk) -> Self {
        Verdict { connected: true, witness: Some(w) }
    }
}

struct Resolved {
    sources: Vec<usize>,
    target: Vec<bool>,
    given: Vec<bool>,
}

fn resolve(g: &MixedGraph, q: &WalkQuery) -> Result<Resolved> {
    if q.sources.is_empty() {
        return Err(Error::invalid("walk query needs at least one source"));
    }
    if q.targets.is_empty() {
        return Err(Error::invalid("walk query needs at least one target"));
    }
    Ok(Resolved { sources: g.indices(&q.sources)?, target: g.mask(&q.targets)?, given: g.mask(&q.given)? })
}

/// Edges at `u` in a fixed order: children, parents, dashed neighbours.
fn moves(g: &MixedGraph, u: usize) -> impl Iterator<Item = (usize, Step)> + '_ {
    g.children_of(u)
        .iter()
        .map(|&v| (v, Step::Forward))
        .chain(g.parents_of(u).iter().map(|&v| (v, Step::Backward)))
        .chain(g.spouses_of(u).iter().map(|&v| (v, Step::Dashed)))
}

fn passes(entry: Mark, exit: Mark, in_given: bool) -> bool {
    (classify_occurrence(entry, exit) == Occurrence::Collider) == in_given
}

pub fn exists_connecting_walk(g: &MixedGraph, q: &WalkQuery) -> Result<Verdict> {
    let r = resolve(g, q)?;
    for &src in &r.sources {
        if let Some(w) = search_from(g, q, &r, src) {
            return Ok(Verdict::found(w));
        }
    }
    Ok(Verdict::blocked())
}

const START: usize = usize::MAX;

fn search_from(g: &MixedGraph, q: &WalkQuery, r: &Resolved, src: usize) -> Option<Walk> {
    let n = g.len();
    // parent[state] = (previous state, step taken into this state)
    let mut parent: Vec<Option<(usize, Step)>> = vec![None; 3 * n];
    let mut queue = std::collections::VecDeque::new();

    let visit = |state: usize, from: usize, step: Step, parent: &mut Vec<Option<(usize, Step)>>| -> bool {
        if parent[state].is_some() {
            return false;
        }
        parent[state] = Some((from, step));
        true
    };

    let is_hit = |v: usize, entry: Mark| -> bool {
        r.target[v] && q.last.admits(entry) && (v != src || q.allow_source_equals_target)
    };

    for (v, step) in moves(g, src) {
        let (out, entry) = step.marks();
        if !q.first.admits(out) {
            continue;
        }
        let state = v * 3 + entry.index();
        if visit(state, START, step, &mut parent) {
            if is_hit(v, entry) {
                return Some(rebuild(g, &parent, src, state));
            }
            queue.push_back(state);
        }
    }

    while let Some(state) = queue.pop_front() {
        let (u, entry) = (state / 3, Mark::from_index(state % 3));
        for (v, step) in moves(g, u) {
            let (out, next_entry) = step.marks();
            if !passes(entry, out, r.given[u]) {
                continue;
            }
            let next = v * 3 + next_entry.index();
            if visit(next, state, step, &mut parent) {
                if is_hit(v, next_entry) {
                    return Some(rebuild(g, &parent, src, next));
                }
                queue.push_back(next);
            }
        }
    }
    None
}

fn rebuild(g: &MixedGraph, parent: &[Option<(usize, Step)>], src: usize, end: usize) -> Walk {
    let mut nodes = vec![g.id(end / 3).clone()];
    let mut steps = Vec::new();
    let mut cur = end;
    loop {
        let (prev, step) = parent[cur].expect("visited state has a parent");
        steps.push(step);
        if prev == START {
            nodes.push(g.id(src).clone());
            break;
        }
        nodes.push(g.id(prev / 3).clone());
        cur = prev;
    }
    nodes.reverse();
    steps.reverse();
    Walk { nodes, steps }
}

/// Exhaustive depth-first enumeration of walks with at most `max_edges`
/// edges. Exponential; intended as an oracle on small graphs.
pub fn brute_force_connecting_walk(g: &MixedGraph, q: &WalkQuery, max_edges: usize) -> Result<Verdict> {
    if max_edges == 0 {
        return Err(Error::invalid("max_edges must be at least 1"));
    }
    let r = resolve(g, q)?;
    for &src in &r.sources {
        let mut nodes = vec![src];
        let mut steps = Vec::new();
        if dfs(g, q, &r, src, max_edges, &mut nodes, &mut steps) {
            return Ok(Verdict::found(Walk {
                nodes: nodes.iter().map(|&i| g.id(i).clone()).collect(),
                steps,
            }));
        }
    }
    Ok(Verdict::blocked())
}

fn dfs(
    g: &MixedGraph,
    q: &WalkQuery,
    r: &Resolved,
    src: usize,
    max_edges: usize,
    nodes: &mut Vec<usize>,
    steps: &mut Vec<Step>,
) -> bool {
    if steps.len() == max_edges {
        return false;
    }
    let u = *nodes.last().expect("non-empty walk");
    let edges: Vec<(usize, Step)> = moves(g, u).collect();
    for (v, step) in edges {
        let (out, entry) = step.marks();
        let ok = match steps.last() {
            None => q.first.admits(out),
            Some(prev) => passes(prev.marks().1, out, r.given[u]),
        };
        if !ok {
            continue;
        }
        nodes.push(v);
        steps.push(step);
        if r.target[v] && q.last.admits(entry) && (v != src || q.allow_source_equals_target) {
            return true;
        }
        if dfs(g, q, r, src, max_edges, nodes, steps) {
            return true;
        }
        nodes.pop();
        steps.pop();
    }
    false
}

/// Connection query between disjoint sets with no edge constraints.
pub fn m_connection(g: &MixedGraph, a: &NodeSet, b: &NodeSet, given: &NodeSet) -> Result<Verdict> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("m-separation needs non-empty node sets"));
    }
    if let Some(x) = a.intersection(b).next() {
        return Err(Error::invalid(format!("m-separation needs disjoint sets; `{x}` is in both")));
    }
    exists_connecting_walk(g, &WalkQuery::new(a.clone(), b.clone(), given.clone()))
}

pub fn m_separated(g: &MixedGraph, a: &NodeSet, b: &NodeSet, given: &NodeSet) -> Result<bool> {
    Ok(!m_connection(g, a, b, given)?.connected)
}
