//! Graph-level causal queries: the Granger-causal Markov conditions, the
//! all-horizons condition, and the back-door / front-door identification
//! criteria, plus an exhaustive search for admissible conditioning sets.
//!
//! Every criterion is reduced to one or more walk queries. When a query's
//! source set meets its target set (the source is its own ancestor, say),
//! walks returning to their own source are checked as a separate named
//! condition so both readings stay visible in the report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ancestors, MixedGraph, NodeId, NodeSet};
use crate::separation::{exists_connecting_walk, FirstEdgeConstraint, LastEdgeConstraint, Walk, WalkQuery};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionOutcome {
    pub name: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub holds: bool,
    pub violations: Vec<Walk>,
    pub checked_conditions: Vec<ConditionOutcome>,
}

impl CriterionReport {
    fn new() -> Self {
        CriterionReport { holds: true, violations: Vec::new(), checked_conditions: Vec::new() }
    }

    fn record(&mut self, name: impl Into<String>, witness: Option<Walk>) {
        let holds = witness.is_none();
        self.checked_conditions.push(ConditionOutcome { name: name.into(), holds });
        if let Some(w) = witness {
            self.holds = false;
            self.violations.push(w);
        }
    }

    /// Runs `q` and records it as `name`. Walks that return to their own
    /// source are split off into `<name>/source_return`.
    fn check_walks(&mut self, g: &MixedGraph, name: &str, q: WalkQuery) -> Result<()> {
        let returning: NodeSet = q.sources.intersection(&q.targets).cloned().collect();
        let main = WalkQuery { allow_source_equals_target: false, ..q.clone() };
        self.record(name, exists_connecting_walk(g, &main)?.witness);
        if q.allow_source_equals_target && !returning.is_empty() {
            let mut witness = None;
            for s in &returning {
                let single: NodeSet = [s.clone()].into();
                let rq = WalkQuery { sources: single.clone(), targets: single, ..q.clone() };
                if let Some(w) = exists_connecting_walk(g, &rq)?.witness {
                    witness = Some(w);
                    break;
                }
            }
            self.record(format!("{name}/source_return"), witness);
        }
        Ok(())
    }
}

fn check_known(g: &MixedGraph, sets: &[&NodeSet]) -> Result<()> {
    for s in sets {
        for id in s.iter() {
            if !g.contains(id) {
                return Err(Error::UnknownNode(id.to_string()));
            }
        }
    }
    Ok(())
}

fn pairwise_disjoint(a: &NodeSet, b: &NodeSet, c: &NodeSet) -> Result<()> {
    for (x, y, nx, ny) in [(a, b, "A", "B"), (a, c, "A", "C"), (b, c, "B", "C")] {
        if let Some(v) = x.intersection(y).next() {
            return Err(Error::invalid(format!("sets {nx} and {ny} must be disjoint; `{v}` is in both")));
        }
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("sets A and B must be non-empty"));
    }
    Ok(())
}

fn union(sets: &[&NodeSet]) -> NodeSet {
    sets.iter().flat_map(|s| s.iter().cloned()).collect()
}

/// Every B-pointing walk between A and B is m-blocked given `B ∪ C`.
pub fn granger_noncausal(g: &MixedGraph, a: &NodeSet, b: &NodeSet, c: &NodeSet) -> Result<CriterionReport> {
    check_known(g, &[a, b, c])?;
    pairwise_disjoint(a, b, c)?;
    let q = WalkQuery::new(a.clone(), b.clone(), union(&[b, c])).last(LastEdgeConstraint::PointingIntoTarget);
    let mut r = CriterionReport::new();
    r.check_walks(g, "b_pointing_walks_blocked", q)?;
    Ok(r)
}

/// No dashed edge joins A and B, and every bi-pointing walk between them is
/// m-blocked given `A ∪ B ∪ C`.
pub fn contemporaneously_independent(
    g: &MixedGraph,
    a: &NodeSet,
    b: &NodeSet,
    c: &NodeSet,
) -> Result<CriterionReport> {
    check_known(g, &[a, b, c])?;
    pairwise_disjoint(a, b, c)?;
    let mut r = CriterionReport::new();
    let dashed = g
        .dashed_edges()
        .find(|(x, y)| (a.contains(*x) && b.contains(*y)) || (a.contains(*y) && b.contains(*x)))
        .map(|(x, y)| {
            let (from, to) = if a.contains(x) { (x, y) } else { (y, x) };
            Walk { nodes: vec![from.clone(), to.clone()], steps: vec![crate::separation::Step::Dashed] }
        });
    r.record("no_dashed_edge", dashed);
    let q = WalkQuery::new(a.clone(), b.clone(), union(&[a, b, c]))
        .first(FirstEdgeConstraint::ArrowheadAtSource)
        .last(LastEdgeConstraint::PointingIntoTarget);
    r.check_walks(g, "bi_pointing_walks_blocked", q)?;
    Ok(r)
}

/// Every an(B)-pointing walk between A and an(B) is m-blocked given `B ∪ C`.
/// Targets range over all of an(B), including members of C.
pub fn noncausal_all_horizons(g: &MixedGraph, a: &NodeSet, b: &NodeSet, c: &NodeSet) -> Result<CriterionReport> {
    check_known(g, &[a, b, c])?;
    pairwise_disjoint(a, b, c)?;
    let an_b = ancestors(g, b)?;
    let q = WalkQuery::new(a.clone(), an_b, union(&[b, c]))
        .last(LastEdgeConstraint::PointingIntoTarget)
        .allow_source_equals_target(true);
    let mut r = CriterionReport::new();
    r.check_walks(g, "an_b_pointing_walks_blocked", q)?;
    Ok(r)
}

fn check_pair(g: &MixedGraph, a: &NodeId, b: &NodeId, s: &NodeSet) -> Result<()> {
    g.idx(a)?;
    g.idx(b)?;
    check_known(g, &[s])?;
    if a == b {
        return Err(Error::precondition("a and b must differ"));
    }
    if !s.contains(a) || !s.contains(b) {
        return Err(Error::precondition(format!("conditioning set must contain both `{a}` and `{b}`")));
    }
    Ok(())
}

fn backdoor_query(sources: NodeSet, targets: NodeSet, given: &NodeSet) -> WalkQuery {
    WalkQuery::new(sources, targets, given.clone())
        .first(FirstEdgeConstraint::BackDoorOnly)
        .last(LastEdgeConstraint::PointingIntoTarget)
        .allow_source_equals_target(true)
}

/// Back-door criterion: every an(b)-pointing back-door walk between `a` and
/// an(b) is m-blocked given `S`, where `a, b ∈ S`.
pub fn backdoor_admissible(g: &MixedGraph, a: &NodeId, b: &NodeId, s: &NodeSet) -> Result<CriterionReport> {
    check_pair(g, a, b, s)?;
    let an_b = ancestors(g, &[b.clone()].into())?;
    let mut r = CriterionReport::new();
    r.check_walks(g, "an_b_backdoor_walks_blocked", backdoor_query([a.clone()].into(), an_b, s))?;
    Ok(r)
}

/// Directed reachability from `a` to `b` with the nodes of `blocked` removed.
/// Intermediates of a directed walk are all non-colliders, so this is the
/// m-connection test restricted to directed walks.
pub(crate) fn directed_walk_avoiding(g: &MixedGraph, a: &NodeId, b: &NodeId, blocked: &NodeSet) -> Result<Option<Walk>> {
    let (src, dst) = (g.idx(a)?, g.idx(b)?);
    let blocked = g.mask(blocked)?;
    let mut prev: Vec<Option<usize>> = vec![None; g.len()];
    let mut seen = vec![false; g.len()];
    let mut queue = std::collections::VecDeque::from([src]);
    seen[src] = true;
    while let Some(u) = queue.pop_front() {
        for &v in g.children_of(u) {
            if v == dst {
                let mut nodes = vec![dst, u];
                let mut cur = u;
                while let Some(p) = prev[cur] {
                    nodes.push(p);
                    cur = p;
                }
                nodes.reverse();
                let steps = vec![crate::separation::Step::Forward; nodes.len() - 1];
                return Ok(Some(Walk { nodes: nodes.into_iter().map(|i| g.id(i).clone()).collect(), steps }));
            }
            if !seen[v] && !blocked[v] {
                seen[v] = true;
                prev[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    Ok(None)
}

/// Front-door criterion with mediators `C = S \ {a, b}`:
/// 1. every directed walk from `a` to `b` passes through C;
/// 2. every an(C)-pointing back-door walk between `a` and an(C) is m-blocked given S;
/// 3. every an(b)-pointing back-door walk between C and an(b) is m-blocked given S.
pub fn frontdoor_admissible(g: &MixedGraph, a: &NodeId, b: &NodeId, s: &NodeSet) -> Result<CriterionReport> {
    check_pair(g, a, b, s)?;
    let c: NodeSet = s.iter().filter(|v| *v != a && *v != b).cloned().collect();
    if c.is_empty() {
        return Err(Error::precondition("front-door criterion needs a non-empty mediator set S \\ {a, b}"));
    }
    let mut r = CriterionReport::new();
    r.record("directed_walks_through_mediators", directed_walk_avoiding(g, a, b, &c)?);
    let an_c = ancestors(g, &c)?;
    r.check_walks(g, "an_c_backdoor_walks_from_a_blocked", backdoor_query([a.clone()].into(), an_c, s))?;
    let an_b = ancestors(g, &[b.clone()].into())?;
    r.check_walks(g, "an_b_backdoor_walks_from_c_blocked", backdoor_query(c, an_b, s))?;
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    BackDoor,
    FrontDoor,
}

#[derive(Clone, Debug)]
pub struct AdmissibleSetRequest {
    pub a: NodeId,
    pub b: NodeId,
    pub must_include: NodeSet,
    pub forbidden: NodeSet,
    pub max_size: usize,
    pub criterion: Criterion,
}

impl AdmissibleSetRequest {
    /// Defaults: latent nodes forbidden, no size limit beyond |V|.
    pub fn new(g: &MixedGraph, a: impl Into<NodeId>, b: impl Into<NodeId>, criterion: Criterion) -> Self {
        let (a, b) = (a.into(), b.into());
        AdmissibleSetRequest {
            must_include: [a.clone(), b.clone()].into(),
            a,
            b,
            forbidden: g.latent_ids(),
            max_size: g.len(),
            criterion,
        }
    }

    pub fn forbidden(mut self, forbidden: NodeSet) -> Self {
        self.forbidden = forbidden;
        self
    }

    pub fn max_size(mut self, max_size: usize) -> Self {
        self.max_size = max_size;
        self
    }
}

fn satisfies(g: &MixedGraph, req: &AdmissibleSetRequest, s: &NodeSet) -> Result<bool> {
    Ok(match req.criterion {
        Criterion::BackDoor => backdoor_admissible(g, &req.a, &req.b, s)?.holds,
        Criterion::FrontDoor => frontdoor_admissible(g, &req.a, &req.b, s)?.holds,
    })
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All inclusion-minimal admissible sets `S` with
/// `must_include ⊆ S ⊆ V \ forbidden` and `|S| ≤ max_size`, ordered by size
/// and then lexicographically. Exhaustive; meant for desk-scale graphs.
pub fn find_admissible_sets(g: &MixedGraph, req: &AdmissibleSetRequest) -> Result<Vec<NodeSet>> {
    g.idx(&req.a)?;
    g.idx(&req.b)?;
    check_known(g, &[&req.must_include, &req.forbidden])?;
    if req.a == req.b {
        return Err(Error::invalid("a and b must differ"));
    }
    let mut must = req.must_include.clone();
    must.insert(req.a.clone());
    must.insert(req.b.clone());
    if let Some(v) = must.intersection(&req.forbidden).next() {
        return Err(Error::invalid(format!("`{v}` is both required and forbidden")));
    }
    let candidates: Vec<NodeId> = g
        .node_ids()
        .into_iter()
        .filter(|v| !must.contains(v) && !req.forbidden.contains(v))
        .collect();

    let mut found: Vec<NodeSet> = Vec::new();
    for extra in 0..=candidates.len() {
        if must.len() + extra > req.max_size {
            break;
        }
        if req.criterion == Criterion::FrontDoor && must.len() + extra <= 2 {
            continue;
        }
        let level: Vec<NodeSet> = combinations(candidates.len(), extra)
            .into_iter()
            .map(|combo| {
                let mut s = must.clone();
                s.extend(combo.into_iter().map(|i| candidates[i].clone()));
                s
            })
            .filter(|s| !found.iter().any(|f| f.is_subset(s)))
            .collect();
        let passed: Vec<Option<NodeSet>> = level
            .into_par_iter()
            .map(|s| satisfies(g, req, &s).map(|ok| ok.then_some(s)))
            .collect::<Result<_>>()?;
        let mut passed: Vec<NodeSet> = passed.into_iter().flatten().collect();
        passed.sort_by(|x, y| x.iter().cmp(y.iter()));
        found.extend(passed);
    }
    Ok(found)
}
