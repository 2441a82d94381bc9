//! Node-weighted undirected graphs and the distance, ball and boundary
//! primitives built on them.
//!
//! Path cost counts the weights of *interior* vertices only: the two
//! endpoints are free, and so is every vertex of a caller-supplied "zeroed"
//! set (typically the vertices already bought). Shortest paths are computed
//! on the vertex-split digraph: vertex `v` becomes `in(v) -> out(v)` with an
//! arc of its (possibly zeroed) weight, and every undirected edge `{x, y}`
//! becomes zero-cost arcs `out(x) -> in(y)` and `out(y) -> in(x)`. A search
//! that starts at `out(u)` and stops at `in(v)` never pays for `u` or `v`.
//!
//! Ties between equal-cost paths are broken by fewer edges, then by the
//! lexicographically smallest vertex sequence.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::union_find::UnionFind;
use crate::weight::{Dyadic, Weight};

pub type VertexId = usize;

#[derive(Clone, Debug)]
pub struct NodeWeightedGraph {
    weights: Vec<Weight>,
    adj: Vec<Vec<VertexId>>,
    edge_count: usize,
}

/// On-disk graph schema, ids 0-based.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GraphSpec {
    pub n: usize,
    pub weights: Vec<f64>,
    pub edges: Vec<[usize; 2]>,
}

impl NodeWeightedGraph {
    /// Builds a graph; duplicate edges are collapsed, self-loops rejected.
    pub fn new(weights: Vec<Weight>, edges: &[(VertexId, VertexId)]) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::input("graph needs at least one vertex"));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::InvalidVertex { vertex: x, n });
                }
            }
            if u == v {
                return Err(Error::input(format!("self-loop at vertex {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut edge_count = 0;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            edge_count += list.len();
        }
        Ok(NodeWeightedGraph {
            weights,
            adj,
            edge_count: edge_count / 2,
        })
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        if spec.weights.len() != spec.n {
            return Err(Error::input(format!(
                "graph declares n = {} but lists {} weights",
                spec.n,
                spec.weights.len()
            )));
        }
        let weights = spec
            .weights
            .iter()
            .map(|&w| Weight::from_f64(w))
            .collect::<Result<Vec<_>>>()?;
        let edges: Vec<_> = spec.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::new(weights, &edges)
    }

    pub fn to_spec(&self) -> GraphSpec {
        let mut edges = Vec::with_capacity(self.edge_count);
        for (u, list) in self.adj.iter().enumerate() {
            for &v in list {
                if u < v {
                    edges.push([u, v]);
                }
            }
        }
        GraphSpec {
            n: self.n(),
            weights: self.weights.iter().map(|w| w.to_f64()).collect(),
            edges,
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn weight(&self, v: VertexId) -> Weight {
        self.weights[v]
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adj[v]
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::InvalidVertex {
                vertex: v,
                n: self.n(),
            })
        }
    }

    /// Sum of weights of `vertices`, each counted once.
    pub fn weight_of<'a>(&self, vertices: impl IntoIterator<Item = &'a VertexId>) -> Weight {
        let mut seen = vec![false; self.n()];
        let mut total = Weight::ZERO;
        for &v in vertices {
            if !seen[v] {
                seen[v] = true;
                total += self.weights[v];
            }
        }
        total
    }

    /// Components of the subgraph induced by `mask`.
    pub fn induced_components(&self, mask: &[bool]) -> UnionFind {
        let mut uf = UnionFind::new(self.n());
        for u in 0..self.n() {
            if !mask[u] {
                continue;
            }
            for &v in &self.adj[u] {
                if u < v && mask[v] {
                    uf.union(u, v);
                }
            }
        }
        uf
    }
}

/// The grow-only set of bought vertices of an online run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoughtSet {
    mask: Vec<bool>,
    order: Vec<VertexId>,
}

impl BoughtSet {
    pub fn new(n: usize) -> Self {
        BoughtSet {
            mask: vec![false; n],
            order: Vec::new(),
        }
    }

    pub fn from_vertices(n: usize, vertices: impl IntoIterator<Item = VertexId>) -> Self {
        let mut set = BoughtSet::new(n);
        for v in vertices {
            set.insert(v);
        }
        set
    }

    /// Returns `true` if `v` was not bought before.
    pub fn insert(&mut self, v: VertexId) -> bool {
        if self.mask[v] {
            return false;
        }
        self.mask[v] = true;
        self.order.push(v);
        true
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.mask[v]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Members in purchase order.
    pub fn members(&self) -> &[VertexId] {
        &self.order
    }

    pub fn is_superset_of(&self, other: &BoughtSet) -> bool {
        other.order.iter().all(|&v| self.mask[v])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathResult {
    pub cost: Weight,
    pub path: Vec<VertexId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetPathResult {
    pub cost: Weight,
    pub path: Vec<VertexId>,
    pub hit: VertexId,
}

/// Search label: total cost, then number of edges.
type Label = (Weight, u32);

#[inline]
fn in_node(v: VertexId) -> usize {
    2 * v
}

#[inline]
fn out_node(v: VertexId) -> usize {
    2 * v + 1
}

fn arc_costs(g: &NodeWeightedGraph, zeroed: Option<&BoughtSet>) -> Vec<Weight> {
    match zeroed {
        None => g.weights.clone(),
        Some(z) => g
            .weights
            .iter()
            .enumerate()
            .map(|(v, &w)| if z.contains(v) { Weight::ZERO } else { w })
            .collect(),
    }
}

/// Label-setting search over the split digraph. `backward` walks arcs in
/// reverse, so labels become costs *to* the sources.
fn split_search(
    g: &NodeWeightedGraph,
    cost: &[Weight],
    sources: &[usize],
    backward: bool,
) -> Vec<Option<Label>> {
    let mut label: Vec<Option<Label>> = vec![None; 2 * g.n()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        heap.push(Reverse((Weight::ZERO, 0u32, s)));
    }
    while let Some(Reverse((c, h, node))) = heap.pop() {
        if label[node].is_some() {
            continue;
        }
        label[node] = Some((c, h));
        let v = node / 2;
        let is_in = node % 2 == 0;
        // forward: in(v) -> out(v) [cost], out(v) -> in(y) [edge]
        // backward: out(v) -> in(v) [cost], in(v) -> out(y) [edge]
        if is_in != backward {
            let next = if backward { in_node(v) } else { out_node(v) };
            if label[next].is_none() {
                heap.push(Reverse((c + cost[v], h, next)));
            }
        } else {
            for &y in &g.adj[v] {
                let next = if backward { out_node(y) } else { in_node(y) };
                if label[next].is_none() {
                    heap.push(Reverse((c, h + 1, next)));
                }
            }
        }
    }
    label
}

/// Cheapest-path cost from `u` to every vertex, excluding endpoint weights
/// and the weights of `zeroed`. `None` means unreachable.
pub fn distances_from(
    g: &NodeWeightedGraph,
    zeroed: Option<&BoughtSet>,
    u: VertexId,
) -> Vec<Option<Weight>> {
    let cost = arc_costs(g, zeroed);
    let labels = split_search(g, &cost, &[out_node(u)], false);
    let mut dist: Vec<Option<Weight>> = (0..g.n())
        .map(|v| labels[in_node(v)].map(|l| l.0))
        .collect();
    dist[u] = Some(Weight::ZERO);
    dist
}

/// Reconstructs the tie-broken optimal path from `u` to `target` using
/// backward labels towards `in(target)`.
fn walk_path(
    g: &NodeWeightedGraph,
    cost: &[Weight],
    u: VertexId,
    target: VertexId,
) -> Option<PathResult> {
    if u == target {
        return Some(PathResult {
            cost: Weight::ZERO,
            path: vec![u],
        });
    }
    let back = split_search(g, cost, &[in_node(target)], true);
    let (total, _) = back[out_node(u)]?;
    let mut path = vec![u];
    let mut at = u;
    let mut remaining = back[out_node(u)].unwrap();
    loop {
        // At out(at): take the smallest neighbour y whose in-node continues an
        // optimal path.
        let mut moved = false;
        for &y in &g.adj[at] {
            let Some(ly) = back[in_node(y)] else { continue };
            if ly.0 == remaining.0 && ly.1 + 1 == remaining.1 {
                path.push(y);
                if y == target {
                    return Some(PathResult { cost: total, path });
                }
                // in(y) -> out(y) pays cost[y]
                remaining = back[out_node(y)].expect("optimal path continues");
                debug_assert_eq!(remaining.0 + cost[y], ly.0);
                at = y;
                moved = true;
                break;
            }
        }
        if !moved {
            unreachable!("backward labels inconsistent");
        }
    }
}

/// `d_{G/S}(u, v)` with its realizing path; `None` when disconnected.
pub fn dist_excluding(
    g: &NodeWeightedGraph,
    zeroed: &BoughtSet,
    u: VertexId,
    v: VertexId,
) -> Result<Option<PathResult>> {
    g.check_vertex(u)?;
    g.check_vertex(v)?;
    let cost = arc_costs(g, Some(zeroed));
    Ok(walk_path(g, &cost, u, v))
}

/// `d_G(u, v)`: the same with nothing zeroed.
pub fn dist(g: &NodeWeightedGraph, u: VertexId, v: VertexId) -> Result<Option<PathResult>> {
    g.check_vertex(u)?;
    g.check_vertex(v)?;
    let cost = arc_costs(g, None);
    Ok(walk_path(g, &cost, u, v))
}

/// Cheapest path from `u` to any vertex of `targets`. The hit target is the
/// cheapest one, ties going to the smallest id.
pub fn dist_to_set(
    g: &NodeWeightedGraph,
    zeroed: &BoughtSet,
    u: VertexId,
    targets: &[VertexId],
) -> Result<Option<SetPathResult>> {
    g.check_vertex(u)?;
    if targets.is_empty() {
        return Err(Error::input("dist_to_set needs a nonempty target set"));
    }
    for &t in targets {
        g.check_vertex(t)?;
    }
    let cost = arc_costs(g, Some(zeroed));
    let labels = split_search(g, &cost, &[out_node(u)], false);
    let mut best: Option<(Weight, VertexId)> = None;
    for &t in targets {
        let d = if t == u {
            Some(Weight::ZERO)
        } else {
            labels[in_node(t)].map(|l| l.0)
        };
        if let Some(d) = d {
            if best.is_none_or(|(bd, bt)| (d, t) < (bd, bt)) {
                best = Some((d, t));
            }
        }
    }
    let Some((_, hit)) = best else {
        return Ok(None);
    };
    let p = walk_path(g, &cost, u, hit).expect("reachable target has a path");
    Ok(Some(SetPathResult {
        cost: p.cost,
        path: p.path,
        hit,
    }))
}

/// Ball `B(u, r)` and boundary `Bd(u, r)` under `d_G`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallBoundary {
    pub ball: Vec<VertexId>,
    pub boundary: Vec<VertexId>,
}

/// Membership tests given precomputed `d_G(u, ·)`.
pub fn ball_boundary_from(
    g: &NodeWeightedGraph,
    dist_from_u: &[Option<Weight>],
    r: Dyadic,
) -> BallBoundary {
    let mut ball = Vec::new();
    let mut boundary = Vec::new();
    for v in 0..g.n() {
        let Some(d) = dist_from_u[v] else { continue };
        if r.cmp_weight(d) == Ordering::Less {
            ball.push(v);
            if r.cmp_weight(d + g.weight(v)) != Ordering::Less {
                boundary.push(v);
            }
        }
    }
    BallBoundary { ball, boundary }
}

/// `Bd(u, r) = { v : d_G(u,v) < r <= d_G(u,v) + w_v }` together with the
/// open ball `B(u, r) = { v : d_G(u,v) < r }`.
pub fn boundary(g: &NodeWeightedGraph, u: VertexId, r: Dyadic) -> Result<BallBoundary> {
    g.check_vertex(u)?;
    if r.is_zero() {
        return Err(Error::input("boundary radius must be positive"));
    }
    Ok(ball_boundary_from(g, &distances_from(g, None, u), r))
}
