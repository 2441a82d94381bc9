//! Exact offline optima for small instances, the witness construction for
//! the facility location charge, and feasibility checkers that share no code
//! with either.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::covering::{
    ClientId, ElementId, FacilityId, FacilityLocationInstance, SetCoverInstance, SetId,
};
use crate::error::{Error, Result};
use crate::graph::{distances_from, NodeWeightedGraph, VertexId};
use crate::steiner::TerminalEvent;
use crate::union_find::UnionFind;
use crate::weight::Dyadic;

const TOL: f64 = 1e-9;

/// Hard size limits. Exceeding one is an error, never an approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleCaps {
    pub max_sets: usize,
    pub max_facilities: usize,
    pub max_vertices: usize,
    pub max_pairs: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps {
            max_sets: 25,
            max_facilities: 20,
            max_vertices: 20,
            max_pairs: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult<W> {
    pub opt_value: f64,
    pub witness: W,
    pub nodes_explored: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FacilityWitness {
    pub open: Vec<FacilityId>,
    pub assignment: Vec<(ClientId, FacilityId)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ForestWitness {
    /// Bought non-terminal vertices.
    pub vertices: Vec<VertexId>,
    /// Indices of abandoned pairs.
    pub penalized: Vec<usize>,
}

fn check_cap(what: &'static str, got: usize, cap: usize) -> Result<()> {
    if got > cap {
        Err(Error::SizeCap { what, got, cap })
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------- set cover

struct ScSearch<'a> {
    inst: &'a SetCoverInstance,
    elements: Vec<ElementId>,
    chosen: Vec<SetId>,
    best: f64,
    best_sets: Vec<SetId>,
    nodes: u64,
}

impl ScSearch<'_> {
    fn uncovered(&self) -> Vec<ElementId> {
        self.elements
            .iter()
            .copied()
            .filter(|&e| !self.inst.covers(&self.chosen, e))
            .collect()
    }

    /// Every uncovered element pays the best cost per newly covered element
    /// among its sets; a cover pays at least the sum.
    fn density_bound(&self, uncovered: &[ElementId]) -> f64 {
        let mut total = 0.0;
        for &e in uncovered {
            let mut best = f64::INFINITY;
            for &s in self.inst.candidates(e) {
                let fresh = self
                    .inst
                    .set(s)
                    .iter()
                    .filter(|x| uncovered.binary_search(x).is_ok())
                    .count();
                best = best.min(self.inst.cost(s) / fresh as f64);
            }
            total += best;
        }
        total
    }

    fn go(&mut self, cost: f64) {
        self.nodes += 1;
        let uncovered = self.uncovered();
        if uncovered.is_empty() {
            if cost < self.best {
                self.best = cost;
                self.best_sets = self.chosen.clone();
            }
            return;
        }
        if cost + self.density_bound(&uncovered) >= self.best - TOL {
            return;
        }
        let e = *uncovered
            .iter()
            .min_by_key(|&&e| (self.inst.candidates(e).len(), e))
            .unwrap();
        let mut cands = self.inst.candidates(e).to_vec();
        cands.sort_by(|a, b| {
            self.inst
                .cost(*a)
                .total_cmp(&self.inst.cost(*b))
                .then(a.cmp(b))
        });
        for s in cands {
            self.chosen.push(s);
            self.go(cost + self.inst.cost(s));
            self.chosen.pop();
        }
    }
}

/// Minimum-cost cover of `elements` by branch and bound.
pub fn opt_set_cover(
    inst: &SetCoverInstance,
    elements: &[ElementId],
    caps: &OracleCaps,
) -> Result<OracleResult<Vec<SetId>>> {
    check_cap("sets", inst.n_sets(), caps.max_sets)?;
    let elements: Vec<ElementId> = elements
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if let Some(&e) = elements.iter().find(|&&e| inst.candidates(e).is_empty()) {
        return Err(Error::InfeasibleElement(e));
    }
    let mut search = ScSearch {
        inst,
        elements,
        chosen: Vec::new(),
        best: f64::INFINITY,
        best_sets: Vec::new(),
        nodes: 0,
    };
    search.go(0.0);
    let mut sets = search.best_sets;
    sets.sort_unstable();
    Ok(OracleResult {
        opt_value: search.best,
        witness: sets,
        nodes_explored: search.nodes,
    })
}

// ------------------------------------------------------ facility location

struct FlSearch<'a> {
    inst: &'a FacilityLocationInstance,
    clients: Vec<ClientId>,
    order: Vec<FacilityId>,
    state: Vec<Option<bool>>,
    best: f64,
    best_open: Vec<FacilityId>,
    nodes: u64,
}

impl FlSearch<'_> {
    fn connection(&self, optimistic: bool) -> f64 {
        self.clients
            .iter()
            .map(|&c| {
                self.inst
                    .candidates(c)
                    .iter()
                    .filter(|x| match self.state[x.facility] {
                        Some(open) => open,
                        None => optimistic,
                    })
                    .map(|x| x.connection)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    fn go(&mut self, depth: usize, opening: f64) {
        self.nodes += 1;
        if opening + self.connection(true) >= self.best - TOL {
            return;
        }
        if depth == self.order.len() {
            let total = opening + self.connection(false);
            if total < self.best {
                self.best = total;
                self.best_open = (0..self.state.len())
                    .filter(|&f| self.state[f] == Some(true))
                    .collect();
            }
            return;
        }
        let f = self.order[depth];
        self.state[f] = Some(true);
        self.go(depth + 1, opening + self.inst.fac_cost(f));
        self.state[f] = Some(false);
        self.go(depth + 1, opening);
        self.state[f] = None;
    }
}

/// Exact optimum over facility subsets, with each client on its cheapest
/// open facility.
pub fn opt_nmfl(
    inst: &FacilityLocationInstance,
    clients: &[ClientId],
    caps: &OracleCaps,
) -> Result<OracleResult<FacilityWitness>> {
    check_cap("facilities", inst.n_facilities(), caps.max_facilities)?;
    let clients: Vec<ClientId> = clients
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if let Some(&c) = clients.iter().find(|&&c| inst.candidates(c).is_empty()) {
        return Err(Error::InfeasibleClient(c));
    }
    if clients.is_empty() {
        let witness = FacilityWitness {
            open: Vec::new(),
            assignment: Vec::new(),
        };
        return Ok(OracleResult {
            opt_value: 0.0,
            witness,
            nodes_explored: 0,
        });
    }
    // only facilities some client can use matter
    let useful: BTreeSet<FacilityId> = clients
        .iter()
        .flat_map(|&c| inst.candidates(c).into_iter().map(|x| x.facility))
        .collect();
    let mut search = FlSearch {
        inst,
        clients: clients.clone(),
        order: useful.into_iter().collect(),
        state: vec![Some(false); inst.n_facilities()],
        best: f64::INFINITY,
        best_open: Vec::new(),
        nodes: 0,
    };
    for &f in &search.order.clone() {
        search.state[f] = None;
    }
    search.go(0, 0.0);
    let open = search.best_open;
    let assignment = clients
        .iter()
        .map(|&c| {
            let f = inst
                .candidates(c)
                .into_iter()
                .filter(|x| open.binary_search(&x.facility).is_ok())
                .min_by(|a, b| {
                    a.connection
                        .total_cmp(&b.connection)
                        .then(a.facility.cmp(&b.facility))
                })
                .expect("optimal solution serves every client")
                .facility;
            (c, f)
        })
        .collect();
    Ok(OracleResult {
        opt_value: search.best,
        witness: FacilityWitness { open, assignment },
        nodes_explored: search.nodes,
    })
}

// ------------------------------------------------------- steiner forest

struct PcSearch<'a> {
    g: &'a NodeWeightedGraph,
    pairs: &'a [TerminalEvent],
    order: Vec<VertexId>,
    state: Vec<Option<bool>>,
    best: f64,
    best_sol: ForestWitness,
    nodes: u64,
}

impl PcSearch<'_> {
    /// Penalties of pairs not connected when undecided vertices count as
    /// present (`optimistic`) or absent.
    fn penalties(&self, optimistic: bool) -> (f64, Vec<usize>) {
        let mask: Vec<bool> = self.state.iter().map(|s| s.unwrap_or(optimistic)).collect();
        let mut uf = self.g.induced_components(&mask);
        let mut total = 0.0;
        let mut cut = Vec::new();
        for (i, ev) in self.pairs.iter().enumerate() {
            if !uf.same(ev.s, ev.t) {
                total += ev.penalty;
                cut.push(i);
            }
        }
        (total, cut)
    }

    fn go(&mut self, depth: usize, weight: f64) {
        self.nodes += 1;
        let (lb, _) = self.penalties(true);
        if weight + lb >= self.best - TOL {
            return;
        }
        if depth == self.order.len() {
            let (pen, cut) = self.penalties(false);
            let total = weight + pen;
            if total < self.best {
                self.best = total;
                let vertices = self
                    .order
                    .iter()
                    .copied()
                    .filter(|&v| self.state[v] == Some(true))
                    .collect();
                self.best_sol = ForestWitness {
                    vertices,
                    penalized: cut,
                };
            }
            return;
        }
        let v = self.order[depth];
        let w = self.g.weight(v).to_f64();
        self.state[v] = Some(true);
        self.go(depth + 1, weight + w);
        self.state[v] = Some(false);
        self.go(depth + 1, weight);
        self.state[v] = None;
    }
}

/// Exact prize-collecting optimum: terminals are free, bought non-terminals
/// pay their weight and unconnected pairs pay their penalty.
pub fn opt_pc_nwsf(
    g: &NodeWeightedGraph,
    pairs: &[TerminalEvent],
    caps: &OracleCaps,
) -> Result<OracleResult<ForestWitness>> {
    check_cap("vertices", g.n(), caps.max_vertices)?;
    check_cap("pairs", pairs.len(), caps.max_pairs)?;
    for ev in pairs {
        ev.validate(g.n())?;
    }
    let terminal: BTreeSet<VertexId> = pairs.iter().flat_map(|ev| [ev.s, ev.t]).collect();
    let mut state = vec![None; g.n()];
    let mut order = Vec::new();
    for v in 0..g.n() {
        if terminal.contains(&v) || g.weight(v).is_zero() {
            // free vertices never hurt
            state[v] = Some(true);
        } else {
            order.push(v);
        }
    }
    order.sort_by(|&a, &b| g.weight(b).cmp(&g.weight(a)).then(a.cmp(&b)));
    let mut search = PcSearch {
        g,
        pairs,
        order,
        state,
        best: f64::INFINITY,
        best_sol: ForestWitness {
            vertices: Vec::new(),
            penalized: Vec::new(),
        },
        nodes: 0,
    };
    let mut full = g.induced_components(&vec![true; g.n()]);
    if let Some(ev) = pairs
        .iter()
        .find(|ev| ev.penalty.is_infinite() && !full.same(ev.s, ev.t))
    {
        return Err(Error::InfeasiblePair { s: ev.s, t: ev.t });
    }
    search.go(0, 0.0);
    let mut witness = search.best_sol;
    witness
        .vertices
        .extend((0..g.n()).filter(|&v| !terminal.contains(&v) && g.weight(v).is_zero()));
    witness.vertices.sort_unstable();
    Ok(OracleResult {
        opt_value: search.best,
        witness,
        nodes_explored: search.nodes,
    })
}

// --------------------------------------------------------------- checkers

/// Cost of `sets` if it covers `elements`.
pub fn check_set_cover(
    inst: &SetCoverInstance,
    elements: &[ElementId],
    sets: &[SetId],
) -> Result<f64> {
    let mut covered = BTreeSet::new();
    let mut distinct = BTreeSet::new();
    for &s in sets {
        if s >= inst.n_sets() {
            return Err(Error::contract(format!("set {s} does not exist")));
        }
        distinct.insert(s);
        covered.extend(inst.set(s).iter().copied());
    }
    if let Some(e) = elements.iter().find(|e| !covered.contains(e)) {
        return Err(Error::contract(format!("element {e} is uncovered")));
    }
    Ok(distinct.iter().map(|&s| inst.cost(s)).sum())
}

/// Cost of a facility solution if every client is assigned to an open
/// facility at finite cost.
pub fn check_nmfl(
    inst: &FacilityLocationInstance,
    clients: &[ClientId],
    w: &FacilityWitness,
) -> Result<f64> {
    let open: BTreeSet<FacilityId> = w.open.iter().copied().collect();
    let mut total: f64 = open.iter().map(|&f| inst.fac_cost(f)).sum();
    for &c in clients {
        let Some(&(_, f)) = w.assignment.iter().find(|a| a.0 == c) else {
            return Err(Error::contract(format!("client {c} is unassigned")));
        };
        if !open.contains(&f) {
            return Err(Error::contract(format!(
                "client {c} uses closed facility {f}"
            )));
        }
        let conn = inst.conn_cost(c, f);
        if !conn.is_finite() {
            return Err(Error::contract(format!(
                "client {c} cannot reach facility {f}"
            )));
        }
        total += conn;
    }
    Ok(total)
}

/// Cost of a forest solution if every pair not in `penalized` is joined by a
/// path through `vertices` and terminals. Uses breadth-first search.
pub fn check_forest(
    g: &NodeWeightedGraph,
    pairs: &[TerminalEvent],
    w: &ForestWitness,
) -> Result<f64> {
    let mut present = vec![false; g.n()];
    for ev in pairs {
        present[ev.s] = true;
        present[ev.t] = true;
    }
    let mut total = 0.0;
    for &v in &w.vertices {
        g.check_vertex(v)?;
        if !present[v] {
            present[v] = true;
            total += g.weight(v).to_f64();
        }
    }
    let penalized: BTreeSet<usize> = w.penalized.iter().copied().collect();
    for (i, ev) in pairs.iter().enumerate() {
        if penalized.contains(&i) {
            total += ev.penalty;
            continue;
        }
        let mut seen = vec![false; g.n()];
        let mut queue = VecDeque::from([ev.s]);
        seen[ev.s] = true;
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if present[v] && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if !seen[ev.t] {
            return Err(Error::contract(format!(
                "pair {i} ({}, {}) is not connected",
                ev.s, ev.t
            )));
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------- witness

/// One client of the auxiliary facility location instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessClient {
    pub terminal: VertexId,
    pub radius: Dyadic,
    /// The pair that emitted it.
    pub pair: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallWitness {
    pub opened: Vec<VertexId>,
    /// `None` is the penalty facility.
    pub assignment: Vec<Option<VertexId>>,
    pub facility_cost: f64,
    pub connection_cost: f64,
    pub penalty_cost: f64,
    pub total: f64,
    /// Offline cost: forest weight plus penalties.
    pub offline_cost: f64,
    pub ell: u64,
}

impl BallWitness {
    pub fn within_bound(&self) -> bool {
        self.total <= 2.0 * self.ell as f64 * self.offline_cost + TOL * (1.0 + self.offline_cost)
    }
}

/// Builds the facility location solution charged against an offline forest:
/// open every forest vertex at `ell` times its weight and send each client
/// to the first boundary vertex its forest component reaches from inside the
/// ball. Clients of penalized pairs take the penalty facility.
pub fn ball_witness(
    g: &NodeWeightedGraph,
    pairs: &[TerminalEvent],
    offline: &ForestWitness,
    clients: &[WitnessClient],
    ell: u64,
) -> Result<BallWitness> {
    let offline_cost = check_forest(g, pairs, offline)?;
    let mut forest = vec![false; g.n()];
    for ev in pairs {
        forest[ev.s] = true;
        forest[ev.t] = true;
    }
    for &v in &offline.vertices {
        forest[v] = true;
    }
    let penalized: BTreeSet<usize> = offline.penalized.iter().copied().collect();
    let ellf = ell as f64;
    let mut out = BallWitness {
        opened: Vec::new(),
        assignment: Vec::new(),
        facility_cost: 0.0,
        connection_cost: 0.0,
        penalty_cost: 0.0,
        total: 0.0,
        offline_cost,
        ell,
    };
    let mut opened = BTreeSet::new();
    let mut paid = BTreeSet::new();
    for c in clients {
        if c.pair >= pairs.len() {
            return Err(Error::input(format!("client refers to pair {}", c.pair)));
        }
        if penalized.contains(&c.pair) {
            if paid.insert(c.pair) {
                out.penalty_cost += pairs[c.pair].penalty;
            }
            out.assignment.push(None);
            continue;
        }
        let d = distances_from(g, None, c.terminal);
        let in_ball = |v: VertexId| d[v].is_some_and(|dv| c.radius.exceeds(dv));
        let on_boundary =
            |v: VertexId| in_ball(v) && !c.radius.exceeds(d[v].unwrap() + g.weight(v));
        let mut seen = vec![false; g.n()];
        let mut queue = VecDeque::from([c.terminal]);
        seen[c.terminal] = true;
        let mut hit = None;
        while let Some(u) = queue.pop_front() {
            if on_boundary(u) {
                hit = Some(u);
                break;
            }
            for &v in g.neighbors(u) {
                if forest[v] && !seen[v] && in_ball(v) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        let Some(f) = hit else {
            return Err(Error::contract(format!(
                "forest component of terminal {} stays inside its ball",
                c.terminal
            )));
        };
        if opened.insert(f) {
            out.facility_cost += ellf * g.weight(f).to_f64();
        }
        out.connection_cost += d[f].unwrap().to_f64();
        out.assignment.push(Some(f));
    }
    out.opened = opened.into_iter().collect();
    out.total = out.facility_cost + out.connection_cost + out.penalty_cost;
    Ok(out)
}

/// Penalty-aware forest feasibility over an online bought set, shared by the
/// acceptance checks: every non-penalized pair is connected in `G[S]`.
pub fn bought_set_feasible(
    g: &NodeWeightedGraph,
    bought: &[bool],
    pairs: &[TerminalEvent],
    penalized: &[bool],
) -> bool {
    let mut uf: UnionFind = g.induced_components(bought);
    pairs
        .iter()
        .zip(penalized)
        .all(|(ev, &pen)| pen || (bought[ev.s] && bought[ev.t] && uf.same(ev.s, ev.t)))
}
