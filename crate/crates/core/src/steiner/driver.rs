use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use super::TerminalEvent;
use crate::covering::FacilityCandidate;
use crate::error::{Error, Result};
use crate::graph::{self, BoughtSet, NodeWeightedGraph, VertexId};
use crate::nmfl::{NmflConfig, NmflRunState};
use crate::rounding::splitmix64;
use crate::weight::{Dyadic, Weight};

#[derive(Clone, Debug, PartialEq)]
pub struct DriverConfig {
    /// Bound on the number of pairs; fixes `ell = ceil(log2 k)`.
    pub k: usize,
    /// Length unit: a pair's level is the smallest `j >= 0` with
    /// `w(P) <= unit * 2^j`.
    pub unit: Dyadic,
    pub nmfl: NmflConfig,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            k: 2,
            unit: Dyadic::ONE,
            nmfl: NmflConfig::default(),
        }
    }
}

/// `max(1, ceil(log2 k))`.
pub fn ell_for(k: usize) -> u64 {
    ((k.max(2) as f64).log2().ceil() as u64).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// The pair was already connected in `G/S`.
    Connected,
    /// A client was emitted and served by a real facility.
    Facility,
    /// A client was emitted and the facility location answer was the
    /// penalty facility.
    Penalty,
    Augmented,
    /// The guard passed but the boundary was empty: pure greedy.
    Degenerate,
    /// Serviced greedily by the scale wrapper.
    GreedyService,
    /// Abandoned greedily by the scale wrapper, or disconnected.
    PenaltyService,
    /// Skipped on replay: the pair is already satisfied.
    Satisfied,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClientEmission {
    pub terminal: VertexId,
    pub level: u32,
    /// `unit * 2^(level - 3)`.
    #[serde(skip)]
    pub radius: Dyadic,
    /// `None` when the penalty facility was chosen.
    pub facility: Option<VertexId>,
    /// Which driver instance emitted it.
    pub instance: usize,
}

/// One pass over one pair. Costs are what was actually paid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub step: usize,
    pub pair: usize,
    pub replay: bool,
    pub instance: usize,
    pub level: Option<u32>,
    #[serde(skip)]
    pub unit: Option<Dyadic>,
    /// `d_{G/S}(s, t)` at the start of the iteration.
    pub path_cost: Option<Weight>,
    pub greedy_cost: Weight,
    pub aug_costs: Vec<Weight>,
    pub facility_cost: Weight,
    pub connection_cost: Weight,
    pub penalty_paid: f64,
    pub action: Action,
    pub client: Option<ClientEmission>,
    pub bought: Vec<VertexId>,
}

impl IterationRecord {
    pub fn total(&self) -> f64 {
        (self.greedy_cost
            + self.aug_costs.iter().copied().sum::<Weight>()
            + self.facility_cost
            + self.connection_cost)
            .to_f64()
            + self.penalty_paid
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CostTotals {
    pub greedy: Weight,
    pub aug: Weight,
    pub facility: Weight,
    pub connection: Weight,
    pub penalty: f64,
}

impl CostTotals {
    pub fn vertex_weight(&self) -> Weight {
        self.greedy + self.aug + self.facility + self.connection
    }

    pub fn total(&self) -> f64 {
        self.vertex_weight().to_f64() + self.penalty
    }

    fn add(&mut self, r: &IterationRecord) {
        self.greedy += r.greedy_cost;
        self.aug += r.aug_costs.iter().copied().sum();
        self.facility += r.facility_cost;
        self.connection += r.connection_cost;
        self.penalty += r.penalty_paid;
    }
}

/// Per-level terminal and facility registries of one driver instance.
#[derive(Clone, Debug, Default)]
struct Registry {
    terminals: BTreeMap<u32, BTreeSet<VertexId>>,
    facilities: BTreeMap<u32, BTreeSet<VertexId>>,
}

/// The augmented-greedy driver. Arrived pairs, the bought set, the paid
/// penalties and the ledger survive [`DriverState::reinit`]; the registries
/// and the facility location state do not.
#[derive(Clone, Debug)]
pub struct DriverState {
    graph: Arc<NodeWeightedGraph>,
    config: DriverConfig,
    ell: u64,
    unit: Option<Dyadic>,
    registry: Registry,
    nmfl: NmflRunState,
    instance: usize,
    clients: usize,
    bought: BoughtSet,
    pairs: Vec<TerminalEvent>,
    penalized: Vec<bool>,
    records: Vec<IterationRecord>,
    totals: CostTotals,
    dist_cache: HashMap<VertexId, Arc<Vec<Option<Weight>>>>,
    degenerate: usize,
    emitted: Vec<ClientEmission>,
}

impl DriverState {
    pub fn new(graph: Arc<NodeWeightedGraph>, config: DriverConfig) -> Result<Self> {
        let n = graph.n();
        let nmfl = Self::fresh_nmfl(&config, 0)?;
        Ok(DriverState {
            ell: ell_for(config.k),
            unit: (!config.unit.is_zero()).then_some(config.unit),
            graph,
            config,
            registry: Registry::default(),
            nmfl,
            instance: 0,
            clients: 0,
            bought: BoughtSet::new(n),
            pairs: Vec::new(),
            penalized: Vec::new(),
            records: Vec::new(),
            totals: CostTotals::default(),
            dist_cache: HashMap::new(),
            degenerate: 0,
            emitted: Vec::new(),
        })
    }

    fn fresh_nmfl(config: &DriverConfig, instance: usize) -> Result<NmflRunState> {
        let mut cfg = config.nmfl.clone();
        cfg.rounding.seed =
            splitmix64(cfg.rounding.seed ^ (instance as u64).wrapping_mul(0x9e37_79b9));
        NmflRunState::new(cfg, config.k)
    }

    /// Starts a fresh instance of the algorithm with a new `k` and unit;
    /// everything bought or paid so far stays.
    pub fn reinit(&mut self, k: usize, unit: Option<Dyadic>) -> Result<()> {
        self.config.k = k;
        self.ell = ell_for(k);
        self.unit = unit.filter(|u| !u.is_zero());
        self.instance += 1;
        self.registry = Registry::default();
        self.nmfl = Self::fresh_nmfl(&self.config, self.instance)?;
        self.clients = 0;
        Ok(())
    }

    pub fn graph(&self) -> &NodeWeightedGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> Arc<NodeWeightedGraph> {
        Arc::clone(&self.graph)
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn unit(&self) -> Option<Dyadic> {
        self.unit
    }

    pub fn instance(&self) -> usize {
        self.instance
    }

    pub fn bought(&self) -> &BoughtSet {
        &self.bought
    }

    pub fn pairs(&self) -> &[TerminalEvent] {
        &self.pairs
    }

    pub fn penalized(&self) -> &[bool] {
        &self.penalized
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn totals(&self) -> &CostTotals {
        &self.totals
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate
    }

    /// Every client emitted so far, in order.
    pub fn emitted(&self) -> &[ClientEmission] {
        &self.emitted
    }

    pub fn nmfl(&self) -> &NmflRunState {
        &self.nmfl
    }

    /// Terminals registered at `level` in the current instance.
    pub fn level_terminals(&self, level: u32) -> Vec<VertexId> {
        self.registry
            .terminals
            .get(&level)
            .map_or_else(Vec::new, |s| s.iter().copied().collect())
    }

    pub fn level_facilities(&self, level: u32) -> Vec<VertexId> {
        self.registry
            .facilities
            .get(&level)
            .map_or_else(Vec::new, |s| s.iter().copied().collect())
    }

    /// `d_G(u, .)`, cached.
    pub fn dists(&mut self, u: VertexId) -> Arc<Vec<Option<Weight>>> {
        let g = &self.graph;
        Arc::clone(
            self.dist_cache
                .entry(u)
                .or_insert_with(|| Arc::new(graph::distances_from(g, None, u))),
        )
    }

    /// `min(d_G(s, t), penalty)` of a registered pair.
    pub fn service_cost(&mut self, pair: usize) -> f64 {
        let ev = self.pairs[pair];
        let d = self.dists(ev.s)[ev.t].map_or(f64::INFINITY, |w| w.to_f64());
        d.min(ev.penalty)
    }

    /// Records a new pair and returns its index.
    pub fn register(&mut self, ev: TerminalEvent) -> Result<usize> {
        ev.validate(self.graph.n())?;
        self.pairs.push(ev);
        self.penalized.push(false);
        Ok(self.pairs.len() - 1)
    }

    /// Pairs neither penalized nor connected in `G[S]`.
    pub fn unsatisfied(&self) -> Vec<usize> {
        let mut uf = self.graph.induced_components(self.bought.mask());
        (0..self.pairs.len())
            .filter(|&i| {
                let ev = self.pairs[i];
                !self.penalized[i]
                    && !(self.bought.contains(ev.s)
                        && self.bought.contains(ev.t)
                        && uf.same(ev.s, ev.t))
            })
            .collect()
    }

    fn buy(&mut self, v: VertexId, bought_now: &mut Vec<VertexId>) -> Weight {
        if self.bought.insert(v) {
            bought_now.push(v);
            self.graph.weight(v)
        } else {
            Weight::ZERO
        }
    }

    fn buy_path(&mut self, path: &[VertexId], bought_now: &mut Vec<VertexId>) -> Weight {
        path.iter().map(|&v| self.buy(v, bought_now)).sum()
    }

    fn place_terminals(&mut self, ev: TerminalEvent, bought_now: &mut Vec<VertexId>) {
        // terminals are free
        for v in [ev.s, ev.t] {
            if self.bought.insert(v) {
                bought_now.push(v);
            }
        }
    }

    fn blank(&self, pair: usize, replay: bool, action: Action) -> IterationRecord {
        IterationRecord {
            step: self.records.len(),
            pair,
            replay,
            instance: self.instance,
            level: None,
            unit: self.unit,
            path_cost: None,
            greedy_cost: Weight::ZERO,
            aug_costs: Vec::new(),
            facility_cost: Weight::ZERO,
            connection_cost: Weight::ZERO,
            penalty_paid: 0.0,
            action,
            client: None,
            bought: Vec::new(),
        }
    }

    fn pay_penalty(&mut self, pair: usize) -> f64 {
        if self.penalized[pair] {
            0.0
        } else {
            self.penalized[pair] = true;
            self.pairs[pair].penalty
        }
    }

    fn commit(&mut self, rec: IterationRecord) -> IterationRecord {
        self.totals.add(&rec);
        if let Some(c) = rec.client {
            self.emitted.push(c);
        }
        self.records.push(rec.clone());
        rec
    }

    /// Registers and processes a new pair.
    pub fn arrive(&mut self, ev: TerminalEvent) -> Result<IterationRecord> {
        let pair = self.register(ev)?;
        self.process(pair, false)
    }

    /// Non-prize-collecting arrival.
    pub fn nwsf_arrive(&mut self, s: VertexId, t: VertexId) -> Result<IterationRecord> {
        self.arrive(TerminalEvent::pair(s, t))
    }

    pub fn pcnwsf_arrive(
        &mut self,
        s: VertexId,
        t: VertexId,
        penalty: f64,
    ) -> Result<IterationRecord> {
        self.arrive(TerminalEvent::new(s, t, penalty))
    }

    /// Greedy service: pay the penalty if it is below `d_{G/S}(s, t)`,
    /// otherwise buy the cheapest path.
    pub fn service_greedily(&mut self, pair: usize, replay: bool) -> Result<IterationRecord> {
        if self.penalized[pair] {
            let rec = self.blank(pair, replay, Action::Satisfied);
            return Ok(self.commit(rec));
        }
        let ev = self.pairs[pair];
        let mut rec = self.blank(pair, replay, Action::GreedyService);
        let mut now = Vec::new();
        self.place_terminals(ev, &mut now);
        let p = graph::dist_excluding(&self.graph, &self.bought, ev.s, ev.t)?;
        match p {
            Some(p) if p.cost.is_zero() || ev.penalty >= p.cost.to_f64() => {
                rec.path_cost = Some(p.cost);
                rec.greedy_cost = self.buy_path(&p.path, &mut now);
            }
            Some(p) => {
                rec.path_cost = Some(p.cost);
                rec.action = Action::PenaltyService;
                rec.penalty_paid = self.pay_penalty(pair);
            }
            None if ev.penalty.is_finite() => {
                rec.action = Action::PenaltyService;
                rec.penalty_paid = self.pay_penalty(pair);
            }
            None => return Err(Error::InfeasiblePair { s: ev.s, t: ev.t }),
        }
        rec.bought = now;
        Ok(self.commit(rec))
    }

    fn guard(&mut self, x: VertexId, level: u32, r2: Dyadic, r3: Dyadic) -> bool {
        let d = self.dists(x);
        let near_terminal = self
            .registry
            .terminals
            .get(&level)
            .is_some_and(|ts| ts.iter().any(|&y| d[y].is_some_and(|dy| r2.exceeds(dy))));
        if near_terminal {
            return false;
        }
        let bd = graph::ball_boundary_from(&self.graph, &d, r3).boundary;
        let fs = self.registry.facilities.get(&level);
        !bd.iter().any(|v| fs.is_some_and(|f| f.contains(v)))
    }

    /// Runs one iteration of the augmented-greedy algorithm on a registered
    /// pair. Replays of pairs that are already penalized are skipped.
    pub fn process(&mut self, pair: usize, replay: bool) -> Result<IterationRecord> {
        if self.penalized[pair] {
            let rec = self.blank(pair, replay, Action::Satisfied);
            return Ok(self.commit(rec));
        }
        let ev = self.pairs[pair];
        let mut rec = self.blank(pair, replay, Action::Connected);
        let mut now = Vec::new();
        self.place_terminals(ev, &mut now);
        let Some(p) = graph::dist_excluding(&self.graph, &self.bought, ev.s, ev.t)? else {
            if ev.penalty.is_finite() {
                rec.action = Action::PenaltyService;
                rec.penalty_paid = self.pay_penalty(pair);
                rec.bought = now;
                return Ok(self.commit(rec));
            }
            return Err(Error::InfeasiblePair { s: ev.s, t: ev.t });
        };
        rec.path_cost = Some(p.cost);
        if p.cost.is_zero() {
            rec.greedy_cost = self.buy_path(&p.path, &mut now);
            rec.bought = now;
            return Ok(self.commit(rec));
        }
        let unit = self
            .unit
            .ok_or_else(|| Error::Internal("driver has no length unit".into()))?;
        let level = unit.level_of(p.cost);
        rec.level = Some(level);
        let r2 = unit.times_pow2(level as i32 - 2);
        let r3 = unit.times_pow2(level as i32 - 3);

        let chosen = if self.guard(ev.s, level, r2, r3) {
            Some(ev.s)
        } else if self.guard(ev.t, level, r2, r3) {
            Some(ev.t)
        } else {
            None
        };

        match chosen {
            Some(x) => {
                let d = self.dists(x);
                let bd = graph::ball_boundary_from(&self.graph, &d, r3).boundary;
                let ell = self.ell as f64;
                let f0 = self.graph.n();
                let mut cands: Vec<FacilityCandidate> = bd
                    .iter()
                    .map(|&v| FacilityCandidate {
                        facility: v,
                        opening: ell * self.graph.weight(v).to_f64(),
                        connection: d[v].expect("boundary vertices are reachable").to_f64(),
                    })
                    .collect();
                if ev.penalty.is_finite() {
                    cands.push(FacilityCandidate {
                        facility: f0,
                        opening: 0.0,
                        connection: ev.penalty,
                    });
                }
                if cands.is_empty() {
                    self.degenerate += 1;
                    rec.action = Action::Degenerate;
                } else {
                    let client = self.clients;
                    self.clients += 1;
                    let step = self.nmfl.arrive(client, &cands)?;
                    let mut emission = ClientEmission {
                        terminal: x,
                        level,
                        radius: r3,
                        facility: None,
                        instance: self.instance,
                    };
                    if step.facility == f0 {
                        emission.facility = None;
                        rec.client = Some(emission);
                        rec.action = Action::Penalty;
                        rec.penalty_paid = self.pay_penalty(pair);
                        rec.bought = now;
                        return Ok(self.commit(rec));
                    }
                    let f = step.facility;
                    emission.facility = Some(f);
                    rec.client = Some(emission);
                    rec.action = Action::Facility;
                    let path = graph::dist_excluding(&self.graph, &self.bought, x, f)?
                        .ok_or_else(|| Error::Internal("boundary facility unreachable".into()))?;
                    rec.facility_cost = self.buy(f, &mut now);
                    rec.connection_cost = self.buy_path(&path.path, &mut now);
                    self.registry.facilities.entry(level).or_default().insert(f);
                }
            }
            None => {
                rec.action = Action::Augmented;
                let mut targets: BTreeSet<VertexId> = self
                    .registry
                    .terminals
                    .get(&level)
                    .cloned()
                    .unwrap_or_default();
                if let Some(fs) = self.registry.facilities.get(&level) {
                    targets.extend(fs.iter().copied());
                }
                let targets: Vec<VertexId> = targets.into_iter().collect();
                for x in [ev.s, ev.t] {
                    let hit = graph::dist_to_set(&self.graph, &self.bought, x, &targets)?
                        .ok_or_else(|| Error::Internal("augmenting target unreachable".into()))?;
                    let c = self.buy_path(&hit.path, &mut now);
                    rec.aug_costs.push(c);
                }
            }
        }
        let ts = self.registry.terminals.entry(level).or_default();
        ts.insert(ev.s);
        ts.insert(ev.t);
        rec.greedy_cost = self.buy_path(&p.path, &mut now);
        rec.bought = now;
        Ok(self.commit(rec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: u64) -> Weight {
        Weight::from_int(v)
    }

    fn driver(g: NodeWeightedGraph, k: usize) -> DriverState {
        DriverState::new(
            Arc::new(g),
            DriverConfig {
                k,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn first_pair_emits_a_client() {
        // s - a - t with a of weight 3: level 2, boundary of s at radius 1/2 is {a}
        let g = NodeWeightedGraph::new(vec![w(0), w(3), w(0)], &[(0, 1), (1, 2)]).unwrap();
        let mut d = driver(g, 4);
        let rec = d.nwsf_arrive(0, 2).unwrap();
        assert_eq!(rec.level, Some(2));
        assert_eq!(rec.action, Action::Facility);
        assert_eq!(rec.client.unwrap().facility, Some(1));
        assert_eq!(rec.facility_cost, w(3));
        assert_eq!(rec.greedy_cost, w(0));
        assert!(d.unsatisfied().is_empty());
        assert!(rec.total() <= 3.0 + 1e-12);
    }

    #[test]
    fn repeat_pair_short_circuits() {
        let g = NodeWeightedGraph::new(vec![w(0), w(3), w(0)], &[(0, 1), (1, 2)]).unwrap();
        let mut d = driver(g, 4);
        d.nwsf_arrive(0, 2).unwrap();
        let rec = d.nwsf_arrive(2, 0).unwrap();
        assert_eq!(rec.action, Action::Connected);
        assert_eq!(rec.total(), 0.0);
        assert!(rec.client.is_none());
    }

    #[test]
    fn zero_weight_path_is_still_bought() {
        let g = NodeWeightedGraph::new(vec![w(0), w(0), w(0)], &[(0, 1), (1, 2)]).unwrap();
        let mut d = driver(g, 2);
        let rec = d.nwsf_arrive(0, 2).unwrap();
        assert_eq!(rec.action, Action::Connected);
        assert!(d.bought().contains(1));
        assert!(d.unsatisfied().is_empty());
    }

    #[test]
    fn disconnected_pair() {
        let g = NodeWeightedGraph::new(vec![w(0), w(0)], &[]).unwrap();
        let mut d = driver(g.clone(), 2);
        assert!(matches!(
            d.nwsf_arrive(0, 1),
            Err(Error::InfeasiblePair { .. })
        ));
        let mut d = driver(g, 2);
        let rec = d.pcnwsf_arrive(0, 1, 2.5).unwrap();
        assert_eq!(rec.penalty_paid, 2.5);
        assert!(d.unsatisfied().is_empty());
    }

    #[test]
    fn zero_penalty_pair_may_be_abandoned() {
        let g = NodeWeightedGraph::new(vec![w(0), w(5), w(0)], &[(0, 1), (1, 2)]).unwrap();
        let mut d = driver(g, 4);
        let rec = d.pcnwsf_arrive(0, 2, 0.0).unwrap();
        assert_eq!(rec.action, Action::Penalty);
        assert_eq!(rec.total(), 0.0);
        assert!(d.level_terminals(rec.level.unwrap()).is_empty());
        assert!(d.unsatisfied().is_empty());
    }

    #[test]
    fn infinite_penalty_matches_plain_trace() {
        let g = NodeWeightedGraph::new(
            vec![w(0), w(2), w(1), w(0), w(4), w(0)],
            &[(0, 1), (1, 3), (0, 2), (2, 3), (3, 4), (4, 5), (2, 5)],
        )
        .unwrap();
        let pairs = [(0, 3), (3, 5), (0, 5)];
        let mut a = driver(g.clone(), 4);
        let mut b = driver(g, 4);
        for &(s, t) in &pairs {
            let ra = a.nwsf_arrive(s, t).unwrap();
            let rb = b.pcnwsf_arrive(s, t, f64::INFINITY).unwrap();
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn second_nearby_pair_augments() {
        // two pairs sharing the heavy middle vertex
        let g = NodeWeightedGraph::new(
            vec![w(0), w(0), w(4), w(0), w(0)],
            &[(0, 2), (1, 2), (2, 3), (2, 4)],
        )
        .unwrap();
        let mut d = driver(g, 4);
        d.nwsf_arrive(0, 3).unwrap();
        let rec = d.nwsf_arrive(1, 4).unwrap();
        assert_eq!(rec.action, Action::Connected);
        assert!(d.unsatisfied().is_empty());
    }

    #[test]
    fn ell_values() {
        assert_eq!(ell_for(1), 1);
        assert_eq!(ell_for(2), 1);
        assert_eq!(ell_for(8), 3);
        assert_eq!(ell_for(9), 4);
    }
}
