//! Seeded instance generators. Every generator validates its output.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covering::{FacilityLocationInstance, SetCoverInstance};
use crate::error::{Error, Result};
use crate::graph::{GraphSpec, NodeWeightedGraph, VertexId};
use crate::steiner::TerminalEvent;
use crate::weight::Weight;

/// Weight perturbation of the counterexample family.
pub const COUNTEREXAMPLE_EPS: f64 = 1e-6;

/// Costs are drawn on a grid of this step so they are exact as weights.
const COST_GRID: f64 = 1.0 / 64.0;

/// A graph together with its demand pairs in arrival order.
#[derive(Clone, Debug)]
pub struct ForestInstance {
    pub graph: NodeWeightedGraph,
    pub pairs: Vec<TerminalEvent>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ForestInstanceSpec {
    pub graph: GraphSpec,
    pub pairs: Vec<TerminalEvent>,
}

impl ForestInstance {
    pub fn to_spec(&self) -> ForestInstanceSpec {
        ForestInstanceSpec {
            graph: self.graph.to_spec(),
            pairs: self.pairs.clone(),
        }
    }

    pub fn from_spec(spec: &ForestInstanceSpec) -> Result<Self> {
        let inst = ForestInstance {
            graph: NodeWeightedGraph::from_spec(&spec.graph)?,
            pairs: spec.pairs.clone(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        for ev in &self.pairs {
            ev.validate(self.graph.n())?;
        }
        let mut uf = self.graph.induced_components(&vec![true; self.graph.n()]);
        for ev in &self.pairs {
            if ev.penalty.is_infinite() && !uf.same(ev.s, ev.t) {
                return Err(Error::InfeasiblePair { s: ev.s, t: ev.t });
            }
        }
        Ok(())
    }
}

fn grid_cost(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    let v = rng.gen_range(lo..=hi);
    ((v / COST_GRID).round() * COST_GRID).clamp(lo, hi.max(lo))
}

/// Random set system in which every element of `0..n_elems` lies in at
/// least one set.
pub fn gen_random_sc(
    seed: u64,
    n_elems: usize,
    n_sets: usize,
    cost_range: (f64, f64),
) -> Result<SetCoverInstance> {
    if n_elems > 0 && n_sets == 0 {
        return Err(Error::input("elements need at least one set"));
    }
    let (lo, hi) = cost_range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
        return Err(Error::input(format!("bad cost range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = if n_sets == 0 {
        0.0
    } else {
        (2.0 / n_sets as f64).min(0.5)
    };
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n_sets];
    for e in 0..n_elems {
        sets[rng.gen_range(0..n_sets)].push(e);
        for s in sets.iter_mut() {
            if rng.gen_bool(density) {
                s.push(e);
            }
        }
    }
    let costs = (0..n_sets)
        .map(|_| grid_cost(&mut rng, cost_range))
        .collect();
    let inst = SetCoverInstance::new(costs, sets)?;
    debug_assert!((0..n_elems).all(|e| !inst.candidates(e).is_empty()));
    Ok(inst)
}

/// The set cover to Steiner forest reduction: elements (weight 0), then sets
/// (weight = cost), then the root (weight 0). Elements are adjacent to their
/// sets, every set to the root, and each element is paired with the root.
pub fn gen_sc_reduction(inst: &SetCoverInstance) -> Result<ForestInstance> {
    let elements = inst.elements();
    let k = elements.len();
    let m = inst.n_sets();
    let root = k + m;
    let mut weights = vec![Weight::ZERO; k + m + 1];
    for s in 0..m {
        weights[k + s] = Weight::from_f64(inst.cost(s))?;
    }
    let mut edges = Vec::new();
    for (i, &e) in elements.iter().enumerate() {
        for &s in inst.candidates(e) {
            edges.push((i, k + s));
        }
    }
    for s in 0..m {
        edges.push((k + s, root));
    }
    let graph = NodeWeightedGraph::new(weights, &edges)?;
    let pairs = (0..k).map(|i| TerminalEvent::pair(i, root)).collect();
    let out = ForestInstance { graph, pairs };
    out.validate()?;
    Ok(out)
}

/// Vertex layout of the counterexample family: terminal `s_i` is `i - 1`,
/// Steiner vertex `v_i` is `k + i - 1`.
pub fn counterexample_steiner(k: usize, i: usize) -> VertexId {
    k + i - 1
}

/// `k` terminals and `k` Steiner vertices, `v_i` of weight `1 + i * eps`
/// adjacent to `s_1..s_i`; pairs `(s_1, s_i)` for `i = 2..k`.
pub fn gen_counterexample(k: usize) -> Result<ForestInstance> {
    if k < 2 {
        return Err(Error::input("counterexample needs k >= 2"));
    }
    let mut weights = vec![Weight::ZERO; 2 * k];
    let mut edges = Vec::new();
    for i in 1..=k {
        let v = counterexample_steiner(k, i);
        weights[v] = Weight::from_f64(1.0 + i as f64 * COUNTEREXAMPLE_EPS)?;
        for j in 1..=i {
            edges.push((v, j - 1));
        }
    }
    let graph = NodeWeightedGraph::new(weights, &edges)?;
    let pairs = (2..=k).map(|i| TerminalEvent::pair(0, i - 1)).collect();
    Ok(ForestInstance { graph, pairs })
}

/// Fractional values `x_{v_1..v_k}` fed at the arrival of `(s_1, s_i)`:
/// `x_{v_j} = 1 / (k - min(i, j) + 1)`. The vertices adjacent to `s_i`
/// carry exactly one unit, and the values only grow with `i`.
pub fn counterexample_feed(k: usize, i: usize) -> Vec<f64> {
    (1..=k).map(|j| 1.0 / (k - i.min(j) + 1) as f64).collect()
}

/// How penalties are drawn for random forest instances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Every pair must be connected.
    #[default]
    None,
    /// A third of the pairs are mandatory, the rest get integer penalties in
    /// `0..=12`.
    Mixed,
}

/// Connected random graph on `n` vertices with integer weights in `0..=8`
/// and `k` pairs. Terminals have weight 0.
pub fn gen_random_forest(
    seed: u64,
    n: usize,
    k: usize,
    penalties: PenaltyMode,
) -> Result<ForestInstance> {
    if n < 2 {
        return Err(Error::input("random forest needs n >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((order[rng.gen_range(0..i)], order[i]));
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            edges.push((a, b));
        }
    }
    let mut pairs = Vec::with_capacity(k);
    while pairs.len() < k {
        let (s, t) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if s == t {
            continue;
        }
        let penalty = match penalties {
            PenaltyMode::None => f64::INFINITY,
            PenaltyMode::Mixed if rng.gen_bool(1.0 / 3.0) => f64::INFINITY,
            PenaltyMode::Mixed => rng.gen_range(0..=12) as f64,
        };
        pairs.push(TerminalEvent::new(s, t, penalty));
    }
    let mut weights: Vec<Weight> = (0..n)
        .map(|_| Weight::from_int(rng.gen_range(0..=8)))
        .collect();
    for ev in &pairs {
        weights[ev.s] = Weight::ZERO;
        weights[ev.t] = Weight::ZERO;
    }
    let out = ForestInstance {
        graph: NodeWeightedGraph::new(weights, &edges)?,
        pairs,
    };
    out.validate()?;
    Ok(out)
}

/// Random facility location instance: opening costs in `[0, 8]`, each client
/// reaching at least one facility, connection costs in `[0, 8]`.
pub fn gen_random_nmfl(
    seed: u64,
    n_facilities: usize,
    n_clients: usize,
) -> Result<FacilityLocationInstance> {
    if n_facilities == 0 && n_clients > 0 {
        return Err(Error::input("clients need at least one facility"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fac = (0..n_facilities)
        .map(|_| grid_cost(&mut rng, (0.0, 8.0)))
        .collect();
    let mut conn = Vec::new();
    for c in 0..n_clients {
        let must = rng.gen_range(0..n_facilities);
        for f in 0..n_facilities {
            if f == must || rng.gen_bool(0.5) {
                conn.push((c, f, grid_cost(&mut rng, (0.0, 8.0))));
            }
        }
    }
    FacilityLocationInstance::new(fac, conn)
}
