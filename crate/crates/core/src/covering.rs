//! Online monotone fractional covering: set cover and the LP relaxation of
//! non-metric facility location.
//!
//! Both problems use the same multiplicative-increase rule. While the arriving
//! covering constraint is unsatisfied, every candidate with effective marginal
//! cost `m` is updated as `x <- x * (1 + 1/m) + 1/(D * m)`, where `D` is the
//! number of candidates, and capped at 1. For facility location the marginal
//! cost of raising `x_{c,f}` is its connection cost alone while `x_{c,f} < x_f`,
//! and connection plus opening cost once the coupling constraint is tight (in
//! which case `x_f` is lifted with it). Marginal costs of zero are replaced by
//! a small `epsilon`; candidates with zero total cost jump straight to 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type SetId = usize;
pub type ElementId = usize;
pub type ClientId = usize;
pub type FacilityId = usize;

pub const DEFAULT_EPSILON: f64 = 1.0 / (1u64 << 20) as f64;

/// On-disk set cover schema: `sets[i]` lists the elements of set `i`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SetCoverSpec {
    pub set_costs: Vec<f64>,
    pub sets: Vec<Vec<ElementId>>,
}

#[derive(Clone, Debug)]
pub struct SetCoverInstance {
    costs: Vec<f64>,
    sets: Vec<Vec<ElementId>>,
    by_element: BTreeMap<ElementId, Vec<SetId>>,
}

impl SetCoverInstance {
    pub fn new(costs: Vec<f64>, sets: Vec<Vec<ElementId>>) -> Result<Self> {
        if costs.len() != sets.len() {
            return Err(Error::input(format!(
                "{} set costs for {} sets",
                costs.len(),
                sets.len()
            )));
        }
        if let Some(c) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::input(format!(
                "set cost {c} is not finite and nonnegative"
            )));
        }
        let mut sets = sets;
        let mut by_element: BTreeMap<ElementId, Vec<SetId>> = BTreeMap::new();
        for (s, members) in sets.iter_mut().enumerate() {
            members.sort_unstable();
            members.dedup();
            for &e in members.iter() {
                by_element.entry(e).or_default().push(s);
            }
        }
        Ok(SetCoverInstance {
            costs,
            sets,
            by_element,
        })
    }

    pub fn from_spec(spec: &SetCoverSpec) -> Result<Self> {
        Self::new(spec.set_costs.clone(), spec.sets.clone())
    }

    pub fn to_spec(&self) -> SetCoverSpec {
        SetCoverSpec {
            set_costs: self.costs.clone(),
            sets: self.sets.clone(),
        }
    }

    pub fn n_sets(&self) -> usize {
        self.costs.len()
    }

    pub fn cost(&self, s: SetId) -> f64 {
        self.costs[s]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn set(&self, s: SetId) -> &[ElementId] {
        &self.sets[s]
    }

    /// Elements covered by at least one set, ascending.
    pub fn elements(&self) -> Vec<ElementId> {
        self.by_element.keys().copied().collect()
    }

    /// Sets containing `e`, ascending; empty when `e` is uncoverable.
    pub fn candidates(&self, e: ElementId) -> &[SetId] {
        self.by_element.get(&e).map_or(&[], |v| v.as_slice())
    }

    /// `(set, cost)` pairs for `e`, the shape the online algorithms consume.
    pub fn candidates_with_costs(&self, e: ElementId) -> Vec<(SetId, f64)> {
        self.candidates(e)
            .iter()
            .map(|&s| (s, self.costs[s]))
            .collect()
    }

    pub fn covers(&self, chosen: &[SetId], e: ElementId) -> bool {
        chosen
            .iter()
            .any(|&s| self.sets[s].binary_search(&e).is_ok())
    }
}

/// On-disk facility location schema. `conn` lists the finite connection
/// costs as `[client, facility, cost]`; absent pairs cost infinity.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FacilityLocationSpec {
    pub fac_costs: Vec<f64>,
    pub conn: Vec<(ClientId, FacilityId, f64)>,
}

#[derive(Clone, Debug)]
pub struct FacilityLocationInstance {
    fac_costs: Vec<f64>,
    conn: BTreeMap<ClientId, Vec<(FacilityId, f64)>>,
}

/// One candidate facility offered to an arriving client.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacilityCandidate {
    pub facility: FacilityId,
    pub opening: f64,
    pub connection: f64,
}

impl FacilityLocationInstance {
    pub fn new(fac_costs: Vec<f64>, conn: Vec<(ClientId, FacilityId, f64)>) -> Result<Self> {
        if let Some(c) = fac_costs.iter().find(|c| c.is_nan() || **c < 0.0) {
            return Err(Error::input(format!(
                "facility cost {c} is negative or NaN"
            )));
        }
        let mut map: BTreeMap<ClientId, Vec<(FacilityId, f64)>> = BTreeMap::new();
        for (c, f, cost) in conn {
            if f >= fac_costs.len() {
                return Err(Error::input(format!("connection references facility {f}")));
            }
            if cost.is_nan() || cost < 0.0 {
                return Err(Error::input(format!(
                    "connection cost {cost} is negative or NaN"
                )));
            }
            if cost.is_finite() {
                map.entry(c).or_default().push((f, cost));
            }
        }
        for list in map.values_mut() {
            list.sort_by_key(|a| a.0);
            list.dedup_by_key(|x| x.0);
        }
        Ok(FacilityLocationInstance {
            fac_costs,
            conn: map,
        })
    }

    pub fn from_spec(spec: &FacilityLocationSpec) -> Result<Self> {
        Self::new(spec.fac_costs.clone(), spec.conn.clone())
    }

    pub fn to_spec(&self) -> FacilityLocationSpec {
        let conn = self
            .conn
            .iter()
            .flat_map(|(&c, list)| list.iter().map(move |&(f, cost)| (c, f, cost)))
            .collect();
        FacilityLocationSpec {
            fac_costs: self.fac_costs.clone(),
            conn,
        }
    }

    pub fn n_facilities(&self) -> usize {
        self.fac_costs.len()
    }

    pub fn fac_cost(&self, f: FacilityId) -> f64 {
        self.fac_costs[f]
    }

    pub fn fac_costs(&self) -> &[f64] {
        &self.fac_costs
    }

    /// Clients with at least one finite connection, ascending.
    pub fn clients(&self) -> Vec<ClientId> {
        self.conn.keys().copied().collect()
    }

    pub fn conn_cost(&self, c: ClientId, f: FacilityId) -> f64 {
        self.conn
            .get(&c)
            .and_then(|list| list.iter().find(|x| x.0 == f))
            .map_or(f64::INFINITY, |x| x.1)
    }

    /// Finite-connection facilities of `c` with their costs, by facility id.
    pub fn candidates(&self, c: ClientId) -> Vec<FacilityCandidate> {
        self.conn.get(&c).map_or_else(Vec::new, |list| {
            list.iter()
                .map(|&(f, conn)| FacilityCandidate {
                    facility: f,
                    opening: self.fac_costs[f],
                    connection: conn,
                })
                .collect()
        })
    }
}

/// The monotone fractional solution of one online run.
#[derive(Clone, Debug, Default)]
pub struct FractionalState {
    epsilon: f64,
    x_sets: BTreeMap<SetId, f64>,
    set_cost: BTreeMap<SetId, f64>,
    x_fac: BTreeMap<FacilityId, f64>,
    fac_cost: BTreeMap<FacilityId, f64>,
    x_conn: BTreeMap<(ClientId, FacilityId), f64>,
    conn_cost: BTreeMap<(ClientId, FacilityId), f64>,
    lp_cost: f64,
    rounds: u64,
}

fn bump(x: f64, m: f64, d: f64) -> f64 {
    x * (1.0 + 1.0 / m) + 1.0 / (d * m)
}

impl FractionalState {
    pub fn new() -> Self {
        Self::with_epsilon(DEFAULT_EPSILON)
    }

    pub fn with_epsilon(epsilon: f64) -> Self {
        assert!(epsilon > 0.0);
        FractionalState {
            epsilon,
            ..Default::default()
        }
    }

    pub fn x_set(&self, s: SetId) -> f64 {
        self.x_sets.get(&s).copied().unwrap_or(0.0)
    }

    pub fn x_fac(&self, f: FacilityId) -> f64 {
        self.x_fac.get(&f).copied().unwrap_or(0.0)
    }

    pub fn x_conn(&self, c: ClientId, f: FacilityId) -> f64 {
        self.x_conn.get(&(c, f)).copied().unwrap_or(0.0)
    }

    pub fn sets(&self) -> impl Iterator<Item = (SetId, f64)> + '_ {
        self.x_sets.iter().map(|(&s, &x)| (s, x))
    }

    pub fn facilities(&self) -> impl Iterator<Item = (FacilityId, f64)> + '_ {
        self.x_fac.iter().map(|(&f, &x)| (f, x))
    }

    pub fn connections(&self) -> impl Iterator<Item = ((ClientId, FacilityId), f64)> + '_ {
        self.x_conn.iter().map(|(&k, &x)| (k, x))
    }

    /// `c^T x` over everything seen so far.
    pub fn lp_cost(&self) -> f64 {
        self.lp_cost
    }

    /// Opening part of the facility location objective.
    pub fn facility_lp_cost(&self) -> f64 {
        self.x_fac.iter().map(|(f, x)| self.fac_cost[f] * x).sum()
    }

    /// Connection part of the facility location objective.
    pub fn connection_lp_cost(&self) -> f64 {
        self.x_conn.iter().map(|(k, x)| self.conn_cost[k] * x).sum()
    }

    /// Fractional connection cost of one client.
    pub fn client_connection_cost(&self, c: ClientId) -> f64 {
        self.x_conn
            .range((c, 0)..=(c, FacilityId::MAX))
            .map(|(k, x)| self.conn_cost[k] * x)
            .sum()
    }

    pub fn client_coverage(&self, c: ClientId) -> f64 {
        self.x_conn
            .range((c, 0)..=(c, FacilityId::MAX))
            .map(|(_, x)| x)
            .sum()
    }

    /// Total number of multiplicative rounds performed.
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    fn register_set_cost(&mut self, s: SetId, c: f64) -> Result<()> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::input(format!("set {s} has cost {c}")));
        }
        match self.set_cost.insert(s, c) {
            Some(old) if old != c => Err(Error::contract(format!(
                "set {s} cost changed from {old} to {c}"
            ))),
            _ => Ok(()),
        }
    }

    fn set_x(&mut self, s: SetId, value: f64) {
        let old = self.x_set(s);
        debug_assert!(value >= old);
        self.lp_cost += self.set_cost[&s] * (value - old);
        self.x_sets.insert(s, value);
    }

    /// Online fractional set cover step for element `element` with candidate
    /// sets `(set, cost)`. Returns the sets whose value changed, with their
    /// new values.
    pub fn fsc_arrive(
        &mut self,
        element: ElementId,
        candidates: &[(SetId, f64)],
    ) -> Result<Vec<(SetId, f64)>> {
        if candidates.is_empty() {
            return Err(Error::InfeasibleElement(element));
        }
        for &(s, c) in candidates {
            self.register_set_cost(s, c)?;
        }
        let coverage = |st: &Self| candidates.iter().map(|&(s, _)| st.x_set(s)).sum::<f64>();
        let mut changed = BTreeMap::new();
        if coverage(self) >= 1.0 {
            return Ok(Vec::new());
        }
        let zero_cost: Vec<SetId> = candidates
            .iter()
            .filter(|c| c.1 == 0.0)
            .map(|c| c.0)
            .collect();
        if !zero_cost.is_empty() {
            for s in zero_cost {
                self.set_x(s, 1.0);
                changed.insert(s, 1.0);
            }
            return Ok(changed.into_iter().collect());
        }
        let d = candidates.len() as f64;
        while coverage(self) < 1.0 {
            self.rounds += 1;
            for &(s, c) in candidates {
                let x = self.x_set(s);
                if x >= 1.0 {
                    continue;
                }
                let next = bump(x, c.max(self.epsilon), d).min(1.0);
                self.set_x(s, next);
                changed.insert(s, next);
            }
        }
        Ok(changed.into_iter().collect())
    }

    fn register_fac(&mut self, c: ClientId, cand: &FacilityCandidate) -> Result<()> {
        if cand.opening.is_nan()
            || cand.opening < 0.0
            || cand.connection.is_nan()
            || cand.connection < 0.0
        {
            return Err(Error::input(format!(
                "facility {} has invalid costs",
                cand.facility
            )));
        }
        match self.fac_cost.insert(cand.facility, cand.opening) {
            Some(old) if old != cand.opening => {
                return Err(Error::contract(format!(
                    "facility {} cost changed from {old} to {}",
                    cand.facility, cand.opening
                )))
            }
            _ => {}
        }
        self.conn_cost.insert((c, cand.facility), cand.connection);
        Ok(())
    }

    fn raise_fac(&mut self, f: FacilityId, value: f64) {
        let old = self.x_fac(f);
        if value > old {
            self.lp_cost += self.fac_cost[&f] * (value - old);
            self.x_fac.insert(f, value);
        }
    }

    fn raise_conn(&mut self, c: ClientId, f: FacilityId, value: f64) {
        let old = self.x_conn(c, f);
        if value > old {
            self.lp_cost += self.conn_cost[&(c, f)] * (value - old);
            self.x_conn.insert((c, f), value);
        }
    }

    /// Online fractional facility location step. Candidates with infinite
    /// opening or connection cost are ignored. Returns the facilities whose
    /// `x_f` changed, with their new values.
    pub fn fnmfl_arrive(
        &mut self,
        client: ClientId,
        candidates: &[FacilityCandidate],
    ) -> Result<Vec<(FacilityId, f64)>> {
        let cands: Vec<FacilityCandidate> = candidates
            .iter()
            .copied()
            .filter(|c| c.connection.is_finite() && c.opening.is_finite())
            .collect();
        if cands.is_empty() {
            return Err(Error::InfeasibleClient(client));
        }
        for cand in &cands {
            self.register_fac(client, cand)?;
        }
        let before: BTreeMap<FacilityId, f64> = cands
            .iter()
            .map(|c| (c.facility, self.x_fac(c.facility)))
            .collect();
        let coverage = |st: &Self| {
            cands
                .iter()
                .map(|c| st.x_conn(client, c.facility))
                .sum::<f64>()
        };
        if coverage(self) < 1.0 {
            let free: Vec<FacilityId> = cands
                .iter()
                .filter(|c| c.opening == 0.0 && c.connection == 0.0)
                .map(|c| c.facility)
                .collect();
            if !free.is_empty() {
                for f in free {
                    self.raise_fac(f, 1.0);
                    self.raise_conn(client, f, 1.0);
                }
            } else {
                let d = cands.len() as f64;
                while coverage(self) < 1.0 {
                    self.rounds += 1;
                    for cand in &cands {
                        let f = cand.facility;
                        let xc = self.x_conn(client, f);
                        if xc >= 1.0 {
                            continue;
                        }
                        let xf = self.x_fac(f);
                        if xc < xf {
                            let m = cand.connection.max(self.epsilon);
                            self.raise_conn(client, f, bump(xc, m, d).min(xf));
                        } else {
                            let m = (cand.connection + cand.opening).max(self.epsilon);
                            let next = bump(xc, m, d).min(1.0);
                            self.raise_fac(f, next);
                            self.raise_conn(client, f, next);
                        }
                    }
                }
            }
        }
        Ok(before
            .into_iter()
            .filter_map(|(f, old)| {
                let now = self.x_fac(f);
                (now > old).then_some((f, now))
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(facility: FacilityId, opening: f64, connection: f64) -> FacilityCandidate {
        FacilityCandidate {
            facility,
            opening,
            connection,
        }
    }

    #[test]
    fn single_set_goes_to_one() {
        for cost in [0.0, 0.5, 3.0, 1000.0] {
            let mut st = FractionalState::new();
            st.fsc_arrive(0, &[(4, cost)]).unwrap();
            assert_eq!(st.x_set(4), 1.0);
            assert!((st.lp_cost() - cost).abs() < 1e-9);
        }
    }

    #[test]
    fn satisfied_element_is_a_noop() {
        let mut st = FractionalState::new();
        st.fsc_arrive(0, &[(0, 1.0), (1, 2.0)]).unwrap();
        let snapshot: Vec<_> = st.sets().collect();
        let changed = st.fsc_arrive(0, &[(0, 1.0), (1, 2.0)]).unwrap();
        assert!(changed.is_empty());
        assert_eq!(snapshot, st.sets().collect::<Vec<_>>());
    }

    #[test]
    fn symmetric_sets_end_equal() {
        let mut st = FractionalState::new();
        st.fsc_arrive(0, &[(0, 1.0), (1, 1.0)]).unwrap();
        let (a, b) = (st.x_set(0), st.x_set(1));
        assert_eq!(a, b);
        assert!(a >= 0.5 && a + b >= 1.0);
        // one round from zero: x = 1/(2*1) = 0.5 each
        assert_eq!(a, 0.5);
    }

    #[test]
    fn empty_candidates_rejected() {
        let mut st = FractionalState::new();
        assert!(matches!(
            st.fsc_arrive(3, &[]),
            Err(Error::InfeasibleElement(3))
        ));
        assert!(matches!(
            st.fnmfl_arrive(2, &[]),
            Err(Error::InfeasibleClient(2))
        ));
        assert!(matches!(
            st.fnmfl_arrive(2, &[fc(0, 1.0, f64::INFINITY)]),
            Err(Error::InfeasibleClient(2))
        ));
    }

    #[test]
    fn changing_cost_is_a_contract_error() {
        let mut st = FractionalState::new();
        st.fsc_arrive(0, &[(0, 1.0)]).unwrap();
        assert!(matches!(
            st.fsc_arrive(1, &[(0, 2.0)]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn free_facility() {
        let mut st = FractionalState::new();
        st.fnmfl_arrive(0, &[fc(0, 0.0, 0.0)]).unwrap();
        assert_eq!(st.x_conn(0, 0), 1.0);
        assert_eq!(st.x_fac(0), 1.0);
        let changed = st.fnmfl_arrive(0, &[fc(0, 0.0, 0.0)]).unwrap();
        assert!(changed.is_empty());
    }

    #[test]
    fn cheap_facility_gets_more_mass() {
        let mut st = FractionalState::new();
        st.fnmfl_arrive(0, &[fc(0, 1.0, 0.0), fc(1, 100.0, 0.0)])
            .unwrap();
        assert!(st.x_conn(0, 0) >= st.x_conn(0, 1));
        assert!(st.client_coverage(0) >= 1.0);
        // OPT = 1 (open facility 0)
        assert!(
            st.lp_cost() <= 4.0 * (1.0 + 2f64.ln()) * 1.0,
            "lp cost {}",
            st.lp_cost()
        );
    }

    #[test]
    fn nmfl_shares_open_facilities() {
        let mut st = FractionalState::new();
        st.fnmfl_arrive(0, &[fc(0, 10.0, 1.0), fc(1, 10.0, 1.0)])
            .unwrap();
        let before = st.lp_cost();
        // a second client near the same facilities pays mostly connection
        st.fnmfl_arrive(1, &[fc(0, 10.0, 1.0), fc(1, 10.0, 1.0)])
            .unwrap();
        assert!(st.lp_cost() - before < before);
        for f in 0..2 {
            for c in 0..2 {
                assert!(st.x_fac(f) >= st.x_conn(c, f));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn set_cover_monotone_and_feasible(
                arrivals in proptest::collection::vec(proptest::collection::btree_set(0usize..8, 1..5), 1..20),
                costs in proptest::collection::vec(0.0f64..20.0, 8),
            ) {
                let mut st = FractionalState::new();
                let mut prev: BTreeMap<SetId, f64> = BTreeMap::new();
                for (e, cands) in arrivals.iter().enumerate() {
                    let cands: Vec<_> = cands.iter().map(|&s| (s, costs[s])).collect();
                    st.fsc_arrive(e, &cands).unwrap();
                    let cover: f64 = cands.iter().map(|&(s, _)| st.x_set(s)).sum();
                    prop_assert!(cover >= 1.0);
                    for (s, x) in st.sets() {
                        prop_assert!(x <= 1.0);
                        prop_assert!(x >= prev.get(&s).copied().unwrap_or(0.0));
                    }
                    prev = st.sets().collect();
                    let direct: f64 = st.sets().map(|(s, x)| costs[s] * x).sum();
                    prop_assert!((direct - st.lp_cost()).abs() <= 1e-6 * (1.0 + direct));
                }
            }

            #[test]
            fn facility_location_monotone_and_coupled(
                arrivals in proptest::collection::vec(proptest::collection::btree_map(0usize..6, 0.0f64..8.0, 1..5), 1..15),
                opening in proptest::collection::vec(0.0f64..30.0, 6),
            ) {
                let mut st = FractionalState::new();
                let mut prev_f: BTreeMap<FacilityId, f64> = BTreeMap::new();
                let mut prev_c: BTreeMap<(ClientId, FacilityId), f64> = BTreeMap::new();
                for (c, cands) in arrivals.iter().enumerate() {
                    let cands: Vec<_> = cands.iter().map(|(&f, &conn)| fc(f, opening[f], conn)).collect();
                    st.fnmfl_arrive(c, &cands).unwrap();
                    prop_assert!(st.client_coverage(c) >= 1.0);
                    for (f, x) in st.facilities() {
                        prop_assert!(x <= 1.0);
                        prop_assert!(x >= prev_f.get(&f).copied().unwrap_or(0.0));
                    }
                    for ((cc, f), x) in st.connections() {
                        prop_assert!(x <= st.x_fac(f));
                        prop_assert!(x >= prev_c.get(&(cc, f)).copied().unwrap_or(0.0));
                    }
                    prev_f = st.facilities().collect();
                    prev_c = st.connections().collect();
                    let direct = st.facility_lp_cost() + st.connection_lp_cost();
                    prop_assert!((direct - st.lp_cost()).abs() <= 1e-6 * (1.0 + direct));
                }
            }
        }
    }
}
