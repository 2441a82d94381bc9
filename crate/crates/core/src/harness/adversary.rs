//! Semi-adaptive adversaries over a fixed set cover super-instance.

use serde::{Deserialize, Serialize};

use crate::covering::{ElementId, SetCoverInstance, SetId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The super-instance order, ignoring the algorithm.
    #[default]
    Replay,
    /// An element no purchased set covers, preferring many candidate sets
    /// (the fractional mass is spread thinnest there);
    /// once everything is covered, the element with the cheapest candidate.
    UncoveredSeeking,
}

/// Draws each super-instance element at most once.
#[derive(Clone, Debug)]
pub struct SemiAdaptiveAdversary<'a> {
    inst: &'a SetCoverInstance,
    remaining: Vec<ElementId>,
    strategy: Strategy,
}

impl<'a> SemiAdaptiveAdversary<'a> {
    pub fn new(inst: &'a SetCoverInstance, order: Vec<ElementId>, strategy: Strategy) -> Self {
        SemiAdaptiveAdversary {
            inst,
            remaining: order,
            strategy,
        }
    }

    pub fn remaining(&self) -> &[ElementId] {
        &self.remaining
    }

    /// The next element given which sets are purchased, or `None` when the
    /// super-instance is exhausted.
    pub fn next(&mut self, purchased: impl Fn(SetId) -> bool) -> Option<ElementId> {
        if self.remaining.is_empty() {
            return None;
        }
        let idx = match self.strategy {
            Strategy::Replay => 0,
            Strategy::UncoveredSeeking => {
                let inst = self.inst;
                let uncovered = self
                    .remaining
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| !inst.candidates(e).iter().any(|&s| purchased(s)))
                    .min_by_key(|(i, &e)| (std::cmp::Reverse(inst.candidates(e).len()), *i));
                match uncovered {
                    Some((i, _)) => i,
                    None => {
                        let cheapest = |e: ElementId| {
                            inst.candidates(e)
                                .iter()
                                .map(|&s| inst.cost(s))
                                .fold(f64::INFINITY, f64::min)
                        };
                        self.remaining
                            .iter()
                            .enumerate()
                            .min_by(|a, b| {
                                cheapest(*a.1)
                                    .total_cmp(&cheapest(*b.1))
                                    .then(a.0.cmp(&b.0))
                            })
                            .map(|(i, _)| i)
                            .expect("nonempty")
                    }
                }
            }
        };
        Some(self.remaining.remove(idx))
    }
}

/// Raises one set's fractional value to `x_final` in `steps` equal
/// increments. The inflated set has id 0; step `t` covers its element
/// together with a fresh filler set `t + 1` holding the rest of the unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflationScript {
    pub x_final: f64,
    pub steps: usize,
}

impl InflationScript {
    pub fn value_at(&self, t: usize) -> f64 {
        self.x_final * (t + 1) as f64 / self.steps as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst() -> SetCoverInstance {
        // set 0 = {0, 1} cost 1, set 1 = {2} cost 3, set 2 = {1, 2} cost 2
        SetCoverInstance::new(vec![1.0, 3.0, 2.0], vec![vec![0, 1], vec![2], vec![1, 2]]).unwrap()
    }

    #[test]
    fn replay_is_the_fixed_sequence() {
        let i = inst();
        let mut a = SemiAdaptiveAdversary::new(&i, vec![2, 0, 1], Strategy::Replay);
        let got: Vec<_> = std::iter::from_fn(|| a.next(|_| true)).collect();
        assert_eq!(got, vec![2, 0, 1]);
    }

    #[test]
    fn uncovered_seeking_prefers_uncovered() {
        let i = inst();
        let mut a = SemiAdaptiveAdversary::new(&i, vec![0, 1, 2], Strategy::UncoveredSeeking);
        // set 0 bought: elements 0 and 1 covered, 2 is not
        assert_eq!(a.next(|s| s == 0), Some(2));
        let mut b = SemiAdaptiveAdversary::new(&i, vec![0, 1, 2], Strategy::UncoveredSeeking);
        // nothing bought: element 1 has the most candidates
        assert_eq!(b.next(|_| false), Some(1));
        // everything covered: cheapest candidate, element 0 (cost 1) first
        assert_eq!(a.next(|_| true), Some(0));
        assert_eq!(a.next(|_| true), Some(1));
        assert_eq!(a.next(|_| true), None);
    }

    #[test]
    fn inflation_reaches_target() {
        let s = InflationScript {
            x_final: 0.4,
            steps: 8,
        };
        assert!((s.value_at(7) - 0.4).abs() < 1e-12);
        assert!(s.value_at(0) > 0.0);
    }
}
