//! Trace invariants shared by the experiment runner and the test suites.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::nmfl::NmflStep;
use crate::steiner::{DriverState, IterationRecord};
use crate::weight::Weight;

const TOL: f64 = 1e-9;

/// Per-iteration caps: greedy path at most `2^j` units, each augmenting path
/// below `2^(j-2)` units, greedy plus augmenting at most `8 * 2^j` units.
pub fn cost_cap_violations(records: &[IterationRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for r in records {
        let (Some(j), Some(unit)) = (r.level, r.unit) else {
            continue;
        };
        let cap = unit.times_pow2(j as i32);
        if cap.cmp_weight(r.greedy_cost) == Ordering::Greater {
            out.push(format!(
                "step {}: greedy cost {} exceeds {}",
                r.step,
                r.greedy_cost,
                cap.to_f64()
            ));
        }
        let aug_cap = unit.times_pow2(j as i32 - 2);
        for &a in &r.aug_costs {
            if !aug_cap.exceeds(a) {
                out.push(format!(
                    "step {}: augmenting path {} not below {}",
                    r.step,
                    a,
                    aug_cap.to_f64()
                ));
            }
        }
        let total = r.greedy_cost + r.aug_costs.iter().copied().sum::<Weight>();
        if unit.times_pow2(j as i32 + 3).cmp_weight(total) == Ordering::Greater {
            out.push(format!(
                "step {}: iteration greedy total {} exceeds 8 * 2^{j}",
                r.step, total
            ));
        }
    }
    out
}

/// Clients served by a real facility at one level of one driver instance are
/// pairwise at distance at least twice their radius.
pub fn separation_violations(driver: &mut DriverState) -> Vec<String> {
    let mut groups: BTreeMap<(usize, u32), Vec<_>> = BTreeMap::new();
    for c in driver.emitted() {
        if c.facility.is_some() {
            groups.entry((c.instance, c.level)).or_default().push(*c);
        }
    }
    let mut out = Vec::new();
    for ((inst, level), cs) in groups {
        for (i, a) in cs.iter().enumerate() {
            let d = driver.dists(a.terminal);
            for b in &cs[..i] {
                let sep = a.radius.times_pow2(1);
                if let Some(dab) = d[b.terminal] {
                    if sep.exceeds(dab) {
                        out.push(format!(
                            "instance {inst} level {level}: terminals {} and {} at distance {}",
                            b.terminal, a.terminal, dab
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Paid connection of each client against twice its fractional connection,
/// both in the scaled instance current at its arrival.
pub fn refinement_violations(steps: &[NmflStep]) -> Vec<String> {
    steps
        .iter()
        .filter(|s| s.scaled_connection > 2.0 * s.scaled_fractional_connection + TOL)
        .map(|s| {
            format!(
                "client {}: paid {} against fractional {}",
                s.client, s.scaled_connection, s.scaled_fractional_connection
            )
        })
        .collect()
}
