use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::driver::{DriverConfig, DriverState, IterationRecord};
use super::TerminalEvent;
use crate::error::{Error, Result};
use crate::graph::NodeWeightedGraph;
use crate::nmfl::NmflConfig;
use crate::weight::{Dyadic, Weight};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    /// Number of pairs, rounded up to a power of two. Ignored with
    /// `k_doubling`; required otherwise.
    pub k: Option<usize>,
    /// Guess the scale of the optimum from the arrived pairs.
    pub scale_guess: bool,
    /// Start from `k = 2` and square it at arrivals 4, 16, 256, ...
    pub k_doubling: bool,
    pub nmfl: NmflConfig,
}

/// Scale-guess state right after an arrival was handled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalePoint {
    pub pair: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub reset: bool,
}

/// Arrival indices (1-based) at which `k` is squared: `2^(2^m)`, `m >= 1`.
pub fn is_squaring_index(i: usize) -> bool {
    i >= 4 && i.is_power_of_two() && (i.trailing_zeros() as usize).is_power_of_two()
}

fn pow2_at_least(k: usize) -> usize {
    k.max(2).next_power_of_two()
}

/// The augmented-greedy driver behind the optional doubling wrappers.
#[derive(Clone, Debug)]
pub struct OnlineForest {
    driver: DriverState,
    config: ForestConfig,
    k: usize,
    arrivals: usize,
    min_weight: f64,
    alpha: f64,
    beta: Option<f64>,
    seen: Vec<usize>,
    resets: usize,
    squarings: Vec<usize>,
    trace: Vec<ScalePoint>,
}

impl OnlineForest {
    pub fn new(graph: Arc<NodeWeightedGraph>, config: ForestConfig) -> Result<Self> {
        let k = if config.k_doubling {
            2
        } else {
            pow2_at_least(
                config
                    .k
                    .ok_or_else(|| Error::input("k is required without k doubling"))?,
            )
        };
        let unit = if config.scale_guess {
            Dyadic::new(Weight::ZERO, 0)
        } else {
            Dyadic::ONE
        };
        let min_weight = graph
            .weights()
            .iter()
            .map(|w| w.to_f64())
            .fold(f64::INFINITY, f64::min);
        let driver = DriverState::new(
            graph,
            DriverConfig {
                k,
                unit,
                nmfl: config.nmfl.clone(),
            },
        )?;
        let min_weight = if min_weight.is_finite() {
            min_weight
        } else {
            0.0
        };
        Ok(OnlineForest {
            driver,
            config,
            k,
            arrivals: 0,
            min_weight,
            alpha: min_weight,
            beta: None,
            seen: Vec::new(),
            resets: 0,
            squarings: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn driver(&self) -> &DriverState {
        &self.driver
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Scale resets, not counting the first initialization of `beta`.
    pub fn resets(&self) -> usize {
        self.resets
    }

    /// Arrival indices (1-based) at which `k` was squared.
    pub fn squarings(&self) -> &[usize] {
        &self.squarings
    }

    pub fn scale_trace(&self) -> &[ScalePoint] {
        &self.trace
    }

    pub fn records(&self) -> &[IterationRecord] {
        self.driver.records()
    }

    /// Every reinitialization of the inner algorithm (scale resets and
    /// squarings).
    pub fn reinit_count(&self) -> usize {
        self.resets + self.squarings.len()
    }

    fn unit_for(&self, beta: f64) -> Result<Dyadic> {
        Ok(Dyadic::new(
            Weight::from_f64(beta)?,
            -(self.k.trailing_zeros() as i32),
        ))
    }

    fn reinit_inner(&mut self) -> Result<()> {
        if self.config.scale_guess {
            self.alpha = self.min_weight;
            self.beta = None;
            self.seen.clear();
            self.driver.reinit(self.k, None)
        } else {
            self.driver.reinit(self.k, Some(Dyadic::ONE))
        }
    }

    /// Handles one pair and returns the ledger entries it produced
    /// (including replays).
    pub fn arrive(&mut self, ev: TerminalEvent) -> Result<Vec<IterationRecord>> {
        let pair = self.driver.register(ev)?;
        self.arrivals += 1;
        let start = self.driver.records().len();
        if self.config.k_doubling && is_squaring_index(self.arrivals) {
            self.k = self.k.saturating_mul(self.k);
            self.squarings.push(self.arrivals);
            self.reinit_inner()?;
            for q in 0..pair {
                self.inner(q, true)?;
            }
        }
        self.inner(pair, false)?;
        Ok(self.driver.records()[start..].to_vec())
    }

    fn inner(&mut self, pair: usize, replay: bool) -> Result<()> {
        if !self.config.scale_guess {
            self.driver.process(pair, replay)?;
            return Ok(());
        }
        let m = self.driver.service_cost(pair);
        if !m.is_finite() {
            let ev = self.driver.pairs()[pair];
            return Err(Error::InfeasiblePair { s: ev.s, t: ev.t });
        }
        self.alpha = self.alpha.max(m);
        self.seen.push(pair);
        let kf = self.k as f64;
        let reset = match self.beta {
            None => {
                self.beta = Some(self.alpha);
                let unit = self.unit_for(self.alpha)?;
                self.driver.reinit(self.k, Some(unit))?;
                false
            }
            Some(b) if self.alpha > kf * b => {
                self.beta = Some(self.alpha);
                self.resets += 1;
                let unit = self.unit_for(self.alpha)?;
                self.driver.reinit(self.k, Some(unit))?;
                let prior: Vec<usize> = self.seen[..self.seen.len() - 1].to_vec();
                for q in prior {
                    self.dispatch(q, true)?;
                }
                true
            }
            Some(_) => false,
        };
        self.trace.push(ScalePoint {
            pair,
            alpha: self.alpha,
            beta: self.beta.unwrap(),
            k: self.k,
            reset,
        });
        self.dispatch(pair, replay)
    }

    fn dispatch(&mut self, pair: usize, replay: bool) -> Result<()> {
        let beta = self.beta.expect("beta initialized");
        if self.driver.service_cost(pair) <= beta / self.k as f64 {
            self.driver.service_greedily(pair, replay)?;
        } else {
            self.driver.process(pair, replay)?;
        }
        Ok(())
    }
}
