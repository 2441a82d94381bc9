//! Threshold rounding of monotone fractional set cover.
//!
//! Every set `S` gets a threshold `Y_S`, the minimum of `p` uniform draws, and
//! is bought as soon as `x_S >= Y_S`. An element left uncovered after the
//! sweep buys its cheapest candidate (a fallback). Two restart rules sit on
//! top: budget doubling (restart whenever `c^T x` passes the current rung
//! `b_j`, then `b_{j+1} = 2 c^T x`) and `p` doubling (start at `p = 1`, double
//! on every fallback). Purchases are never undone by a restart.
//!
//! Thresholds are a pure function of `(seed, epoch, set)`, so they do not
//! depend on the order in which sets are first seen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covering::{ElementId, SetId};
use crate::error::{Error, Result};

const COVER_SLACK: f64 = 1e-9;

/// Minimum of `p` independent uniform draws on `[0, 1)`.
pub fn sample_min_uniform<R: Rng + ?Sized>(rng: &mut R, p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::input("threshold multiplicity p must be positive"));
    }
    let mut y = 1.0f64;
    for _ in 0..p {
        y = y.min(rng.gen::<f64>());
    }
    Ok(y)
}

/// `max(1, ceil(p_factor * log2(universe)))`.
pub fn default_p(p_factor: f64, universe: usize) -> u32 {
    let v = (p_factor * (universe.max(1) as f64).log2()).ceil();
    (v as u32).max(1)
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn threshold_rng(seed: u64, epoch: u64, set: SetId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(epoch)));
    rng.set_stream(set as u64);
    rng
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RoundingConfig {
    pub p_factor: f64,
    /// Overrides the `p_factor` rule when set.
    pub p: Option<u32>,
    pub budget_doubling: bool,
    pub p_doubling: bool,
    pub seed: u64,
}

impl Default for RoundingConfig {
    fn default() -> Self {
        RoundingConfig {
            p_factor: 2.0,
            p: None,
            budget_doubling: true,
            p_doubling: false,
            seed: 0,
        }
    }
}

/// A set's cost and its current fractional value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetValue {
    pub set: SetId,
    pub cost: f64,
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FallbackEvent {
    pub element: ElementId,
    pub set: SetId,
    pub epoch: u64,
    pub p: u32,
}

/// What one arrival bought.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundStep {
    /// Sets bought by the threshold sweep, ascending.
    pub swept: Vec<SetId>,
    pub fallback: Option<SetId>,
    pub budget_restart: bool,
}

impl RoundStep {
    pub fn bought(&self) -> impl Iterator<Item = SetId> + '_ {
        self.swept.iter().copied().chain(self.fallback)
    }
}

fn lookup_threshold(
    cache: &mut Vec<Option<(u64, f64)>>,
    seed: u64,
    epoch: u64,
    p: u32,
    s: SetId,
) -> f64 {
    if s >= cache.len() {
        cache.resize(s + 1, None);
    }
    match cache[s] {
        Some((e, y)) if e == epoch => y,
        _ => {
            let y = sample_min_uniform(&mut threshold_rng(seed, epoch, s), p).expect("p >= 1");
            cache[s] = Some((epoch, y));
            y
        }
    }
}

/// Fractional values, costs and purchases shared by both rounding schemes.
#[derive(Clone, Debug, Default)]
struct Book {
    x: Vec<f64>,
    cost: Vec<Option<f64>>,
    known: Vec<SetId>,
    purchased: Vec<bool>,
    order: Vec<SetId>,
    dirty: Vec<SetId>,
    is_dirty: Vec<bool>,
    lp_cost: f64,
    purchased_cost: f64,
}

impl Book {
    fn ensure(&mut self, s: SetId) {
        if s >= self.x.len() {
            let n = s + 1;
            self.x.resize(n, 0.0);
            self.cost.resize(n, None);
            self.purchased.resize(n, false);
            self.is_dirty.resize(n, false);
        }
    }

    fn register(&mut self, s: SetId, cost: f64) -> Result<()> {
        if cost.is_nan() || cost < 0.0 || cost.is_infinite() {
            return Err(Error::input(format!("set {s} has cost {cost}")));
        }
        self.ensure(s);
        match self.cost[s] {
            None => {
                self.cost[s] = Some(cost);
                self.known.push(s);
                Ok(())
            }
            Some(c) if c == cost => Ok(()),
            Some(c) => Err(Error::contract(format!(
                "set {s} cost changed from {c} to {cost}"
            ))),
        }
    }

    fn mark(&mut self, s: SetId) {
        if !self.is_dirty[s] {
            self.is_dirty[s] = true;
            self.dirty.push(s);
        }
    }

    fn mark_all(&mut self) {
        for i in 0..self.known.len() {
            let s = self.known[i];
            self.mark(s);
        }
    }

    fn apply(&mut self, frac: &[SetValue]) -> Result<()> {
        for v in frac {
            self.register(v.set, v.cost)?;
            if v.x.is_nan() || v.x < 0.0 || v.x > 1.0 + COVER_SLACK {
                return Err(Error::contract(format!(
                    "fractional value {} for set {} outside [0, 1]",
                    v.x, v.set
                )));
            }
            let x = v.x.min(1.0);
            let old = self.x[v.set];
            if x < old {
                return Err(Error::contract(format!(
                    "fractional value of set {} decreased from {old} to {x}",
                    v.set
                )));
            }
            if x > old {
                self.lp_cost += v.cost * (x - old);
                self.x[v.set] = x;
                self.mark(v.set);
            }
        }
        Ok(())
    }

    fn check_candidates(&mut self, element: ElementId, candidates: &[(SetId, f64)]) -> Result<()> {
        if candidates.is_empty() {
            return Err(Error::InfeasibleElement(element));
        }
        for &(s, c) in candidates {
            self.register(s, c)?;
        }
        Ok(())
    }

    fn check_feasible(&self, element: ElementId, candidates: &[(SetId, f64)]) -> Result<()> {
        let total: f64 = candidates.iter().map(|&(s, _)| self.x[s]).sum();
        if total < 1.0 - COVER_SLACK {
            return Err(Error::contract(format!(
                "fractional coverage {total} of element {element} below 1"
            )));
        }
        Ok(())
    }

    fn covered(&self, candidates: &[(SetId, f64)]) -> bool {
        candidates.iter().any(|&(s, _)| self.purchased[s])
    }

    fn buy(&mut self, s: SetId) -> bool {
        if self.purchased[s] {
            return false;
        }
        self.purchased[s] = true;
        self.order.push(s);
        self.purchased_cost += self.cost[s].unwrap_or(0.0);
        true
    }

    /// Lowest cost, then lowest id.
    fn cheapest(candidates: &[(SetId, f64)]) -> SetId {
        candidates
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|c| c.0)
            .expect("nonempty candidates")
    }

    fn sweep(&mut self, mut threshold: impl FnMut(SetId) -> f64) -> Vec<SetId> {
        let mut dirty = std::mem::take(&mut self.dirty);
        let mut bought = Vec::new();
        for &s in &dirty {
            self.is_dirty[s] = false;
            let x = self.x[s];
            if !self.purchased[s] && x > 0.0 && x >= threshold(s) {
                self.buy(s);
                bought.push(s);
            }
        }
        dirty.clear();
        self.dirty = dirty;
        bought.sort_unstable();
        bought
    }

    fn reset_fractional(&mut self) {
        for x in self.x.iter_mut() {
            *x = 0.0;
        }
        for c in self.cost.iter_mut() {
            *c = None;
        }
        self.known.clear();
        self.lp_cost = 0.0;
    }
}

/// Per-set threshold rounding with optional budget and `p` doubling.
#[derive(Clone, Debug)]
pub struct RoundingState {
    config: RoundingConfig,
    p: u32,
    epoch: u64,
    thresholds: Vec<Option<(u64, f64)>>,
    budget: Option<f64>,
    ladder: Vec<f64>,
    past_ladders: Vec<Vec<f64>>,
    fallbacks: Vec<FallbackEvent>,
    book: Book,
}

impl RoundingState {
    /// `universe` is the declared (or guessed) number of elements; it is only
    /// consulted when neither `p` nor `p_doubling` is configured.
    pub fn new(config: RoundingConfig, universe: Option<usize>) -> Result<Self> {
        let p = if config.p_doubling {
            1
        } else if let Some(p) = config.p {
            if p == 0 {
                return Err(Error::input("threshold multiplicity p must be positive"));
            }
            p
        } else if let Some(u) = universe {
            if !(config.p_factor > 0.0) {
                return Err(Error::input("p_factor must be positive"));
            }
            default_p(config.p_factor, u)
        } else {
            return Err(Error::input(
                "rounding needs p, p_doubling or a universe size",
            ));
        };
        Ok(RoundingState {
            config,
            p,
            epoch: 0,
            thresholds: Vec::new(),
            budget: None,
            ladder: Vec::new(),
            past_ladders: Vec::new(),
            fallbacks: Vec::new(),
            book: Book::default(),
        })
    }

    pub fn config(&self) -> &RoundingConfig {
        &self.config
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Budget rungs `b_1, b_2, ...` of the current fractional run.
    pub fn budget_ladder(&self) -> &[f64] {
        &self.ladder
    }

    /// Ladders of earlier fractional runs followed by the current one.
    pub fn all_ladders(&self) -> Vec<Vec<f64>> {
        let mut v = self.past_ladders.clone();
        v.push(self.ladder.clone());
        v
    }

    pub fn fallbacks(&self) -> &[FallbackEvent] {
        &self.fallbacks
    }

    pub fn purchased(&self) -> &[SetId] {
        &self.book.order
    }

    pub fn is_purchased(&self, s: SetId) -> bool {
        self.book.purchased.get(s).copied().unwrap_or(false)
    }

    /// Cost of purchases, each at the cost it had when bought.
    pub fn purchased_cost(&self) -> f64 {
        self.book.purchased_cost
    }

    pub fn lp_cost(&self) -> f64 {
        self.book.lp_cost
    }

    pub fn x(&self, s: SetId) -> f64 {
        self.book.x.get(s).copied().unwrap_or(0.0)
    }

    /// The threshold of `s` in the current epoch.
    pub fn threshold(&mut self, s: SetId) -> f64 {
        lookup_threshold(
            &mut self.thresholds,
            self.config.seed,
            self.epoch,
            self.p,
            s,
        )
    }

    fn new_epoch(&mut self) {
        self.epoch += 1;
        self.book.mark_all();
    }

    /// Starts over on a fresh fractional solution (values may restart from
    /// zero and costs may change). Purchases persist.
    pub fn restart_fractional(&mut self) {
        self.book.reset_fractional();
        self.budget = None;
        self.past_ladders.push(std::mem::take(&mut self.ladder));
        self.epoch += 1;
    }

    /// One arrival: `candidates` are the sets containing `element` with their
    /// costs, `frac` the fractional values that changed (or all of them).
    pub fn arrive(
        &mut self,
        element: ElementId,
        candidates: &[(SetId, f64)],
        frac: &[SetValue],
    ) -> Result<RoundStep> {
        self.book.check_candidates(element, candidates)?;
        self.book.apply(frac)?;
        self.book.check_feasible(element, candidates)?;
        let mut step = RoundStep::default();
        if self.config.budget_doubling {
            let lp = self.book.lp_cost;
            match self.budget {
                None => {
                    self.budget = Some(2.0 * lp);
                    self.ladder.push(2.0 * lp);
                }
                Some(b) if lp > b => {
                    self.budget = Some(2.0 * lp);
                    self.ladder.push(2.0 * lp);
                    self.new_epoch();
                    step.budget_restart = true;
                }
                Some(_) => {}
            }
        }
        let (seed, epoch, p) = (self.config.seed, self.epoch, self.p);
        let thresholds = &mut self.thresholds;
        step.swept = self
            .book
            .sweep(|s| lookup_threshold(thresholds, seed, epoch, p, s));
        if !self.book.covered(candidates) {
            let s = Book::cheapest(candidates);
            self.book.buy(s);
            step.fallback = Some(s);
            self.fallbacks.push(FallbackEvent {
                element,
                set: s,
                epoch: self.epoch,
                p: self.p,
            });
            if self.config.p_doubling {
                self.p = self.p.saturating_mul(2);
                self.new_epoch();
            }
        }
        Ok(step)
    }
}

/// The flawed scheme with one global threshold `mu` shared by all sets.
#[derive(Clone, Debug)]
pub struct SingleThresholdBaseline {
    mu: f64,
    fallbacks: Vec<FallbackEvent>,
    book: Book,
}

impl SingleThresholdBaseline {
    /// `mu` is the minimum of `p` uniforms drawn from `seed`.
    pub fn new(p: u32, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = sample_min_uniform(&mut rng, p)?;
        Ok(Self::with_mu(mu))
    }

    /// `p = 2 * ceil(log2 k)`.
    pub fn for_pairs(k: usize, seed: u64) -> Result<Self> {
        let p = 2 * ((k.max(2) as f64).log2().ceil() as u32);
        Self::new(p, seed)
    }

    pub fn with_mu(mu: f64) -> Self {
        SingleThresholdBaseline {
            mu,
            fallbacks: Vec::new(),
            book: Book::default(),
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn fallbacks(&self) -> &[FallbackEvent] {
        &self.fallbacks
    }

    pub fn purchased(&self) -> &[SetId] {
        &self.book.order
    }

    pub fn purchased_cost(&self) -> f64 {
        self.book.purchased_cost
    }

    pub fn lp_cost(&self) -> f64 {
        self.book.lp_cost
    }

    /// Forgets fractional values and costs; purchases persist.
    pub fn restart_fractional(&mut self) {
        self.book.reset_fractional();
    }

    pub fn is_purchased(&self, s: SetId) -> bool {
        self.book.purchased.get(s).copied().unwrap_or(false)
    }

    pub fn arrive(
        &mut self,
        element: ElementId,
        candidates: &[(SetId, f64)],
        frac: &[SetValue],
    ) -> Result<RoundStep> {
        self.book.check_candidates(element, candidates)?;
        self.book.apply(frac)?;
        self.book.check_feasible(element, candidates)?;
        let mu = self.mu;
        let mut step = RoundStep {
            swept: self.book.sweep(|_| mu),
            ..Default::default()
        };
        if !self.book.covered(candidates) {
            let s = Book::cheapest(candidates);
            self.book.buy(s);
            step.fallback = Some(s);
            self.fallbacks.push(FallbackEvent {
                element,
                set: s,
                epoch: 0,
                p: 0,
            });
        }
        Ok(step)
    }
}
