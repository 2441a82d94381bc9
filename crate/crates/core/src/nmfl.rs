//! Online non-metric facility location through set-cover rounding.
//!
//! Each arriving client updates the fractional LP, picks the smallest
//! connection level whose cheap facilities already carry half of its
//! fractional connection, and hands one set-cover element to the rounding:
//! the candidate sets are the facilities within that level, valued at
//! `min(1, 2 x_f)`. The client is connected to the cheapest opened facility in
//! its level.
//!
//! Costs are preprocessed against a guess `B` of the optimum: scaled by
//! `k / B`, connections below 1 become 0, the rest round up to a power of two,
//! and anything above `k^2` is dropped. The guess starts at the first
//! client's cheapest option and doubles when a client's cheapest option
//! exceeds `k * B` or the fractional cost outgrows the scaled range. A new
//! guess restarts the LP; opened facilities stay open.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::covering::{ClientId, FacilityCandidate, FacilityId, FractionalState};
use crate::error::{Error, Result};
use crate::rounding::{
    RoundStep, RoundingConfig, RoundingState, SetValue, SingleThresholdBaseline,
};

/// A connection level: the zero rung (only free connections) or `2^j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Zero,
    Pow(u32),
}

impl Level {
    pub fn threshold(self) -> f64 {
        match self {
            Level::Zero => 0.0,
            Level::Pow(j) => 2f64.powi(j as i32),
        }
    }

    /// Position on the ladder: `Zero` is 0, `Pow(j)` is `j + 1`.
    pub fn rung(self) -> usize {
        match self {
            Level::Zero => 0,
            Level::Pow(j) => j as usize + 1,
        }
    }
}

/// `2 * ceil(log2 k)` for `k >= 2`, so that `2^level_cap >= k^2`.
pub fn level_cap(k: usize) -> u32 {
    2 * (k.max(2) as f64).log2().ceil() as u32
}

/// Scales a candidate by `k / opt_guess`. Connections below 1 drop to 0, the
/// rest round up to the next power of two; connections or openings above
/// `k^2` become infinite.
pub fn preprocess_candidate(c: &FacilityCandidate, opt_guess: f64, k: usize) -> FacilityCandidate {
    assert!(opt_guess > 0.0, "opt guess must be positive");
    let scale = k as f64 / opt_guess;
    let cap = (k as f64) * (k as f64);
    let conn = c.connection * scale;
    let connection = if !conn.is_finite() || conn > cap {
        f64::INFINITY
    } else if conn < 1.0 {
        0.0
    } else {
        let r = 2f64.powi(conn.log2().ceil() as i32);
        // guard against log2 rounding just below an exact power
        if r < conn {
            2.0 * r
        } else {
            r
        }
    };
    let open = c.opening * scale;
    let opening = if !open.is_finite() || open > cap {
        f64::INFINITY
    } else {
        open
    };
    FacilityCandidate {
        facility: c.facility,
        opening,
        connection,
    }
}

/// Smallest level `L` with `sum_{f : conn_f <= threshold(L)} x_{c,f} >= 1/2`,
/// scanning `Zero, Pow(0), ..., Pow(cap)`.
pub fn select_level(
    frac: &FractionalState,
    client: ClientId,
    candidates: &[FacilityCandidate],
    cap: u32,
) -> Result<Level> {
    let levels = std::iter::once(Level::Zero).chain((0..=cap).map(Level::Pow));
    for level in levels {
        let t = level.threshold();
        let mass: f64 = candidates
            .iter()
            .filter(|c| c.connection <= t)
            .map(|c| frac.x_conn(client, c.facility))
            .sum();
        if mass >= 0.5 {
            return Ok(level);
        }
    }
    Err(Error::Internal(format!(
        "client {client} has no level carrying half its fractional connection"
    )))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    #[default]
    Randomized,
    /// Buy facilities whose doubled value reaches 1, otherwise the cheapest
    /// candidate of the level.
    Deterministic,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct NmflConfig {
    pub mode: RoundingMode,
    pub rounding: RoundingConfig,
    /// Fixed guess of the optimum; adaptive when absent.
    pub opt_guess: Option<f64>,
}

#[derive(Clone, Debug)]
enum Rounder {
    Randomized(RoundingState),
    Deterministic(SingleThresholdBaseline),
}

impl Rounder {
    fn arrive(
        &mut self,
        e: usize,
        cands: &[(FacilityId, f64)],
        frac: &[SetValue],
    ) -> Result<RoundStep> {
        match self {
            Rounder::Randomized(r) => r.arrive(e, cands, frac),
            Rounder::Deterministic(r) => r.arrive(e, cands, frac),
        }
    }

    fn restart(&mut self) {
        match self {
            Rounder::Randomized(r) => r.restart_fractional(),
            Rounder::Deterministic(r) => r.restart_fractional(),
        }
    }

    fn is_purchased(&self, f: FacilityId) -> bool {
        match self {
            Rounder::Randomized(r) => r.is_purchased(f),
            Rounder::Deterministic(r) => r.is_purchased(f),
        }
    }

    fn fallbacks(&self) -> usize {
        match self {
            Rounder::Randomized(r) => r.fallbacks().len(),
            Rounder::Deterministic(r) => r.fallbacks().len(),
        }
    }
}

/// Outcome of one client arrival. Costs are in the caller's units unless
/// prefixed `scaled_`, which refers to the preprocessed instance current at
/// the time of arrival.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NmflStep {
    pub client: ClientId,
    pub level: Level,
    pub facility: FacilityId,
    /// Every facility opened during this step, ascending.
    pub opened: Vec<FacilityId>,
    pub facility_cost: f64,
    pub connection_cost: f64,
    pub scaled_connection: f64,
    /// The client's fractional connection cost in the scaled instance.
    pub scaled_fractional_connection: f64,
    pub fallback: bool,
    pub guess_restart: bool,
}

#[derive(Clone, Debug)]
pub struct NmflRunState {
    config: NmflConfig,
    k: usize,
    cap: u32,
    guess: Option<f64>,
    frac: FractionalState,
    rounder: Rounder,
    fac_cost: BTreeMap<FacilityId, f64>,
    opened: Vec<FacilityId>,
    assignments: Vec<(ClientId, FacilityId)>,
    steps: Vec<NmflStep>,
    guess_restarts: usize,
    facility_paid: f64,
    connection_paid: f64,
}

impl NmflRunState {
    /// `k` bounds the number of clients; it sizes the level ladder, the cost
    /// scaling and (for the randomized rounding) the universe behind `p`.
    pub fn new(config: NmflConfig, k: usize) -> Result<Self> {
        let k = k.max(2);
        let cap = level_cap(k);
        if let Some(b) = config.opt_guess {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::input(format!(
                    "opt guess {b} must be positive and finite"
                )));
            }
        }
        let per_client = cap as usize + 2;
        let rounder = match config.mode {
            RoundingMode::Randomized => Rounder::Randomized(RoundingState::new(
                config.rounding.clone(),
                Some(k * per_client),
            )?),
            RoundingMode::Deterministic => {
                Rounder::Deterministic(SingleThresholdBaseline::with_mu(1.0))
            }
        };
        Ok(NmflRunState {
            guess: config.opt_guess,
            config,
            k,
            cap,
            frac: FractionalState::new(),
            rounder,
            fac_cost: BTreeMap::new(),
            opened: Vec::new(),
            assignments: Vec::new(),
            steps: Vec::new(),
            guess_restarts: 0,
            facility_paid: 0.0,
            connection_paid: 0.0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn level_cap(&self) -> u32 {
        self.cap
    }

    /// Elements of the implicit set-cover instance contributed per client.
    pub fn elements_per_client(&self) -> usize {
        self.cap as usize + 2
    }

    pub fn opt_guess(&self) -> Option<f64> {
        self.guess
    }

    pub fn guess_restarts(&self) -> usize {
        self.guess_restarts
    }

    pub fn frac(&self) -> &FractionalState {
        &self.frac
    }

    pub fn opened(&self) -> &[FacilityId] {
        &self.opened
    }

    pub fn is_open(&self, f: FacilityId) -> bool {
        self.rounder.is_purchased(f)
    }

    pub fn assignments(&self) -> &[(ClientId, FacilityId)] {
        &self.assignments
    }

    pub fn steps(&self) -> &[NmflStep] {
        &self.steps
    }

    pub fn fallbacks(&self) -> usize {
        self.rounder.fallbacks()
    }

    pub fn facility_cost(&self) -> f64 {
        self.facility_paid
    }

    pub fn connection_cost(&self) -> f64 {
        self.connection_paid
    }

    pub fn total_cost(&self) -> f64 {
        self.facility_paid + self.connection_paid
    }

    fn restart_lp(&mut self) {
        self.frac = FractionalState::new();
        self.rounder.restart();
        self.guess_restarts += 1;
    }

    fn scaled(&self, cands: &[FacilityCandidate]) -> Vec<FacilityCandidate> {
        let b = self.guess.expect("guess set");
        cands
            .iter()
            .map(|c| preprocess_candidate(c, b, self.k))
            .filter(|c| c.connection.is_finite() && c.opening.is_finite())
            .collect()
    }

    /// Serves `client`. Candidates carry the caller's costs; infinite
    /// connection or opening costs mark unusable facilities.
    pub fn arrive(
        &mut self,
        client: ClientId,
        candidates: &[FacilityCandidate],
    ) -> Result<NmflStep> {
        let mut usable: Vec<FacilityCandidate> = candidates
            .iter()
            .copied()
            .filter(|c| c.connection.is_finite() && c.opening.is_finite())
            .collect();
        usable.sort_by(|a, b| {
            a.facility
                .cmp(&b.facility)
                .then(a.connection.total_cmp(&b.connection))
        });
        usable.dedup_by_key(|c| c.facility);
        if usable.is_empty() {
            return Err(Error::InfeasibleClient(client));
        }
        for c in &usable {
            if c.connection < 0.0 || c.opening < 0.0 || c.connection.is_nan() || c.opening.is_nan()
            {
                return Err(Error::input(format!(
                    "facility {} has negative cost",
                    c.facility
                )));
            }
            if let Some(old) = self.fac_cost.insert(c.facility, c.opening) {
                if old != c.opening {
                    return Err(Error::contract(format!(
                        "facility {} cost changed",
                        c.facility
                    )));
                }
            }
        }
        let cheapest = usable
            .iter()
            .map(|c| c.opening + c.connection)
            .fold(f64::INFINITY, f64::min);
        let mut guess_restart = false;
        if self.guess.is_none() {
            let b = if cheapest > 0.0 {
                cheapest
            } else {
                usable
                    .iter()
                    .flat_map(|c| [c.opening, c.connection])
                    .filter(|&v| v > 0.0)
                    .fold(f64::INFINITY, f64::min)
            };
            self.guess = Some(if b.is_finite() { b } else { 1.0 });
        }
        if self.config.opt_guess.is_none() {
            let kf = self.k as f64;
            let mut b = self.guess.unwrap();
            while cheapest > kf * b {
                b *= 2.0;
            }
            if b != self.guess.unwrap() {
                self.guess = Some(b);
                self.restart_lp();
                guess_restart = true;
            }
        }

        let mut scaled = self.scaled(&usable);
        if scaled.is_empty() {
            return Err(Error::InfeasibleClient(client));
        }
        let mut changed = self.frac.fnmfl_arrive(client, &scaled)?;
        if self.config.opt_guess.is_none() {
            let seen = self.fac_cost.len().max(1) as f64;
            let kf = self.k as f64;
            let budget = 4.0 * (1.0 + seen.ln()) * kf * kf;
            if self.frac.lp_cost() > budget {
                self.guess = Some(self.guess.unwrap() * 2.0);
                self.restart_lp();
                guess_restart = true;
                scaled = self.scaled(&usable);
                if scaled.is_empty() {
                    return Err(Error::InfeasibleClient(client));
                }
                changed = self.frac.fnmfl_arrive(client, &scaled)?;
            }
        }

        let level = select_level(&self.frac, client, &scaled, self.cap)?;
        let t = level.threshold();
        let in_level: Vec<(FacilityId, f64)> = scaled
            .iter()
            .filter(|c| c.connection <= t)
            .map(|c| (c.facility, c.opening))
            .collect();
        let opening_of: BTreeMap<FacilityId, f64> =
            scaled.iter().map(|c| (c.facility, c.opening)).collect();
        let values: Vec<SetValue> = changed
            .iter()
            .map(|&(f, x)| SetValue {
                set: f,
                cost: opening_of[&f],
                x: (2.0 * x).min(1.0),
            })
            .collect();
        let element = client * self.elements_per_client() + level.rung();
        let round = self.rounder.arrive(element, &in_level, &values)?;

        let mut opened: Vec<FacilityId> = round.bought().collect();
        opened.sort_unstable();
        let mut facility_cost = 0.0;
        for &f in &opened {
            facility_cost += self.fac_cost.get(&f).copied().unwrap_or(0.0);
            self.opened.push(f);
        }
        let orig_conn: BTreeMap<FacilityId, f64> =
            usable.iter().map(|c| (c.facility, c.connection)).collect();
        let chosen = scaled
            .iter()
            .filter(|c| c.connection <= t && self.rounder.is_purchased(c.facility))
            .min_by(|a, b| {
                orig_conn[&a.facility]
                    .total_cmp(&orig_conn[&b.facility])
                    .then(a.facility.cmp(&b.facility))
            })
            .ok_or_else(|| Error::Internal(format!("rounding left client {client} uncovered")))?;
        let connection_cost = orig_conn[&chosen.facility];
        self.facility_paid += facility_cost;
        self.connection_paid += connection_cost;
        self.assignments.push((client, chosen.facility));
        let step = NmflStep {
            client,
            level,
            facility: chosen.facility,
            opened,
            facility_cost,
            connection_cost,
            scaled_connection: chosen.connection,
            scaled_fractional_connection: self.frac.client_connection_cost(client),
            fallback: round.fallback.is_some(),
            guess_restart,
        };
        self.steps.push(step.clone());
        Ok(step)
    }
}
