//! Seeded experiment runner: one record per trial, CSV in trial order.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adversary::{SemiAdaptiveAdversary, Strategy};
use super::checks::{cost_cap_violations, refinement_violations, separation_violations};
use super::generators::{
    counterexample_feed, counterexample_steiner, gen_counterexample, gen_random_forest,
    gen_random_nmfl, gen_random_sc, gen_sc_reduction, ForestInstance, ForestInstanceSpec,
    PenaltyMode,
};
use crate::covering::{
    ElementId, FacilityLocationSpec, FractionalState, SetCoverInstance, SetCoverSpec, SetId,
};
use crate::error::{Error, Result};
use crate::nmfl::{NmflConfig, NmflRunState, RoundingMode};
use crate::oracles::{opt_nmfl, opt_pc_nwsf, opt_set_cover, OracleCaps};
use crate::rounding::{
    splitmix64, RoundStep, RoundingConfig, RoundingState, SetValue, SingleThresholdBaseline,
};
use crate::steiner::{ForestConfig, OnlineForest, TerminalEvent};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Nwsf,
    PcNwsf,
    Nmfl,
    ScRound,
    ScBaselineSingleThreshold,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Nwsf => "nwsf",
            Algorithm::PcNwsf => "pc_nwsf",
            Algorithm::Nmfl => "nmfl",
            Algorithm::ScRound => "sc_round",
            Algorithm::ScBaselineSingleThreshold => "sc_baseline_single_threshold",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    RandomForest {
        n: usize,
        k: usize,
        #[serde(default)]
        penalties: PenaltyMode,
    },
    ScReduction {
        n_elems: usize,
        n_sets: usize,
        #[serde(default = "one")]
        cost_lo: f64,
        #[serde(default = "four")]
        cost_hi: f64,
    },
    Counterexample {
        k: usize,
    },
    RandomSc {
        n_elems: usize,
        n_sets: usize,
        #[serde(default = "one")]
        cost_lo: f64,
        #[serde(default = "four")]
        cost_hi: f64,
    },
    RandomNmfl {
        n_facilities: usize,
        n_clients: usize,
    },
}

fn one() -> f64 {
    1.0
}

fn four() -> f64 {
    4.0
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::RandomForest {
            n: 12,
            k: 4,
            penalties: PenaltyMode::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub generator: GeneratorSpec,
    pub trials: usize,
    pub seed: u64,
    pub scale_guess: bool,
    pub k_doubling: bool,
    pub budget_doubling: bool,
    pub p_doubling: bool,
    pub p_factor: f64,
    pub p: Option<u32>,
    pub strategy: Strategy,
    /// Compute the exact optimum for every trial.
    pub oracle: bool,
    pub caps: OracleCaps,
    pub out: Option<PathBuf>,
    /// Fill `runtime_ms`. Off by default so identical configs give
    /// byte-identical output.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::default(),
            generator: GeneratorSpec::default(),
            trials: 10,
            seed: 0,
            scale_guess: false,
            k_doubling: false,
            budget_doubling: true,
            p_doubling: false,
            p_factor: 2.0,
            p: None,
            strategy: Strategy::Replay,
            oracle: true,
            caps: OracleCaps::default(),
            out: None,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    fn rounding(&self, seed: u64) -> RoundingConfig {
        RoundingConfig {
            p_factor: self.p_factor,
            p: self.p,
            budget_doubling: self.budget_doubling,
            p_doubling: self.p_doubling,
            seed,
        }
    }

    fn forest(&self, k: usize, seed: u64) -> ForestConfig {
        ForestConfig {
            k: Some(k.max(1)),
            scale_guess: self.scale_guess,
            k_doubling: self.k_doubling,
            nmfl: NmflConfig {
                mode: RoundingMode::Randomized,
                rounding: self.rounding(seed),
                opt_guess: None,
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub instance_id: usize,
    pub algorithm: &'static str,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub alg_cost: f64,
    pub greedy_cost: f64,
    pub aug_cost: f64,
    pub facility_cost: f64,
    pub connection_cost: f64,
    pub penalty_cost: f64,
    pub opt_cost: Option<f64>,
    pub ratio: Option<f64>,
    pub fallback_events: usize,
    pub reinit_count: usize,
    pub violations: usize,
    pub runtime_ms: u64,
}

/// Seed of trial `index`: the first word of ChaCha stream `index`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

// ------------------------------------------------------------- forest runs

/// An online forest run with its per-arrival invariant checks.
pub struct ForestRun {
    pub forest: OnlineForest,
    pub violations: Vec<String>,
}

/// Feeds every pair, checking after each arrival that all non-penalized
/// pairs so far are connected and that nothing left the bought set.
pub fn run_forest(inst: &ForestInstance, config: ForestConfig) -> Result<ForestRun> {
    let graph = Arc::new(inst.graph.clone());
    let mut forest = OnlineForest::new(graph, config)?;
    let mut violations = Vec::new();
    let mut before: Vec<bool> = vec![false; inst.graph.n()];
    for (i, ev) in inst.pairs.iter().enumerate() {
        forest.arrive(*ev)?;
        let d = forest.driver();
        let unsat = d.unsatisfied();
        if !unsat.is_empty() {
            violations.push(format!("arrival {i}: pairs {unsat:?} unsatisfied"));
        }
        let mask = d.bought().mask();
        if before.iter().zip(mask).any(|(&b, &m)| b && !m) {
            violations.push(format!("arrival {i}: a vertex left the bought set"));
        }
        before = mask.to_vec();
    }
    violations.extend(cost_cap_violations(forest.records()));
    let mut driver = forest.driver().clone();
    violations.extend(separation_violations(&mut driver));
    Ok(ForestRun { forest, violations })
}

// ----------------------------------------------------------- set cover runs

/// Either rounding scheme behind one interface.
#[derive(Clone, Debug)]
pub enum ScRounder {
    Threshold(RoundingState),
    Baseline(SingleThresholdBaseline),
}

impl ScRounder {
    pub fn arrive(
        &mut self,
        e: ElementId,
        cands: &[(SetId, f64)],
        frac: &[SetValue],
    ) -> Result<RoundStep> {
        match self {
            ScRounder::Threshold(r) => r.arrive(e, cands, frac),
            ScRounder::Baseline(r) => r.arrive(e, cands, frac),
        }
    }

    pub fn is_purchased(&self, s: SetId) -> bool {
        match self {
            ScRounder::Threshold(r) => r.is_purchased(s),
            ScRounder::Baseline(r) => r.is_purchased(s),
        }
    }

    pub fn purchased_cost(&self) -> f64 {
        match self {
            ScRounder::Threshold(r) => r.purchased_cost(),
            ScRounder::Baseline(r) => r.purchased_cost(),
        }
    }

    pub fn fallbacks(&self) -> usize {
        match self {
            ScRounder::Threshold(r) => r.fallbacks().len(),
            ScRounder::Baseline(r) => r.fallbacks().len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScRun {
    pub arrived: Vec<ElementId>,
    pub fallbacks: usize,
    pub cost: f64,
    /// Final `c^T x` of the fractional solution.
    pub lp_cost: f64,
    pub uncovered: usize,
}

/// Online set cover: the adversary picks elements, the fractional algorithm
/// updates `x`, the rounder buys.
pub fn run_sc_online(
    inst: &SetCoverInstance,
    adversary: &mut SemiAdaptiveAdversary<'_>,
    rounder: &mut ScRounder,
) -> Result<ScRun> {
    let mut frac = FractionalState::new();
    let mut arrived = Vec::new();
    while let Some(e) = adversary.next(|s| rounder.is_purchased(s)) {
        let cands = inst.candidates_with_costs(e);
        let changed = frac.fsc_arrive(e, &cands)?;
        let values: Vec<SetValue> = changed
            .iter()
            .map(|&(s, x)| SetValue {
                set: s,
                cost: inst.cost(s),
                x,
            })
            .collect();
        rounder.arrive(e, &cands, &values)?;
        arrived.push(e);
    }
    let uncovered = arrived
        .iter()
        .filter(|&&e| !inst.candidates(e).iter().any(|&s| rounder.is_purchased(s)))
        .count();
    Ok(ScRun {
        arrived,
        fallbacks: rounder.fallbacks(),
        cost: rounder.purchased_cost(),
        lp_cost: frac.lp_cost(),
        uncovered,
    })
}

/// The counterexample family seen as set cover: arrival `i` is covered by
/// `v_i..v_k`, and the fixed fractional feed is passed to the rounder.
pub fn run_counterexample_sc(k: usize, rounder: &mut ScRounder) -> Result<ScRun> {
    let inst = gen_counterexample(k)?;
    let cost: Vec<f64> = (1..=k)
        .map(|i| inst.graph.weight(counterexample_steiner(k, i)).to_f64())
        .collect();
    let mut arrived = Vec::new();
    let mut lp = 0.0;
    for i in 2..=k {
        let x = counterexample_feed(k, i);
        let cands: Vec<(SetId, f64)> = (i..=k).map(|j| (j - 1, cost[j - 1])).collect();
        let values: Vec<SetValue> = (i..=k)
            .map(|j| SetValue {
                set: j - 1,
                cost: cost[j - 1],
                x: x[j - 1],
            })
            .collect();
        rounder.arrive(i, &cands, &values)?;
        arrived.push(i);
        lp = x.iter().zip(&cost).map(|(a, b)| a * b).sum();
    }
    let uncovered = (2..=k)
        .filter(|&i| !(i..=k).any(|j| rounder.is_purchased(j - 1)))
        .count();
    Ok(ScRun {
        arrived,
        fallbacks: rounder.fallbacks(),
        cost: rounder.purchased_cost(),
        lp_cost: lp,
        uncovered,
    })
}

/// `w(v_k)`: the only vertex adjacent to `s_k`, and it serves every pair.
pub fn counterexample_opt(k: usize) -> Result<f64> {
    let inst = gen_counterexample(k)?;
    Ok(inst.graph.weight(counterexample_steiner(k, k)).to_f64())
}

// ----------------------------------------------------------------- trials

fn finish(mut rec: ExperimentRecord, opt: Option<f64>) -> ExperimentRecord {
    rec.opt_cost = opt;
    rec.ratio = opt.filter(|&o| o > 0.0).map(|o| rec.alg_cost / o);
    if let Some(r) = rec.ratio {
        if r < 1.0 - 1e-9 {
            rec.violations += 1;
        }
    }
    rec
}

/// A generated instance in its on-disk schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "instance", rename_all = "snake_case")]
pub enum InstanceFile {
    Forest(ForestInstanceSpec),
    SetCover(SetCoverSpec),
    FacilityLocation(FacilityLocationSpec),
}

/// Instance `index` of `spec` under `seed`, exactly as `run_experiment` sees it.
pub fn generate(spec: &GeneratorSpec, seed: u64, index: usize) -> Result<InstanceFile> {
    let s = trial_seed(seed, index);
    Ok(match *spec {
        GeneratorSpec::RandomSc {
            n_elems,
            n_sets,
            cost_lo,
            cost_hi,
        } => {
            InstanceFile::SetCover(gen_random_sc(s, n_elems, n_sets, (cost_lo, cost_hi))?.to_spec())
        }
        GeneratorSpec::RandomNmfl {
            n_facilities,
            n_clients,
        } => InstanceFile::FacilityLocation(gen_random_nmfl(s, n_facilities, n_clients)?.to_spec()),
        _ => {
            let cfg = ExperimentConfig {
                algorithm: Algorithm::PcNwsf,
                generator: spec.clone(),
                ..Default::default()
            };
            InstanceFile::Forest(forest_instance(&cfg, s)?.to_spec())
        }
    })
}

fn forest_instance(cfg: &ExperimentConfig, seed: u64) -> Result<ForestInstance> {
    let mut inst = match &cfg.generator {
        GeneratorSpec::RandomForest { n, k, penalties } => {
            gen_random_forest(seed, *n, *k, *penalties)?
        }
        GeneratorSpec::ScReduction {
            n_elems,
            n_sets,
            cost_lo,
            cost_hi,
        } => gen_sc_reduction(&gen_random_sc(
            seed,
            *n_elems,
            *n_sets,
            (*cost_lo, *cost_hi),
        )?)?,
        GeneratorSpec::Counterexample { k } => gen_counterexample(*k)?,
        other => {
            return Err(Error::input(format!(
                "generator {other:?} does not produce a graph"
            )))
        }
    };
    if cfg.algorithm == Algorithm::Nwsf {
        for ev in &mut inst.pairs {
            *ev = TerminalEvent::pair(ev.s, ev.t);
        }
    }
    Ok(inst)
}

fn forest_trial(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<ExperimentRecord> {
    let inst = forest_instance(cfg, seed)?;
    let run = run_forest(&inst, cfg.forest(inst.pairs.len(), splitmix64(seed)))?;
    let d = run.forest.driver();
    let t = d.totals();
    let rec = ExperimentRecord {
        instance_id: index,
        algorithm: cfg.algorithm.name(),
        seed,
        n: inst.graph.n(),
        k: inst.pairs.len(),
        alg_cost: t.total(),
        greedy_cost: t.greedy.to_f64(),
        aug_cost: t.aug.to_f64(),
        facility_cost: t.facility.to_f64(),
        connection_cost: t.connection.to_f64(),
        penalty_cost: t.penalty,
        fallback_events: d.nmfl().fallbacks(),
        reinit_count: run.forest.reinit_count(),
        violations: run.violations.len(),
        ..Default::default()
    };
    let opt = match (&cfg.generator, cfg.oracle) {
        (_, false) => None,
        (GeneratorSpec::Counterexample { k }, true) => Some(counterexample_opt(*k)?),
        (_, true) => Some(opt_pc_nwsf(&inst.graph, &inst.pairs, &cfg.caps)?.opt_value),
    };
    Ok(finish(rec, opt))
}

fn nmfl_trial(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<ExperimentRecord> {
    let GeneratorSpec::RandomNmfl {
        n_facilities,
        n_clients,
    } = cfg.generator
    else {
        return Err(Error::input("nmfl runs need the random_nmfl generator"));
    };
    let inst = gen_random_nmfl(seed, n_facilities, n_clients)?;
    let config = NmflConfig {
        mode: RoundingMode::Randomized,
        rounding: cfg.rounding(splitmix64(seed)),
        opt_guess: None,
    };
    let mut run = NmflRunState::new(config, n_clients)?;
    let mut violations = 0;
    for c in inst.clients() {
        let step = run.arrive(c, &inst.candidates(c))?;
        if !run.is_open(step.facility) {
            violations += 1;
        }
    }
    violations += refinement_violations(run.steps()).len();
    let rec = ExperimentRecord {
        instance_id: index,
        algorithm: cfg.algorithm.name(),
        seed,
        n: n_facilities,
        k: n_clients,
        alg_cost: run.total_cost(),
        facility_cost: run.facility_cost(),
        connection_cost: run.connection_cost(),
        fallback_events: run.fallbacks(),
        reinit_count: run.guess_restarts(),
        violations,
        ..Default::default()
    };
    let opt = if cfg.oracle {
        Some(opt_nmfl(&inst, &inst.clients(), &cfg.caps)?.opt_value)
    } else {
        None
    };
    Ok(finish(rec, opt))
}

fn sc_trial(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<ExperimentRecord> {
    let alg_seed = splitmix64(seed);
    let (universe, n_sets) = match cfg.generator {
        GeneratorSpec::RandomSc {
            n_elems, n_sets, ..
        } => (n_elems, n_sets),
        GeneratorSpec::Counterexample { k } => (k - 1, k),
        _ => {
            return Err(Error::input(
                "set cover runs need the random_sc or counterexample generator",
            ))
        }
    };
    let mut rounder = match cfg.algorithm {
        Algorithm::ScRound => {
            ScRounder::Threshold(RoundingState::new(cfg.rounding(alg_seed), Some(universe))?)
        }
        _ => ScRounder::Baseline(SingleThresholdBaseline::for_pairs(
            universe.max(2),
            alg_seed,
        )?),
    };
    let (run, opt) = match cfg.generator {
        GeneratorSpec::RandomSc {
            n_elems,
            n_sets,
            cost_lo,
            cost_hi,
        } => {
            let inst = gen_random_sc(seed, n_elems, n_sets, (cost_lo, cost_hi))?;
            let order: Vec<ElementId> = (0..n_elems).collect();
            let mut adv = SemiAdaptiveAdversary::new(&inst, order, cfg.strategy);
            let run = run_sc_online(&inst, &mut adv, &mut rounder)?;
            let opt = if cfg.oracle {
                Some(opt_set_cover(&inst, &run.arrived, &cfg.caps)?.opt_value)
            } else {
                None
            };
            (run, opt)
        }
        GeneratorSpec::Counterexample { k } => {
            let run = run_counterexample_sc(k, &mut rounder)?;
            (
                run,
                if cfg.oracle {
                    Some(counterexample_opt(k)?)
                } else {
                    None
                },
            )
        }
        _ => unreachable!(),
    };
    let rec = ExperimentRecord {
        instance_id: index,
        algorithm: cfg.algorithm.name(),
        seed,
        n: n_sets,
        k: universe,
        alg_cost: run.cost,
        facility_cost: run.cost,
        fallback_events: run.fallbacks,
        violations: run.uncovered,
        ..Default::default()
    };
    Ok(finish(rec, opt))
}

/// Runs trial `index` of `cfg`.
pub fn run_trial(cfg: &ExperimentConfig, index: usize) -> Result<ExperimentRecord> {
    let seed = trial_seed(cfg.seed, index);
    let start = Instant::now();
    let mut rec = match cfg.algorithm {
        Algorithm::Nwsf | Algorithm::PcNwsf => forest_trial(cfg, index, seed)?,
        Algorithm::Nmfl => nmfl_trial(cfg, index, seed)?,
        Algorithm::ScRound | Algorithm::ScBaselineSingleThreshold => sc_trial(cfg, index, seed)?,
    };
    if cfg.timing {
        rec.runtime_ms = start.elapsed().as_millis() as u64;
    }
    Ok(rec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub trials: usize,
    pub mean_cost: f64,
    pub mean_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub fallback_events: usize,
    pub violations: usize,
}

impl ExperimentSummary {
    pub fn of(records: &[ExperimentRecord]) -> Self {
        let ratios: Vec<f64> = records.iter().filter_map(|r| r.ratio).collect();
        let n = records.len().max(1) as f64;
        ExperimentSummary {
            trials: records.len(),
            mean_cost: records.iter().map(|r| r.alg_cost).sum::<f64>() / n,
            mean_ratio: (!ratios.is_empty())
                .then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            max_ratio: ratios.iter().copied().reduce(f64::max),
            fallback_events: records.iter().map(|r| r.fallback_events).sum(),
            violations: records.iter().map(|r| r.violations).sum(),
        }
    }

    pub fn line(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        format!(
            "trials={} mean_cost={:.4} mean_ratio={} max_ratio={} fallbacks={} violations={}",
            self.trials,
            self.mean_cost,
            fmt(self.mean_ratio),
            fmt(self.max_ratio),
            self.fallback_events,
            self.violations
        )
    }
}

pub fn write_records_csv<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs all trials in parallel, writes the CSV (if `out` is set) in trial
/// order and returns the records.
pub fn run_experiment(
    cfg: &ExperimentConfig,
) -> Result<(Vec<ExperimentRecord>, ExperimentSummary)> {
    if cfg.trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    let records = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = &cfg.out {
        write_records_csv(std::fs::File::create(path)?, &records)?;
    }
    let summary = ExperimentSummary::of(&records);
    Ok((records, summary))
}

// ---------------------------------------------- single-threshold counterexample

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub k: usize,
    pub trials: usize,
    pub opt: f64,
    pub baseline_mean: f64,
    /// `exp(-4) (k - log2 k)`.
    pub baseline_floor: f64,
    pub threshold_mean: f64,
    pub threshold_ratio: f64,
    /// `log2 k * log2 n` with `n = 2k` vertices.
    pub log_product: f64,
}

/// Mean costs of both rounding schemes on the counterexample family under
/// its fractional feed.
pub fn counterexample_report(k: usize, trials: usize, seed: u64) -> Result<CounterexampleReport> {
    if trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    let costs = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            let mut base = ScRounder::Baseline(SingleThresholdBaseline::for_pairs(k, s)?);
            let b = run_counterexample_sc(k, &mut base)?.cost;
            let mut thr = ScRounder::Threshold(RoundingState::new(
                RoundingConfig {
                    seed: s,
                    ..RoundingConfig::default()
                },
                Some(k - 1),
            )?);
            let t = run_counterexample_sc(k, &mut thr)?.cost;
            Ok((b, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = trials as f64;
    let opt = counterexample_opt(k)?;
    let baseline_mean = costs.iter().map(|c| c.0).sum::<f64>() / n;
    let threshold_mean = costs.iter().map(|c| c.1).sum::<f64>() / n;
    let lk = (k as f64).log2();
    Ok(CounterexampleReport {
        k,
        trials,
        opt,
        baseline_mean,
        baseline_floor: (-4f64).exp() * (k as f64 - lk),
        threshold_mean,
        threshold_ratio: threshold_mean / opt,
        log_product: lk * (2.0 * k as f64).log2(),
    })
}
