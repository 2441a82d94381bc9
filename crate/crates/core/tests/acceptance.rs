//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! binding criterion fails.

use std::sync::Arc;
use std::time::Instant;

use pcnwsf::harness::checks::{cost_cap_violations, refinement_violations, separation_violations};
use pcnwsf::harness::experiment::{
    counterexample_report, run_forest, run_sc_online, trial_seed, ScRounder,
};
use pcnwsf::harness::generators::{
    gen_random_forest, gen_random_nmfl, gen_random_sc, gen_sc_reduction, PenaltyMode,
};
use pcnwsf::harness::{InflationScript, SemiAdaptiveAdversary, Strategy};
use pcnwsf::nmfl::{NmflConfig, NmflRunState, RoundingMode};
use pcnwsf::oracles::{ball_witness, opt_pc_nwsf, opt_set_cover, OracleCaps, WitnessClient};
use pcnwsf::rounding::{default_p, RoundingConfig, RoundingState, SetValue};
use pcnwsf::steiner::{DriverConfig, DriverState, ForestConfig, OnlineForest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    binding: bool,
    detail: String,
}

fn outcome(id: &'static str, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        pass,
        binding: true,
        detail,
    }
}

fn wrapper_flags(i: u64) -> (bool, bool) {
    match i % 4 {
        0 => (false, false),
        1 => (true, false),
        2 => (false, true),
        _ => (true, true),
    }
}

fn forest_config(k: usize, seed: u64, scale_guess: bool, k_doubling: bool) -> ForestConfig {
    ForestConfig {
        k: Some(k),
        scale_guess,
        k_doubling,
        nmfl: NmflConfig {
            rounding: RoundingConfig {
                seed,
                ..Default::default()
            },
            ..Default::default()
        },
    }
}

/// Shared corpus of C1/C2/C9/C10: 1000 random prize-collecting runs.
struct ForestCorpus {
    feasibility: Vec<String>,
    caps: Vec<String>,
    refinement: Vec<String>,
    scale_points: usize,
    scale_breaks: Vec<String>,
    elapsed: f64,
}

fn forest_corpus() -> ForestCorpus {
    let start = Instant::now();
    let results: Vec<_> = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(1, i as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(4..=20);
            let k = rng.gen_range(1..=8);
            let inst = gen_random_forest(seed, n, k, PenaltyMode::Mixed).expect("generator");
            let (scale, kd) = wrapper_flags(i);
            let run = run_forest(&inst, forest_config(k, seed, scale, kd)).expect("run");
            let tag = |v: &String| format!("seed {seed}: {v}");
            let feas: Vec<String> = run
                .violations
                .iter()
                .filter(|v| v.starts_with("arrival"))
                .map(tag)
                .collect();
            let caps: Vec<String> = cost_cap_violations(run.forest.records())
                .iter()
                .map(tag)
                .collect();
            let refine: Vec<String> = refinement_violations(run.forest.driver().nmfl().steps())
                .iter()
                .map(tag)
                .collect();
            let mut breaks = Vec::new();
            for p in run.forest.scale_trace() {
                if !(p.beta <= p.alpha && p.alpha <= p.k as f64 * p.beta) {
                    breaks.push(format!(
                        "seed {seed}: pair {} alpha {} beta {} k {}",
                        p.pair, p.alpha, p.beta, p.k
                    ));
                }
            }
            (feas, caps, refine, run.forest.scale_trace().len(), breaks)
        })
        .collect();
    let mut c = ForestCorpus {
        feasibility: Vec::new(),
        caps: Vec::new(),
        refinement: Vec::new(),
        scale_points: 0,
        scale_breaks: Vec::new(),
        elapsed: 0.0,
    };
    for (f, cp, r, sp, b) in results {
        c.feasibility.extend(f);
        c.caps.extend(cp);
        c.refinement.extend(r);
        c.scale_points += sp;
        c.scale_breaks.extend(b);
    }
    c.elapsed = start.elapsed().as_secs_f64();
    c
}

fn first(v: &[String]) -> String {
    v.first().cloned().unwrap_or_default()
}

fn c1(c: &ForestCorpus) -> Outcome {
    let pass = c.feasibility.is_empty() && c.elapsed < 120.0;
    outcome(
        "C1",
        "feasibility and irrevocability",
        pass,
        format!(
            "1000 runs, {} violations, {:.1}s {}",
            c.feasibility.len(),
            c.elapsed,
            first(&c.feasibility)
        ),
    )
}

fn c2(c: &ForestCorpus) -> Outcome {
    outcome(
        "C2",
        "per-iteration cost caps",
        c.caps.is_empty(),
        format!("{} violations {}", c.caps.len(), first(&c.caps)),
    )
}

fn c3() -> Outcome {
    let start = Instant::now();
    let trials = 100_000usize;
    let universe = 8;
    let p = (2.0 * (universe as f64).log2()).ceil() as u32;
    let (fallbacks, arrivals) = (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(3, i);
            let inst = gen_random_sc(seed, universe, 8, (1.0, 4.0)).expect("generator");
            let cfg = RoundingConfig {
                p: Some(p),
                budget_doubling: false,
                seed,
                ..Default::default()
            };
            let mut r = ScRounder::Threshold(RoundingState::new(cfg, None).expect("rounding"));
            let mut adv = SemiAdaptiveAdversary::new(
                &inst,
                (0..universe).collect(),
                Strategy::UncoveredSeeking,
            );
            let run = run_sc_online(&inst, &mut adv, &mut r).expect("run");
            (run.fallbacks, run.arrived.len())
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let q = (-(p as f64)).exp();
    let freq = fallbacks as f64 / arrivals as f64;
    let sigma = (q * (1.0 - q) / arrivals as f64).sqrt();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = freq <= q + 3.0 * sigma && freq <= 0.01 && elapsed < 300.0;
    outcome(
        "C3",
        "fallback frequency against an uncovered-seeking adversary",
        pass,
        format!(
            "p={p}, {fallbacks}/{arrivals} = {freq:.5} vs e^-{p} + 3 sigma = {:.5}, {elapsed:.1}s",
            q + 3.0 * sigma
        ),
    )
}

/// One scripted-inflation trial: is the inflated set bought by its threshold?
fn inflation_trial(p: u32, script: InflationScript, seed: u64) -> bool {
    let cfg = RoundingConfig {
        p: Some(p),
        budget_doubling: false,
        seed,
        ..Default::default()
    };
    let mut r = RoundingState::new(cfg, None).expect("rounding");
    for t in 0..script.steps {
        if r.is_purchased(0) {
            break;
        }
        let x = script.value_at(t);
        let filler = t + 1;
        let cands = [(0, 1.0), (filler, 0.5)];
        let frac = [
            SetValue {
                set: 0,
                cost: 1.0,
                x,
            },
            SetValue {
                set: filler,
                cost: 0.5,
                x: 1.0 - x,
            },
        ];
        r.arrive(t, &cands, &frac).expect("arrive");
    }
    r.is_purchased(0)
}

fn c4() -> Outcome {
    let trials = 20_000usize;
    let mut cells = Vec::new();
    let mut pass = true;
    for &x in &[0.1, 0.25, 0.4] {
        for &p in &[2u32, 4] {
            let script = InflationScript {
                x_final: x,
                steps: 8,
            };
            let hits = (0..trials)
                .into_par_iter()
                .filter(|&i| inflation_trial(p, script, trial_seed(4 + p as u64, i)))
                .count();
            let freq = hits as f64 / trials as f64;
            let sigma = (freq * (1.0 - freq) / trials as f64).sqrt();
            let bound = 2.0 * p as f64 * x;
            if freq > bound + 3.0 * sigma {
                pass = false;
            }
            cells.push(format!("x={x},p={p}:{freq:.3}<={bound:.2}"));
        }
    }
    outcome(
        "C4",
        "threshold crossing probability under scripted inflation",
        pass,
        cells.join(" "),
    )
}

fn c5() -> Outcome {
    let seeds = 1000u64;
    let mut violations = 0;
    let mut worst = 0.0f64;
    let instances = 20u64;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i);
        let n_el = rng.gen_range(4..=16);
        let n_sets = rng.gen_range(4..=16);
        let inst = gen_random_sc(500 + i, n_el, n_sets, (1.0, 4.0)).expect("generator");
        let p = default_p(2.0, n_el);
        let runs: Vec<(f64, f64)> = (0..seeds)
            .into_par_iter()
            .map(|s| {
                let cfg = RoundingConfig {
                    p: Some(p),
                    budget_doubling: false,
                    seed: s,
                    ..Default::default()
                };
                let mut r = ScRounder::Threshold(RoundingState::new(cfg, None).expect("rounding"));
                let mut adv =
                    SemiAdaptiveAdversary::new(&inst, (0..n_el).collect(), Strategy::Replay);
                let run = run_sc_online(&inst, &mut adv, &mut r).expect("run");
                (run.cost, run.lp_cost)
            })
            .collect();
        let mean = runs.iter().map(|r| r.0).sum::<f64>() / seeds as f64;
        let lp = runs.iter().map(|r| r.1).sum::<f64>() / seeds as f64;
        let budget = lp;
        let bound = 2.0 * p as f64 * lp + budget;
        worst = worst.max(mean / bound);
        if mean > 1.1 * bound {
            violations += 1;
        }
    }
    outcome(
        "C5",
        "rounded cost against 2p c^T x + B",
        violations == 0,
        format!("{instances} instances x {seeds} seeds, {violations} violations, worst mean/bound {worst:.3}"),
    )
}

fn c6() -> Outcome {
    let start = Instant::now();
    let trials = 10_000;
    let a = counterexample_report(256, trials, 6).expect("report");
    let b = counterexample_report(512, trials, 6).expect("report");
    let growth = b.baseline_mean / a.baseline_mean;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = a.baseline_mean >= a.baseline_floor
        && a.opt <= 1.0 + 256e-6 + 1e-9
        && (1.6..=2.4).contains(&growth)
        && a.threshold_ratio <= 3.0 * a.log_product
        && b.threshold_ratio <= 3.0 * b.log_product
        && elapsed < 300.0;
    outcome(
        "C6",
        "single-threshold counterexample",
        pass,
        format!(
            "k=256 baseline {:.2} >= {:.2}, OPT {:.6}; k=512/256 growth {growth:.3}; threshold ratio {:.1} <= {:.0} and {:.1} <= {:.0}; {elapsed:.1}s",
            a.baseline_mean,
            a.baseline_floor,
            a.opt,
            a.threshold_ratio,
            3.0 * a.log_product,
            b.threshold_ratio,
            3.0 * b.log_product
        ),
    )
}

fn c7() -> Outcome {
    let caps = OracleCaps::default();
    let failures: Vec<String> = (0..500u64)
        .into_par_iter()
        .filter_map(|i| {
            let seed = trial_seed(7, i as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(5..=12);
            let k = rng.gen_range(1..=5);
            let mode = if i % 2 == 0 {
                PenaltyMode::None
            } else {
                PenaltyMode::Mixed
            };
            let inst = gen_random_forest(seed, n, k, mode).expect("generator");
            let cfg = DriverConfig {
                k,
                nmfl: NmflConfig {
                    rounding: RoundingConfig {
                        seed,
                        ..Default::default()
                    },
                    ..Default::default()
                },
                ..Default::default()
            };
            let mut d = DriverState::new(Arc::new(inst.graph.clone()), cfg).expect("driver");
            for ev in &inst.pairs {
                d.arrive(*ev).expect("arrive");
            }
            let sep = separation_violations(&mut d);
            if !sep.is_empty() {
                return Some(format!("seed {seed}: {}", sep[0]));
            }
            let clients: Vec<WitnessClient> = d
                .records()
                .iter()
                .filter_map(|r| {
                    r.client.map(|c| WitnessClient {
                        terminal: c.terminal,
                        radius: c.radius,
                        pair: r.pair,
                    })
                })
                .collect();
            let opt = opt_pc_nwsf(&inst.graph, &inst.pairs, &caps).expect("oracle");
            match ball_witness(&inst.graph, &inst.pairs, &opt.witness, &clients, d.ell()) {
                Ok(w) if w.within_bound() => None,
                Ok(w) => Some(format!(
                    "seed {seed}: witness {} > 2 ell OPT = {}",
                    w.total,
                    2.0 * w.ell as f64 * w.offline_cost
                )),
                Err(e) => Some(format!("seed {seed}: {e}")),
            }
        })
        .collect();
    outcome(
        "C7",
        "facility location witness within 2 ell OPT",
        failures.is_empty(),
        format!(
            "500 instances, {} failures {}",
            failures.len(),
            first(&failures)
        ),
    )
}

fn c8() -> Outcome {
    let caps = OracleCaps::default();
    let mismatches: Vec<String> = (0..200u64)
        .into_par_iter()
        .filter_map(|i| {
            let seed = trial_seed(8, i as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = gen_random_sc(seed, rng.gen_range(1..=8), rng.gen_range(1..=8), (0.5, 4.0))
                .expect("generator");
            let red = gen_sc_reduction(&inst).expect("reduction");
            let a = opt_pc_nwsf(&red.graph, &red.pairs, &caps)
                .expect("forest oracle")
                .opt_value;
            let b = opt_set_cover(&inst, &inst.elements(), &caps)
                .expect("set cover oracle")
                .opt_value;
            (a != b).then(|| format!("seed {seed}: {a} != {b}"))
        })
        .collect();
    outcome(
        "C8",
        "reduction preserves the optimum",
        mismatches.is_empty(),
        format!(
            "200 instances, {} mismatches {}",
            mismatches.len(),
            first(&mismatches)
        ),
    )
}

fn c9(c: &ForestCorpus) -> Outcome {
    let standalone: Vec<String> = (0..500u64)
        .into_par_iter()
        .flat_map_iter(|i| {
            let seed = trial_seed(9, i as usize);
            let inst = gen_random_nmfl(seed, 1 + (i % 8) as usize, 1 + (i % 12) as usize)
                .expect("generator");
            let mode = if i % 2 == 0 {
                RoundingMode::Randomized
            } else {
                RoundingMode::Deterministic
            };
            let cfg = NmflConfig {
                mode,
                rounding: RoundingConfig {
                    seed,
                    ..Default::default()
                },
                opt_guess: None,
            };
            let mut run = NmflRunState::new(cfg, inst.clients().len()).expect("nmfl");
            for c in inst.clients() {
                run.arrive(c, &inst.candidates(c)).expect("arrive");
            }
            refinement_violations(run.steps())
                .into_iter()
                .map(move |v| format!("seed {seed}: {v}"))
        })
        .collect();
    let total = standalone.len() + c.refinement.len();
    outcome(
        "C9",
        "connection refinement within twice the fractional connection",
        total == 0,
        format!(
            "500 standalone + forest traces, {total} violations {}",
            first(&standalone)
        ),
    )
}

fn c10(c: &ForestCorpus) -> Outcome {
    let mut errors = Vec::new();
    for (len, kd_scale) in [
        (1usize, false),
        (3, false),
        (4, true),
        (5, false),
        (16, true),
        (17, false),
        (100, true),
        (300, false),
    ] {
        let inst =
            gen_random_forest(1000 + len as u64, 20, len, PenaltyMode::None).expect("generator");
        let mut f = OnlineForest::new(
            Arc::new(inst.graph.clone()),
            forest_config(len, len as u64, kd_scale, true),
        )
        .expect("forest");
        for ev in &inst.pairs {
            f.arrive(*ev).expect("arrive");
        }
        let want: Vec<usize> = [4usize, 16, 256, 65536]
            .into_iter()
            .filter(|&i| i <= len)
            .collect();
        if f.squarings() != want.as_slice() {
            errors.push(format!(
                "{len} arrivals: squarings {:?}, expected {want:?}",
                f.squarings()
            ));
        }
        for p in f.scale_trace() {
            if !(p.beta <= p.alpha && p.alpha <= p.k as f64 * p.beta) {
                errors.push(format!("{len} arrivals: alpha {} beta {}", p.alpha, p.beta));
            }
        }
        if !f.driver().unsatisfied().is_empty() {
            errors.push(format!("{len} arrivals: infeasible"));
        }
    }
    errors.extend(c.scale_breaks.iter().cloned());
    outcome(
        "C10",
        "wrapper bookkeeping",
        errors.is_empty(),
        format!(
            "{} scale points checked, {} errors {}",
            c.scale_points,
            errors.len(),
            first(&errors)
        ),
    )
}

fn c11() -> Outcome {
    let caps = OracleCaps::default();
    let mut cells = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for &k in &[4usize, 8, 16] {
        for &n in &[4usize, 8, 16] {
            let ratios: Vec<f64> = (0..40u64)
                .into_par_iter()
                .map(|i| {
                    let seed = trial_seed(11 + (k * 100 + n) as u64, i as usize);
                    let inst = gen_random_sc(seed, k, n, (1.0, 4.0)).expect("generator");
                    let red = gen_sc_reduction(&inst).expect("reduction");
                    let opt = opt_set_cover(&inst, &inst.elements(), &caps)
                        .expect("oracle")
                        .opt_value;
                    let cfg = forest_config(red.pairs.len(), seed, false, false);
                    let run = run_forest(&red, cfg).expect("run");
                    run.forest.driver().totals().total() / opt
                })
                .collect();
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let scale = (k as f64).log2() * ((k + n + 1) as f64).log2();
            num += mean * scale;
            den += scale * scale;
            cells.push((k, n, mean, scale));
        }
    }
    let c_fit = num / den;
    let c_max = cells.iter().map(|c| c.2 / c.3).fold(0.0, f64::max);
    let table: Vec<String> = cells
        .iter()
        .map(|c| format!("({},{}):{:.2}", c.0, c.1, c.2))
        .collect();
    Outcome {
        id: "C11",
        name: "end-to-end ratio trend",
        pass: true,
        binding: false,
        detail: format!(
            "fitted c = {c_fit:.4} (max cell c = {c_max:.4}); mean ratios {}",
            table.join(" ")
        ),
    }
}

fn main() {
    let start = Instant::now();
    let corpus = forest_corpus();
    let outcomes = vec![
        c1(&corpus),
        c2(&corpus),
        c3(),
        c4(),
        c5(),
        c6(),
        c7(),
        c8(),
        c9(&corpus),
        c10(&corpus),
        c11(),
    ];
    let mut failed = 0;
    for o in &outcomes {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let tag = if o.binding { "" } else { " (non-binding)" };
        println!("{} {verdict} {}{tag}: {}", o.id, o.name, o.detail);
        if o.binding && !o.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} criteria, {failed} failed, {:.1}s",
        outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
