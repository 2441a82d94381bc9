use std::collections::BTreeSet;
use std::sync::Arc;

use pcnwsf::covering::{FractionalState, SetCoverInstance};
use pcnwsf::harness::experiment::{counterexample_opt, run_forest, trial_seed};
use pcnwsf::harness::generators::{
    gen_counterexample, gen_random_forest, gen_random_nmfl, gen_random_sc, gen_sc_reduction,
    PenaltyMode,
};
use pcnwsf::nmfl::{NmflConfig, NmflRunState};
use pcnwsf::oracles::{
    check_forest, check_nmfl, opt_nmfl, opt_pc_nwsf, opt_set_cover, FacilityWitness, ForestWitness,
    OracleCaps,
};
use pcnwsf::rounding::RoundingConfig;
use pcnwsf::steiner::ForestConfig;

fn nmfl_config(seed: u64) -> NmflConfig {
    NmflConfig {
        rounding: RoundingConfig {
            seed,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn fractional_cover_within_log_factor() {
    let caps = OracleCaps::default();
    for i in 0..1000u64 {
        let seed = trial_seed(21, i as usize);
        let n_sets = 2 + (i % 11) as usize;
        let inst = gen_random_sc(seed, 2 + (i % 9) as usize, n_sets, (1.0, 4.0)).unwrap();
        let mut f = FractionalState::new();
        for e in inst.elements() {
            f.fsc_arrive(e, &inst.candidates_with_costs(e)).unwrap();
            assert!(
                covered(&f, &inst, e),
                "seed {seed}: element {e} under-covered"
            );
        }
        let opt = opt_set_cover(&inst, &inst.elements(), &caps)
            .unwrap()
            .opt_value;
        let bound = 4.0 * (1.0 + (n_sets as f64).ln()) * opt;
        assert!(
            f.lp_cost() <= bound + 1e-9,
            "seed {seed}: {} > {bound}",
            f.lp_cost()
        );
    }
}

fn covered(f: &FractionalState, inst: &SetCoverInstance, e: usize) -> bool {
    inst.candidates(e).iter().map(|&s| f.x_set(s)).sum::<f64>() >= 1.0 - 1e-9
}

#[test]
fn forest_output_passes_independent_checker() {
    let caps = OracleCaps::default();
    for i in 0..300u64 {
        let seed = trial_seed(22, i as usize);
        let mode = if i % 2 == 0 {
            PenaltyMode::None
        } else {
            PenaltyMode::Mixed
        };
        let inst =
            gen_random_forest(seed, 4 + (i % 9) as usize, 1 + (i % 5) as usize, mode).unwrap();
        let cfg = ForestConfig {
            k: Some(inst.pairs.len()),
            scale_guess: i % 3 == 1,
            k_doubling: i % 3 == 2,
            nmfl: nmfl_config(seed),
        };
        let run = run_forest(&inst, cfg).unwrap();
        assert!(
            run.violations.is_empty(),
            "seed {seed}: {:?}",
            run.violations
        );
        let d = run.forest.driver();
        let terminals: BTreeSet<usize> = inst.pairs.iter().flat_map(|p| [p.s, p.t]).collect();
        let witness = ForestWitness {
            vertices: (0..inst.graph.n())
                .filter(|&v| d.bought().contains(v) && !terminals.contains(&v))
                .collect(),
            penalized: (0..d.pairs().len()).filter(|&p| d.penalized()[p]).collect(),
        };
        let checked = check_forest(&inst.graph, &inst.pairs, &witness).unwrap();
        let paid = d.totals().total();
        assert!(checked <= paid + 1e-9, "seed {seed}: {checked} > {paid}");
        let opt = opt_pc_nwsf(&inst.graph, &inst.pairs, &caps)
            .unwrap()
            .opt_value;
        assert!(
            opt <= checked + 1e-9,
            "seed {seed}: oracle {opt} above a feasible {checked}"
        );
    }
}

#[test]
fn facility_location_against_oracle() {
    let caps = OracleCaps::default();
    let mut ratios = Vec::new();
    for i in 0..200u64 {
        let seed = trial_seed(23, i as usize);
        let inst = gen_random_nmfl(seed, 3, 1 + (i % 8) as usize).unwrap();
        let clients = inst.clients();
        let mut run = NmflRunState::new(nmfl_config(seed), clients.len()).unwrap();
        for &c in &clients {
            run.arrive(c, &inst.candidates(c)).unwrap();
        }
        let w = FacilityWitness {
            open: run.opened().to_vec(),
            assignment: run.assignments().to_vec(),
        };
        let cost = check_nmfl(&inst, &clients, &w).unwrap();
        assert!(cost <= run.total_cost() + 1e-9);
        let opt = opt_nmfl(&inst, &clients, &caps).unwrap().opt_value;
        assert!(opt <= cost + 1e-9);
        ratios.push(cost / opt);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(mean < 8.0, "mean ratio {mean}");
}

#[test]
fn reduction_example_four_elements() {
    // sets {0,1} cost 2, {2,3} cost 2, {0,1,2,3} cost 3, {3} cost 1
    let inst = SetCoverInstance::new(
        vec![2.0, 2.0, 3.0, 1.0],
        vec![vec![0, 1], vec![2, 3], vec![0, 1, 2, 3], vec![3]],
    )
    .unwrap();
    let caps = OracleCaps::default();
    let red = gen_sc_reduction(&inst).unwrap();
    assert_eq!(red.graph.n(), 4 + 4 + 1);
    assert_eq!(red.pairs.len(), 4);
    let sc = opt_set_cover(&inst, &inst.elements(), &caps)
        .unwrap()
        .opt_value;
    let forest = opt_pc_nwsf(&red.graph, &red.pairs, &caps)
        .unwrap()
        .opt_value;
    assert_eq!(sc, 3.0);
    assert_eq!(forest, sc);
}

#[test]
fn counterexample_optimum_matches_oracle() {
    let caps = OracleCaps::default();
    for k in 2..=8 {
        let inst = gen_counterexample(k).unwrap();
        let exact = opt_pc_nwsf(&inst.graph, &inst.pairs, &caps)
            .unwrap()
            .opt_value;
        let analytic = counterexample_opt(k).unwrap();
        assert!(
            (exact - analytic).abs() < 1e-6,
            "k={k}: {exact} vs {analytic}"
        );
    }
}

#[test]
fn shared_graph_runs_are_independent() {
    let inst = gen_random_forest(5, 12, 4, PenaltyMode::Mixed).unwrap();
    let g = Arc::new(inst.graph.clone());
    let mk = || {
        let mut f = pcnwsf::steiner::OnlineForest::new(
            g.clone(),
            ForestConfig {
                k: Some(4),
                nmfl: nmfl_config(9),
                ..Default::default()
            },
        )
        .unwrap();
        for ev in &inst.pairs {
            f.arrive(*ev).unwrap();
        }
        f.driver().totals().total()
    };
    assert_eq!(mk(), mk());
}
