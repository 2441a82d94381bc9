use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pcnwsf::covering::{FacilityLocationInstance, SetCoverInstance};
use pcnwsf::harness::experiment::counterexample_report;
use pcnwsf::harness::generators::ForestInstance;
use pcnwsf::harness::{
    generate, run_experiment, Algorithm, ExperimentConfig, GeneratorSpec, InstanceFile, PenaltyMode,
};
use pcnwsf::oracles::{opt_nmfl, opt_pc_nwsf, opt_set_cover, OracleCaps};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "pcnwsf",
    version,
    about = "Online prize-collecting node-weighted Steiner forest toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials; overrides the config.
    #[arg(long)]
    trials: Option<usize>,
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the instances of an experiment config as JSON.
    Generate(Common),
    /// Run an experiment config; CSV to --out, summary to stdout.
    Run(Common),
    /// Exact optimum of the instances in --config (a file written by generate).
    Oracle(Common),
    /// Single-threshold counterexample at k = 256 and 512.
    ReproduceAppendixB(Common),
    /// Short runs of every algorithm with all checks enabled.
    Selftest(Common),
}

fn experiment_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &c.config {
        Some(p) => {
            serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    Ok(cfg)
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn emit(out: &Option<PathBuf>, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(c: &Common) -> Result<ExitCode> {
    let cfg = experiment_config(c)?;
    let files = (0..cfg.trials)
        .map(|i| generate(&cfg.generator, cfg.seed, i))
        .collect::<pcnwsf::Result<Vec<_>>>()?;
    emit(&c.out, &serde_json::to_value(files)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(c: &Common) -> Result<ExitCode> {
    let cfg = experiment_config(c)?;
    let (_, summary) = run_experiment(&cfg)?;
    println!("{}", summary.line());
    Ok(if summary.violations > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn solve(file: &InstanceFile, caps: &OracleCaps) -> Result<Value> {
    Ok(match file {
        InstanceFile::Forest(spec) => {
            let inst = ForestInstance::from_spec(spec)?;
            let r = opt_pc_nwsf(&inst.graph, &inst.pairs, caps)?;
            json!({"opt": r.opt_value, "witness": r.witness, "nodes": r.nodes_explored})
        }
        InstanceFile::SetCover(spec) => {
            let inst = SetCoverInstance::from_spec(spec)?;
            let r = opt_set_cover(&inst, &inst.elements(), caps)?;
            json!({"opt": r.opt_value, "witness": r.witness, "nodes": r.nodes_explored})
        }
        InstanceFile::FacilityLocation(spec) => {
            let inst = FacilityLocationInstance::from_spec(spec)?;
            let r = opt_nmfl(&inst, &inst.clients(), caps)?;
            json!({"opt": r.opt_value, "witness": r.witness, "nodes": r.nodes_explored})
        }
    })
}

fn cmd_oracle(c: &Common) -> Result<ExitCode> {
    let Some(path) = &c.config else {
        bail!("oracle needs --config <instances.json>");
    };
    let text = read(path)?;
    let files: Vec<InstanceFile> =
        match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(_) => vec![serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?],
        };
    let caps = OracleCaps::default();
    let results = files
        .iter()
        .map(|f| solve(f, &caps))
        .collect::<Result<Vec<_>>>()?;
    emit(&c.out, &Value::Array(results))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_counterexample(c: &Common) -> Result<ExitCode> {
    let trials = c.trials.unwrap_or(10_000);
    let seed = c.seed.unwrap_or(0);
    let mut reports = Vec::new();
    let mut ok = true;
    for k in [256usize, 512] {
        let r = counterexample_report(k, trials, seed)?;
        println!(
            "k={k} opt={:.6} baseline_mean={:.3} floor={:.3} threshold_mean={:.3} threshold_ratio={:.2} 3*log2k*log2n={:.1}",
            r.opt, r.baseline_mean, r.baseline_floor, r.threshold_mean, r.threshold_ratio, 3.0 * r.log_product
        );
        ok &= r.baseline_mean >= r.baseline_floor && r.threshold_ratio <= 3.0 * r.log_product;
        reports.push(r);
    }
    println!(
        "baseline growth 512/256 = {:.3}",
        reports[1].baseline_mean / reports[0].baseline_mean
    );
    if c.out.is_some() {
        emit(&c.out, &serde_json::to_value(&reports)?)?;
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_selftest(c: &Common) -> Result<ExitCode> {
    let seed = c.seed.unwrap_or(0);
    let trials = c.trials.unwrap_or(20);
    let forest = GeneratorSpec::RandomForest {
        n: 12,
        k: 4,
        penalties: PenaltyMode::Mixed,
    };
    let sc = GeneratorSpec::RandomSc {
        n_elems: 8,
        n_sets: 10,
        cost_lo: 1.0,
        cost_hi: 4.0,
    };
    let cases = [
        (Algorithm::Nwsf, forest.clone(), false, false),
        (Algorithm::PcNwsf, forest.clone(), false, false),
        (Algorithm::PcNwsf, forest.clone(), true, true),
        (
            Algorithm::PcNwsf,
            GeneratorSpec::ScReduction {
                n_elems: 4,
                n_sets: 6,
                cost_lo: 1.0,
                cost_hi: 4.0,
            },
            false,
            false,
        ),
        (
            Algorithm::Nmfl,
            GeneratorSpec::RandomNmfl {
                n_facilities: 6,
                n_clients: 8,
            },
            false,
            false,
        ),
        (Algorithm::ScRound, sc.clone(), false, false),
        (Algorithm::ScBaselineSingleThreshold, sc, false, false),
    ];
    let mut failed = 0;
    for (algorithm, generator, scale_guess, k_doubling) in cases {
        let cfg = ExperimentConfig {
            algorithm,
            generator,
            trials,
            seed,
            scale_guess,
            k_doubling,
            ..Default::default()
        };
        let (_, s) = run_experiment(&cfg)?;
        let verdict = if s.violations == 0 { "ok" } else { "FAIL" };
        if s.violations > 0 {
            failed += 1;
        }
        println!(
            "{verdict} {} scale_guess={scale_guess} k_doubling={k_doubling}: {}",
            algorithm.name(),
            s.line()
        );
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Generate(c) => cmd_generate(c),
        Command::Run(c) => cmd_run(c),
        Command::Oracle(c) => cmd_oracle(c),
        Command::ReproduceAppendixB(c) => cmd_counterexample(c),
        Command::Selftest(c) => cmd_selftest(c),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
