//! Generators, adversaries, trace checks and the experiment runner.

pub mod adversary;
pub mod checks;
pub mod experiment;
pub mod generators;

pub use adversary::{InflationScript, SemiAdaptiveAdversary, Strategy};
pub use experiment::{
    generate, run_experiment, run_trial, Algorithm, ExperimentConfig, ExperimentRecord,
    ExperimentSummary, GeneratorSpec, InstanceFile,
};
pub use generators::{
    gen_counterexample, gen_random_forest, gen_random_nmfl, gen_random_sc, gen_sc_reduction,
    ForestInstance, PenaltyMode,
};
