//! Experiment orchestration: baselines, Monte-Carlo evaluation, Pareto
//! sweeps and the config-driven `run` entry point.

pub mod baselines;
pub mod evaluate;
pub mod pareto;
pub mod run;

pub use baselines::{mdqn_backup, mdqn_train, utilitarian_train, BaselineOutput, VectorQTable};
pub use evaluate::{evaluate_policy, EvaluationReport};
pub use pareto::{default_scalings, dominates, pareto_sweep, ParetoPoint};
pub use run::{
    run, Algorithm, ArmResult, Artifact, EnvSpec, ExactSummary, ExperimentKind, PolicySource, RunConfig, RunOutcome, RunResult,
    SeedSummary, SCHEMA_VERSION,
};
